/*
 * Copyright 2026 The survfuse Authors
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */
// Command-line front end. Talks to the library only through survfuse.h.
//
// Exit codes: 0 success; 2 bad arguments, invalid data or a target that is
// not identified; 3 numerical or fitting failure; 4 simulation report invalid
// (failure cap exceeded). Data goes to stdout or --output, diagnostics to stderr.

#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "survfuse/survfuse.h"

namespace {

bool g_quiet = false;

void log(const std::string& msg) {
  if (!g_quiet) std::cerr << "survfuse: " << msg << '\n';
}

int exit_code(sf_status s) {
  switch (s) {
    case SF_OK: return 0;
    case SF_E_ARGUMENT:
    case SF_E_VALIDATION:
    case SF_E_NOT_IDENTIFIED:
    case SF_E_EMPTY_SOURCE:
    case SF_E_INSUFFICIENT_DATA:
    case SF_E_RANGE:
    case SF_E_IO: return 2;
    case SF_E_REPORT_INVALID: return 4;
    default: return 3;
  }
}

int report_failure(sf_status s) {
  std::cerr << "survfuse: error: " << sf_last_error() << '\n';
  return exit_code(s);
}

bool write_out(const std::string& path, const std::string& data) {
  if (path.empty() || path == "-") {
    std::cout << data;
    std::cout.flush();
    return true;
  }
  std::ofstream f(path, std::ios::binary);
  f << data;
  if (!f) {
    std::cerr << "survfuse: error [io] cannot write " << path << '\n';
    return false;
  }
  return true;
}

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& seed) {
  if (seed) return *seed;
  std::random_device rd;
  const std::uint64_t s = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
  log("no --seed given; using seed " + std::to_string(s));
  return s;
}

class Timer {
 public:
  explicit Timer(std::string what) : what_(std::move(what)), t0_(std::chrono::steady_clock::now()) {}
  ~Timer() {
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
    std::ostringstream os;
    os.precision(3);
    os << std::fixed << what_ << " took " << s << " s";
    log(os.str());
  }

 private:
  std::string what_;
  std::chrono::steady_clock::time_point t0_;
};

struct EstimateArgs {
  std::string input;
  std::string output;
  std::vector<double> t_star;
  std::vector<std::string> estimators{"all"};
  std::string nuisance = "fit";
  double alpha = 0.05;
  std::optional<std::uint64_t> seed;
  unsigned threads = 0;
  std::optional<double> pi;
  double trim = 0.0;
  std::size_t grid_points = 2000;
  std::size_t subsamples = 200;
  std::string event_family = "linear";
  std::string censoring_family = "linear";
};

int cmd_estimate(const EstimateArgs& a) {
  Timer timer("estimate");
  sf_sample* sample = nullptr;
  sf_status s = sf_sample_read_csv(a.input.c_str(), a.pi.value_or(std::numeric_limits<double>::quiet_NaN()), &sample);
  if (s != SF_OK) return report_failure(s);
  nlohmann::ordered_json opts;
  opts["t_star"] = a.t_star;
  opts["estimators"] = a.estimators;
  opts["nuisance"] = a.nuisance;
  opts["alpha"] = a.alpha;
  opts["seed"] = resolve_seed(a.seed);
  opts["threads"] = a.threads;
  if (a.pi) opts["pi"] = *a.pi;
  opts["trim"] = a.trim;
  opts["grid_points"] = a.grid_points;
  opts["subsamples"] = a.subsamples;
  opts["event_family"] = a.event_family;
  opts["censoring_family"] = a.censoring_family;
  log("read " + std::to_string(sf_sample_size(sample)) + " rows (" + std::to_string(sf_sample_n1(sample)) +
      " right-censored)");
  sf_report* report = nullptr;
  s = sf_estimate(sample, opts.dump().c_str(), &report);
  sf_sample_free(sample);
  if (s != SF_OK) return report_failure(s);
  const bool ok = write_out(a.output, sf_report_json(report));
  sf_report_free(report);
  return ok ? 0 : 2;
}

struct SimArgs {
  std::string config;
  std::string output;       // CSV
  std::string json_output;  // optional JSON report
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::optional<std::size_t> replications;
};

nlohmann::json load_config(const SimArgs& a, bool rates) {
  nlohmann::json cfg = nlohmann::json::object();
  if (!a.config.empty()) {
    std::ifstream f(a.config);
    if (!f) throw std::runtime_error("cannot read config " + a.config);
    std::stringstream ss;
    ss << f.rdbuf();
    cfg = nlohmann::json::parse(ss.str());
    if (!cfg.is_object()) throw std::runtime_error("config must be a JSON object");
  } else if (rates) {
    cfg["n_total"] = {300, 600, 1500};
    cfg["t_star"] = {0.7};
    cfg["replications"] = 200;
    cfg["estimators"] = {"cs", "rc", "dr"};
  }
  if (a.seed) cfg["seed"] = *a.seed;
  else if (!cfg.contains("seed")) cfg["seed"] = resolve_seed(std::nullopt);
  if (a.threads) cfg["threads"] = *a.threads;
  if (a.replications) cfg["replications"] = *a.replications;
  return cfg;
}

int cmd_simulate(const SimArgs& a, bool rates) {
  Timer timer(rates ? "rates" : "simulate");
  nlohmann::json cfg;
  try {
    cfg = load_config(a, rates);
  } catch (const std::exception& e) {
    std::cerr << "survfuse: error [argument] " << e.what() << '\n';
    return 2;
  }
  sf_report* report = nullptr;
  const std::string text = cfg.dump();
  const sf_status s = rates ? sf_rates(text.c_str(), &report) : sf_simulate(text.c_str(), &report);
  if (s != SF_OK) return report_failure(s);
  bool ok = write_out(a.output, sf_report_csv(report));
  if (!a.json_output.empty()) ok = write_out(a.json_output, sf_report_json(report)) && ok;
  const bool valid = sf_report_valid(report) != 0;
  if (!valid) {
    const auto j = nlohmann::json::parse(sf_report_json(report));
    for (const auto& n : j["notes"]) log(n.get<std::string>());
    std::cerr << "survfuse: error [report-invalid] failure cap exceeded in at least one cell\n";
  }
  sf_report_free(report);
  if (!ok) return 2;
  return valid ? 0 : 4;
}

struct SolveArgs {
  std::string dgp = "paper";
  std::vector<double> w;
  double pi = 1.0 / 3.0;
  double t_star = 0.7;
  std::size_t grid_points = 2000;
  std::string output;
};

int cmd_solve(const SolveArgs& a) {
  char* csv = nullptr;
  const sf_status s = sf_solve_table(a.dgp.c_str(), a.w.data(), a.w.size(), a.pi, a.t_star, a.grid_points, &csv);
  if (s != SF_OK) return report_failure(s);
  const bool ok = write_out(a.output, csv);
  sf_string_free(csv);
  return ok ? 0 : 2;
}

struct GenerateArgs {
  std::string dgp = "paper";
  std::size_t n = 600;
  std::optional<std::uint64_t> seed;
  std::string output;
};

int cmd_generate(const GenerateArgs& a) {
  sf_sample* sample = nullptr;
  sf_status s = sf_sample_generate(a.dgp.c_str(), a.n, resolve_seed(a.seed), &sample);
  if (s != SF_OK) return report_failure(s);
  const std::string out = a.output.empty() ? "/dev/stdout" : a.output;
  s = sf_sample_write_csv(sample, out.c_str());
  sf_sample_free(sample);
  return s == SF_OK ? 0 : report_failure(s);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"survfuse: survival at a landmark time from fused right-censored and current-status data"};
  app.require_subcommand(1);
  app.add_flag("-q,--quiet", g_quiet, "suppress diagnostic lines on stderr");
  app.set_version_flag("--version", std::string(sf_version()));

  EstimateArgs ea;
  auto* est = app.add_subcommand("estimate", "estimate S(t*) from a fused CSV sample; JSON report");
  est->add_option("--input", ea.input, "CSV with columns source,w1..wd,y,delta_r,c,delta_c")->required();
  est->add_option("--t-star", ea.t_star, "landmark time (repeatable)")->required()->take_all();
  est->add_option("--estimator", ea.estimators, "cs|rc|dr|eff|shift0|shift1|ivw|all (repeatable)")
      ->check(CLI::IsMember({"cs", "rc", "dr", "eff", "shift0", "shift1", "ivw", "all"}));
  est->add_option("--nuisance", ea.nuisance, "fit | oracle:<dgp> | misspec-event:<dgp> | misspec-gR:<dgp>");
  est->add_option("--alpha", ea.alpha, "1 - confidence level")->check(CLI::Range(1e-6, 0.5));
  est->add_option("--seed", ea.seed, "seed for every stochastic step (default: random, logged)");
  est->add_option("--threads", ea.threads, "worker threads (0: available parallelism)");
  est->add_option("--pi", ea.pi, "design fraction of right-censored rows")->check(CLI::Range(0.0, 1.0));
  est->add_option("--trim", ea.trim, "drop current-status rows outside the [q, 1-q] inspection-time quantiles");
  est->add_option("--grid-points", ea.grid_points, "uniform time-grid points")->check(CLI::Range(10, 1000000));
  est->add_option("--subsamples", ea.subsamples, "subsamples for the current-status-only interval");
  est->add_option("--event-family", ea.event_family, "linear | loglinear | weibull");
  est->add_option("--censoring-family", ea.censoring_family, "linear | loglinear | weibull");
  est->add_option("-o,--output", ea.output, "output file (default stdout)");

  SimArgs sa;
  auto add_sim = [&](CLI::App* sub) {
    sub->add_option("--config", sa.config, "JSON simulation config (unknown keys rejected)");
    sub->add_option("-o,--output", sa.output, "CSV output (default stdout)");
    sub->add_option("--json", sa.json_output, "also write the JSON report here");
    sub->add_option("--seed", sa.seed, "overrides the config seed");
    sub->add_option("--threads", sa.threads, "overrides the config thread count");
    sub->add_option("--replications", sa.replications, "overrides the config replication count");
  };
  auto* sim = app.add_subcommand("simulate", "Monte Carlo study; one CSV row per (estimator, n, t*)");
  add_sim(sim);
  auto* rates = app.add_subcommand("rates", "log-MSE vs log-n slopes per estimator");
  add_sim(rates);

  SolveArgs so;
  auto* solve = app.add_subcommand("solve", "h*/eta* table with residuals for one covariate value");
  solve->add_option("--dgp", so.dgp, "DGP id for the oracle nuisances");
  solve->add_option("--w", so.w, "covariate value, comma separated")->required()->delimiter(',');
  solve->add_option("--pi", so.pi, "fraction of right-censored rows")->check(CLI::Range(0.0, 1.0));
  solve->add_option("--t-star", so.t_star, "landmark time");
  solve->add_option("--grid-points", so.grid_points, "uniform time-grid points")->check(CLI::Range(10, 1000000));
  solve->add_option("-o,--output", so.output, "CSV output (default stdout)");

  GenerateArgs ga;
  auto* gen = app.add_subcommand("generate", "draw a fused sample from a simulation design");
  gen->add_option("--dgp", ga.dgp, "paper | paper-shift");
  gen->add_option("--n", ga.n, "total rows")->check(CLI::Range(2, 100000000));
  gen->add_option("--seed", ga.seed, "random seed (default: random, logged)");
  gen->add_option("-o,--output", ga.output, "CSV output (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (*est) return cmd_estimate(ea);
  if (*sim) return cmd_simulate(sa, false);
  if (*rates) return cmd_simulate(sa, true);
  if (*solve) return cmd_solve(so);
  if (*gen) return cmd_generate(ga);
  return 2;
}

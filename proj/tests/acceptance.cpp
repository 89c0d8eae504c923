/*
 * Copyright 2026 The survfuse Authors
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */
// Acceptance runs. One PASS/FAIL line per selected criterion; details are
// indented below it. Exit status is 1 if any selected criterion fails.
//
//   survfuse_acceptance [criterion ...] [--cli PATH] [--threads N]
#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "survfuse/dgp.hpp"
#include "survfuse/error.hpp"
#include "survfuse/estimators.hpp"
#include "survfuse/fredholm.hpp"
#include "survfuse/simulation.hpp"

using namespace survfuse;

namespace {

// ---- tolerances
constexpr double kResidualTol = 1e-8;
constexpr double kMeanZeroTol = 1e-6;
constexpr double kTailTol = 1e-8;
constexpr double kLemmaTol = 1e-6;
constexpr double kLemmaMinSurv = 0.01;
constexpr double kBasisTol = 2e-3;
constexpr double kGradientSes = 3.0;
constexpr double kVarianceSlack = 1.05;
constexpr double kBiasTol = 0.02;
constexpr double kCoverageLo = 0.90, kCoverageHi = 0.98;
constexpr double kCiRatioInWindow = 0.85;
constexpr double kCiRatioOutOfWindow = 0.95;
constexpr double kDoubleRobustBias = 0.015;
constexpr double kRootNSlopeLo = -1.25, kRootNSlopeHi = -0.85;
constexpr double kCubeRootSlopeLo = -0.90, kCubeRootSlopeHi = -0.45;

// ---- fixed run parameters
constexpr std::uint64_t kSeed = 20260101;
constexpr std::size_t kReplications = 200;

struct Outcome {
  bool pass = true;
  std::vector<std::string> lines;

  void check(bool ok, const std::string& what) {
    pass = pass && ok;
    lines.push_back(std::string(ok ? "ok    " : "FAIL  ") + what);
  }
  void note(const std::string& what) { lines.push_back("      " + what); }
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

struct Env {
  std::string cli;
  unsigned threads = 0;
};

// 1 -------------------------------------------------------------------------
Outcome fredholm_certification(const Env&) {
  Outcome out;
  const auto dgp = DgpSpec::paper();
  const auto nb = oracle_bundle(dgp);
  auto nb_nc = nb;
  nb_nc.censoring = std::make_shared<NullHazard>();
  const InspectionWindow win{dgp.c_lower, dgp.c_upper};
  const double pi = 1.0 / 3.0, t_star = 0.7;
  const TimeGrid grid = problem_grid(3.0, 2000, t_star, win);
  const double edge = std::max(win.c_upper, t_star);

  RngStream rng(kSeed, 1);
  double res_h = 0, res_eta = 0, mean_zero = 0, tail_quoted = 0, tail_closed = 0, tail_eta = 0, lemma = 0, basis = 0;
  for (int k = 0; k < 20; ++k) {
    const std::vector<double> w{rng.uniform(), rng.uniform() < 0.5 ? 0.0 : 1.0};
    FredholmProblem prob;
    prob.pi = pi;
    prob.t_star = t_star;
    prob.window = win;
    prob.nuisances = &nb;
    prob.w = w;
    prob.grid = grid;
    prob.condition_estimate = false;
    const CovariateProfile prof = make_profile(prob);
    const auto h = solve_h_grid(prob, prof);
    const auto eta = solve_eta_grid(prob, prof);
    res_h = std::max(res_h, h.residual_sup);
    res_eta = std::max(res_eta, eta.residual_sup);
    double mz = 0;
    for (std::size_t j = 0; j < grid.size(); ++j) mz += h.values.values[j] * prof.p[j];
    mean_zero = std::max(mean_zero, std::abs(mz));
    for (std::size_t j = 0; j < grid.size(); ++j) {
      if (!(grid[j] > edge)) continue;
      tail_quoted = std::max(tail_quoted, std::abs(h.values.values[j] - (1.0 - prof.mu) / pi));
      tail_closed = std::max(tail_closed, std::abs(h.values.values[j] - (1.0 - prof.mu + h.gamma_w) / pi));
      tail_eta = std::max(tail_eta, std::abs(eta.values.values[j]));
    }

    FredholmProblem nc = prob;
    nc.nuisances = &nb_nc;
    const CovariateProfile pn = make_profile(nc);
    const auto hn = solve_h_grid(nc, pn);
    const auto en = solve_eta_grid(nc, pn);
    for (std::size_t j = 0; j < grid.size(); ++j)
      if (pn.surv[j] >= kLemmaMinSurv)
        lemma = std::max(lemma, std::abs(en.values.values[j] - hn.values.values[j] - hn.derived[j] / pn.sigma[j]));

    const auto b = solve_h_basis(prob);
    for (std::size_t j = 0; j < grid.size(); ++j)
      basis = std::max(basis, std::abs(evaluate_solution(b, grid[j]) - h.values.values[j]));
  }
  out.check(res_h <= kResidualTol && res_eta <= kResidualTol,
            fmt("(a) residual sup: h* %.2e, eta* %.2e (<= %.0e)", res_h, res_eta, kResidualTol));
  out.check(mean_zero <= kMeanZeroTol, fmt("(b) |sum h* dF| max %.2e (<= %.0e)", mean_zero, kMeanZeroTol));
  out.check(tail_quoted <= kTailTol,
            fmt("(c) tail h* = (1 - mu)/pi: max deviation %.3e (<= %.0e)", tail_quoted, kTailTol));
  out.note(fmt("    h* = (1 - mu + gamma(w))/pi, the tail of the bordered system: max deviation %.2e", tail_closed));
  out.check(tail_eta <= kTailTol, fmt("(c) tail eta* = 0: max |eta*| %.2e (<= %.0e)", tail_eta, kTailTol));
  out.check(lemma <= kLemmaTol,
            fmt("(d) Gamma = 1: eta* - h* - H*/S max %.2e where S >= %.2f (<= %.0e)", lemma, kLemmaMinSurv, kLemmaTol));
  out.check(basis <= kBasisTol, fmt("(e) basis vs grid at grid points: sup %.2e (<= %.0e)", basis, kBasisTol));
  return out;
}

// 2 -------------------------------------------------------------------------
Outcome gradient_checks(const Env& env) {
  Outcome out;
  const auto dgp = DgpSpec::paper();
  RngStream rng(kSeed, 2);
  const auto sample = generate_dataset(dgp, 4000, rng);
  const auto nb = oracle_bundle(dgp);
  EstimationOptions opts;
  opts.threads = env.threads;
  const EstimatorKind kinds[] = {EstimatorKind::kRcOnly, EstimatorKind::kFusionDr, EstimatorKind::kFusionEff};
  const auto res = estimate_one_step(sample, nb, 0.7, kinds, opts);
  const double truth = true_phi(dgp, 0.7);
  const double n = static_cast<double>(sample.size());
  std::vector<double> var;
  for (const auto& r : res) {
    // mean of the gradient evaluated at the true value is point - truth
    const double m = r.point - truth;
    out.check(std::abs(m) <= kGradientSes * r.se,
              fmt("%-3s mean gradient at the truth %+.5f, SE %.5f (|mean| <= %.0f SE)", to_string(r.kind).c_str(), m,
                  r.se, kGradientSes));
    var.push_back(r.se * r.se * n);
  }
  out.note(fmt("variances: rc %.4f, dr %.4f, eff %.4f", var[0], var[1], var[2]));
  out.check(var[2] <= kVarianceSlack * var[1], fmt("var(eff) <= %.2f var(dr)", kVarianceSlack));
  out.check(var[2] <= kVarianceSlack * var[0], fmt("var(eff) <= %.2f var(rc)", kVarianceSlack));
  return out;
}

SimConfig base_config(const Env& env) {
  SimConfig c;
  c.seed = kSeed;
  c.replications = kReplications;
  c.threads = env.threads;
  return c;
}

void describe(Outcome& out, const SimReport& r) {
  for (const auto& c : r.cells)
    out.note(fmt("%-4s n=%-5zu t*=%.2f reps=%zu fail=%zu mean=%.4f bias=%+.4f ci=%.4f cov=%.3f", to_string(c.estimator).c_str(),
                 c.n, c.t_star, c.replications, c.failures, c.mean_point, c.bias, c.mean_ci_length, c.coverage));
  for (const auto& s : r.notes) out.note(s);
}

// 3 -------------------------------------------------------------------------
Outcome table_reduced(const Env& env) {
  Outcome out;
  auto cfg = base_config(env);
  cfg.n_total = {600};
  cfg.t_star = {0.7};
  cfg.estimators = {EstimatorKind::kRcOnly, EstimatorKind::kFusionDr, EstimatorKind::kFusionEff};
  cfg.nuisance = NuisanceMode::kFitted;
  const auto r = run_replications(cfg);
  describe(out, r);
  out.check(r.valid, "report valid (failures within the cap)");
  const auto& rc = r.cell(EstimatorKind::kRcOnly, 600, 0.7);
  for (auto k : {EstimatorKind::kFusionDr, EstimatorKind::kFusionEff}) {
    const auto& c = r.cell(k, 600, 0.7);
    const auto name = to_string(k);
    out.check(std::abs(c.bias) <= kBiasTol, fmt("(a) %s |bias| %.4f <= %.2f", name.c_str(), std::abs(c.bias), kBiasTol));
    out.check(c.coverage >= kCoverageLo && c.coverage <= kCoverageHi,
              fmt("(b) %s coverage %.3f in [%.2f, %.2f]", name.c_str(), c.coverage, kCoverageLo, kCoverageHi));
    out.check(c.mean_ci_length <= kCiRatioInWindow * rc.mean_ci_length,
              fmt("(c) %s CI %.4f <= %.2f x rc CI %.4f (ratio %.3f)", name.c_str(), c.mean_ci_length, kCiRatioInWindow,
                  rc.mean_ci_length, c.mean_ci_length / rc.mean_ci_length));
  }
  return out;
}

// 4 -------------------------------------------------------------------------
Outcome out_of_window(const Env& env) {
  Outcome out;
  auto cfg = base_config(env);
  cfg.n_total = {600};
  cfg.t_star = {0.2};
  cfg.estimators = {EstimatorKind::kCsOnly, EstimatorKind::kRcOnly, EstimatorKind::kFusionDr, EstimatorKind::kFusionEff};
  cfg.nuisance = NuisanceMode::kFitted;
  const auto r = run_replications(cfg);
  describe(out, r);
  out.check(r.valid, "report valid (failures within the cap)");
  const auto& cs = r.cell(EstimatorKind::kCsOnly, 600, 0.2);
  out.check(cs.not_identified == cfg.replications && cs.replications == 0,
            fmt("cs not identified in %zu of %zu replications", cs.not_identified, cfg.replications));
  const auto& rc = r.cell(EstimatorKind::kRcOnly, 600, 0.2);
  for (auto k : {EstimatorKind::kFusionDr, EstimatorKind::kFusionEff}) {
    const auto& c = r.cell(k, 600, 0.2);
    out.check(c.mean_ci_length <= kCiRatioOutOfWindow * rc.mean_ci_length,
              fmt("%s CI %.4f <= %.2f x rc CI %.4f (ratio %.3f)", to_string(k).c_str(), c.mean_ci_length,
                  kCiRatioOutOfWindow, rc.mean_ci_length, c.mean_ci_length / rc.mean_ci_length));
  }
  return out;
}

// 5 -------------------------------------------------------------------------
Outcome double_robustness(const Env& env) {
  Outcome out;
  for (auto mode : {NuisanceMode::kMisspecEvent, NuisanceMode::kMisspecGR}) {
    auto cfg = base_config(env);
    cfg.n_total = {2000};
    cfg.t_star = {0.7};
    cfg.estimators = {EstimatorKind::kFusionDr};
    cfg.nuisance = mode;
    const auto r = run_replications(cfg);
    describe(out, r);
    const auto& c = r.cell(EstimatorKind::kFusionDr, 2000, 0.7);
    out.check(r.valid, to_string(mode) + ": report valid");
    out.check(std::abs(c.bias) <= kDoubleRobustBias,
              fmt("%s: dr |bias| %.4f <= %.3f", to_string(mode).c_str(), std::abs(c.bias), kDoubleRobustBias));
  }
  return out;
}

// 6 -------------------------------------------------------------------------
Outcome rates(const Env& env) {
  Outcome out;
  auto cfg = base_config(env);
  cfg.n_total = {300, 600, 1500};
  cfg.t_star = {0.7};
  cfg.estimators = {EstimatorKind::kCsOnly, EstimatorKind::kRcOnly, EstimatorKind::kFusionDr};
  cfg.nuisance = NuisanceMode::kFitted;
  const auto rep = run_replications(cfg);
  describe(out, rep);
  const auto rs = rate_study(rep);
  out.check(rs.valid, "rate study valid");
  const auto& dr = rs.fit(EstimatorKind::kFusionDr);
  const auto& cs = rs.fit(EstimatorKind::kCsOnly);
  const auto& rc = rs.fit(EstimatorKind::kRcOnly);
  out.check(dr.slope >= kRootNSlopeLo && dr.slope <= kRootNSlopeHi,
            fmt("dr slope %.3f in [%.2f, %.2f]", dr.slope, kRootNSlopeLo, kRootNSlopeHi));
  out.check(cs.slope >= kCubeRootSlopeLo && cs.slope <= kCubeRootSlopeHi,
            fmt("cs slope %.3f in [%.2f, %.2f]", cs.slope, kCubeRootSlopeLo, kCubeRootSlopeHi));
  out.check(rc.slope >= kRootNSlopeLo && rc.slope <= kRootNSlopeHi,
            fmt("rc slope %.3f in [%.2f, %.2f]", rc.slope, kRootNSlopeLo, kRootNSlopeHi));
  out.check(rc.intercept > dr.intercept, fmt("rc intercept %.3f above dr intercept %.3f", rc.intercept, dr.intercept));
  return out;
}

// 7 -------------------------------------------------------------------------
Outcome naive_benchmark(const Env& env) {
  Outcome out;
  auto cfg = base_config(env);
  cfg.n_total = {1500};
  cfg.t_star = {0.9};
  cfg.estimators = {EstimatorKind::kFusionEff, EstimatorKind::kNaiveIvw};
  cfg.nuisance = NuisanceMode::kOracle;
  const auto r = run_replications(cfg);
  describe(out, r);
  out.check(r.valid, "report valid (failures within the cap)");
  const auto& ivw = r.cell(EstimatorKind::kNaiveIvw, 1500, 0.9);
  const auto& eff = r.cell(EstimatorKind::kFusionEff, 1500, 0.9);
  out.check(ivw.replications > 0, fmt("ivw computed in %zu replications", ivw.replications));
  out.check(ivw.mean_ci_length > eff.mean_ci_length,
            fmt("ivw CI %.4f > eff CI %.4f", ivw.mean_ci_length, eff.mean_ci_length));
  return out;
}

// 8 -------------------------------------------------------------------------
std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

Outcome determinism(const Env& env) {
  Outcome out;
  if (env.cli.empty()) {
    out.check(false, "no CLI given (--cli PATH)");
    return out;
  }
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / fmt("survfuse_acceptance_%d", static_cast<int>(::getpid()));
  fs::create_directories(dir);
  const std::string bin = "\"" + env.cli + "\" -q ";
  const std::string d = "\"" + dir.string() + "/";
  {
    std::ofstream(dir / "sim.json") << R"({"n_total":[300,600],"t_star":[0.7,0.9],"replications":3,)"
                                    << R"("estimators":["cs","rc","dr","eff","ivw"],"nuisance":"fitted"})";
  }
  struct Run {
    std::string name, args;
    std::vector<std::string> files;
  };
  const std::vector<Run> runs{
      {"generate", "generate --dgp paper --n 900 --seed 5 -o " + d + "gen@.csv\"", {"gen@.csv"}},
      {"estimate all", "estimate --input " + d + "gen1.csv\" --t-star 0.7 --t-star 0.9 --estimator all --seed 5 -o " +
                           d + "est@.json\"",
       {"est@.json"}},
      {"estimate eff", "estimate --input " + d + "gen1.csv\" --t-star 0.7 --estimator eff --seed 1 -o " + d +
                           "eff@.json\"",
       {"eff@.json"}},
      {"simulate", "simulate --config " + d + "sim.json\" --seed 5 -o " + d + "sim@.csv\" --json " + d + "sim@.json\"",
       {"sim@.csv", "sim@.json"}},
      {"rates", "rates --seed 5 --replications 3 -o " + d + "rates@.csv\"", {"rates@.csv"}},
      {"solve", "solve --dgp paper --w 0.5,1 --pi 0.3333 --t-star 0.7 -o " + d + "solve@.csv\"", {"solve@.csv"}},
  };
  auto subst = [](std::string s, char c) {
    for (auto& ch : s)
      if (ch == '@') ch = c;
    return s;
  };
  for (const auto& r : runs) {
    bool ok = true;
    for (char c : {'1', '2'}) {
      const int code = std::system((bin + subst(r.args, c) + " 2>/dev/null").c_str());
      ok = ok && code == 0;
    }
    std::size_t bytes = 0;
    for (const auto& f : r.files) {
      const std::string a = slurp(dir / subst(f, '1')), b = slurp(dir / subst(f, '2'));
      ok = ok && !a.empty() && a == b;
      bytes += a.size();
    }
    out.check(ok, fmt("%-13s repeated with the same seed: byte-identical (%zu bytes)", r.name.c_str(), bytes));
  }
  fs::remove_all(dir);
  return out;
}

struct Criterion {
  int id;
  const char* title;
  std::function<Outcome(const Env&)> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::vector<int> selected;
  Env env;
  app.add_option("criteria", selected, "criteria to run (default: all)")->check(CLI::Range(1, 8));
  app.add_option("--cli", env.cli, "survfuse executable, for the determinism criterion");
  app.add_option("--threads", env.threads, "worker threads (0: available parallelism)");
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> all{
      {1, "Fredholm certification", fredholm_certification},
      {2, "gradient mean zero and variance ordering", gradient_checks},
      {3, "reduced simulation cell (N=600, t*=0.7, fitted)", table_reduced},
      {4, "out-of-window gain (N=600, t*=0.2, fitted)", out_of_window},
      {5, "double robustness (N=2000, t*=0.7)", double_robustness},
      {6, "rate study (t*=0.7)", rates},
      {7, "naive IVW benchmark (N=1500, t*=0.9, oracle)", naive_benchmark},
      {8, "CLI determinism", determinism},
  };
  if (selected.empty())
    for (const auto& c : all) selected.push_back(c.id);

  bool pass = true;
  for (int id : selected) {
    const auto& c = all[static_cast<std::size_t>(id - 1)];
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run(env);
    } catch (const std::exception& e) {
      out.check(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s criterion %d: %s (%.1f s)\n", out.pass ? "PASS" : "FAIL", c.id, c.title, secs);
    for (const auto& l : out.lines) std::printf("    %s\n", l.c_str());
    std::fflush(stdout);
    pass = pass && out.pass;
  }
  return pass ? 0 : 1;
}

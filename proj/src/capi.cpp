/*
 * Copyright 2026 The survfuse Authors
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */
#include "survfuse/survfuse.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <iomanip>
#include <json.hpp>
#include <limits>
#include <map>
#include <memory>
#include <new>
#include <sstream>
#include <string>
#include <vector>

#include "survfuse/data.hpp"
#include "survfuse/dgp.hpp"
#include "survfuse/error.hpp"
#include "survfuse/estimators.hpp"
#include "survfuse/fredholm.hpp"
#include "survfuse/nuisance.hpp"
#include "survfuse/simulation.hpp"

using survfuse::Error;
using survfuse::ErrorKind;
using survfuse::EstimatorKind;
using ojson = nlohmann::ordered_json;

struct sf_sample {
  survfuse::FusedSample sample;
};

struct sf_report {
  struct Row {
    double t_star, point, se, lower, upper;
    std::string estimator;
  };
  std::string json;
  std::string csv;
  bool valid = true;
  std::vector<Row> rows;
};

namespace {

thread_local std::string g_last_error;

sf_status status_of(ErrorKind k) { return static_cast<sf_status>(static_cast<int>(k) + 1); }

template <class F>
sf_status guarded(F&& f) {
  try {
    g_last_error.clear();
    f();
    return SF_OK;
  } catch (const Error& e) {
    g_last_error = std::string(survfuse::to_string(e.kind())) + ": " + e.what();
    return status_of(e.kind());
  } catch (const nlohmann::json::exception& e) {
    g_last_error = std::string("argument: ") + e.what();
    return SF_E_ARGUMENT;
  } catch (const std::bad_alloc&) {
    g_last_error = "internal: out of memory";
    return SF_E_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = std::string("internal: ") + e.what();
    return SF_E_INTERNAL;
  }
}

void need(const void* p, const char* what) {
  if (p == nullptr) survfuse::fail(ErrorKind::kArgument, std::string(what) + " is null");
}

std::optional<double> opt_pi(double pi) {
  if (std::isnan(pi)) return std::nullopt;
  return pi;
}

ojson result_json(const survfuse::EstimateResult& r) {
  ojson j;
  j["estimand"] = r.estimand;
  j["estimator"] = survfuse::to_string(r.kind);
  j["t_star"] = r.t_star;
  j["alpha"] = r.alpha;
  j["point"] = r.point;
  j["se"] = r.se;
  j["ci"] = {r.ci.lower, r.ci.upper};
  j["plug_in"] = r.plug_in;
  j["provenance"] = r.provenance;
  j["warnings"] = r.warnings;
  ojson d = ojson::object();
  for (const auto& [k, v] : r.diagnostics) d[k] = v;
  j["diagnostics"] = d;
  return j;
}

ojson error_json(const Error& e) {
  return {{"error", {{"kind", survfuse::to_string(e.kind())}, {"message", e.what()}}}};
}

struct EstimateRequest {
  std::vector<double> t_star;
  std::vector<std::string> names;  // in output order
  bool all = false;
  std::string nuisance = "fit";
  double alpha = 0.05;
  std::uint64_t seed = 1;
  unsigned threads = 1;
  std::optional<double> pi;
  double trim = 0.0;
  std::size_t grid_points = 2000;
  std::size_t subsamples = 200;
  survfuse::HazardFamily event_family = survfuse::HazardFamily::kLinearRate;
  survfuse::HazardFamily censoring_family = survfuse::HazardFamily::kLinearRate;
};

EstimateRequest parse_request(const char* text) {
  EstimateRequest q;
  const nlohmann::json j = nlohmann::json::parse(text == nullptr ? "{}" : text);
  if (!j.is_object()) survfuse::fail(ErrorKind::kArgument, "estimate options: expected a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    const auto& v = it.value();
    if (k == "t_star") {
      if (v.is_array()) q.t_star = v.get<std::vector<double>>();
      else q.t_star = {v.get<double>()};
    } else if (k == "estimators") {
      for (const auto& s : v.get<std::vector<std::string>>()) {
        if (s == "all") {
          q.all = true;
          continue;
        }
        const std::string canon = survfuse::to_string(survfuse::parse_estimator_kind(s));
        if (std::find(q.names.begin(), q.names.end(), canon) == q.names.end()) q.names.push_back(canon);
      }
    } else if (k == "nuisance") q.nuisance = v.get<std::string>();
    else if (k == "alpha") q.alpha = v.get<double>();
    else if (k == "seed") q.seed = v.get<std::uint64_t>();
    else if (k == "threads") q.threads = v.get<unsigned>();
    else if (k == "pi") { if (!v.is_null()) q.pi = v.get<double>(); }
    else if (k == "trim") q.trim = v.get<double>();
    else if (k == "grid_points") q.grid_points = v.get<std::size_t>();
    else if (k == "subsamples") q.subsamples = v.get<std::size_t>();
    else if (k == "event_family") q.event_family = survfuse::parse_hazard_family(v.get<std::string>());
    else if (k == "censoring_family") q.censoring_family = survfuse::parse_hazard_family(v.get<std::string>());
    else survfuse::fail(ErrorKind::kArgument, "estimate options: unknown key '" + k + "'");
  }
  if (q.t_star.empty()) survfuse::fail(ErrorKind::kArgument, "estimate options: t_star is required");
  if (q.all)
    for (const char* s : {"cs", "rc", "dr", "eff", "ivw"})
      if (std::find(q.names.begin(), q.names.end(), s) == q.names.end()) q.names.emplace_back(s);
  if (q.names.empty()) survfuse::fail(ErrorKind::kArgument, "estimate options: no estimators requested");
  if (!(q.alpha > 0.0 && q.alpha < 1.0)) survfuse::fail(ErrorKind::kArgument, "alpha must lie in (0,1)");
  if (!(q.trim >= 0.0 && q.trim < 0.5)) survfuse::fail(ErrorKind::kArgument, "trim must lie in [0, 0.5)");
  if (q.threads == 0) q.threads = survfuse::default_threads();
  return q;
}

survfuse::NuisanceBundle request_bundle(const EstimateRequest& q, const survfuse::FusedSample& sample,
                                        const std::optional<survfuse::InspectionWindow>& win, bool need_ratio) {
  const auto colon = q.nuisance.find(':');
  const std::string mode = q.nuisance.substr(0, colon);
  if (mode == "fit" || mode == "fitted") {
    if (colon != std::string::npos) survfuse::fail(ErrorKind::kArgument, "nuisance 'fit' takes no DGP id");
    survfuse::FitOptions fo;
    fo.event_family = q.event_family;
    fo.censoring_family = q.censoring_family;
    fo.window = win;
    fo.fit_ratio = need_ratio;
    return survfuse::fit_bundle(sample, fo);
  }
  if (colon == std::string::npos)
    survfuse::fail(ErrorKind::kArgument, "nuisance '" + q.nuisance + "' needs a DGP id, e.g. oracle:paper");
  const auto dgp = survfuse::DgpSpec::by_id(q.nuisance.substr(colon + 1));
  if (mode == "oracle") return survfuse::oracle_bundle(dgp);
  if (mode == "misspec-event") return survfuse::misspecified_bundle(dgp, survfuse::Misspecification::kEvent);
  if (mode == "misspec-gR")
    return survfuse::misspecified_bundle(dgp, survfuse::Misspecification::kInspectionCensoring);
  survfuse::fail(ErrorKind::kArgument,
                 "unknown nuisance '" + q.nuisance + "' (fit, oracle:<dgp>, misspec-event:<dgp>, misspec-gR:<dgp>)");
}

sf_report* estimate_report(const survfuse::FusedSample& input, const EstimateRequest& q) {
  survfuse::FusedSample sample = input;
  std::optional<survfuse::InspectionWindow> win;
  std::size_t trimmed = 0;
  if (q.trim > 0.0) {
    win = survfuse::inspection_window(input, q.trim, 1.0 - q.trim);
    sample = survfuse::restrict_to_window(input, *win, &trimmed);
  }
  const bool need_ratio = std::any_of(q.names.begin(), q.names.end(),
                                      [](const std::string& s) { return s == "shift0" || s == "shift1"; });
  const survfuse::NuisanceBundle nb = request_bundle(q, sample, win, need_ratio);

  survfuse::EstimationOptions opts;
  opts.alpha = q.alpha;
  opts.grid_points = q.grid_points;
  opts.pi = q.pi;
  opts.window = win;
  opts.threads = q.threads;
  opts.subsamples = q.subsamples;
  opts.seed = q.seed;

  std::vector<EstimatorKind> one_step;
  const bool want_ivw = std::find(q.names.begin(), q.names.end(), "ivw") != q.names.end();
  bool want_cs = want_ivw;
  for (const auto& s : q.names) {
    const auto k = survfuse::parse_estimator_kind(s);
    if (k == EstimatorKind::kCsOnly) want_cs = true;
    else if (k != EstimatorKind::kNaiveIvw) one_step.push_back(k);
  }
  if (want_ivw && std::find(one_step.begin(), one_step.end(), EstimatorKind::kRcOnly) == one_step.end())
    one_step.push_back(EstimatorKind::kRcOnly);
  auto requested_alone = [&](const std::string& s) { return !q.all && std::find(q.names.begin(), q.names.end(), s) != q.names.end(); };

  auto rep = std::make_unique<sf_report>();
  ojson root;
  root["sample"] = {{"n", sample.size()},
                    {"n1", sample.n1()},
                    {"n0", sample.n0()},
                    {"pi", q.pi.value_or(sample.pi())},
                    {"pi_source", q.pi ? "option" : (sample.pi_is_design() ? "design" : "empirical")},
                    {"trimmed_rows", trimmed}};
  root["nuisance"] = {{"mode", q.nuisance}, {"provenance", nb.provenance}, {"warnings", nb.warnings}};
  root["options"] = {{"alpha", q.alpha}, {"seed", q.seed}, {"grid_points", q.grid_points},
                     {"subsamples", q.subsamples}, {"trim", q.trim}};
  ojson results = ojson::array();
  for (double t : q.t_star) {
    std::map<std::string, ojson> block;
    std::optional<survfuse::EstimateResult> rc, cs;
    auto record = [&](const survfuse::EstimateResult& r) {
      const std::string name = survfuse::to_string(r.kind);
      block[name] = result_json(r);
      rep->rows.push_back({t, r.point, r.se, r.ci.lower, r.ci.upper, name});
    };
    if (want_cs) {
      try {
        cs = survfuse::estimate_cs_only(sample, t, opts);
        record(*cs);
      } catch (const Error& e) {
        if (requested_alone("cs")) throw;
        block["cs"] = error_json(e);
      }
    }
    if (!one_step.empty()) {
      try {
        const auto rs = survfuse::estimate_one_step(sample, nb, t, one_step, opts);
        for (std::size_t i = 0; i < rs.size(); ++i) {
          if (rs[i].kind == EstimatorKind::kRcOnly) rc = rs[i];
          if (std::find(q.names.begin(), q.names.end(), survfuse::to_string(rs[i].kind)) != q.names.end())
            record(rs[i]);
        }
      } catch (const Error& e) {
        for (auto k : one_step) {
          const std::string name = survfuse::to_string(k);
          if (requested_alone(name)) throw;
          block[name] = error_json(e);
        }
      }
    }
    if (want_ivw) {
      if (cs && rc) record(survfuse::naive_ivw_combine(*cs, *rc));
      else if (requested_alone("ivw"))
        survfuse::fail(ErrorKind::kNotIdentified, "ivw: a component estimator is unavailable at t*");
      else
        block["ivw"] = {{"error", {{"kind", "not-identified"}, {"message", "a component estimator is unavailable"}}}};
    }
    ojson est = ojson::object();
    for (const auto& s : q.names)
      if (block.count(s)) est[s] = block[s];
    results.push_back({{"t_star", t}, {"estimators", est}});
  }
  // Flat rows in the same order as the JSON.
  std::vector<sf_report::Row> ordered;
  for (double t : q.t_star)
    for (const auto& s : q.names)
      for (const auto& r : rep->rows)
        if (r.t_star == t && r.estimator == s) ordered.push_back(r);
  rep->rows = std::move(ordered);
  root["results"] = results;
  rep->json = root.dump(2) + "\n";
  return rep.release();
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(12) << v;
  return os.str();
}

}  // namespace

extern "C" {

const char* sf_last_error(void) { return g_last_error.c_str(); }

const char* sf_status_name(sf_status s) {
  if (s == SF_OK) return "ok";
  if (s == SF_E_INTERNAL) return "internal";
  if (s > SF_OK && s < SF_E_INTERNAL) return survfuse::to_string(static_cast<ErrorKind>(static_cast<int>(s) - 1));
  return "unknown";
}

const char* sf_version(void) { return "0.1.0"; }

sf_status sf_sample_read_csv(const char* path, double pi, sf_sample** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new sf_sample{survfuse::read_csv(path, opt_pi(pi))};
  });
}

sf_status sf_sample_parse_csv(const char* text, double pi, sf_sample** out) {
  return guarded([&] {
    need(text, "text");
    need(out, "out");
    *out = new sf_sample{survfuse::parse_csv(text, opt_pi(pi))};
  });
}

sf_status sf_sample_generate(const char* dgp_id, size_t n, uint64_t seed, sf_sample** out) {
  return guarded([&] {
    need(dgp_id, "dgp_id");
    need(out, "out");
    survfuse::RngStream stream(seed, 0);
    *out = new sf_sample{survfuse::generate_dataset(survfuse::DgpSpec::by_id(dgp_id), n, stream)};
  });
}

sf_status sf_sample_write_csv(const sf_sample* s, const char* path) {
  return guarded([&] {
    need(s, "sample");
    need(path, "path");
    survfuse::write_csv(s->sample, path);
  });
}

size_t sf_sample_size(const sf_sample* s) { return s ? s->sample.size() : 0; }
size_t sf_sample_n1(const sf_sample* s) { return s ? s->sample.n1() : 0; }
double sf_sample_pi(const sf_sample* s) { return s ? s->sample.pi() : std::numeric_limits<double>::quiet_NaN(); }
void sf_sample_free(sf_sample* s) { delete s; }

sf_status sf_estimate(const sf_sample* s, const char* options_json, sf_report** out) {
  return guarded([&] {
    need(s, "sample");
    need(out, "out");
    *out = estimate_report(s->sample, parse_request(options_json));
  });
}

sf_status sf_simulate(const char* config_json, sf_report** out) {
  return guarded([&] {
    need(config_json, "config");
    need(out, "out");
    const auto report = survfuse::run_replications(survfuse::SimConfig::from_json(config_json));
    auto rep = std::make_unique<sf_report>();
    rep->json = report.to_json() + "\n";
    rep->csv = report.to_csv();
    rep->valid = report.valid;
    *out = rep.release();
  });
}

sf_status sf_rates(const char* config_json, sf_report** out) {
  return guarded([&] {
    need(config_json, "config");
    need(out, "out");
    const auto report = survfuse::run_replications(survfuse::SimConfig::from_json(config_json));
    const auto rates = survfuse::rate_study(report);
    auto rep = std::make_unique<sf_report>();
    ojson j = ojson::parse(report.to_json());
    ojson fits = ojson::array();
    for (const auto& f : rates.fits)
      fits.push_back({{"estimator", survfuse::to_string(f.estimator)},
                      {"log_n", f.log_n},
                      {"log_mse", f.log_mse},
                      {"slope", f.slope},
                      {"intercept", f.intercept}});
    j["rates"] = {{"t_star", rates.t_star}, {"fits", fits}};
    rep->json = j.dump(2) + "\n";
    rep->csv = rates.to_csv();
    rep->valid = rates.valid;
    *out = rep.release();
  });
}

const char* sf_report_json(const sf_report* r) { return r ? r->json.c_str() : ""; }
const char* sf_report_csv(const sf_report* r) { return r ? r->csv.c_str() : ""; }
int sf_report_valid(const sf_report* r) { return r && r->valid ? 1 : 0; }
size_t sf_report_count(const sf_report* r) { return r ? r->rows.size() : 0; }

sf_status sf_report_estimate(const sf_report* r, size_t i, double* t_star, double* point, double* se, double* lower,
                             double* upper) {
  return guarded([&] {
    need(r, "report");
    if (i >= r->rows.size()) survfuse::fail(ErrorKind::kRange, "report index out of range");
    const auto& row = r->rows[i];
    if (t_star) *t_star = row.t_star;
    if (point) *point = row.point;
    if (se) *se = row.se;
    if (lower) *lower = row.lower;
    if (upper) *upper = row.upper;
  });
}

const char* sf_report_estimator(const sf_report* r, size_t i) {
  return r && i < r->rows.size() ? r->rows[i].estimator.c_str() : "";
}

void sf_report_free(sf_report* r) { delete r; }

sf_status sf_solve_table(const char* dgp_id, const double* w, size_t dim, double pi, double t_star,
                         size_t grid_points, char** csv_out) {
  return guarded([&] {
    need(dgp_id, "dgp_id");
    need(w, "w");
    need(csv_out, "csv_out");
    const auto dgp = survfuse::DgpSpec::by_id(dgp_id);
    if (dim != 2) survfuse::fail(ErrorKind::kArgument, "solve: covariate must have 2 coordinates");
    if (!(pi > 0.0 && pi < 1.0)) survfuse::fail(ErrorKind::kArgument, "solve: pi must lie in (0,1)");
    if (!(t_star > 0.0)) survfuse::fail(ErrorKind::kArgument, "solve: t* must be positive");
    const auto nb = survfuse::oracle_bundle(dgp);
    survfuse::FredholmProblem prob;
    prob.pi = pi;
    prob.t_star = t_star;
    prob.window = {dgp.c_lower, dgp.c_upper};
    prob.nuisances = &nb;
    prob.w.assign(w, w + dim);
    const double t_max = std::max(3.0, 1.25 * std::max(t_star, dgp.c_upper));
    prob.grid = survfuse::problem_grid(t_max, grid_points == 0 ? 2000 : grid_points, t_star, prob.window);
    prob.condition_estimate = false;
    const auto prof = survfuse::make_profile(prob);
    const auto h = survfuse::solve_h_grid(prob, prof);
    const auto eta = survfuse::solve_eta_grid(prob, prof);
    const auto rh = survfuse::h_residuals(prob, prof, h.values.values);
    const auto re = survfuse::eta_residuals(prob, prof, eta.values.values);
    std::ostringstream os;
    os << "t,h,eta,h_residual,eta_residual\n";
    for (std::size_t j = 0; j < prob.grid.size(); ++j)
      os << fmt(prob.grid[j]) << ',' << fmt(h.values.values[j]) << ',' << fmt(eta.values.values[j]) << ','
         << fmt(std::abs(rh[j])) << ',' << fmt(std::abs(re[j])) << '\n';
    const std::string s = os.str();
    char* buf = static_cast<char*>(std::malloc(s.size() + 1));
    if (buf == nullptr) throw std::bad_alloc();
    std::memcpy(buf, s.c_str(), s.size() + 1);
    *csv_out = buf;
  });
}

void sf_string_free(char* s) { std::free(s); }

}  // extern "C"

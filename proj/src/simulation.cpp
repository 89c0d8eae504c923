/*
 * Copyright 2026 The survfuse Authors
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */
#include "survfuse/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <json.hpp>
#include <set>
#include <sstream>

#include "survfuse/error.hpp"

namespace survfuse {

using nlohmann::json;

std::string to_string(NuisanceMode m) {
  switch (m) {
    case NuisanceMode::kFitted: return "fitted";
    case NuisanceMode::kOracle: return "oracle";
    case NuisanceMode::kMisspecEvent: return "misspec-event";
    case NuisanceMode::kMisspecGR: return "misspec-gR";
  }
  return "?";
}

NuisanceMode parse_nuisance_mode(const std::string& name) {
  for (auto m : {NuisanceMode::kFitted, NuisanceMode::kOracle, NuisanceMode::kMisspecEvent, NuisanceMode::kMisspecGR})
    if (name == to_string(m)) return m;
  if (name == "fit") return NuisanceMode::kFitted;
  fail(ErrorKind::kArgument, "unknown nuisance mode '" + name + "' (fitted, oracle, misspec-event, misspec-gR)");
}

namespace {

template <class T>
T get_as(const json& j, const char* key) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    fail(ErrorKind::kArgument, std::string("config: ill-typed value for '") + key + "'");
  }
}

bool is_one_step(EstimatorKind k) { return k != EstimatorKind::kCsOnly && k != EstimatorKind::kNaiveIvw; }

int truth_source(EstimatorKind k) {
  if (k == EstimatorKind::kShift0) return 0;
  if (k == EstimatorKind::kShift1) return 1;
  return -1;
}

// Outcome of one estimator in one replication.
struct Draw {
  enum Status : unsigned char { kOk, kFailed, kNotIdentified } status = kFailed;
  double point = 0.0, se = 0.0, lower = 0.0, upper = 0.0;
  std::string message;
};

Draw draw_of(const EstimateResult& r) {
  Draw d;
  d.status = std::isfinite(r.point) && std::isfinite(r.se) ? Draw::kOk : Draw::kFailed;
  d.point = r.point;
  d.se = r.se;
  d.lower = r.ci.lower;
  d.upper = r.ci.upper;
  if (d.status == Draw::kFailed) d.message = "non-finite estimate";
  return d;
}

Draw draw_of_error(const Error& e) {
  Draw d;
  d.status = e.kind() == ErrorKind::kNotIdentified ? Draw::kNotIdentified : Draw::kFailed;
  d.message = e.what();
  return d;
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

}  // namespace

void SimConfig::validate() const {
  DgpSpec::by_id(dgp);
  if (n_total.empty()) fail(ErrorKind::kArgument, "config: n_total is empty");
  for (auto n : n_total)
    if (n < 30) fail(ErrorKind::kArgument, "config: every n_total must be >= 30");
  if (t_star.empty()) fail(ErrorKind::kArgument, "config: t_star is empty");
  for (double t : t_star)
    if (!(t > 0.0) || !std::isfinite(t)) fail(ErrorKind::kArgument, "config: t_star must be positive");
  if (replications == 0) fail(ErrorKind::kArgument, "config: replications must be positive");
  if (estimators.empty()) fail(ErrorKind::kArgument, "config: no estimators");
  if (!(alpha > 0.0 && alpha < 1.0)) fail(ErrorKind::kArgument, "config: alpha must lie in (0,1)");
  if (grid_points < 10) fail(ErrorKind::kArgument, "config: grid_points must be >= 10");
  if (cs_subsamples < 10) fail(ErrorKind::kArgument, "config: cs_subsamples must be >= 10");
  if (!(failure_cap >= 0.0 && failure_cap < 1.0)) fail(ErrorKind::kArgument, "config: failure_cap must lie in [0,1)");
  const bool shift = std::any_of(estimators.begin(), estimators.end(), [](EstimatorKind k) {
    return k == EstimatorKind::kShift0 || k == EstimatorKind::kShift1;
  });
  if (shift && nuisance != NuisanceMode::kFitted && nuisance != NuisanceMode::kOracle)
    fail(ErrorKind::kArgument, "config: shift estimators need fitted or oracle nuisances");
}

SimConfig SimConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorKind::kArgument, std::string("config: invalid JSON: ") + e.what());
  }
  if (!j.is_object()) fail(ErrorKind::kArgument, "config: expected a JSON object");
  SimConfig c;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    const json& v = it.value();
    if (k == "dgp") c.dgp = get_as<std::string>(v, "dgp");
    else if (k == "n_total") c.n_total = get_as<std::vector<std::size_t>>(v, "n_total");
    else if (k == "t_star") c.t_star = get_as<std::vector<double>>(v, "t_star");
    else if (k == "replications") c.replications = get_as<std::size_t>(v, "replications");
    else if (k == "seed") c.seed = get_as<std::uint64_t>(v, "seed");
    else if (k == "estimators") {
      c.estimators.clear();
      for (const auto& s : get_as<std::vector<std::string>>(v, "estimators")) c.estimators.push_back(parse_estimator_kind(s));
    } else if (k == "nuisance") c.nuisance = parse_nuisance_mode(get_as<std::string>(v, "nuisance"));
    else if (k == "alpha") c.alpha = get_as<double>(v, "alpha");
    else if (k == "event_family") c.event_family = parse_hazard_family(get_as<std::string>(v, "event_family"));
    else if (k == "censoring_family") c.censoring_family = parse_hazard_family(get_as<std::string>(v, "censoring_family"));
    else if (k == "grid_points") c.grid_points = get_as<std::size_t>(v, "grid_points");
    else if (k == "cs_subsamples") c.cs_subsamples = get_as<std::size_t>(v, "cs_subsamples");
    else if (k == "failure_cap") c.failure_cap = get_as<double>(v, "failure_cap");
    else if (k == "threads") c.threads = get_as<unsigned>(v, "threads");
    else fail(ErrorKind::kArgument, "config: unknown key '" + k + "'");
  }
  c.validate();
  return c;
}

std::string SimConfig::to_json() const {
  json j;
  j["dgp"] = dgp;
  j["n_total"] = n_total;
  j["t_star"] = t_star;
  j["replications"] = replications;
  j["seed"] = seed;
  std::vector<std::string> est;
  for (auto k : estimators) est.push_back(to_string(k));
  j["estimators"] = est;
  j["nuisance"] = to_string(nuisance);
  j["alpha"] = alpha;
  j["event_family"] = to_string(event_family);
  j["censoring_family"] = to_string(censoring_family);
  j["grid_points"] = grid_points;
  j["cs_subsamples"] = cs_subsamples;
  j["failure_cap"] = failure_cap;
  return j.dump(2);
}

NuisanceBundle simulation_bundle(const SimConfig& config, const DgpSpec& dgp, const FusedSample& sample) {
  switch (config.nuisance) {
    case NuisanceMode::kOracle: return oracle_bundle(dgp);
    case NuisanceMode::kMisspecEvent: return misspecified_bundle(dgp, Misspecification::kEvent);
    case NuisanceMode::kMisspecGR: return misspecified_bundle(dgp, Misspecification::kInspectionCensoring);
    case NuisanceMode::kFitted: break;
  }
  FitOptions fo;
  fo.event_family = config.event_family;
  fo.censoring_family = config.censoring_family;
  fo.fit_ratio = std::any_of(config.estimators.begin(), config.estimators.end(), [](EstimatorKind k) {
    return k == EstimatorKind::kShift0 || k == EstimatorKind::kShift1;
  });
  return fit_bundle(sample, fo);
}

SimReport run_replications(const SimConfig& config) {
  config.validate();
  const DgpSpec dgp = DgpSpec::by_id(config.dgp);
  const auto& kinds = config.estimators;
  std::vector<EstimatorKind> one_step;
  for (auto k : kinds)
    if (is_one_step(k)) one_step.push_back(k);
  const bool want_ivw = std::find(kinds.begin(), kinds.end(), EstimatorKind::kNaiveIvw) != kinds.end();
  const bool want_cs =
      want_ivw || std::find(kinds.begin(), kinds.end(), EstimatorKind::kCsOnly) != kinds.end();
  const bool need_rc_for_ivw =
      want_ivw && std::find(one_step.begin(), one_step.end(), EstimatorKind::kRcOnly) == one_step.end();
  if (need_rc_for_ivw) one_step.push_back(EstimatorKind::kRcOnly);

  const std::size_t nn = config.n_total.size(), nt = config.t_star.size(), ne = kinds.size();
  const std::size_t reps = config.replications;
  // draws[((ni * reps + rep) * nt + ti) * ne + ei]
  std::vector<Draw> draws(nn * reps * nt * ne);
  const unsigned threads = config.threads == 0 ? default_threads() : config.threads;

  parallel_for(nn * reps, threads, [&](std::size_t job) {
    const std::size_t ni = job / reps, rep = job % reps;
    auto slot = [&](std::size_t ti, std::size_t ei) -> Draw& { return draws[(job * nt + ti) * ne + ei]; };
    FusedSample sample;
    try {
      RngStream stream(config.seed, (static_cast<std::uint64_t>(ni) << 32) | rep);
      sample = generate_dataset(dgp, config.n_total[ni], stream);
    } catch (const Error& e) {
      for (std::size_t ti = 0; ti < nt; ++ti)
        for (std::size_t ei = 0; ei < ne; ++ei) slot(ti, ei) = draw_of_error(e);
      return;
    }
    // the current-status estimator needs no nuisances, so a failed fit only costs the others
    NuisanceBundle nb;
    std::optional<Error> nb_error;
    if (!one_step.empty()) {
      try {
        nb = simulation_bundle(config, dgp, sample);
      } catch (const Error& e) {
        nb_error = e;
      }
    }
    EstimationOptions opts;
    opts.alpha = config.alpha;
    opts.grid_points = config.grid_points;
    opts.subsamples = config.cs_subsamples;
    opts.threads = 1;
    for (std::size_t ti = 0; ti < nt; ++ti) {
      const double t = config.t_star[ti];
      std::vector<std::pair<EstimatorKind, Draw>> got;
      std::optional<EstimateResult> rc, cs;
      if (nb_error) {
        for (auto k : one_step) got.emplace_back(k, draw_of_error(*nb_error));
      } else if (!one_step.empty()) {
        try {
          auto rs = estimate_one_step(sample, nb, t, one_step, opts);
          for (std::size_t i = 0; i < rs.size(); ++i) {
            got.emplace_back(one_step[i], draw_of(rs[i]));
            if (one_step[i] == EstimatorKind::kRcOnly) rc = rs[i];
          }
        } catch (const Error& e) {
          for (auto k : one_step) got.emplace_back(k, draw_of_error(e));
        }
      }
      if (want_cs) {
        opts.seed = splitmix64(config.seed ^ splitmix64((static_cast<std::uint64_t>(ni) << 40) ^
                                                         (static_cast<std::uint64_t>(ti) << 32) ^ rep));
        try {
          cs = estimate_cs_only(sample, t, opts);
          got.emplace_back(EstimatorKind::kCsOnly, draw_of(*cs));
        } catch (const Error& e) {
          got.emplace_back(EstimatorKind::kCsOnly, draw_of_error(e));
        }
      }
      if (want_ivw) {
        if (cs && rc) {
          got.emplace_back(EstimatorKind::kNaiveIvw, draw_of(naive_ivw_combine(*cs, *rc)));
        } else {
          Draw d;
          d.message = "component estimator failed";
          for (const auto& [k, g] : got)
            if ((k == EstimatorKind::kCsOnly || k == EstimatorKind::kRcOnly) && g.status == Draw::kNotIdentified)
              d.status = Draw::kNotIdentified;
          got.emplace_back(EstimatorKind::kNaiveIvw, d);
        }
      }
      for (std::size_t ei = 0; ei < ne; ++ei)
        for (const auto& [k, d] : got)
          if (k == kinds[ei]) slot(ti, ei) = d;
    }
  });

  SimReport report;
  report.config = config;
  for (std::size_t ti = 0; ti < nt; ++ti) {
    for (std::size_t ei = 0; ei < ne; ++ei) {
      const double truth = true_phi(dgp, config.t_star[ti], truth_source(kinds[ei]));
      for (std::size_t ni = 0; ni < nn; ++ni) {
        SimCell c;
        c.estimator = kinds[ei];
        c.n = config.n_total[ni];
        c.t_star = config.t_star[ti];
        c.truth = truth;
        double sp = 0, sse = 0, sl = 0, cov = 0, sq = 0;
        std::vector<double> pts;
        std::string first_msg;
        for (std::size_t rep = 0; rep < reps; ++rep) {
          const Draw& d = draws[((ni * reps + rep) * nt + ti) * ne + ei];
          if (d.status == Draw::kNotIdentified) {
            ++c.not_identified;
            continue;
          }
          if (d.status == Draw::kFailed) {
            ++c.failures;
            if (first_msg.empty()) first_msg = d.message;
            continue;
          }
          pts.push_back(d.point);
          sp += d.point;
          sq += (d.point - truth) * (d.point - truth);
          sse += d.se;
          sl += d.upper - d.lower;
          if (d.lower <= truth && truth <= d.upper) cov += 1.0;
        }
        c.replications = pts.size();
        if (!pts.empty()) {
          const double m = static_cast<double>(pts.size());
          c.mean_point = sp / m;
          c.bias = c.mean_point - truth;
          c.mse = sq / m;
          c.mean_se = sse / m;
          c.mean_ci_length = sl / m;
          c.coverage = cov / m;
          double v = 0;
          for (double p : pts) v += (p - c.mean_point) * (p - c.mean_point);
          c.sd_point = pts.size() > 1 ? std::sqrt(v / (m - 1.0)) : 0.0;
        }
        const double attempted = static_cast<double>(reps - c.not_identified);
        const std::string tag = to_string(c.estimator) + " n=" + std::to_string(c.n) + " t*=" + fmt(c.t_star);
        if (c.failures > 0)
          report.notes.push_back(tag + ": " + std::to_string(c.failures) + " failed replications (first: " +
                                 first_msg + ")");
        if (c.not_identified > 0)
          report.notes.push_back(tag + ": not identified in " + std::to_string(c.not_identified) + " replications");
        if (attempted > 0 && static_cast<double>(c.failures) > config.failure_cap * attempted) {
          report.valid = false;
          report.notes.push_back(tag + ": failure rate above cap; report invalid");
        }
        report.cells.push_back(c);
      }
    }
  }
  return report;
}

const SimCell& SimReport::cell(EstimatorKind k, std::size_t n, double t_star) const {
  for (const auto& c : cells)
    if (c.estimator == k && c.n == n && std::abs(c.t_star - t_star) < 1e-12) return c;
  fail(ErrorKind::kArgument, "no simulation cell for " + to_string(k) + " n=" + std::to_string(n));
}

std::string SimReport::to_csv() const {
  std::ostringstream os;
  os << "estimator,n,t_star,truth,replications,failures,not_identified,mean_point,bias,mse,sd_point,mean_se,"
        "mean_ci_length,coverage\n";
  for (const auto& c : cells)
    os << to_string(c.estimator) << ',' << c.n << ',' << fmt(c.t_star) << ',' << fmt(c.truth) << ','
       << c.replications << ',' << c.failures << ',' << c.not_identified << ',' << fmt(c.mean_point) << ','
       << fmt(c.bias) << ',' << fmt(c.mse) << ',' << fmt(c.sd_point) << ',' << fmt(c.mean_se) << ','
       << fmt(c.mean_ci_length) << ',' << fmt(c.coverage) << '\n';
  return os.str();
}

std::string SimReport::to_json() const {
  json j;
  j["config"] = json::parse(config.to_json());
  j["valid"] = valid;
  j["notes"] = notes;
  json cs = json::array();
  for (const auto& c : cells)
    cs.push_back({{"estimator", to_string(c.estimator)},
                  {"n", c.n},
                  {"t_star", c.t_star},
                  {"truth", c.truth},
                  {"replications", c.replications},
                  {"failures", c.failures},
                  {"not_identified", c.not_identified},
                  {"mean_point", c.mean_point},
                  {"bias", c.bias},
                  {"mse", c.mse},
                  {"sd_point", c.sd_point},
                  {"mean_se", c.mean_se},
                  {"mean_ci_length", c.mean_ci_length},
                  {"coverage", c.coverage}});
  j["cells"] = cs;
  return j.dump(2);
}

const RateFit& RateStudy::fit(EstimatorKind k) const {
  for (const auto& f : fits)
    if (f.estimator == k) return f;
  fail(ErrorKind::kArgument, "no rate fit for " + to_string(k));
}

std::string RateStudy::to_csv() const {
  std::ostringstream os;
  os << "estimator,log_n,log_mse,slope,intercept\n";
  for (const auto& f : fits)
    for (std::size_t i = 0; i < f.log_n.size(); ++i)
      os << to_string(f.estimator) << ',' << fmt(f.log_n[i]) << ',' << fmt(f.log_mse[i]) << ',' << fmt(f.slope)
         << ',' << fmt(f.intercept) << '\n';
  return os.str();
}

RateStudy rate_study(const SimReport& report) {
  const auto& cfg = report.config;
  if (cfg.t_star.size() != 1) fail(ErrorKind::kArgument, "rate study: exactly one t* required");
  std::set<std::size_t> distinct(cfg.n_total.begin(), cfg.n_total.end());
  if (distinct.size() < 3) fail(ErrorKind::kArgument, "rate study: at least three distinct sample sizes required");
  RateStudy rs;
  rs.t_star = cfg.t_star[0];
  rs.valid = report.valid;
  for (auto k : cfg.estimators) {
    RateFit f;
    f.estimator = k;
    for (auto n : cfg.n_total) {
      const auto& c = report.cell(k, n, rs.t_star);
      if (c.replications == 0 || !(c.mse > 0.0)) continue;
      f.log_n.push_back(std::log(static_cast<double>(n)));
      f.log_mse.push_back(std::log(c.mse));
    }
    const std::size_t m = f.log_n.size();
    if (m < 2) {
      f.slope = f.intercept = std::numeric_limits<double>::quiet_NaN();
      rs.valid = false;
    } else {
      double mx = 0, my = 0;
      for (std::size_t i = 0; i < m; ++i) mx += f.log_n[i], my += f.log_mse[i];
      mx /= m;
      my /= m;
      double sxy = 0, sxx = 0;
      for (std::size_t i = 0; i < m; ++i) {
        sxy += (f.log_n[i] - mx) * (f.log_mse[i] - my);
        sxx += (f.log_n[i] - mx) * (f.log_n[i] - mx);
      }
      f.slope = sxy / sxx;
      f.intercept = my - f.slope * mx;
    }
    rs.fits.push_back(std::move(f));
  }
  return rs;
}

RateStudy rate_study(const SimConfig& config) { return rate_study(run_replications(config)); }

}  // namespace survfuse

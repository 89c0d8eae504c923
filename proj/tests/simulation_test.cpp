/*
 * Copyright 2026 The survfuse Authors
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "survfuse/dgp.hpp"
#include "survfuse/error.hpp"
#include "survfuse/simulation.hpp"

using namespace survfuse;

namespace {

SimConfig small_config() {
  SimConfig c;
  c.n_total = {300};
  c.t_star = {0.2, 0.7};
  c.replications = 2;
  c.estimators = {EstimatorKind::kCsOnly, EstimatorKind::kRcOnly, EstimatorKind::kFusionDr};
  c.nuisance = NuisanceMode::kOracle;
  c.grid_points = 400;
  c.cs_subsamples = 20;
  c.threads = 1;
  return c;
}

}  // namespace

TEST_SUITE("simulation") {

TEST_CASE("design: source split and inspection support") {
  RngStream rng(1, 0);
  const auto s = generate_dataset(DgpSpec::paper(), 300, rng);
  CHECK(s.n1() == 100);
  CHECK(s.n0() == 200);
  for (std::size_t i = 0; i < s.size(); ++i) {
    CHECK(s[i].source == (i < 100 ? 1 : 0));
    if (s[i].source == 0) {
      CHECK(s[i].c > 0.5);
      CHECK(s[i].c < 1.0);
    }
  }
  RngStream again(1, 0);
  CHECK(to_csv(generate_dataset(DgpSpec::paper(), 300, again)) == to_csv(s));
}

TEST_CASE("design: current-status indicator near C = 0.75") {
  // 10^5 current-status rows; compare with the inspection-weighted mean of F(0.75 | W)
  const auto dgp = DgpSpec::paper();
  RngStream rng(4, 0);
  const auto s = generate_dataset(dgp, 150000, rng);
  double hits = 0, count = 0;
  for (const auto& o : s.observations())
    if (o.source == 0 && std::abs(o.c - 0.75) < 0.01) {
      hits += o.delta_c;
      count += 1;
    }
  // g(0.75 | w) = 2 b (1 - 0.5)^(b - 1) for C = 0.5 + 0.5 Beta(1, b)
  double num = 0, den = 0, plain = 0;
  const int m = 20000;
  for (int w2 = 0; w2 <= 1; ++w2)
    for (int i = 0; i < m; ++i) {
      const std::vector<double> w{(i + 0.5) / m, static_cast<double>(w2)};
      const double f = -std::expm1(-dgp.event_rate(w) * 0.75);
      const double b = dgp.beta_b(w);
      const double g = 2.0 * b * std::pow(0.5, b - 1.0);
      num += f * g;
      den += g;
      plain += f;
    }
  CHECK(std::abs(hits / count - num / den) < 0.01);
  // the unweighted average differs by less than the band as well
  CHECK(std::abs(num / den - plain / (2.0 * m)) < 0.01);
}

TEST_CASE("design: event times within a covariate stratum") {
  // all rows right-censored and censoring negligible, so Y = T
  auto dgp = DgpSpec::paper();
  dgp.rc_fraction = 1.0;
  dgp.censor_coef[0] = 1e-9;
  dgp.censor_coef[1] = dgp.censor_coef[2] = dgp.censor_coef[3] = 0.0;
  RngStream rng(6, 0);
  const auto s = generate_dataset(dgp, 200000, rng);
  std::vector<double> t;
  for (const auto& o : s.observations())
    if (o.w[1] == 1.0) t.push_back(o.y);
  REQUIRE(t.size() > 90000);
  std::sort(t.begin(), t.end());
  // W2 = 1: rate 0.8 + 0.6 W1 with W1 uniform
  auto cdf = [](double x) { return x <= 0 ? 0.0 : 1.0 - std::exp(-0.8 * x) * (-std::expm1(-0.6 * x)) / (0.6 * x); };
  double ks = 0;
  const double n = static_cast<double>(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double f = cdf(t[i]);
    ks = std::max({ks, std::abs(f - i / n), std::abs(f - (i + 1) / n)});
  }
  CHECK(ks < 0.02);
}

TEST_CASE("true survival probability") {
  const auto dgp = DgpSpec::paper();
  CHECK(true_phi(dgp, 0.0) == 1.0);
  CHECK(std::abs(true_phi(dgp, 0.7) - 0.4823) < 5e-5);
  CHECK(std::abs(true_phi(dgp, 0.2) - 0.8110) < 5e-5);
  // adaptive quadrature of the same integral: 0.39244 (0.3925 is sometimes quoted)
  CHECK(std::abs(true_phi(dgp, 0.9) - 0.3924382638266204) < 1e-12);
  CHECK(std::abs(true_phi(dgp, 0.7) - 0.48231639955597394) < 1e-12);
  for (double t : {0.2, 0.7, 0.9}) {
    const int m = 1000000;
    double acc = 0;
    for (int i = 0; i < m; ++i) {
      const double w = (i + 0.5) / m;
      acc += 0.5 * std::exp(-(0.8 + 0.4 * w) * t) + 0.5 * std::exp(-(0.8 + 0.6 * w) * t);
    }
    CHECK(std::abs(true_phi(dgp, t) - acc / m) < 1e-8);
  }
  const auto shift = DgpSpec::by_id("paper-shift");
  CHECK(true_phi(shift, 0.7, 1) == true_phi(dgp, 0.7));
  CHECK(true_phi(shift, 0.7, 0) < true_phi(shift, 0.7, 1));  // more mass at large w1, higher hazard
  CHECK_THROWS_AS(DgpSpec::by_id("weibull"), Error);
  CHECK_THROWS_AS(true_phi(dgp, -1.0), Error);
}

TEST_CASE("configuration") {
  const auto c = SimConfig::from_json(R"({"n_total": [300, 600], "t_star": [0.7], "replications": 3,
                                          "estimators": ["dr", "eff"], "nuisance": "misspec-gR"})");
  CHECK(c.n_total == std::vector<std::size_t>{300, 600});
  CHECK(c.replications == 3);
  CHECK(c.nuisance == NuisanceMode::kMisspecGR);
  CHECK(c.estimators.size() == 2);
  CHECK(SimConfig::from_json(c.to_json()).to_json() == c.to_json());

  CHECK_THROWS_AS(SimConfig::from_json(R"({"replication": 3})"), Error);
  CHECK_THROWS_AS(SimConfig::from_json(R"({"replications": 0})"), Error);
  CHECK_THROWS_AS(SimConfig::from_json(R"({"n_total": [20]})"), Error);
  CHECK_THROWS_AS(SimConfig::from_json(R"({"estimators": ["km"]})"), Error);
  CHECK_THROWS_AS(SimConfig::from_json(R"({"nuisance": "exact"})"), Error);
  CHECK_THROWS_AS(SimConfig::from_json(R"({"alpha": "0.05"})"), Error);
  CHECK_THROWS_AS(SimConfig::from_json("[1, 2]"), Error);

  for (auto m : {NuisanceMode::kFitted, NuisanceMode::kOracle, NuisanceMode::kMisspecEvent, NuisanceMode::kMisspecGR})
    CHECK(parse_nuisance_mode(to_string(m)) == m);
  CHECK(parse_nuisance_mode("fit") == NuisanceMode::kFitted);
}

TEST_CASE("replications: shape, invariants and determinism") {
  auto cfg = small_config();
  const auto a = run_replications(cfg);
  CHECK(a.valid);
  CHECK(a.cells.size() == 3 * 1 * 2);
  for (const auto& c : a.cells) {
    CAPTURE(to_string(c.estimator));
    CAPTURE(c.t_star);
    CHECK(c.truth == true_phi(DgpSpec::paper(), c.t_star));
    CHECK(c.failures == 0);
    if (c.estimator == EstimatorKind::kCsOnly && c.t_star == 0.2) {
      CHECK(c.not_identified == 2);
      CHECK(c.replications == 0);
      continue;
    }
    CHECK(c.replications == 2);
    CHECK(c.coverage >= 0.0);
    CHECK(c.coverage <= 1.0);
    CHECK(c.mse >= c.bias * c.bias);
  }
  const auto& dr = a.cell(EstimatorKind::kFusionDr, 300, 0.7);
  CHECK(dr.mean_ci_length > 0.0);
  CHECK_THROWS_AS(a.cell(EstimatorKind::kFusionEff, 300, 0.7), Error);

  // a single replication twice, and the same run on several threads
  cfg.replications = 1;
  CHECK(run_replications(cfg).to_json() == run_replications(cfg).to_json());
  cfg.replications = 3;
  const auto one = run_replications(cfg).to_json();
  cfg.threads = 4;
  CHECK(run_replications(cfg).to_json() == one);

  const std::string csv = a.to_csv();
  CHECK(csv.rfind("estimator,n,t_star,truth,replications,failures,not_identified,mean_point,bias,mse,sd_point,"
                  "mean_se,mean_ci_length,coverage\n",
                  0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 7);
}

TEST_CASE("naive IVW cells are built from cs and rc") {
  auto cfg = small_config();
  cfg.t_star = {0.8};
  cfg.estimators = {EstimatorKind::kCsOnly, EstimatorKind::kNaiveIvw};
  cfg.replications = 1;
  const auto r = run_replications(cfg);
  const auto& ivw = r.cell(EstimatorKind::kNaiveIvw, 300, 0.8);
  CHECK(ivw.replications == 1);
  CHECK(ivw.mean_ci_length > 0.0);
}

TEST_CASE("rate study") {
  SimReport rep;
  rep.config.n_total = {300, 600, 1500};
  rep.config.t_star = {0.7};
  rep.config.estimators = {EstimatorKind::kRcOnly, EstimatorKind::kFusionDr};
  for (auto k : rep.config.estimators)
    for (auto n : rep.config.n_total) {
      SimCell c;
      c.estimator = k;
      c.n = n;
      c.t_star = 0.7;
      c.replications = 10;
      c.mse = (k == EstimatorKind::kRcOnly ? 0.9 : 0.3) / static_cast<double>(n);
      rep.cells.push_back(c);
    }
  const auto rs = rate_study(rep);
  CHECK(rs.valid);
  CHECK(rs.fit(EstimatorKind::kFusionDr).slope == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(rs.fit(EstimatorKind::kRcOnly).intercept == doctest::Approx(std::log(0.9)).epsilon(1e-12));
  CHECK(rs.fit(EstimatorKind::kRcOnly).intercept > rs.fit(EstimatorKind::kFusionDr).intercept);
  const std::string csv = rs.to_csv();
  CHECK(csv.rfind("estimator,log_n,log_mse,slope,intercept\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 2 * 3);

  auto two = rep;
  two.config.n_total = {300, 600};
  CHECK_THROWS_AS(rate_study(two), Error);
  auto times = rep;
  times.config.t_star = {0.7, 0.9};
  CHECK_THROWS_AS(rate_study(times), Error);
}

TEST_CASE("nuisance modes") {
  auto cfg = small_config();
  const auto dgp = DgpSpec::paper();
  RngStream rng(3, 0);
  const auto s = generate_dataset(dgp, 300, rng);
  for (auto m : {NuisanceMode::kFitted, NuisanceMode::kOracle, NuisanceMode::kMisspecEvent, NuisanceMode::kMisspecGR}) {
    cfg.nuisance = m;
    const auto nb = simulation_bundle(cfg, dgp, s);
    CHECK(nb.event);
    CHECK(nb.censoring);
    CHECK(nb.inspection);
    CHECK_FALSE(nb.provenance.empty());
  }
}

}  // TEST_SUITE

/*
 * Copyright 2026 The survfuse Authors
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */
#include "survfuse/dgp.hpp"

#include <cmath>

#include "survfuse/error.hpp"

namespace survfuse {

DgpSpec DgpSpec::paper() { return DgpSpec{}; }

DgpSpec DgpSpec::by_id(const std::string& id) {
  if (id == "paper") return paper();
  if (id == "paper-shift") {
    DgpSpec d;
    d.id = id;
    d.shift_cs_w1 = true;
    return d;
  }
  fail(ErrorKind::kArgument, "unknown DGP id '" + id + "' (known: paper, paper-shift)");
}

double DgpSpec::event_rate(std::span<const double> w) const {
  return event_coef[0] + event_coef[1] * w[0] + event_coef[2] * w[1] + event_coef[3] * w[0] * w[1];
}

double DgpSpec::censor_rate(std::span<const double> w) const {
  return censor_coef[0] + censor_coef[1] * w[0] + censor_coef[2] * w[1] + censor_coef[3] * w[0] * w[1];
}

double DgpSpec::beta_b(std::span<const double> w) const {
  return beta_coef[0] + beta_coef[1] * w[0] + beta_coef[2] * w[1];
}

FusedSample generate_dataset(const DgpSpec& dgp, std::size_t n, RngStream& stream) {
  if (n < 3) fail(ErrorKind::kArgument, "generate_dataset needs n >= 3");
  const auto n1 = static_cast<std::size_t>(std::llround(static_cast<double>(n) * dgp.rc_fraction));
  std::vector<FusedObservation> obs;
  obs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const bool rc = i < n1;
    double w1 = rng_draw(Distribution::uniform(0.0, 1.0), stream);
    if (!rc && dgp.shift_cs_w1) w1 = std::sqrt(w1);
    const double w2 = rng_draw(Distribution::bernoulli(0.5), stream);
    std::vector<double> w{w1, w2};
    const double t = rng_draw(Distribution::exponential(dgp.event_rate(w)), stream);
    if (rc) {
      const double r = rng_draw(Distribution::exponential(dgp.censor_rate(w)), stream);
      obs.push_back(FusedObservation::right_censored(std::move(w), std::min(t, r), t <= r ? 1 : 0));
    } else {
      const double c = dgp.c_lower + (dgp.c_upper - dgp.c_lower) *
                                         rng_draw(Distribution::beta(1.0, dgp.beta_b(w)), stream);
      obs.push_back(FusedObservation::current_status(std::move(w), c, t <= c ? 1 : 0));
    }
  }
  return FusedSample(std::move(obs));
}

namespace {

// int_0^1 exp(-(a + b w) t) dw, and the same against density 2w
double mean_uniform(double a, double b, double t) {
  if (b * t == 0.0) return std::exp(-a * t);
  return std::exp(-a * t) * (-std::expm1(-b * t)) / (b * t);
}

double mean_linear_density(double a, double b, double t) {
  const double x = b * t;
  if (x == 0.0) return std::exp(-a * t);
  // 2 * int_0^1 w e^{-x w} dw = 2 (1 - (1 + x) e^{-x}) / x^2
  return std::exp(-a * t) * 2.0 * (1.0 - (1.0 + x) * std::exp(-x)) / (x * x);
}

}  // namespace

double true_phi(const DgpSpec& dgp, double t_star, int source) {
  if (!(t_star >= 0.0)) fail(ErrorKind::kArgument, "true_phi needs t* >= 0");
  const double* e = dgp.event_coef;
  // W2 ~ Bernoulli(1/2): the rate is a + b w1 with (a, b) depending on w2
  auto phi = [&](auto avg) {
    return 0.5 * avg(e[0], e[1], t_star) + 0.5 * avg(e[0] + e[2], e[1] + e[3], t_star);
  };
  const double uni = phi(mean_uniform);
  if (!dgp.shift_cs_w1 || source == 1) return uni;
  const double lin = phi(mean_linear_density);
  if (source == 0) return lin;
  return dgp.rc_fraction * uni + (1.0 - dgp.rc_fraction) * lin;
}

}  // namespace survfuse

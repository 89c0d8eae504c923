/*
 * Copyright 2026 The survfuse Authors
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */
#pragma once

#include <cstdint>
#include <span>
#include <string>

#include "survfuse/data.hpp"
#include "survfuse/numerics.hpp"

namespace survfuse {

/// Simulation design: two covariates, exponential event and censoring times
/// with linear rates, inspection time 0.5 + 0.5 Beta(1, b(w)).
struct DgpSpec {
  std::string id = "paper";
  double event_coef[4] = {0.8, 0.4, 0.0, 0.2};    // 1, w1, w2, w1*w2
  double censor_coef[4] = {1.5, -0.2, -0.5, 0.0};
  double beta_coef[3] = {0.75, 0.5, 0.1};         // 1, w1, w2
  double c_lower = 0.5;
  double c_upper = 1.0;
  double rc_fraction = 1.0 / 3.0;
  /// When set, W1 | S=0 has density 2w on (0,1) instead of uniform.
  bool shift_cs_w1 = false;

  static DgpSpec paper();
  static DgpSpec by_id(const std::string& id);

  double event_rate(std::span<const double> w) const;
  double censor_rate(std::span<const double> w) const;
  double beta_b(std::span<const double> w) const;
};

/// n1 = round(n * rc_fraction) leading rows are right-censored.
FusedSample generate_dataset(const DgpSpec& dgp, std::size_t n, RngStream& stream);

/// E_W[P(T > t* | W)] over the covariate law of the chosen population
/// (source -1: pooled law of the unshifted design).
double true_phi(const DgpSpec& dgp, double t_star, int source = -1);

}  // namespace survfuse

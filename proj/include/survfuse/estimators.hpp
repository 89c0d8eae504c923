/*
 * Copyright 2026 The survfuse Authors
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "survfuse/data.hpp"
#include "survfuse/fredholm.hpp"
#include "survfuse/nuisance.hpp"

namespace survfuse {

enum class EstimatorKind { kCsOnly, kRcOnly, kFusionDr, kFusionEff, kShift0, kShift1, kNaiveIvw };

/// Short names: cs, rc, dr, eff, shift0, shift1, ivw.
std::string to_string(EstimatorKind k);
EstimatorKind parse_estimator_kind(const std::string& name);

/// The three summands of each gradient value; rc + cs + mu == gradient.
struct GradientParts {
  std::vector<double> rc, cs, mu;
};

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
  double length() const { return upper - lower; }
};

struct EstimateResult {
  std::string estimand;  // "phi(t*)", "phi_0(t*)" or "phi_1(t*)"
  EstimatorKind kind = EstimatorKind::kFusionDr;
  double t_star = 0.0;
  double alpha = 0.05;
  double point = 0.0;
  double se = 0.0;
  Interval ci;
  double plug_in = 0.0;  // (weighted) mean of mu-hat before the correction
  std::vector<double> gradient;
  GradientParts parts;
  std::string provenance;
  std::vector<std::string> warnings;
  std::vector<std::pair<std::string, double>> diagnostics;
};

struct EstimationOptions {
  double alpha = 0.05;
  std::size_t grid_points = 2000;
  std::optional<double> pi;                // overrides the sample's pi
  std::optional<InspectionWindow> window;  // default: the inspection model's window
  SolveMethod method = SolveMethod::kBanded;
  unsigned threads = 1;
  // current-status-only estimator
  std::size_t subsamples = 200;
  std::uint64_t seed = 1;
};

/// point +- z_{1-alpha/2} se.
Interval wald_ci(double point, double se, double alpha);

EstimateResult estimate_rc_only(const FusedSample& sample, const NuisanceBundle& nuisances, double t_star,
                                const EstimationOptions& opts = {});
EstimateResult estimate_fusion_dr(const FusedSample& sample, const NuisanceBundle& nuisances, double t_star,
                                  const EstimationOptions& opts = {});
EstimateResult estimate_fusion_eff(const FusedSample& sample, const NuisanceBundle& nuisances, double t_star,
                                   const EstimationOptions& opts = {});
/// Target population S = target (0 or 1); needs a density-ratio model.
EstimateResult estimate_covariate_shift(const FusedSample& sample, const NuisanceBundle& nuisances, double t_star,
                                        int target, const EstimationOptions& opts = {});

/// Several one-step estimators sharing one pass over the covariate values.
/// kCsOnly and kNaiveIvw are not accepted here.
std::vector<EstimateResult> estimate_one_step(const FusedSample& sample, const NuisanceBundle& nuisances,
                                              double t_star, std::span<const EstimatorKind> kinds,
                                              const EstimationOptions& opts = {});

/// Regression-adjusted isotonic estimator from the current-status rows alone,
/// with an m-out-of-n subsampling interval. The inspection density is fitted
/// by kernel smoothing on the rows used.
EstimateResult estimate_cs_only(const FusedSample& sample, double t_star, const EstimationOptions& opts = {});

/// Inverse-variance weighted combination; carries no asymptotic guarantee.
EstimateResult naive_ivw_combine(const EstimateResult& a, const EstimateResult& b);

}  // namespace survfuse

/*
 * Copyright 2026 The survfuse Authors
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "survfuse/dgp.hpp"
#include "survfuse/estimators.hpp"
#include "survfuse/nuisance.hpp"

namespace survfuse {

enum class NuisanceMode { kFitted, kOracle, kMisspecEvent, kMisspecGR };

/// fitted | oracle | misspec-event | misspec-gR
std::string to_string(NuisanceMode m);
NuisanceMode parse_nuisance_mode(const std::string& name);

struct SimConfig {
  std::string dgp = "paper";
  std::vector<std::size_t> n_total{300, 600, 1500};
  std::vector<double> t_star{0.2, 0.7, 0.9};
  std::size_t replications = 500;
  std::uint64_t seed = 1;
  std::vector<EstimatorKind> estimators{EstimatorKind::kCsOnly, EstimatorKind::kRcOnly, EstimatorKind::kFusionDr,
                                        EstimatorKind::kFusionEff};
  NuisanceMode nuisance = NuisanceMode::kFitted;
  double alpha = 0.05;
  HazardFamily event_family = HazardFamily::kLinearRate;
  HazardFamily censoring_family = HazardFamily::kLinearRate;
  std::size_t grid_points = 2000;
  std::size_t cs_subsamples = 200;
  double failure_cap = 0.02;
  unsigned threads = 0;  // 0: available parallelism

  /// Parses a JSON object; unknown keys and ill-typed values are rejected.
  static SimConfig from_json(const std::string& text);
  std::string to_json() const;
  void validate() const;
};

/// One (estimator, n, t*) cell of a simulation report.
struct SimCell {
  EstimatorKind estimator = EstimatorKind::kFusionDr;
  std::size_t n = 0;
  double t_star = 0.0;
  double truth = 0.0;
  std::size_t replications = 0;  // successful
  std::size_t failures = 0;
  std::size_t not_identified = 0;
  double mean_point = 0.0;
  double bias = 0.0;
  double mse = 0.0;
  double sd_point = 0.0;
  double mean_se = 0.0;
  double mean_ci_length = 0.0;
  double coverage = 0.0;
};

struct SimReport {
  SimConfig config;
  std::vector<SimCell> cells;
  bool valid = true;
  std::vector<std::string> notes;

  const SimCell& cell(EstimatorKind k, std::size_t n, double t_star) const;
  std::string to_csv() const;
  std::string to_json() const;
};

SimReport run_replications(const SimConfig& config);

struct RateFit {
  EstimatorKind estimator = EstimatorKind::kFusionDr;
  std::vector<double> log_n, log_mse;
  double slope = 0.0;
  double intercept = 0.0;
};

struct RateStudy {
  double t_star = 0.0;
  std::vector<RateFit> fits;
  bool valid = true;

  const RateFit& fit(EstimatorKind k) const;
  std::string to_csv() const;
};

/// OLS of log MSE on log n per estimator; needs >= 3 sample sizes and one t*.
RateStudy rate_study(const SimReport& report);
RateStudy rate_study(const SimConfig& config);

/// Nuisances for one simulated sample under the given mode.
NuisanceBundle simulation_bundle(const SimConfig& config, const DgpSpec& dgp, const FusedSample& sample);

}  // namespace survfuse

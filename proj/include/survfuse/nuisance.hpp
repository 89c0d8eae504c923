/*
 * Copyright 2026 The survfuse Authors
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */
#pragma once

#include <cmath>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "survfuse/data.hpp"
#include "survfuse/dgp.hpp"
#include "survfuse/numerics.hpp"

namespace survfuse {

using Covariate = std::span<const double>;

inline constexpr double kZetaNum = 1e-4;   // clip for F on the inspection window
inline constexpr double kEpsGamma = 1e-3;  // floor for the censoring survival
inline constexpr double kRateFloor = 1e-4; // floor of the linear-rate link

/// Linear-rate link: kRateFloor * (1 + softplus((eta - kRateFloor) / kRateFloor)).
/// Equal to eta once eta exceeds the floor by a few hundred floors, bounded
/// below by the floor, and smooth, so the likelihood has no kink there.
inline double linear_rate_link(double eta) {
  const double z = (eta - kRateFloor) / kRateFloor;
  return kRateFloor * (1.0 + (z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z))));
}

/// Conditional law of a non-negative time given W, described by its
/// cumulative hazard. Used for the event time T and the censoring time R.
class HazardModel {
 public:
  virtual ~HazardModel() = default;
  virtual double cum_hazard(double t, Covariate w) const = 0;
  virtual double hazard(double t, Covariate w) const = 0;
  virtual std::string describe() const = 0;
  /// True for the censoring model fitted on data without any censoring.
  virtual bool degenerate() const { return false; }

  /// Survival at many times for one covariate value.
  virtual void survival_grid(std::span<const double> t, Covariate w, double* out) const;

  double survival(double t, Covariate w) const { return std::exp(-cum_hazard(t, w)); }
  double cdf(double t, Covariate w) const { return -std::expm1(-cum_hazard(t, w)); }
  double density(double t, Covariate w) const { return hazard(t, w) * survival(t, w); }
};

enum class HazardFamily { kLinearRate, kLogLinearRate, kWeibull };

HazardFamily parse_hazard_family(const std::string& name);
std::string to_string(HazardFamily f);

/// phi(w) = (w, pairwise products), minus constant or collinear columns.
class FeatureMap {
 public:
  FeatureMap() = default;
  /// Keeps every candidate feature.
  explicit FeatureMap(std::size_t dim);
  /// Drops features that are constant or linearly dependent on the data rows.
  static FeatureMap build(const std::vector<std::vector<double>>& rows);
  /// Intercept-only map for a d-dimensional covariate.
  static FeatureMap intercept_only(std::size_t dim);

  std::size_t dim() const { return dim_; }
  /// Number of columns including the intercept.
  std::size_t width() const { return 1 + kept_.size(); }
  void row(Covariate w, double* out) const;
  Eigen::MatrixXd design(const std::vector<std::vector<double>>& rows) const;
  std::vector<std::string> names() const;

 private:
  static double candidate(Covariate w, std::size_t dim, std::size_t k);
  std::size_t dim_ = 0;
  std::vector<std::size_t> kept_;  // indices into the candidate list
};

struct FitTrace {
  int iterations = 0;
  std::vector<double> grad_norms;
};

/// Lambda(t|w) = rho(w) t^k with a linear (floored) or log-linear rate.
class ParametricHazard final : public HazardModel {
 public:
  ParametricHazard(HazardFamily family, FeatureMap features, std::vector<double> beta, double log_shape = 0.0);

  double cum_hazard(double t, Covariate w) const override;
  double hazard(double t, Covariate w) const override;
  std::string describe() const override;
  void survival_grid(std::span<const double> t, Covariate w, double* out) const override;

  double rate(Covariate w) const;
  double shape() const { return std::exp(log_shape_); }
  HazardFamily family() const { return family_; }
  const std::vector<double>& beta() const { return beta_; }
  const FeatureMap& features() const { return features_; }
  const FitTrace& trace() const { return trace_; }
  void set_trace(FitTrace t) { trace_ = std::move(t); }

 private:
  HazardFamily family_;
  FeatureMap features_;
  std::vector<double> beta_;
  double log_shape_;
  FitTrace trace_;
};

/// Zero hazard: survival identically one.
class NullHazard final : public HazardModel {
 public:
  double cum_hazard(double, Covariate) const override { return 0.0; }
  double hazard(double, Covariate) const override { return 0.0; }
  std::string describe() const override { return "null hazard (no censoring observed)"; }
  bool degenerate() const override { return true; }
};

/// Conditional density g(c|w) and CDF G(c|w) of the inspection time,
/// supported on the inspection window.
class InspectionModel {
 public:
  explicit InspectionModel(InspectionWindow win) : window_(win) {}
  virtual ~InspectionModel() = default;
  virtual double density(double c, Covariate w) const = 0;
  virtual double cdf(double c, Covariate w) const = 0;
  virtual std::string describe() const = 0;
  /// G(points[k] | row i of ws); rows of the result follow the rows of ws.
  virtual Eigen::MatrixXd cdf_matrix(const Eigen::MatrixXd& ws, std::span<const double> points) const;
  /// g(points[k] | row i of ws).
  virtual Eigen::MatrixXd density_matrix(const Eigen::MatrixXd& ws, std::span<const double> points) const;
  const InspectionWindow& window() const { return window_; }

 private:
  InspectionWindow window_;
};

/// Nadaraya-Watson conditional density with Gaussian kernels; discrete
/// covariate coordinates use exact-match kernels. Renormalised analytically
/// over the window.
class KernelInspection final : public InspectionModel {
 public:
  KernelInspection(InspectionWindow win, std::vector<double> c, std::vector<std::vector<double>> w,
                   double bandwidth_c, std::vector<double> bandwidth_w, std::vector<bool> discrete);
  double density(double c, Covariate w) const override;
  double cdf(double c, Covariate w) const override;
  std::string describe() const override;
  Eigen::MatrixXd cdf_matrix(const Eigen::MatrixXd& ws, std::span<const double> points) const override;
  Eigen::MatrixXd density_matrix(const Eigen::MatrixXd& ws, std::span<const double> points) const override;

  double bandwidth_c() const { return hc_; }
  const std::vector<double>& bandwidth_w() const { return hw_; }
  const std::vector<bool>& discrete() const { return discrete_; }
  /// Normalised kernel weights of the stored rows at w.
  void weights(Covariate w, double* out) const;

 private:
  std::vector<double> c_;
  std::vector<std::vector<double>> w_;
  double hc_;
  std::vector<double> hw_;
  std::vector<bool> discrete_;
  std::vector<double> lo_cdf_, norm_cols_;  // Phi((c_l - C_i)/h), Phi((c_u-C_i)/h) - Phi((c_l-C_i)/h)
};

/// C = c_l + (c_u - c_l) Beta(1, b(w)).
class BetaInspection final : public InspectionModel {
 public:
  explicit BetaInspection(DgpSpec dgp);
  double density(double c, Covariate w) const override;
  double cdf(double c, Covariate w) const override;
  std::string describe() const override { return "oracle Beta(1,b(w)) inspection law"; }

 private:
  DgpSpec dgp_;
};

class UniformInspection final : public InspectionModel {
 public:
  explicit UniformInspection(InspectionWindow win) : InspectionModel(win) {}
  double density(double c, Covariate w) const override;
  double cdf(double c, Covariate w) const override;
  std::string describe() const override { return "uniform inspection law on the window"; }
};

/// r(w) = dP_{1,W}/dP_{0,W}(w), clipped to [1/c0, c0].
class DensityRatioModel {
 public:
  virtual ~DensityRatioModel() = default;
  virtual double ratio(Covariate w) const = 0;
  virtual std::string describe() const = 0;
  virtual double clip() const { return 20.0; }
};

class ConstantRatio final : public DensityRatioModel {
 public:
  double ratio(Covariate) const override { return 1.0; }
  std::string describe() const override { return "constant density ratio 1"; }
};

class LogisticRatio final : public DensityRatioModel {
 public:
  LogisticRatio(FeatureMap features, std::vector<double> beta, double prior_odds, double c0);
  double ratio(Covariate w) const override;
  std::string describe() const override { return "logistic propensity density ratio"; }
  double clip() const override { return c0_; }
  /// Fraction of the given covariates at which the clip is active.
  double saturation(const std::vector<std::vector<double>>& ws) const;

 private:
  FeatureMap features_;
  std::vector<double> beta_;
  double prior_odds_;  // n0 / n1
  double c0_;
};

/// Exact ratio for the shifted design: W1|S=1 uniform, W1|S=0 density 2w.
class ShiftOracleRatio final : public DensityRatioModel {
 public:
  explicit ShiftOracleRatio(double c0 = 20.0) : c0_(c0) {}
  double ratio(Covariate w) const override;
  std::string describe() const override { return "oracle density ratio 1/(2 w1)"; }
  double clip() const override { return c0_; }

 private:
  double c0_;
};

struct NuisanceBundle {
  std::shared_ptr<const HazardModel> event;
  std::shared_ptr<const HazardModel> censoring;
  std::shared_ptr<const InspectionModel> inspection;
  std::shared_ptr<const DensityRatioModel> ratio;  // optional
  std::string provenance;
  std::vector<std::string> warnings;
};

struct FitOptions {
  HazardFamily event_family = HazardFamily::kLinearRate;
  HazardFamily censoring_family = HazardFamily::kLinearRate;
  std::optional<double> bandwidth_c;
  std::vector<double> bandwidth_w;  // empty: Silverman per coordinate
  std::optional<InspectionWindow> window;
  bool fit_ratio = false;
  double ratio_clip = 20.0;
};

std::shared_ptr<const ParametricHazard> fit_event_model(const FusedSample& sample, HazardFamily family);
std::shared_ptr<const HazardModel> fit_censoring_model(const FusedSample& sample, HazardFamily family);
std::shared_ptr<const KernelInspection> fit_inspection_density(const FusedSample& sample,
                                                               const FitOptions& opts = {});
std::shared_ptr<const LogisticRatio> fit_density_ratio(const FusedSample& sample, double c0 = 20.0);

NuisanceBundle fit_bundle(const FusedSample& sample, const FitOptions& opts = {});
NuisanceBundle oracle_bundle(const DgpSpec& dgp);

enum class Misspecification { kEvent, kInspectionCensoring };
NuisanceBundle misspecified_bundle(const DgpSpec& dgp, Misspecification which);

/// Silverman's rule 0.9 min(sd, IQR/1.34) n^{-1/5}.
double silverman_bandwidth(const std::vector<double>& x);

/// Logistic regression by Newton-Raphson on standardised columns. The first
/// column of x must be the intercept. Throws a fit error on separation.
std::vector<double> fit_logistic(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double max_norm = 50.0);

/// E[h(T) | T > u, W=w] with h a step function on the grid: the mass of each
/// grid cell (u_{i-1}, u_i] is carried by h(u_i) and the last point carries
/// the tail beyond the grid.
double truncated_expectation(const StepFunctionOnGrid& h, const HazardModel& event, double u, Covariate w);

}  // namespace survfuse

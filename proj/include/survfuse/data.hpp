/*
 * Copyright 2026 The survfuse Authors
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */
#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace survfuse {

/// One fused record. Right-censored rows (source=1) carry (y, delta_r);
/// current-status rows (source=0) carry (c, delta_c). The unused pair is NaN / -1.
struct FusedObservation {
  int source = 1;
  std::vector<double> w;
  double y = 0.0;
  int delta_r = -1;
  double c = 0.0;
  int delta_c = -1;

  static FusedObservation right_censored(std::vector<double> w, double y, int delta_r);
  static FusedObservation current_status(std::vector<double> w, double c, int delta_c);
};

class FusedSample {
 public:
  FusedSample() = default;
  /// Validates every row; pi defaults to n1/n.
  explicit FusedSample(std::vector<FusedObservation> obs, std::optional<double> pi = std::nullopt);

  std::size_t size() const { return obs_.size(); }
  std::size_t n1() const { return n1_; }
  std::size_t n0() const { return obs_.size() - n1_; }
  std::size_t dim() const { return dim_; }
  double pi() const { return pi_; }
  bool pi_is_design() const { return pi_design_; }
  const FusedObservation& operator[](std::size_t i) const { return obs_[i]; }
  const std::vector<FusedObservation>& observations() const { return obs_; }

  /// Largest observed Y or C.
  double max_time() const;
  std::vector<double> inspection_times() const;

 private:
  std::vector<FusedObservation> obs_;
  std::size_t n1_ = 0;
  std::size_t dim_ = 0;
  double pi_ = 0.0;
  bool pi_design_ = false;
};

struct InspectionWindow {
  double c_lower = 0.0;
  double c_upper = 0.0;
  bool contains(double c) const { return c >= c_lower && c <= c_upper; }
};

/// Empirical quantile with linear interpolation between order statistics.
double empirical_quantile(std::vector<double> v, double q);

/// Trim quantiles of the current-status inspection times (default: min/max).
InspectionWindow inspection_window(const FusedSample& sample, double lo_q = 0.0, double hi_q = 1.0);

/// Drops current-status rows outside the window. Returns the number dropped.
FusedSample restrict_to_window(const FusedSample& sample, const InspectionWindow& win, std::size_t* dropped);

FusedSample read_csv(const std::string& path, std::optional<double> pi = std::nullopt);
FusedSample parse_csv(const std::string& text, std::optional<double> pi = std::nullopt);
std::string to_csv(const FusedSample& sample);
void write_csv(const FusedSample& sample, const std::string& path);

}  // namespace survfuse

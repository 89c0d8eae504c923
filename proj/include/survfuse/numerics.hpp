/*
 * Copyright 2026 The survfuse Authors
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */
#pragma once

#include <cstdint>
#include <functional>
#include <mutex>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace survfuse {

/// Strictly increasing, non-negative time points (at least two).
class TimeGrid {
 public:
  TimeGrid() = default;
  explicit TimeGrid(std::vector<double> points);

  static TimeGrid uniform(double lo, double hi, std::size_t n);
  /// Uniform grid on [0, t_max] merged with extra points (deduplicated).
  static TimeGrid augmented(double t_max, std::size_t n, std::span<const double> extra);

  std::size_t size() const { return points_.size(); }
  double operator[](std::size_t i) const { return points_[i]; }
  const std::vector<double>& points() const { return points_; }
  double front() const { return points_.front(); }
  double back() const { return points_.back(); }
  double spacing(std::size_t i) const { return points_[i + 1] - points_[i]; }

  /// Index of an exact grid point; throws a range error if t is not on the grid.
  std::size_t index_of(double t) const;
  /// Largest index with points[i] <= t (t must lie in the span).
  std::size_t floor_index(double t) const;

 private:
  std::vector<double> points_;
};

struct StepFunctionOnGrid {
  TimeGrid grid;
  std::vector<double> values;
};

double trapezoid_integral(std::span<const double> f, const TimeGrid& grid);

struct DenseSolve {
  Eigen::VectorXd x;
  double rcond = 0.0;
  bool regularized = false;
};

/// LU with partial pivoting; ridge fallback when the reciprocal condition
/// estimate drops below 1e-12.
DenseSolve solve_dense_linear(const Eigen::MatrixXd& a, const Eigen::VectorXd& b);

struct LeastSquares {
  Eigen::VectorXd coef;
  Eigen::Index rank = 0;
  bool rank_deficient = false;
};

LeastSquares least_squares(const Eigen::MatrixXd& design, const Eigen::VectorXd& target);

/// Weighted nondecreasing least-squares fit (pool adjacent violators).
std::vector<double> pava_isotonic(std::span<const double> y, std::span<const double> weights);

/*
 * Solver for the semiseparable systems produced by the integral equations:
 *
 *   d_j x_j + c_j (R_j P_j + V_j) = r_j,   j = 0..B-1
 *   P_j = sum_{i<j} q_i x_i,   V_j = sum_{i>=j} q_i R_i x_i
 *
 * Solved in O(B) by a Riccati sweep V_j = alpha_j P_j + beta_j when d > 0,
 * c, q >= 0 and R is nonincreasing (the case for both integral equations);
 * otherwise as a banded system in (P_j, V_j, x_j) with kl=3, ku=2.
 */
class SemiseparableSystem {
 public:
  SemiseparableSystem(std::vector<double> d, std::vector<double> c, std::vector<double> q,
                      std::vector<double> r_tail);

  std::size_t size() const { return d_.size(); }
  /// Solves for each column of rhs (B x k); returns x (B x k).
  Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const;
  /// Applies the operator sum_{k>j} Q_k * (sum_{i<k} q_i x_i) = R_j P_j + V_j.
  std::vector<double> coupling(std::span<const double> x) const;
  /// Reciprocal 1-norm condition estimate of the equivalent banded matrix (computed on first use).
  double rcond() const;

 private:
  void factor_band();

  std::vector<double> d_, c_, q_, r_;
  bool sweep_ = false;
  std::vector<double> s_, den_;  // alpha_j + R_j and the sweep denominators
  bool banded_ = false;
  std::vector<double> ab_;
  std::vector<int> ipiv_;
  int n_ = 0;
  double anorm_ = 0.0;
  mutable std::once_flag rcond_once_;
  mutable double rcond_ = 0.0;
};

double normal_cdf(double x);
double normal_quantile(double p);

/// Reproducible random stream keyed on (seed, stream id).
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream);
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  std::uint64_t next_u64() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

struct Distribution {
  enum class Kind { kUniform, kBernoulli, kExponential, kBeta };
  Kind kind = Kind::kUniform;
  double a = 0.0;  // uniform lo | bernoulli p | exponential rate | beta a
  double b = 1.0;  // uniform hi | beta b

  static Distribution uniform(double lo, double hi) { return {Kind::kUniform, lo, hi}; }
  static Distribution bernoulli(double p) { return {Kind::kBernoulli, p, 0.0}; }
  static Distribution exponential(double rate) { return {Kind::kExponential, rate, 0.0}; }
  static Distribution beta(double a, double b) { return {Kind::kBeta, a, b}; }
};

double rng_draw(const Distribution& dist, RngStream& stream);

/// Runs fn(i) for i in [0, n) over a fixed pool; results must be written by index.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn);
unsigned default_threads();

}  // namespace survfuse

/*
 * Copyright 2026 The survfuse Authors
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */
#include "survfuse/numerics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>

#include <lapacke.h>

#include "survfuse/error.hpp"

namespace survfuse {

// ---------------------------------------------------------------- grids

TimeGrid::TimeGrid(std::vector<double> points) : points_(std::move(points)) {
  if (points_.size() < 2) fail(ErrorKind::kArgument, "time grid needs at least two points");
  for (std::size_t i = 0; i < points_.size(); ++i) {
    if (!std::isfinite(points_[i]) || points_[i] < 0.0)
      fail(ErrorKind::kArgument, "time grid points must be finite and non-negative");
    if (i > 0 && !(points_[i] > points_[i - 1]))
      fail(ErrorKind::kArgument, "time grid must be strictly increasing");
  }
}

TimeGrid TimeGrid::uniform(double lo, double hi, std::size_t n) {
  if (n < 2 || !(hi > lo)) fail(ErrorKind::kArgument, "bad uniform grid specification");
  std::vector<double> p(n);
  for (std::size_t i = 0; i < n; ++i)
    p[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  p.back() = hi;
  return TimeGrid(std::move(p));
}

TimeGrid TimeGrid::augmented(double t_max, std::size_t n, std::span<const double> extra) {
  std::vector<double> p = uniform(0.0, t_max, n).points();
  p.insert(p.end(), extra.begin(), extra.end());
  std::sort(p.begin(), p.end());
  p.erase(std::unique(p.begin(), p.end()), p.end());
  return TimeGrid(std::move(p));
}

std::size_t TimeGrid::index_of(double t) const {
  auto it = std::lower_bound(points_.begin(), points_.end(), t);
  if (it == points_.end() || *it != t) fail(ErrorKind::kRange, "time is not a grid point");
  return static_cast<std::size_t>(it - points_.begin());
}

std::size_t TimeGrid::floor_index(double t) const {
  if (t < points_.front() || t > points_.back()) fail(ErrorKind::kRange, "time outside grid span");
  auto it = std::upper_bound(points_.begin(), points_.end(), t);
  return static_cast<std::size_t>(it - points_.begin()) - 1;
}

double trapezoid_integral(std::span<const double> f, const TimeGrid& grid) {
  if (f.size() != grid.size()) fail(ErrorKind::kArgument, "integrand length does not match grid");
  double s = 0.0;
  for (std::size_t j = 0; j < f.size(); ++j)
    if (!std::isfinite(f[j])) fail(ErrorKind::kNumeric, "non-finite integrand value");
  for (std::size_t j = 0; j + 1 < f.size(); ++j) s += 0.5 * (f[j] + f[j + 1]) * grid.spacing(j);
  return s;
}

// --------------------------------------------------------- dense algebra

DenseSolve solve_dense_linear(const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
  if (a.rows() != a.cols() || a.rows() != b.size())
    fail(ErrorKind::kArgument, "solve_dense_linear: nonconforming dimensions");
  if (!a.allFinite() || !b.allFinite()) fail(ErrorKind::kNumeric, "non-finite system entries");

  DenseSolve out;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
  out.rcond = lu.rcond();
  if (!(out.rcond >= 1e-12)) {
    const double rho = 1e-10 * a.trace() / static_cast<double>(a.rows());
    Eigen::MatrixXd ar = a;
    ar.diagonal().array() += rho;
    lu.compute(ar);
    out.regularized = true;
    out.rcond = lu.rcond();
    const auto& u = lu.matrixLU();
    for (Eigen::Index i = 0; i < u.rows(); ++i)
      if (u(i, i) == 0.0) fail(ErrorKind::kSingular, "system is singular after ridge regularisation");
  }
  out.x = lu.solve(b);
  if (!out.x.allFinite()) fail(ErrorKind::kSingular, "linear solve produced non-finite values");
  // one step of iterative refinement keeps the back-substitution bound tight
  if (!out.regularized) out.x += lu.solve(b - a * out.x);
  return out;
}

LeastSquares least_squares(const Eigen::MatrixXd& design, const Eigen::VectorXd& target) {
  if (design.rows() != target.size()) fail(ErrorKind::kArgument, "least_squares: row mismatch");
  if (!design.allFinite() || !target.allFinite())
    fail(ErrorKind::kNumeric, "least_squares: non-finite entries");
  LeastSquares out;
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(design);
  out.rank = cod.rank();
  out.rank_deficient = out.rank < design.cols();
  out.coef = cod.solve(target);
  return out;
}

std::vector<double> pava_isotonic(std::span<const double> y, std::span<const double> weights) {
  if (y.empty()) fail(ErrorKind::kArgument, "pava_isotonic: empty input");
  if (y.size() != weights.size()) fail(ErrorKind::kArgument, "pava_isotonic: length mismatch");
  struct Block {
    double mean, weight;
    std::size_t count;
  };
  std::vector<Block> blocks;
  blocks.reserve(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!(weights[i] > 0.0)) fail(ErrorKind::kArgument, "pava_isotonic: weights must be positive");
    blocks.push_back({y[i], weights[i], 1});
    while (blocks.size() > 1 && blocks[blocks.size() - 2].mean > blocks.back().mean) {
      Block top = blocks.back();
      blocks.pop_back();
      Block& prev = blocks.back();
      const double w = prev.weight + top.weight;
      prev.mean = (prev.mean * prev.weight + top.mean * top.weight) / w;
      prev.weight = w;
      prev.count += top.count;
    }
  }
  std::vector<double> out;
  out.reserve(y.size());
  for (const Block& b : blocks) out.insert(out.end(), b.count, b.mean);
  return out;
}

// ----------------------------------------------- semiseparable systems

namespace {
constexpr int kKl = 3;
constexpr int kKu = 2;
constexpr int kLdab = 2 * kKl + kKu + 1;
}  // namespace

SemiseparableSystem::SemiseparableSystem(std::vector<double> d, std::vector<double> c,
                                         std::vector<double> q, std::vector<double> r_tail)
    : d_(std::move(d)), c_(std::move(c)), q_(std::move(q)), r_(std::move(r_tail)) {
  const std::size_t b = d_.size();
  if (b == 0 || c_.size() != b || q_.size() != b || r_.size() != b)
    fail(ErrorKind::kArgument, "semiseparable system: inconsistent sizes");
  n_ = static_cast<int>(3 * b + 1);
  bool monotone = true;
  for (std::size_t j = 0; j < b; ++j) {
    if (!std::isfinite(d_[j]) || !std::isfinite(c_[j]) || !std::isfinite(q_[j]) || !std::isfinite(r_[j]))
      fail(ErrorKind::kNumeric, "non-finite coefficient in integral-equation system");
    monotone = monotone && d_[j] > 0.0 && c_[j] >= 0.0 && q_[j] >= 0.0 && r_[j] >= 0.0 &&
               (j + 1 == b || r_[j] >= r_[j + 1]);
  }
  if (!monotone) {
    factor_band();
    return;
  }
  // Riccati sweep V_j = alpha_j P_j + beta_j from V_B = 0. With the sign pattern
  // checked above every denominator is >= 1, so the sweep cannot blow up.
  sweep_ = true;
  s_.resize(b);
  den_.resize(b);
  double s_next = 0.0, r_next = 0.0;
  for (std::size_t j = b; j-- > 0;) {
    const double t = s_next - r_next + r_[j];  // alpha_{j+1} + R_j
    den_[j] = 1.0 + q_[j] * c_[j] / d_[j] * t;
    s_[j] = t / den_[j];
    s_next = s_[j];
    r_next = r_[j];
  }
}

void SemiseparableSystem::factor_band() {
  const std::size_t b = d_.size();
  ab_.assign(static_cast<std::size_t>(kLdab) * n_, 0.0);
  auto set = [&](int row, int col, double v) {
    ab_[static_cast<std::size_t>(col) * kLdab + (kKl + kKu + row - col)] = v;
  };
  // unknown layout: P_j -> 3j, V_j -> 3j+1, x_j -> 3j+2, V_B -> 3B
  set(0, 0, 1.0);
  for (std::size_t jj = 0; jj < b; ++jj) {
    const int j = static_cast<int>(jj);
    set(3 * j + 1, 3 * j, c_[jj] * r_[jj]);
    set(3 * j + 1, 3 * j + 1, c_[jj]);
    set(3 * j + 1, 3 * j + 2, d_[jj]);
    set(3 * j + 2, 3 * j + 1, 1.0);
    set(3 * j + 2, 3 * j + 2, -q_[jj] * r_[jj]);
    set(3 * j + 2, jj + 1 < b ? 3 * j + 4 : n_ - 1, -1.0);  // V_{j+1}
    if (jj + 1 < b) {
      set(3 * j + 3, 3 * j + 3, 1.0);
      set(3 * j + 3, 3 * j, -1.0);
      set(3 * j + 3, 3 * j + 2, -q_[jj]);
    }
  }
  set(n_ - 1, n_ - 1, 1.0);

  anorm_ = 0.0;
  for (int col = 0; col < n_; ++col) {
    double s = 0.0;
    for (int k = 0; k < kLdab; ++k) s += std::abs(ab_[static_cast<std::size_t>(col) * kLdab + k]);
    anorm_ = std::max(anorm_, s);
  }
  // Band LU with partial pivoting in LAPACK's dgbtf2 layout and pivot convention
  // (so dgbcon can run on the factor). Inlined because with kl=3, ku=2 the
  // per-column BLAS calls of the library routine dominate the cost.
  ipiv_.assign(n_, 0);
  const int kv = kKl + kKu;
  auto at = [&](int i, int col) -> double& { return ab_[static_cast<std::size_t>(col) * kLdab + kv + i - col]; };
  int ju = 0;
  for (int j = 0; j < n_; ++j) {
    const int km = std::min(kKl, n_ - 1 - j);
    int jp = 0;
    double best = std::abs(at(j, j));
    for (int k = 1; k <= km; ++k)
      if (std::abs(at(j + k, j)) > best) {
        best = std::abs(at(j + k, j));
        jp = k;
      }
    ipiv_[j] = j + jp + 1;
    if (best == 0.0) fail(ErrorKind::kSingular, "integral-equation system is singular");
    ju = std::max(ju, std::min(j + kKu + jp, n_ - 1));
    if (jp != 0)
      for (int col = j; col <= ju; ++col) std::swap(at(j, col), at(j + jp, col));
    const double inv = 1.0 / at(j, j);
    for (int k = 1; k <= km; ++k) at(j + k, j) *= inv;
    for (int col = j + 1; col <= ju; ++col) {
      const double a = at(j, col);
      if (a != 0.0)
        for (int k = 1; k <= km; ++k) at(j + k, col) -= at(j + k, j) * a;
    }
  }
  banded_ = true;
}

double SemiseparableSystem::rcond() const {
  // dgbcon can fall into its O(n^2) scaled path on these systems, so it runs on demand only
  std::call_once(rcond_once_, [this] {
    auto* self = const_cast<SemiseparableSystem*>(this);
    if (!banded_) self->factor_band();
    if (LAPACKE_dgbcon(LAPACK_COL_MAJOR, '1', n_, kKl, kKu, ab_.data(), kLdab, ipiv_.data(), anorm_, &rcond_) != 0)
      rcond_ = 0.0;
  });
  return rcond_;
}

Eigen::MatrixXd SemiseparableSystem::solve(const Eigen::MatrixXd& rhs) const {
  const std::size_t b = d_.size();
  if (static_cast<std::size_t>(rhs.rows()) != b) fail(ErrorKind::kArgument, "rhs has wrong length");
  const auto k = rhs.cols();
  Eigen::MatrixXd x(b, k);
  if (sweep_) {
    std::vector<double> beta(b);
    for (Eigen::Index col = 0; col < k; ++col) {
      double beta_next = 0.0;
      for (std::size_t j = b; j-- > 0;) {
        const double t = s_[j] * den_[j];
        beta[j] = (beta_next + q_[j] * t * rhs(j, col) / d_[j]) / den_[j];
        beta_next = beta[j];
      }
      double p = 0.0;
      for (std::size_t j = 0; j < b; ++j) {
        const double xj = (rhs(j, col) - c_[j] * (s_[j] * p + beta[j])) / d_[j];
        x(j, col) = xj;
        p += q_[j] * xj;
      }
    }
  } else {
    Eigen::MatrixXd full = Eigen::MatrixXd::Zero(n_, k);
    for (std::size_t j = 0; j < b; ++j) full.row(3 * j + 1) = rhs.row(j);
    const int kv = kKl + kKu;
    auto at = [&](int i, int col) { return ab_[static_cast<std::size_t>(col) * kLdab + kv + i - col]; };
    for (Eigen::Index c = 0; c < k; ++c) {
      double* y = full.col(c).data();
      for (int j = 0; j + 1 < n_; ++j) {
        const int l = ipiv_[j] - 1;
        if (l != j) std::swap(y[l], y[j]);
        const int lm = std::min(kKl, n_ - 1 - j);
        for (int m = 1; m <= lm; ++m) y[j + m] -= at(j + m, j) * y[j];
      }
      for (int j = n_ - 1; j >= 0; --j) {
        y[j] /= at(j, j);
        for (int i = std::max(0, j - kv); i < j; ++i) y[i] -= at(i, j) * y[j];
      }
    }
    for (std::size_t j = 0; j < b; ++j) x.row(j) = full.row(3 * j + 2);
  }
  if (!x.allFinite()) fail(ErrorKind::kSingular, "integral-equation solve produced non-finite values");
  return x;
}

std::vector<double> SemiseparableSystem::coupling(std::span<const double> x) const {
  const std::size_t b = d_.size();
  std::vector<double> out(b);
  double v = 0.0;
  for (std::size_t j = b; j-- > 0;) {
    v += q_[j] * r_[j] * x[j];
    out[j] = v;
  }
  double p = 0.0;
  for (std::size_t j = 0; j < b; ++j) {
    out[j] += r_[j] * p;
    p += q_[j] * x[j];
  }
  return out;
}

// ------------------------------------------------------- normal law

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    if (p == 0.0) return -std::numeric_limits<double>::infinity();
    if (p == 1.0) return std::numeric_limits<double>::infinity();
    fail(ErrorKind::kArgument, "normal_quantile: p outside [0,1]");
  }
  // Acklam's rational approximation followed by one Halley step
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                             1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                             6.680131188771972e+01,  -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                             -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                             3.754408661907416e+00};
  const double plow = 0.02425;
  double x;
  if (p < plow) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - plow) {
    const double q = p - 0.5, r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double e = normal_cdf(x) - p;
  const double u = e * std::sqrt(2.0 * M_PI) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

// -------------------------------------------------------------- RNG

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream)
    : engine_(splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x632be59bd9b4e019ULL))) {}

double RngStream::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double rng_draw(const Distribution& dist, RngStream& stream) {
  using K = Distribution::Kind;
  switch (dist.kind) {
    case K::kUniform:
      if (!(dist.b > dist.a)) fail(ErrorKind::kArgument, "uniform: need lo < hi");
      return dist.a + (dist.b - dist.a) * stream.uniform();
    case K::kBernoulli:
      if (!(dist.a >= 0.0 && dist.a <= 1.0)) fail(ErrorKind::kArgument, "bernoulli: p outside [0,1]");
      return stream.uniform() < dist.a ? 1.0 : 0.0;
    case K::kExponential:
      if (!(dist.a > 0.0)) fail(ErrorKind::kArgument, "exponential: rate must be positive");
      return -std::log1p(-stream.uniform()) / dist.a;
    case K::kBeta: {
      if (!(dist.a > 0.0 && dist.b > 0.0)) fail(ErrorKind::kArgument, "beta: parameters must be positive");
      const double u = stream.uniform();
      if (dist.a == 1.0) return 1.0 - std::pow(1.0 - u, 1.0 / dist.b);
      if (dist.b == 1.0) return std::pow(u, 1.0 / dist.a);
      fail(ErrorKind::kArgument, "beta: only Beta(1,b) and Beta(a,1) are supported (inversion)");
    }
  }
  fail(ErrorKind::kArgument, "unknown distribution");
}

// ------------------------------------------------------- worker pool

unsigned default_threads() {
  const unsigned h = std::thread::hardware_concurrency();
  return h == 0 ? 1u : h;
}

void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex err_mu;
  {
    std::vector<std::jthread> pool;
    const unsigned k = static_cast<unsigned>(std::min<std::size_t>(threads, n));
    for (unsigned t = 0; t < k; ++t)
      pool.emplace_back([&] {
        for (std::size_t i; (i = next.fetch_add(1)) < n;) {
          try {
            fn(i);
          } catch (...) {
            std::lock_guard lock(err_mu);
            if (!first_error) first_error = std::current_exception();
          }
        }
      });
  }
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace survfuse

/*
 * Copyright 2026 The survfuse Authors
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */
#include "survfuse/fredholm.hpp"

#include <algorithm>
#include <cmath>

#include "survfuse/error.hpp"

namespace survfuse {

namespace {

constexpr double kSurvFloor = 1e-6;  // floor for S inside the eta* assembly

void check_problem(const FredholmProblem& prob, bool need_inspection = true) {
  if (!prob.nuisances || !prob.nuisances->event || (need_inspection && !prob.nuisances->inspection))
    fail(ErrorKind::kArgument, "integral equation needs event and inspection models");
  if (!(prob.pi > 0.0 && prob.pi <= 1.0)) fail(ErrorKind::kArgument, "pi must lie in (0, 1]");
  if (!(prob.t_star > 0.0)) fail(ErrorKind::kArgument, "t* must be positive");
  if (prob.grid.size() < 2) fail(ErrorKind::kArgument, "empty grid");
  if (!(prob.grid.back() > std::max(prob.window.c_upper, prob.t_star)))
    fail(ErrorKind::kArgument, "grid must extend beyond max(c_u, t*)");
  prob.grid.index_of(prob.t_star);  // t* must be a grid point
}

double clip_f(double f) { return std::clamp(f, kZetaNum, 1.0 - kZetaNum); }

// A_j = sum_{k>j} Q_k sum_{i<k} q_i x_i = R_j P_j + V_j, with R_j = sum_{k>j} Q_k
std::vector<double> couple(std::span<const double> q, std::span<const double> r, std::span<const double> x) {
  const std::size_t b = x.size();
  std::vector<double> out(b);
  double v = 0.0;
  for (std::size_t j = b; j-- > 0;) {
    v += q[j] * r[j] * x[j];
    out[j] = v;
  }
  double p = 0.0;
  for (std::size_t j = 0; j < b; ++j) {
    out[j] += r[j] * p;
    p += q[j] * x[j];
  }
  return out;
}

std::vector<double> suffix_after(std::span<const double> v) {
  std::vector<double> r(v.size(), 0.0);
  double s = 0.0;
  for (std::size_t j = v.size(); j-- > 0;) {
    r[j] = s;
    s += v[j];
  }
  return r;
}

struct HCoefficients {
  std::vector<double> q, r, rhs;
  double d = 0.0, c = 0.0, beta = 1.0, one_minus_pi = 0.0;
};

HCoefficients h_coefficients(const FredholmProblem& prob, const CovariateProfile& prof) {
  const std::size_t b = prob.grid.size();
  HCoefficients k;
  std::vector<double> qk(b, 0.0);
  for (std::size_t j = 0; j < b; ++j) {
    if (prof.dG[j] > 0.0) {
      const double fc = clip_f(1.0 - prof.surv[j]);
      qk[j] = prof.dG[j] / (fc * (1.0 - fc));
    }
  }
  k.r = suffix_after(qk);
  k.q = prof.p;
  k.rhs.resize(b);
  for (std::size_t j = 0; j < b; ++j) k.rhs[j] = (prob.grid[j] > prob.t_star ? 1.0 : 0.0) - prof.mu;
  k.one_minus_pi = 1.0 - prob.pi;
  k.d = prob.pi * prob.ratio.alpha;
  k.c = prob.ratio.beta * k.one_minus_pi;
  k.beta = prob.ratio.beta;
  return k;
}

struct EtaCoefficients {
  std::vector<double> d, q, r, rhs;
  double c = 0.0;
};

EtaCoefficients eta_coefficients(const FredholmProblem& prob, const CovariateProfile& prof) {
  const std::size_t b = prob.grid.size();
  EtaCoefficients k;
  std::vector<double> wk(b, 0.0);
  k.d.resize(b);
  k.q.resize(b);
  k.rhs.resize(b);
  for (std::size_t j = 0; j < b; ++j) {
    const double s = std::max(prof.sdisc[j], kSurvFloor);
    k.q[j] = prof.p[j] / s;
    if (prof.dG[j] > 0.0) wk[j] = prof.sigma[j] * prof.sigma[j] * prof.dG[j] / (clip_f(1.0 - prof.surv[j]) * s);
    k.d[j] = prob.pi * prof.gamma[j] * prof.sigma[j];
    k.rhs[j] = prob.grid[j] <= prob.t_star ? -prof.mu : 0.0;
  }
  k.r = suffix_after(wk);
  k.c = 1.0 - prob.pi;
  return k;
}

std::vector<double> left_sums(std::span<const double> x, std::span<const double> q) {
  std::vector<double> out(x.size());
  double s = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    out[j] = s;
    s += x[j] * q[j];
  }
  return out;
}

double sup_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace

TimeGrid problem_grid(double t_max, std::size_t n, double t_star, const InspectionWindow& win,
                      std::span<const double> extra) {
  std::vector<double> pts(extra.begin(), extra.end());
  pts.push_back(t_star);
  pts.push_back(win.c_lower);
  pts.push_back(win.c_upper);
  return TimeGrid::augmented(t_max, n, pts);
}

void finish_profile(CovariateProfile& prof) {
  const std::size_t b = prof.surv.size();
  prof.p.assign(b, 0.0);
  prof.sigma.assign(b, 1.0);
  prof.sdisc.assign(b, 0.0);
  for (std::size_t j = 0; j < b; ++j) {
    prof.sigma[j] = j == 0 ? 1.0 : prof.surv[j - 1];
    prof.sdisc[j] = j + 1 == b ? 0.0 : prof.surv[j];
    prof.p[j] = prof.sigma[j] - prof.sdisc[j];
  }
}

CovariateProfile make_profile(const FredholmProblem& prob, const std::vector<double>* g_on_grid) {
  check_problem(prob, g_on_grid == nullptr);
  const auto& pts = prob.grid.points();
  const std::size_t b = pts.size();
  const NuisanceBundle& nb = *prob.nuisances;
  CovariateProfile prof;
  prof.surv.resize(b);
  nb.event->survival_grid(pts, prob.w, prof.surv.data());
  prof.gamma.assign(b, 1.0);
  if (nb.censoring) {
    nb.censoring->survival_grid(pts, prob.w, prof.gamma.data());
    for (double& g : prof.gamma) g = std::max(g, kEpsGamma);
  }
  std::vector<double> gcdf;
  if (g_on_grid) {
    if (g_on_grid->size() != b) fail(ErrorKind::kArgument, "inspection CDF has wrong length");
    gcdf = *g_on_grid;
  } else {
    gcdf.resize(b);
    for (std::size_t j = 0; j < b; ++j) {
      const double c = pts[j];
      gcdf[j] = c <= prob.window.c_lower ? 0.0
                : c >= prob.window.c_upper ? 1.0
                                           : nb.inspection->cdf(c, prob.w);
    }
  }
  prof.dG.assign(b, 0.0);
  for (std::size_t j = 1; j < b; ++j)
    if (pts[j - 1] >= prob.window.c_lower && pts[j] <= prob.window.c_upper)
      prof.dG[j] = std::max(0.0, gcdf[j] - gcdf[j - 1]);
  prof.mu = nb.event->survival(prob.t_star, prob.w);
  finish_profile(prof);
  return prof;
}

// ------------------------------------------------------------- kernel

double kernel_K(double t, double s, const FredholmProblem& prob) {
  check_problem(prob);
  if (prob.pi == 1.0) return 0.0;
  const auto& win = prob.window;
  const NuisanceBundle& nb = *prob.nuisances;
  std::vector<double> nodes{win.c_lower, win.c_upper};
  for (double u : prob.grid.points())
    if (u > win.c_lower && u < win.c_upper) nodes.push_back(u);
  for (double u : {s, t})
    if (u > win.c_lower && u < win.c_upper) nodes.push_back(u);
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
  double acc = 0.0;
  double g_prev = nb.inspection->cdf(nodes.front(), prob.w);
  for (std::size_t k = 1; k < nodes.size(); ++k) {
    const double g_cur = k + 1 == nodes.size() ? 1.0 : nb.inspection->cdf(nodes[k], prob.w);
    const double dg = g_cur - g_prev;
    g_prev = g_cur;
    const double mid = 0.5 * (nodes[k - 1] + nodes[k]);
    if (mid <= s) continue;
    const double f = clip_f(nb.event->cdf(mid, prob.w));
    acc += mid < t ? dg / (1.0 - f) : -dg / f;
  }
  return (1.0 - prob.pi) / prob.pi * nb.event->density(s, prob.w) * acc;
}

// ---------------------------------------------------------------- h*

std::vector<double> h_residuals(const FredholmProblem& prob, const CovariateProfile& prof,
                                std::span<const double> h) {
  const HCoefficients k = h_coefficients(prob, prof);
  const auto a = couple(k.q, k.r, h);
  double gamma = 0.0;
  for (std::size_t j = 0; j < h.size(); ++j) gamma += prof.p[j] * a[j];
  gamma *= k.one_minus_pi;
  std::vector<double> res(h.size());
  for (std::size_t j = 0; j < h.size(); ++j) res[j] = k.d * h[j] + k.c * a[j] - k.beta * gamma - k.rhs[j];
  return res;
}

void assemble_h_system(const FredholmProblem& prob, const CovariateProfile& prof, Eigen::MatrixXd& a,
                       Eigen::VectorXd& b) {
  const HCoefficients k = h_coefficients(prob, prof);
  const auto n = static_cast<Eigen::Index>(prob.grid.size());
  a.setZero(n + 1, n + 1);
  b.setZero(n + 1);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) a(j, i) = k.c * k.q[i] * k.r[std::max(i, j)];
    a(j, j) += k.d;
    a(j, n) = -k.beta;
    b[j] = k.rhs[j];
  }
  // gamma row: gamma - (1-pi) sum_j p_j A_j = 0
  std::vector<double> cum_p(n + 1, 0.0), cum_pr(n + 1, 0.0);
  for (Eigen::Index j = 0; j < n; ++j) cum_p[j + 1] = cum_p[j] + prof.p[j];
  for (Eigen::Index j = n; j-- > 0;) cum_pr[j] = cum_pr[j + 1] + prof.p[j] * k.r[j];
  for (Eigen::Index i = 0; i < n; ++i)
    a(n, i) = -k.one_minus_pi * k.q[i] * (k.r[i] * cum_p[i + 1] + cum_pr[i + 1]);
  a(n, n) = 1.0;
}

FredholmSolution solve_h_grid(const FredholmProblem& prob, SolveMethod method) {
  return solve_h_grid(prob, make_profile(prob), method);
}

FredholmSolution solve_h_grid(const FredholmProblem& prob, const CovariateProfile& prof, SolveMethod method) {
  check_problem(prob);
  const std::size_t b = prob.grid.size();
  FredholmSolution sol;
  sol.kind = FredholmSolution::Kind::kHStar;
  sol.t_star = prob.t_star;
  sol.values.grid = prob.grid;
  std::vector<double> h(b);
  double gamma = 0.0;
  if (method == SolveMethod::kDense) {
    Eigen::MatrixXd a;
    Eigen::VectorXd rhs;
    assemble_h_system(prob, prof, a, rhs);
    const DenseSolve ds = solve_dense_linear(a, rhs);
    for (std::size_t j = 0; j < b; ++j) h[j] = ds.x[static_cast<Eigen::Index>(j)];
    gamma = ds.x[static_cast<Eigen::Index>(b)];
    sol.rcond = ds.rcond;
    sol.regularized = ds.regularized;
    sol.method = "grid-linear(dense)";
    // residual of the assembled (B+1)-dimensional system
    sol.residual_sup = (a * ds.x - rhs).lpNorm<Eigen::Infinity>();
  } else {
    const HCoefficients k = h_coefficients(prob, prof);
    SemiseparableSystem sys(std::vector<double>(b, k.d), std::vector<double>(b, k.c), k.q, k.r);
    Eigen::MatrixXd rhs(b, 2);
    for (std::size_t j = 0; j < b; ++j) {
      rhs(j, 0) = k.rhs[j];
      rhs(j, 1) = k.beta;
    }
    const Eigen::MatrixXd x = sys.solve(rhs);
    std::vector<double> xr(b), x1(b);
    for (std::size_t j = 0; j < b; ++j) {
      xr[j] = x(j, 0);
      x1[j] = x(j, 1);
    }
    const auto ar = couple(k.q, k.r, xr);
    const auto a1 = couple(k.q, k.r, x1);
    double gr = 0.0, g1 = 0.0;
    for (std::size_t j = 0; j < b; ++j) {
      gr += prof.p[j] * ar[j];
      g1 += prof.p[j] * a1[j];
    }
    gr *= k.one_minus_pi;
    g1 *= k.one_minus_pi;
    if (!(std::abs(1.0 - g1) > 1e-14)) fail(ErrorKind::kSingular, "h* system: gamma coupling is singular");
    gamma = gr / (1.0 - g1);
    for (std::size_t j = 0; j < b; ++j) h[j] = xr[j] + gamma * x1[j];
    if (prob.condition_estimate) sol.rcond = sys.rcond();
    sol.method = "grid-linear";
    // certify against the discrete equations, including the gamma row
    const auto a = couple(k.q, k.r, h);
    double gh = 0.0;
    for (std::size_t j = 0; j < b; ++j) gh += prof.p[j] * a[j];
    gh *= k.one_minus_pi;
    double res = std::abs(gamma - gh);
    for (std::size_t j = 0; j < b; ++j)
      res = std::max(res, std::abs(k.d * h[j] + k.c * a[j] - k.beta * gamma - k.rhs[j]));
    sol.residual_sup = res;
  }
  for (double v : h)
    if (!std::isfinite(v)) fail(ErrorKind::kNumeric, "h* solution is not finite");
  sol.gamma_w = gamma;
  sol.derived = left_sums(h, prof.p);
  double mz = 0.0;
  for (std::size_t j = 0; j < b; ++j) mz += h[j] * prof.p[j];
  sol.mean_zero = mz;
  sol.values.values = std::move(h);
  return sol;
}

// -------------------------------------------------------------- eta*

std::vector<double> eta_residuals(const FredholmProblem& prob, const CovariateProfile& prof,
                                  std::span<const double> eta) {
  const EtaCoefficients k = eta_coefficients(prob, prof);
  const auto a = couple(k.q, k.r, eta);
  std::vector<double> res(eta.size());
  for (std::size_t j = 0; j < eta.size(); ++j) res[j] = k.d[j] * eta[j] + k.c * a[j] - k.rhs[j];
  return res;
}

FredholmSolution solve_eta_grid(const FredholmProblem& prob, SolveMethod method) {
  return solve_eta_grid(prob, make_profile(prob), method);
}

FredholmSolution solve_eta_grid(const FredholmProblem& prob, const CovariateProfile& prof, SolveMethod method) {
  check_problem(prob);
  const std::size_t b = prob.grid.size();
  const EtaCoefficients k = eta_coefficients(prob, prof);
  FredholmSolution sol;
  sol.kind = FredholmSolution::Kind::kEtaStar;
  sol.t_star = prob.t_star;
  sol.values.grid = prob.grid;
  std::vector<double> eta(b);
  if (method == SolveMethod::kDense) {
    const auto n = static_cast<Eigen::Index>(b);
    Eigen::MatrixXd a(n, n);
    Eigen::VectorXd rhs(n);
    for (Eigen::Index j = 0; j < n; ++j) {
      for (Eigen::Index i = 0; i < n; ++i) a(j, i) = k.c * k.q[i] * k.r[std::max(i, j)];
      a(j, j) += k.d[j];
      rhs[j] = k.rhs[j];
    }
    const DenseSolve ds = solve_dense_linear(a, rhs);
    for (std::size_t j = 0; j < b; ++j) eta[j] = ds.x[static_cast<Eigen::Index>(j)];
    sol.rcond = ds.rcond;
    sol.regularized = ds.regularized;
    sol.method = "grid-linear(dense)";
  } else {
    SemiseparableSystem sys(k.d, std::vector<double>(b, k.c), k.q, k.r);
    Eigen::MatrixXd rhs(b, 1);
    for (std::size_t j = 0; j < b; ++j) rhs(j, 0) = k.rhs[j];
    const Eigen::MatrixXd x = sys.solve(rhs);
    for (std::size_t j = 0; j < b; ++j) eta[j] = x(j, 0);
    if (prob.condition_estimate) sol.rcond = sys.rcond();
  }
  for (double v : eta)
    if (!std::isfinite(v)) fail(ErrorKind::kNumeric, "eta* solution is not finite");
  sol.residual_sup = sup_abs(eta_residuals(prob, prof, eta));
  sol.derived = left_sums(eta, k.q);
  sol.values.values = std::move(eta);
  return sol;
}

// -------------------------------------------------------------- basis

std::string to_string(BasisLayout l) {
  switch (l) {
    case BasisLayout::kGraded: return "graded-piecewise";
    case BasisLayout::kStarSplit: return "star-split";
    case BasisLayout::kPolynomial: return "polynomial";
  }
  return "?";
}

namespace {

void chebyshev(double x, int degree, double* out) {
  out[0] = 1.0;
  if (degree >= 1) out[1] = x;
  for (int k = 2; k <= degree; ++k) out[k] = 2.0 * x * out[k - 1] - out[k - 2];
}

std::size_t basis_size(const BasisSolution& s) {
  const auto per = static_cast<std::size_t>(s.degree + 1);
  switch (s.layout) {
    case BasisLayout::kGraded: {
      std::size_t m = 0;
      for (int d : s.segment_degree) m += static_cast<std::size_t>(d + 1);
      return m;
    }
    case BasisLayout::kStarSplit: return 2 * per;
    case BasisLayout::kPolynomial: return 2 * per;
  }
  return 0;
}

// writes all basis functions at t into out (zero-filled first)
void basis_row(const BasisSolution& s, double t, double* out) {
  const std::size_t m = basis_size(s);
  std::fill(out, out + m, 0.0);
  const int deg = s.degree;
  const auto per = static_cast<std::size_t>(deg + 1);
  switch (s.layout) {
    case BasisLayout::kGraded: {
      // segment k covers (b_k, b_{k+1}]; the first also holds b_0
      std::size_t seg = 0;
      while (seg + 2 < s.breaks.size() && t > s.breaks[seg + 1]) ++seg;
      const double a = s.breaks[seg], b = s.breaks[seg + 1];
      const double x = std::clamp(2.0 * (t - a) / (b - a) - 1.0, -1.0, 1.0);
      std::size_t off = 0;
      for (std::size_t k = 0; k < seg; ++k) off += static_cast<std::size_t>(s.segment_degree[k] + 1);
      chebyshev(x, s.segment_degree[seg], out + off);
      break;
    }
    case BasisLayout::kStarSplit: {
      const double x = std::clamp(2.0 * t / s.t_max - 1.0, -1.0, 1.0);
      chebyshev(x, deg, out + (t > s.t_star ? 0 : per));
      break;
    }
    case BasisLayout::kPolynomial: {
      const double x = std::clamp(2.0 * t / s.t_max - 1.0, -1.0, 1.0);
      chebyshev(x, 2 * deg + 1, out);
      break;
    }
  }
}

}  // namespace

BasisSolution solve_h_basis(const FredholmProblem& prob, int degree, BasisLayout layout) {
  if (degree < 1) fail(ErrorKind::kArgument, "basis degree must be at least 1");
  const CovariateProfile prof = make_profile(prob);
  const HCoefficients k = h_coefficients(prob, prof);
  const TimeGrid& grid = prob.grid;
  const std::size_t b = grid.size();

  BasisSolution s;
  s.layout = layout;
  s.degree = degree;
  s.t_star = prob.t_star;
  s.t_max = grid.back();
  if (layout == BasisLayout::kGraded) {
    const auto& win = prob.window;
    std::vector<double> br{0.0, win.c_lower, prob.t_star, win.c_upper, s.t_max};
    // knots graded geometrically toward c_u, where h* has its steepest change
    const double lo = prob.t_star > win.c_lower && prob.t_star < win.c_upper ? prob.t_star : win.c_lower;
    for (int j = 1; j <= 3; ++j) br.push_back(win.c_upper - (win.c_upper - lo) * std::pow(0.15, j));
    std::erase_if(br, [&](double v) { return v < 0.0 || v > s.t_max; });
    std::sort(br.begin(), br.end());
    br.erase(std::unique(br.begin(), br.end()), br.end());
    s.breaks = std::move(br);
    // no more functions than grid points in a segment: the narrow segments
    // next to c_u would otherwise be underdetermined and swing between nodes
    std::size_t j = 0;
    for (std::size_t seg = 0; seg + 1 < s.breaks.size(); ++seg) {
      std::size_t count = 0;
      for (; j < b && (grid[j] <= s.breaks[seg + 1] || seg + 2 == s.breaks.size()); ++j) ++count;
      s.segment_degree.push_back(std::clamp(static_cast<int>(count) - 1, 0, degree));
    }
  }
  const std::size_t m = basis_size(s);
  Eigen::MatrixXd phi(b, m);
  std::vector<double> row(m);
  for (std::size_t j = 0; j < b; ++j) {
    basis_row(s, grid[j], row.data());
    for (std::size_t c = 0; c < m; ++c) phi(j, c) = row[c];
  }
  // apply the discrete operator to every basis column
  Eigen::MatrixXd lmat(b, m);
  std::vector<double> col(b);
  for (std::size_t c = 0; c < m; ++c) {
    for (std::size_t j = 0; j < b; ++j) col[j] = phi(j, c);
    const auto a = couple(k.q, k.r, col);
    double gamma = 0.0;
    for (std::size_t j = 0; j < b; ++j) gamma += prof.p[j] * a[j];
    gamma *= k.one_minus_pi;
    for (std::size_t j = 0; j < b; ++j) lmat(j, c) = k.d * col[j] + k.c * a[j] - k.beta * gamma;
  }
  Eigen::VectorXd rhs(b);
  for (std::size_t j = 0; j < b; ++j) rhs[j] = k.rhs[j];
  const LeastSquares ls = least_squares(lmat, rhs);
  s.coef = ls.coef;
  s.rank_deficient = ls.rank_deficient;
  if (ls.rank_deficient) s.warnings.push_back("basis system is rank deficient; minimum-norm solution used");
  s.residual_sup = (lmat * s.coef - rhs).lpNorm<Eigen::Infinity>();
  return s;
}

double evaluate_solution(const FredholmSolution& sol, double t, GridInterpolation how) {
  const TimeGrid& g = sol.values.grid;
  if (!(t >= g.front() && t <= g.back())) fail(ErrorKind::kRange, "evaluation time outside the grid span");
  std::size_t lo = g.floor_index(t);
  if (g[lo] == t || lo + 1 == g.size()) return sol.values.values[lo];
  std::size_t hi = lo + 1;
  // never borrow a value from the other side of the discontinuity at t*
  if (t > sol.t_star && g[lo] <= sol.t_star) {
    if (how == GridInterpolation::kNearest || hi + 1 == g.size()) return sol.values.values[hi];
    lo = hi++;
  }
  if (how == GridInterpolation::kNearest)
    return (t - g[lo] <= g[hi] - t) ? sol.values.values[lo] : sol.values.values[hi];
  const double u = (t - g[lo]) / (g[hi] - g[lo]);
  return (1.0 - u) * sol.values.values[lo] + u * sol.values.values[hi];
}

double evaluate_solution(const BasisSolution& sol, double t) {
  if (!(t >= 0.0 && t <= sol.t_max)) fail(ErrorKind::kRange, "evaluation time outside the basis span");
  std::vector<double> row(basis_size(sol));
  basis_row(sol, t, row.data());
  double v = 0.0;
  for (std::size_t c = 0; c < row.size(); ++c) v += row[c] * sol.coef[static_cast<Eigen::Index>(c)];
  return v;
}

}  // namespace survfuse

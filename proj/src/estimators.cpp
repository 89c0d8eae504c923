/*
 * Copyright 2026 The survfuse Authors
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */
#include "survfuse/estimators.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "survfuse/error.hpp"

namespace survfuse {

std::string to_string(EstimatorKind k) {
  switch (k) {
    case EstimatorKind::kCsOnly: return "cs";
    case EstimatorKind::kRcOnly: return "rc";
    case EstimatorKind::kFusionDr: return "dr";
    case EstimatorKind::kFusionEff: return "eff";
    case EstimatorKind::kShift0: return "shift0";
    case EstimatorKind::kShift1: return "shift1";
    case EstimatorKind::kNaiveIvw: return "ivw";
  }
  return "?";
}

EstimatorKind parse_estimator_kind(const std::string& name) {
  for (auto k : {EstimatorKind::kCsOnly, EstimatorKind::kRcOnly, EstimatorKind::kFusionDr, EstimatorKind::kFusionEff,
                 EstimatorKind::kShift0, EstimatorKind::kShift1, EstimatorKind::kNaiveIvw})
    if (to_string(k) == name) return k;
  fail(ErrorKind::kArgument, "unknown estimator '" + name + "' (known: cs, rc, dr, eff, shift0, shift1, ivw)");
}

Interval wald_ci(double point, double se, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) fail(ErrorKind::kArgument, "alpha must lie in (0, 1)");
  if (!(se >= 0.0)) fail(ErrorKind::kArgument, "standard error must be non-negative");
  const double half = se == 0.0 ? 0.0 : normal_quantile(1.0 - alpha / 2.0) * se;
  return {point - half, point + half};
}

namespace {

// compensated sum in index order, so results do not depend on thread layout
double stable_sum(std::span<const double> v) {
  double s = 0.0, c = 0.0;
  for (double x : v) {
    const double t = s + x;
    c += std::abs(s) >= std::abs(x) ? (s - t) + x : (x - t) + s;
    s = t;
  }
  return s + c;
}

double stable_mean(std::span<const double> v) { return stable_sum(v) / static_cast<double>(v.size()); }

void finalize(EstimateResult& r) {
  const std::size_t n = r.parts.rc.size();
  r.gradient.resize(n);
  for (std::size_t i = 0; i < n; ++i) r.gradient[i] = r.parts.rc[i] + r.parts.cs[i] + r.parts.mu[i];
  const double m = stable_mean(r.gradient);
  std::vector<double> sq(n);
  for (std::size_t i = 0; i < n; ++i) sq[i] = (r.gradient[i] - m) * (r.gradient[i] - m);
  r.se = std::sqrt(stable_mean(sq) / static_cast<double>(n));
  r.ci = wald_ci(r.point, r.se, r.alpha);
  r.diagnostics.emplace_back("mean_gradient", m);
}

double clip_f(double f) { return std::clamp(f, kZetaNum, 1.0 - kZetaNum); }

// Martingale integral of phi against the counting process of one right-censored row:
//   jump_J = (phi_J - m_J) / Gamma_J,  comp_J = sum_{j<=J} (phi_j - m_j) p_j / (sigma_j Gamma_j)
// with m_j = E[phi(T) | T > u_j] under the discrete law.
struct Martingale {
  std::vector<double> jump, comp;
  double term(std::size_t j, int delta) const { return (delta == 1 ? jump[j] : 0.0) - comp[j]; }
};

Martingale martingale(const CovariateProfile& prof, std::span<const double> phi) {
  const std::size_t b = phi.size();
  Martingale m;
  m.jump.resize(b);
  m.comp.resize(b);
  std::vector<double> cond(b);
  double tail = 0.0;
  for (std::size_t j = b; j-- > 0;) {
    cond[j] = prof.sdisc[j] > 0.0 ? tail / prof.sdisc[j] : phi[j];
    tail += phi[j] * prof.p[j];
  }
  double acc = 0.0;
  for (std::size_t j = 0; j < b; ++j) {
    const double d = (phi[j] - cond[j]) / prof.gamma[j];
    m.jump[j] = d;
    if (prof.sigma[j] > 0.0) acc += d * prof.p[j] / prof.sigma[j];
    m.comp[j] = acc;
  }
  return m;
}

using Key = std::vector<std::uint64_t>;

Key key_of(std::span<const double> w) {
  Key k(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) k[i] = std::bit_cast<std::uint64_t>(w[i]);
  return k;
}

struct Group {
  std::vector<double> w;
  std::vector<std::size_t> rows;
};

std::vector<Group> group_rows(const FusedSample& sample) {
  std::map<Key, std::size_t> index;
  std::vector<Group> groups;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const auto& w = sample[i].w;
    auto [it, fresh] = index.try_emplace(key_of(w), groups.size());
    if (fresh) groups.push_back({w, {}});
    groups[it->second].rows.push_back(i);
  }
  return groups;
}

struct GroupStats {
  double max_residual = 0.0;
  std::size_t regularized = 0;
  std::size_t gamma_floored = 0;
};

}  // namespace

std::vector<EstimateResult> estimate_one_step(const FusedSample& sample, const NuisanceBundle& nb, double t_star,
                                              std::span<const EstimatorKind> kinds, const EstimationOptions& opts) {
  if (kinds.empty()) fail(ErrorKind::kArgument, "no estimator requested");
  if (!(std::isfinite(t_star) && t_star > 0.0)) fail(ErrorKind::kArgument, "t* must be a positive number");
  if (!(opts.alpha > 0.0 && opts.alpha < 1.0)) fail(ErrorKind::kArgument, "alpha must lie in (0, 1)");
  if (!nb.event) fail(ErrorKind::kArgument, "nuisance bundle has no event model");

  bool fusion = false;
  for (auto k : kinds) {
    if (k == EstimatorKind::kCsOnly || k == EstimatorKind::kNaiveIvw)
      fail(ErrorKind::kArgument, "estimator '" + to_string(k) + "' is not a one-step estimator");
    fusion = fusion || k != EstimatorKind::kRcOnly;
  }
  const std::size_t n = sample.size();
  const double pi = opts.pi ? *opts.pi : sample.pi();
  if (sample.n1() < 2) fail(ErrorKind::kInsufficientData, "at least two right-censored rows are required");
  if (!(pi > 0.0 && pi <= 1.0)) fail(ErrorKind::kArgument, "pi must lie in (0, 1]");

  InspectionWindow win{t_star, t_star};
  if (fusion) {
    if (sample.n0() < 2) fail(ErrorKind::kInsufficientData, "fusion needs at least two current-status rows");
    if (!nb.inspection) fail(ErrorKind::kArgument, "fusion needs an inspection model");
    if (!(pi < 1.0)) fail(ErrorKind::kArgument, "fusion needs pi < 1");
    win = opts.window ? *opts.window : nb.inspection->window();
    std::vector<std::size_t> outside;
    for (std::size_t i = 0; i < n; ++i)
      if (sample[i].source == 0 && !win.contains(sample[i].c)) outside.push_back(i + 1);
    if (!outside.empty())
      throw ValidationError("current-status rows lie outside the inspection window [" + std::to_string(win.c_lower) +
                                ", " + std::to_string(win.c_upper) + "]; restrict the sample first",
                            outside);
  } else if (nb.inspection) {
    win = opts.window ? *opts.window : nb.inspection->window();
  }

  std::vector<double> extra;
  extra.reserve(n);
  for (const auto& o : sample.observations()) extra.push_back(o.source == 1 ? o.y : o.c);
  const double t_max = 1.25 * std::max({sample.max_time(), t_star, win.c_upper});
  const TimeGrid grid = problem_grid(t_max, opts.grid_points, t_star, win, extra);
  const std::size_t b = grid.size();
  const auto& pts = grid.points();

  std::vector<double> phi_rc(b);
  for (std::size_t j = 0; j < b; ++j) phi_rc[j] = pts[j] > t_star ? 1.0 : 0.0;

  const std::size_t nk = kinds.size();
  std::vector<std::vector<double>> rc(nk, std::vector<double>(n, 0.0)), cs(nk, std::vector<double>(n, 0.0));
  std::vector<double> mu_hat(n, 0.0), ratio(n, 1.0);
  std::vector<std::size_t> floored_rows(n, 0);

  bool need_ratio = false;
  for (auto k : kinds) need_ratio = need_ratio || k == EstimatorKind::kShift0 || k == EstimatorKind::kShift1;
  if (need_ratio && !nb.ratio) fail(ErrorKind::kArgument, "covariate-shift estimation needs a density-ratio model");

  const std::vector<Group> groups = group_rows(sample);
  std::vector<GroupStats> stats(groups.size());
  const std::size_t chunk = 128;
  for (std::size_t g0 = 0; g0 < groups.size(); g0 += chunk) {
    const std::size_t g1 = std::min(groups.size(), g0 + chunk);
    Eigen::MatrixXd gmat;
    if (fusion) {
      Eigen::MatrixXd ws(static_cast<Eigen::Index>(g1 - g0), static_cast<Eigen::Index>(sample.dim()));
      for (std::size_t g = g0; g < g1; ++g)
        for (std::size_t k = 0; k < sample.dim(); ++k)
          ws(static_cast<Eigen::Index>(g - g0), static_cast<Eigen::Index>(k)) = groups[g].w[k];
      gmat = nb.inspection->cdf_matrix(ws, pts);
    }
    parallel_for(g1 - g0, opts.threads, [&](std::size_t local) {
      const Group& grp = groups[g0 + local];
      GroupStats& st = stats[g0 + local];
      FredholmProblem prob;
      prob.pi = pi;
      prob.t_star = t_star;
      prob.window = win;
      prob.nuisances = &nb;
      prob.w = grp.w;
      prob.grid = grid;
      prob.condition_estimate = false;
      std::vector<double> grow(b, 0.0);
      if (fusion)
        for (std::size_t j = 0; j < b; ++j) grow[j] = gmat(static_cast<Eigen::Index>(local), static_cast<Eigen::Index>(j));
      const CovariateProfile prof = make_profile(prob, &grow);
      const double r = need_ratio ? nb.ratio->ratio(grp.w) : 1.0;
      for (std::size_t i : grp.rows) {
        mu_hat[i] = prof.mu;
        ratio[i] = r;
        if (sample[i].source == 1 && nb.censoring && prof.gamma[grid.index_of(sample[i].y)] <= kEpsGamma)
          floored_rows[i] = 1;
      }
      auto note = [&](const FredholmSolution& s) {
        st.max_residual = std::max(st.max_residual, s.residual_sup);
        st.regularized += s.regularized ? 1 : 0;
      };
      // h*-based terms: RC martingale with integrand h*, CS augmentation with H*(C) (inclusive)
      auto h_terms = [&](std::size_t k, const FredholmSolution& s) {
        const auto& h = s.values.values;
        const Martingale m = martingale(prof, h);
        for (std::size_t i : grp.rows) {
          const auto& o = sample[i];
          if (o.source == 1) {
            rc[k][i] = m.term(grid.index_of(o.y), o.delta_r);
          } else {
            const std::size_t j = grid.index_of(o.c);
            const double f = 1.0 - prof.surv[j];
            const double fc = clip_f(f);
            cs[k][i] = (o.delta_c - f) / (fc * (1.0 - fc)) * (s.derived[j] + h[j] * prof.p[j]);
          }
        }
      };
      for (std::size_t k = 0; k < nk; ++k) {
        switch (kinds[k]) {
          case EstimatorKind::kRcOnly: {
            const Martingale m = martingale(prof, phi_rc);
            for (std::size_t i : grp.rows)
              if (sample[i].source == 1) rc[k][i] = m.term(grid.index_of(sample[i].y), sample[i].delta_r);
            break;
          }
          case EstimatorKind::kFusionDr: {
            const FredholmSolution s = solve_h_grid(prob, prof, opts.method);
            note(s);
            h_terms(k, s);
            break;
          }
          case EstimatorKind::kShift0:
          case EstimatorKind::kShift1: {
            FredholmProblem shifted = prob;
            shifted.ratio = kinds[k] == EstimatorKind::kShift1 ? RatioWeights{1.0, 1.0 / r} : RatioWeights{r, 1.0};
            const FredholmSolution s = solve_h_grid(shifted, prof, opts.method);
            note(s);
            h_terms(k, s);
            break;
          }
          case EstimatorKind::kFusionEff: {
            const FredholmSolution s = solve_eta_grid(prob, prof, opts.method);
            note(s);
            const auto& eta = s.values.values;
            for (std::size_t i : grp.rows) {
              const auto& o = sample[i];
              if (o.source == 1) {
                const std::size_t j = grid.index_of(o.y);
                rc[k][i] = (o.delta_r == 1 ? eta[j] : 0.0) - s.derived[j];
              } else {
                const std::size_t j = grid.index_of(o.c);
                const double f = 1.0 - prof.surv[j];
                const double theta = s.derived[j] + eta[j] * prof.p[j] / std::max(prof.sdisc[j], 1e-6);
                cs[k][i] = (o.delta_c - f) / clip_f(f) * theta;
              }
            }
            break;
          }
          default: break;
        }
      }
    });
  }

  GroupStats total;
  for (const auto& s : stats) {
    total.max_residual = std::max(total.max_residual, s.max_residual);
    total.regularized += s.regularized;
  }
  total.gamma_floored = std::accumulate(floored_rows.begin(), floored_rows.end(), std::size_t{0});

  std::vector<EstimateResult> out;
  for (std::size_t k = 0; k < nk; ++k) {
    EstimateResult r;
    r.kind = kinds[k];
    r.t_star = t_star;
    r.alpha = opts.alpha;
    r.provenance = nb.provenance;
    r.warnings = nb.warnings;
    r.estimand = "phi(t*)";
    r.parts.rc = rc[k];
    r.parts.cs = cs[k];
    r.parts.mu.resize(n);
    std::vector<double> weight(n, 1.0);  // weight on mu-hat in the plug-in part
    if (r.kind == EstimatorKind::kRcOnly) {
      for (std::size_t i = 0; i < n; ++i) {
        weight[i] = sample[i].source == 1 ? 1.0 / pi : 0.0;
        r.parts.rc[i] *= weight[i];
      }
    } else if (r.kind == EstimatorKind::kShift0 || r.kind == EstimatorKind::kShift1) {
      const int target = r.kind == EstimatorKind::kShift1 ? 1 : 0;
      r.estimand = target == 1 ? "phi_1(t*)" : "phi_0(t*)";
      const std::size_t nt = target == 1 ? sample.n1() : sample.n0();
      if (nt == 0) fail(ErrorKind::kArgument, "target source has no rows");
      const double share = static_cast<double>(nt) / static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i) weight[i] = sample[i].source == target ? 1.0 / share : 0.0;
      std::size_t saturated = 0;
      const double c0 = nb.ratio->clip();
      for (std::size_t i = 0; i < n; ++i)
        if (ratio[i] >= c0 * (1.0 - 1e-12) || ratio[i] <= (1.0 + 1e-12) / c0) ++saturated;
      const double frac = static_cast<double>(saturated) / static_cast<double>(n);
      r.diagnostics.emplace_back("ratio_clip_fraction", frac);
      if (frac > 0.2)
        r.warnings.push_back("poor covariate overlap: density ratio clipped for " + std::to_string(saturated) + " of " +
                             std::to_string(n) + " rows");
    }
    std::vector<double> plug(n), total_i(n);
    for (std::size_t i = 0; i < n; ++i) {
      plug[i] = weight[i] * mu_hat[i];
      total_i[i] = plug[i] + r.parts.rc[i] + r.parts.cs[i];
    }
    r.plug_in = stable_mean(plug);
    r.point = stable_mean(total_i);
    for (std::size_t i = 0; i < n; ++i) r.parts.mu[i] = weight[i] * (mu_hat[i] - r.point);
    if (total.gamma_floored > 0 && r.kind != EstimatorKind::kFusionEff)
      r.warnings.push_back("censoring survival floored at " + std::to_string(kEpsGamma) + " for " +
                           std::to_string(total.gamma_floored) + " right-censored rows");
    r.diagnostics.emplace_back("pi", pi);
    r.diagnostics.emplace_back("grid_points", static_cast<double>(b));
    r.diagnostics.emplace_back("covariate_values", static_cast<double>(groups.size()));
    if (r.kind != EstimatorKind::kRcOnly) {
      r.diagnostics.emplace_back("max_solver_residual", total.max_residual);
      r.diagnostics.emplace_back("regularized_solves", static_cast<double>(total.regularized));
    }
    finalize(r);
    out.push_back(std::move(r));
  }
  return out;
}

EstimateResult estimate_rc_only(const FusedSample& sample, const NuisanceBundle& nb, double t_star,
                                const EstimationOptions& opts) {
  const EstimatorKind k[] = {EstimatorKind::kRcOnly};
  return std::move(estimate_one_step(sample, nb, t_star, k, opts).front());
}

EstimateResult estimate_fusion_dr(const FusedSample& sample, const NuisanceBundle& nb, double t_star,
                                  const EstimationOptions& opts) {
  const EstimatorKind k[] = {EstimatorKind::kFusionDr};
  return std::move(estimate_one_step(sample, nb, t_star, k, opts).front());
}

EstimateResult estimate_fusion_eff(const FusedSample& sample, const NuisanceBundle& nb, double t_star,
                                   const EstimationOptions& opts) {
  const EstimatorKind k[] = {EstimatorKind::kFusionEff};
  return std::move(estimate_one_step(sample, nb, t_star, k, opts).front());
}

EstimateResult estimate_covariate_shift(const FusedSample& sample, const NuisanceBundle& nb, double t_star,
                                        int target, const EstimationOptions& opts) {
  if (target != 0 && target != 1) fail(ErrorKind::kArgument, "target population must be 0 or 1");
  if ((target == 1 ? sample.n1() : sample.n0()) == 0)
    fail(ErrorKind::kArgument, "target population " + std::to_string(target) + " has no rows");
  const EstimatorKind k[] = {target == 1 ? EstimatorKind::kShift1 : EstimatorKind::kShift0};
  return std::move(estimate_one_step(sample, nb, t_star, k, opts).front());
}

// ------------------------------------------------------------ CS only

namespace {

struct CsRows {
  std::vector<double> c;
  std::vector<int> y;
  std::vector<std::vector<double>> w;
};

// Restricted cubic spline terms (beyond the linear one) with the given knots.
void spline_terms(double x, const std::vector<double>& t, double* out) {
  const std::size_t k = t.size();
  const double scale = (t[k - 1] - t[0]) * (t[k - 1] - t[0]);
  auto cube = [](double v) { return v > 0.0 ? v * v * v : 0.0; };
  for (std::size_t j = 0; j + 2 < k; ++j) {
    const double a = (t[k - 1] - t[j]) / (t[k - 1] - t[k - 2]);
    const double b = (t[k - 2] - t[j]) / (t[k - 1] - t[k - 2]);
    out[j] = (cube(x - t[j]) - a * cube(x - t[k - 2]) + b * cube(x - t[k - 1])) / scale;
  }
}

double expit(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Isotonic estimate of P(T <= t*) from current-status rows.
double cs_theta(const CsRows& d, const InspectionWindow& win, double t_star, bool lenient) {
  const std::size_t n = d.c.size();
  const int y0 = d.y.front();
  if (std::all_of(d.y.begin(), d.y.end(), [&](int v) { return v == y0; })) return y0;

  // outcome regression: logistic on (phi(W), spline in C)
  std::vector<double> knots;
  for (double q : {0.05, 0.35, 0.65, 0.95}) knots.push_back(empirical_quantile(d.c, q));
  bool use_spline = true;
  for (std::size_t j = 1; j < knots.size(); ++j)
    use_spline = use_spline && knots[j] - knots[j - 1] > 1e-9 * (win.c_upper - win.c_lower);
  const FeatureMap fm = FeatureMap::build(d.w);
  const std::size_t pw = fm.width();
  const std::size_t pc = use_spline ? 3 : 1;
  auto c_row = [&](double c, double* out) {
    out[0] = c;
    if (use_spline) spline_terms(c, knots, out + 1);
  };
  auto fit = [&](bool full) {
    const std::size_t p = full ? pw + pc : 2;
    Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
    Eigen::VectorXd y(static_cast<Eigen::Index>(n));
    std::vector<double> buf(pw + pc);
    for (std::size_t i = 0; i < n; ++i) {
      if (full) {
        fm.row(d.w[i], buf.data());
        c_row(d.c[i], buf.data() + pw);
      } else {
        buf[0] = 1.0;
        buf[1] = d.c[i];
      }
      for (std::size_t j = 0; j < p; ++j) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = buf[j];
      y[static_cast<Eigen::Index>(i)] = d.y[i];
    }
    return fit_logistic(x, y);
  };
  std::vector<double> beta;
  bool full = true;
  try {
    beta = fit(true);
  } catch (const Error& e) {
    if (!lenient || e.kind() != ErrorKind::kFit) throw;
    full = false;
    beta = fit(false);
  }
  std::vector<double> a(n, 0.0), bc(n, 0.0), buf(pw + pc);
  for (std::size_t i = 0; i < n; ++i) {
    if (full) {
      fm.row(d.w[i], buf.data());
      for (std::size_t j = 0; j < pw; ++j) a[i] += beta[j] * buf[j];
      c_row(d.c[i], buf.data());
      for (std::size_t j = 0; j < pc; ++j) bc[i] += beta[pw + j] * buf[j];
    } else {
      a[i] = beta[0];
      bc[i] = beta[1] * d.c[i];
    }
  }

  // inspection density g(C_i | W_j)
  std::vector<FusedObservation> obs;
  obs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) obs.push_back(FusedObservation::current_status(d.w[i], d.c[i], d.y[i]));
  FitOptions fo;
  fo.window = win;
  const auto g = fit_inspection_density(FusedSample(std::move(obs)), fo);
  Eigen::MatrixXd ws(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d.w.front().size()));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < d.w[i].size(); ++k) ws(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = d.w[i][k];
  const Eigen::MatrixXd dens = g->density_matrix(ws, d.c);

  std::vector<double> xi(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const double gm = dens.col(ii).mean();
    const double gi = dens(ii, ii);
    const double wgt = gi > 0.0 ? std::min(gm / gi, 20.0) : 20.0;
    double marg = 0.0;
    for (std::size_t j = 0; j < n; ++j) marg += expit(a[j] + bc[i]);
    marg /= static_cast<double>(n);
    xi[i] = (d.y[i] - expit(a[i] + bc[i])) * wgt + marg;
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) { return d.c[l] < d.c[r]; });
  std::vector<double> ys(n), ones(n, 1.0);
  for (std::size_t k = 0; k < n; ++k) ys[k] = xi[order[k]];
  const std::vector<double> fitv = pava_isotonic(ys, ones);
  std::size_t pos = 0;
  for (std::size_t k = 0; k < n; ++k)
    if (d.c[order[k]] <= t_star) pos = k;
  return std::clamp(fitv[pos], 0.0, 1.0);
}

}  // namespace

EstimateResult estimate_cs_only(const FusedSample& sample, double t_star, const EstimationOptions& opts) {
  if (!(std::isfinite(t_star) && t_star > 0.0)) fail(ErrorKind::kArgument, "t* must be a positive number");
  if (!(opts.alpha > 0.0 && opts.alpha < 1.0)) fail(ErrorKind::kArgument, "alpha must lie in (0, 1)");
  const InspectionWindow win = opts.window ? *opts.window : inspection_window(sample);
  if (!win.contains(t_star))
    fail(ErrorKind::kNotIdentified, "S(t*) is not identified from current-status data alone: t* = " +
                                        std::to_string(t_star) + " lies outside the inspection window [" +
                                        std::to_string(win.c_lower) + ", " + std::to_string(win.c_upper) + "]");
  CsRows d;
  for (const auto& o : sample.observations())
    if (o.source == 0 && win.contains(o.c)) {
      d.c.push_back(o.c);
      d.y.push_back(o.delta_c);
      d.w.push_back(o.w);
    }
  const std::size_t n0 = d.c.size();
  if (n0 < 5) fail(ErrorKind::kInsufficientData, "current-status estimator needs at least 5 rows in the window");

  EstimateResult r;
  r.kind = EstimatorKind::kCsOnly;
  r.estimand = "phi(t*)";
  r.t_star = t_star;
  r.alpha = opts.alpha;
  r.provenance = "fit:isotonic";
  const double theta = cs_theta(d, win, t_star, false);
  r.point = 1.0 - theta;
  r.plug_in = r.point;

  // m-out-of-n subsampling with cube-root scaling
  const auto m = static_cast<std::size_t>(std::ceil(std::pow(static_cast<double>(n0), 2.0 / 3.0)));
  const std::size_t ms = std::min(m, n0 - 1);
  std::vector<double> z(opts.subsamples, std::numeric_limits<double>::quiet_NaN());
  parallel_for(opts.subsamples, opts.threads, [&](std::size_t s) {
    RngStream rng(opts.seed, s);
    std::vector<std::size_t> idx(n0);
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t k = 0; k < ms; ++k) {
      const auto j = k + static_cast<std::size_t>(rng.uniform() * static_cast<double>(n0 - k));
      std::swap(idx[k], idx[std::min(j, n0 - 1)]);
    }
    CsRows sub;
    for (std::size_t k = 0; k < ms; ++k) {
      sub.c.push_back(d.c[idx[k]]);
      sub.y.push_back(d.y[idx[k]]);
      sub.w.push_back(d.w[idx[k]]);
    }
    try {
      z[s] = std::cbrt(static_cast<double>(ms)) * (cs_theta(sub, win, t_star, true) - theta);
    } catch (const Error&) {
      // failed subsample fits are dropped and counted below
    }
  });
  std::vector<double> good;
  for (double v : z)
    if (std::isfinite(v)) good.push_back(v);
  const std::size_t dropped = z.size() - good.size();
  if (dropped > 0) r.warnings.push_back(std::to_string(dropped) + " subsample fits failed and were dropped");
  r.diagnostics.emplace_back("subsample_size", static_cast<double>(ms));
  r.diagnostics.emplace_back("subsamples_used", static_cast<double>(good.size()));
  if (good.size() >= 10) {
    const double scale = std::cbrt(static_cast<double>(n0));
    const double lo = empirical_quantile(good, opts.alpha / 2.0);
    const double hi = empirical_quantile(good, 1.0 - opts.alpha / 2.0);
    r.ci = {std::min(r.point, r.point + lo / scale), std::max(r.point, r.point + hi / scale)};
    r.se = r.ci.length() / (2.0 * normal_quantile(1.0 - opts.alpha / 2.0));
  } else {
    r.warnings.push_back("too few successful subsamples for an interval");
    r.ci = {r.point, r.point};
  }
  r.warnings.push_back("interval from cube-root subsampling; not a Wald interval");
  return r;
}

EstimateResult naive_ivw_combine(const EstimateResult& a, const EstimateResult& b) {
  if (a.estimand != b.estimand || a.t_star != b.t_star)
    fail(ErrorKind::kArgument, "inverse-variance combination needs the same estimand");
  if (!(a.se > 0.0) || !(b.se > 0.0)) fail(ErrorKind::kArgument, "inverse-variance combination needs se > 0");
  const double wa = 1.0 / (a.se * a.se);
  const double wb = std::isinf(b.se) ? 0.0 : 1.0 / (b.se * b.se);
  EstimateResult r;
  r.kind = EstimatorKind::kNaiveIvw;
  r.estimand = a.estimand;
  r.t_star = a.t_star;
  r.alpha = a.alpha;
  r.point = wb > 0.0 ? (a.point * wa + b.point * wb) / (wa + wb) : a.point;
  r.plug_in = r.point;
  r.se = 1.0 / std::sqrt(wa + wb);
  r.ci = wald_ci(r.point, r.se, r.alpha);
  r.provenance = to_string(a.kind) + "+" + to_string(b.kind);
  r.warnings.push_back("naive inverse-variance combination: no asymptotic guarantee");
  return r;
}

}  // namespace survfuse

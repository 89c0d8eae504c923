/*
 * Copyright 2026 The survfuse Authors
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */
#include "survfuse/nuisance.hpp"

#include <algorithm>
#include <functional>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "survfuse/error.hpp"

namespace survfuse {

HazardFamily parse_hazard_family(const std::string& name) {
  if (name == "linear" || name == "linear-rate") return HazardFamily::kLinearRate;
  if (name == "loglinear" || name == "exponential" || name == "log-linear") return HazardFamily::kLogLinearRate;
  if (name == "weibull") return HazardFamily::kWeibull;
  fail(ErrorKind::kArgument, "unknown model family '" + name + "' (linear, loglinear, weibull)");
}

std::string to_string(HazardFamily f) {
  switch (f) {
    case HazardFamily::kLinearRate: return "linear";
    case HazardFamily::kLogLinearRate: return "loglinear";
    case HazardFamily::kWeibull: return "weibull";
  }
  return "?";
}

// ------------------------------------------------------------ features

FeatureMap::FeatureMap(std::size_t dim) : dim_(dim) {
  const std::size_t n = dim + dim * (dim - 1) / 2;
  kept_.resize(n);
  std::iota(kept_.begin(), kept_.end(), 0);
}

FeatureMap FeatureMap::intercept_only(std::size_t dim) {
  FeatureMap f;
  f.dim_ = dim;
  return f;
}

double FeatureMap::candidate(Covariate w, std::size_t dim, std::size_t k) {
  if (k < dim) return w[k];
  k -= dim;
  for (std::size_t a = 0; a < dim; ++a) {
    const std::size_t span = dim - a - 1;
    if (k < span) return w[a] * w[a + 1 + k];
    k -= span;
  }
  return 0.0;
}

FeatureMap FeatureMap::build(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) fail(ErrorKind::kInsufficientData, "feature map needs data");
  const std::size_t d = rows.front().size();
  const auto n = static_cast<Eigen::Index>(rows.size());
  FeatureMap f = intercept_only(d);
  const std::size_t ncand = d + d * (d - 1) / 2;
  // Gram-Schmidt against the intercept and the columns kept so far
  std::vector<Eigen::VectorXd> basis;
  basis.push_back(Eigen::VectorXd::Constant(n, 1.0 / std::sqrt(static_cast<double>(n))));
  for (std::size_t k = 0; k < ncand; ++k) {
    Eigen::VectorXd x(n);
    for (Eigen::Index i = 0; i < n; ++i) x[i] = candidate(rows[i], d, k);
    const double scale = x.norm();
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& q : basis) x -= q.dot(x) * q;
    if (x.norm() <= 1e-8 * std::max(scale, 1e-300)) continue;
    basis.push_back(x / x.norm());
    f.kept_.push_back(k);
  }
  return f;
}

void FeatureMap::row(Covariate w, double* out) const {
  out[0] = 1.0;
  for (std::size_t j = 0; j < kept_.size(); ++j) out[j + 1] = candidate(w, dim_, kept_[j]);
}

Eigen::MatrixXd FeatureMap::design(const std::vector<std::vector<double>>& rows) const {
  Eigen::MatrixXd x(rows.size(), width());
  std::vector<double> buf(width());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    row(rows[i], buf.data());
    for (std::size_t j = 0; j < buf.size(); ++j) x(i, j) = buf[j];
  }
  return x;
}

std::vector<std::string> FeatureMap::names() const {
  std::vector<std::string> out{"1"};
  for (std::size_t k : kept_) {
    if (k < dim_) {
      out.push_back("w" + std::to_string(k + 1));
      continue;
    }
    std::size_t r = k - dim_;
    for (std::size_t a = 0; a < dim_; ++a) {
      const std::size_t span = dim_ - a - 1;
      if (r < span) {
        out.push_back("w" + std::to_string(a + 1) + "*w" + std::to_string(a + 2 + r));
        break;
      }
      r -= span;
    }
  }
  return out;
}

// ------------------------------------------------------------ hazards

ParametricHazard::ParametricHazard(HazardFamily family, FeatureMap features, std::vector<double> beta,
                                   double log_shape)
    : family_(family), features_(std::move(features)), beta_(std::move(beta)), log_shape_(log_shape) {
  if (beta_.size() != features_.width()) fail(ErrorKind::kArgument, "coefficient length does not match features");
  if (family_ != HazardFamily::kWeibull) log_shape_ = 0.0;
}

double ParametricHazard::rate(Covariate w) const {
  double buf[64];
  std::vector<double> big;
  double* x = buf;
  if (features_.width() > 64) {
    big.resize(features_.width());
    x = big.data();
  }
  features_.row(w, x);
  double eta = 0.0;
  for (std::size_t j = 0; j < beta_.size(); ++j) eta += x[j] * beta_[j];
  return family_ == HazardFamily::kLinearRate ? linear_rate_link(eta) : std::exp(eta);
}

double ParametricHazard::cum_hazard(double t, Covariate w) const {
  if (t <= 0.0) return 0.0;
  const double k = shape();
  return rate(w) * (k == 1.0 ? t : std::pow(t, k));
}

void HazardModel::survival_grid(std::span<const double> t, Covariate w, double* out) const {
  for (std::size_t j = 0; j < t.size(); ++j) out[j] = survival(t[j], w);
}

void ParametricHazard::survival_grid(std::span<const double> t, Covariate w, double* out) const {
  const double r = rate(w);
  const double k = shape();
  for (std::size_t j = 0; j < t.size(); ++j)
    out[j] = t[j] <= 0.0 ? 1.0 : std::exp(-r * (k == 1.0 ? t[j] : std::pow(t[j], k)));
}

double ParametricHazard::hazard(double t, Covariate w) const {
  const double k = shape();
  if (k == 1.0) return rate(w);
  if (t <= 0.0) return k > 1.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return rate(w) * k * std::pow(t, k - 1.0);
}

std::string ParametricHazard::describe() const {
  std::ostringstream s;
  s.precision(6);
  s << to_string(family_) << " rate [";
  const auto names = features_.names();
  for (std::size_t j = 0; j < beta_.size(); ++j) s << (j ? ", " : "") << names[j] << "=" << beta_[j];
  s << "]";
  if (family_ == HazardFamily::kWeibull) s << " shape=" << shape();
  return s.str();
}

namespace {

// Maximises an average log-likelihood by damped Newton steps.
// eval(theta, ll, grad, hess) returns false if theta is infeasible.
using Objective = std::function<bool(const Eigen::VectorXd&, double&, Eigen::VectorXd*, Eigen::MatrixXd*)>;

Eigen::VectorXd newton_maximize(const Objective& eval, Eigen::VectorXd theta, const char* what, FitTrace* trace,
                                const std::function<void(const Eigen::VectorXd&)>& guard = nullptr) {
  const int max_iter = 100;
  const auto p = theta.size();
  double ll = 0.0;
  Eigen::VectorXd g(p);
  Eigen::MatrixXd h(p, p);
  if (!eval(theta, ll, &g, &h)) fail(ErrorKind::kFit, std::string(what) + ": infeasible starting point");
  for (int it = 0; it < max_iter; ++it) {
    const double gnorm = g.lpNorm<Eigen::Infinity>();
    if (trace) trace->grad_norms.push_back(gnorm);
    if (gnorm < 1e-8) {
      if (trace) trace->iterations = it;
      return theta;
    }
    Eigen::MatrixXd neg = -h;
    double ridge = 0.0;
    Eigen::VectorXd step;
    for (int attempt = 0; attempt < 20; ++attempt) {
      Eigen::LDLT<Eigen::MatrixXd> ldlt(neg + ridge * Eigen::MatrixXd::Identity(p, p));
      if (ldlt.info() == Eigen::Success && ldlt.isPositive() && (ldlt.vectorD().array() > 0).all()) {
        step = ldlt.solve(g);
        if (step.allFinite()) break;
      }
      ridge = ridge == 0.0 ? 1e-10 * std::max(1.0, neg.trace()) : ridge * 10.0;
      step.resize(0);
    }
    if (step.size() == 0) step = g;
    double t = 1.0;
    bool moved = false;
    for (int half = 0; half < 60; ++half, t *= 0.5) {
      Eigen::VectorXd cand = theta + t * step;
      double ll_new;
      if (eval(cand, ll_new, nullptr, nullptr) && ll_new >= ll - 1e-15 * std::abs(ll)) {
        theta = cand;
        if (guard) guard(theta);
        moved = true;
        break;
      }
    }
    if (!moved) break;
    eval(theta, ll, &g, &h);
  }
  std::ostringstream s;
  s << what << ": Newton iteration did not converge; gradient sup-norm trace:";
  if (trace) {
    const auto& gn = trace->grad_norms;
    for (std::size_t i = 0; i < gn.size(); ++i) {
      if (gn.size() > 10 && i == 5) {
        s << " ...";
        i = gn.size() - 5;
      }
      s << ' ' << gn[i];
    }
  }
  fail(ErrorKind::kFit, s.str());
}

struct SurvivalData {
  Eigen::MatrixXd x;
  Eigen::VectorXd y, delta;
};

SurvivalData right_censored_rows(const FusedSample& sample, bool censoring, FeatureMap* fm) {
  std::vector<std::vector<double>> rows;
  std::vector<double> y, d;
  for (const auto& o : sample.observations()) {
    if (o.source != 1) continue;
    rows.push_back(o.w);
    y.push_back(o.y);
    d.push_back(censoring ? 1.0 - o.delta_r : static_cast<double>(o.delta_r));
  }
  if (rows.size() < 2) fail(ErrorKind::kInsufficientData, "need at least two right-censored rows");
  *fm = FeatureMap::build(rows);
  SurvivalData out;
  out.x = fm->design(rows);
  out.y = Eigen::Map<Eigen::VectorXd>(y.data(), y.size());
  out.delta = Eigen::Map<Eigen::VectorXd>(d.data(), d.size());
  return out;
}

std::shared_ptr<ParametricHazard> fit_hazard(const FusedSample& sample, HazardFamily family, bool censoring) {
  FeatureMap fm;
  const SurvivalData data = right_censored_rows(sample, censoring, &fm);
  const double events = data.delta.sum();
  const double exposure = data.y.sum();
  const char* what = censoring ? "censoring model" : "event model";
  if (events <= 0.0)
    fail(ErrorKind::kFit, std::string(what) + ": degenerate likelihood (no events among right-censored rows)");
  if (!(exposure > 0.0)) fail(ErrorKind::kFit, std::string(what) + ": zero total follow-up time");
  const auto n = static_cast<double>(data.y.size());
  const auto p = static_cast<Eigen::Index>(fm.width());
  const Eigen::MatrixXd& x = data.x;
  const Eigen::VectorXd& y = data.y;
  const Eigen::VectorXd& dl = data.delta;

  FitTrace trace;
  Objective obj;
  Eigen::VectorXd start = Eigen::VectorXd::Zero(family == HazardFamily::kWeibull ? p + 1 : p);
  const double crude = events / exposure;

  if (family == HazardFamily::kLinearRate) {
    start[0] = crude;
    obj = [&](const Eigen::VectorXd& b, double& ll, Eigen::VectorXd* g, Eigen::MatrixXd* h) {
      const Eigen::VectorXd eta = x * b;
      ll = 0.0;
      if (g) g->setZero(p);
      if (h) h->setZero(p, p);
      for (Eigen::Index i = 0; i < eta.size(); ++i) {
        const double r = linear_rate_link(eta[i]);
        const double s1 = 1.0 / (1.0 + std::exp(-(eta[i] - kRateFloor) / kRateFloor));  // dr/deta
        const double s2 = s1 * (1.0 - s1) / kRateFloor;
        ll += dl[i] * std::log(r) - r * y[i];
        if (g) *g += (dl[i] * s1 / r - y[i] * s1) * x.row(i).transpose();
        if (h)
          h->selfadjointView<Eigen::Lower>().rankUpdate(x.row(i).transpose(),
                                                        dl[i] * (s2 / r - s1 * s1 / (r * r)) - y[i] * s2);
      }
      ll /= n;
      if (g) *g /= n;
      if (h) *h = h->selfadjointView<Eigen::Lower>().toDenseMatrix() / n;
      return std::isfinite(ll);
    };
  } else {
    start[0] = std::log(crude);
    const bool weib = family == HazardFamily::kWeibull;
    Eigen::VectorXd logy = y.unaryExpr([](double v) { return std::log(std::max(v, 1e-12)); });
    obj = [&, weib, logy](const Eigen::VectorXd& th, double& ll, Eigen::VectorXd* g, Eigen::MatrixXd* h) {
      const Eigen::VectorXd b = th.head(p);
      const double lk = weib ? th[p] : 0.0;
      const double k = std::exp(lk);
      const Eigen::VectorXd eta = x * b;
      const auto q = th.size();
      ll = 0.0;
      if (g) g->setZero(q);
      if (h) h->setZero(q, q);
      for (Eigen::Index i = 0; i < eta.size(); ++i) {
        const double kl = k * logy[i];
        const double cum = weib ? std::exp(eta[i] + kl) : std::exp(eta[i]) * y[i];
        ll += dl[i] * (eta[i] + (weib ? lk + (k - 1.0) * logy[i] : 0.0)) - cum;
        if (g) {
          g->head(p) += (dl[i] - cum) * x.row(i).transpose();
          if (weib) (*g)[p] += dl[i] * (1.0 + kl) - cum * kl;
        }
        if (h) {
          h->topLeftCorner(p, p).selfadjointView<Eigen::Lower>().rankUpdate(x.row(i).transpose(), -cum);
          if (weib) {
            h->block(p, 0, 1, p) += (-cum * kl) * x.row(i);
            (*h)(p, p) += dl[i] * kl - cum * kl * (kl + 1.0);
          }
        }
      }
      ll /= n;
      if (g) *g /= n;
      if (h) {
        Eigen::MatrixXd full = h->selfadjointView<Eigen::Lower>().toDenseMatrix();
        *h = full / n;
      }
      return std::isfinite(ll);
    };
  }
  const Eigen::VectorXd theta = newton_maximize(obj, start, what, &trace);
  std::vector<double> beta(theta.data(), theta.data() + p);
  const double log_shape = family == HazardFamily::kWeibull ? theta[p] : 0.0;
  auto model = std::make_shared<ParametricHazard>(family, fm, std::move(beta), log_shape);
  model->set_trace(std::move(trace));
  return model;
}

}  // namespace

std::shared_ptr<const ParametricHazard> fit_event_model(const FusedSample& sample, HazardFamily family) {
  return fit_hazard(sample, family, false);
}

std::shared_ptr<const HazardModel> fit_censoring_model(const FusedSample& sample, HazardFamily family) {
  bool any_censored = false;
  for (const auto& o : sample.observations())
    if (o.source == 1 && o.delta_r == 0) any_censored = true;
  if (!any_censored) return std::make_shared<NullHazard>();
  return fit_hazard(sample, family, true);
}

// ----------------------------------------------------------- logistic

std::vector<double> fit_logistic(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double max_norm) {
  const auto n = x.rows();
  const auto p = x.cols();
  if (n != y.size() || p < 1) fail(ErrorKind::kArgument, "fit_logistic: bad dimensions");
  const double ybar = y.mean();
  if (ybar <= 0.0 || ybar >= 1.0) fail(ErrorKind::kFit, "logistic fit: outcome is constant (complete separation)");
  // standardise the non-intercept columns so the separation bound is scale free
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(p), sd = Eigen::VectorXd::Ones(p);
  Eigen::MatrixXd z = x;
  for (Eigen::Index j = 1; j < p; ++j) {
    mean[j] = x.col(j).mean();
    const double s = std::sqrt((x.col(j).array() - mean[j]).square().sum() / static_cast<double>(n));
    if (s > 0.0) sd[j] = s;
    z.col(j) = (x.col(j).array() - mean[j]) / sd[j];
  }
  const double nn = static_cast<double>(n);
  Objective obj = [&](const Eigen::VectorXd& b, double& ll, Eigen::VectorXd* g, Eigen::MatrixXd* h) {
    const Eigen::VectorXd eta = z * b;
    ll = 0.0;
    Eigen::VectorXd w(n), r(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double e = eta[i];
      const double log1pe = e > 0 ? e + std::log1p(std::exp(-e)) : std::log1p(std::exp(e));
      ll += y[i] * e - log1pe;
      const double pr = 1.0 / (1.0 + std::exp(-e));
      r[i] = y[i] - pr;
      w[i] = pr * (1.0 - pr);
    }
    ll /= nn;
    if (g) *g = z.transpose() * r / nn;
    if (h) *h = -(z.transpose() * w.asDiagonal() * z) / nn;
    return std::isfinite(ll);
  };
  Eigen::VectorXd start = Eigen::VectorXd::Zero(p);
  start[0] = std::log(ybar / (1.0 - ybar));
  auto guard = [max_norm](const Eigen::VectorXd& b) {
    if (b.norm() > max_norm)
      fail(ErrorKind::kFit,
           "logistic fit: perfect separation suspected (coefficient norm exceeds bound); "
           "consider a clipping-only fallback");
  };
  FitTrace trace;
  const Eigen::VectorXd bz = newton_maximize(obj, start, "logistic regression", &trace, guard);
  std::vector<double> beta(p);
  double b0 = bz[0];
  for (Eigen::Index j = 1; j < p; ++j) {
    beta[j] = bz[j] / sd[j];
    b0 -= bz[j] * mean[j] / sd[j];
  }
  beta[0] = b0;
  return beta;
}

LogisticRatio::LogisticRatio(FeatureMap features, std::vector<double> beta, double prior_odds, double c0)
    : features_(std::move(features)), beta_(std::move(beta)), prior_odds_(prior_odds), c0_(c0) {}

double LogisticRatio::ratio(Covariate w) const {
  std::vector<double> x(features_.width());
  features_.row(w, x.data());
  double eta = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) eta += x[j] * beta_[j];
  const double r = std::exp(eta) * prior_odds_;
  return std::clamp(r, 1.0 / c0_, c0_);
}

double LogisticRatio::saturation(const std::vector<std::vector<double>>& ws) const {
  if (ws.empty()) return 0.0;
  std::size_t k = 0;
  for (const auto& w : ws) {
    const double r = ratio(w);
    if (r <= 1.0 / c0_ || r >= c0_) ++k;
  }
  return static_cast<double>(k) / static_cast<double>(ws.size());
}

double ShiftOracleRatio::ratio(Covariate w) const {
  const double r = w[0] > 0.0 ? 1.0 / (2.0 * w[0]) : c0_;
  return std::clamp(r, 1.0 / c0_, c0_);
}

std::shared_ptr<const LogisticRatio> fit_density_ratio(const FusedSample& sample, double c0) {
  if (sample.n1() == 0 || sample.n0() == 0)
    fail(ErrorKind::kEmptySource, "density ratio needs both sources to be non-empty");
  std::vector<std::vector<double>> rows;
  Eigen::VectorXd s(sample.size());
  for (std::size_t i = 0; i < sample.size(); ++i) {
    rows.push_back(sample[i].w);
    s[i] = sample[i].source;
  }
  FeatureMap fm = FeatureMap::build(rows);
  auto beta = fit_logistic(fm.design(rows), s, 50.0);
  const double odds = static_cast<double>(sample.n0()) / static_cast<double>(sample.n1());
  return std::make_shared<LogisticRatio>(std::move(fm), std::move(beta), odds, c0);
}

// ---------------------------------------------------------- inspection

Eigen::MatrixXd InspectionModel::cdf_matrix(const Eigen::MatrixXd& ws, std::span<const double> points) const {
  Eigen::MatrixXd out(ws.rows(), static_cast<Eigen::Index>(points.size()));
  std::vector<double> w(ws.cols());
  for (Eigen::Index i = 0; i < ws.rows(); ++i) {
    for (Eigen::Index k = 0; k < ws.cols(); ++k) w[k] = ws(i, k);
    for (std::size_t k = 0; k < points.size(); ++k) {
      const double c = points[k];
      out(i, static_cast<Eigen::Index>(k)) =
          c <= window_.c_lower ? 0.0 : (c >= window_.c_upper ? 1.0 : cdf(c, w));
    }
  }
  return out;
}

Eigen::MatrixXd InspectionModel::density_matrix(const Eigen::MatrixXd& ws, std::span<const double> points) const {
  Eigen::MatrixXd out(ws.rows(), static_cast<Eigen::Index>(points.size()));
  std::vector<double> w(ws.cols());
  for (Eigen::Index i = 0; i < ws.rows(); ++i) {
    for (Eigen::Index k = 0; k < ws.cols(); ++k) w[k] = ws(i, k);
    for (std::size_t k = 0; k < points.size(); ++k) out(i, static_cast<Eigen::Index>(k)) = density(points[k], w);
  }
  return out;
}

double silverman_bandwidth(const std::vector<double>& x) {
  if (x.size() < 2) fail(ErrorKind::kInsufficientData, "bandwidth needs at least two values");
  const double n = static_cast<double>(x.size());
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  const double iqr = empirical_quantile(x, 0.75) - empirical_quantile(x, 0.25);
  double s = std::min(sd, iqr / 1.34);
  if (!(s > 0.0)) s = sd;
  if (!(s > 0.0)) fail(ErrorKind::kInsufficientData, "bandwidth undefined for constant data");
  return 0.9 * s * std::pow(n, -0.2);
}

KernelInspection::KernelInspection(InspectionWindow win, std::vector<double> c, std::vector<std::vector<double>> w,
                                   double bandwidth_c, std::vector<double> bandwidth_w, std::vector<bool> discrete)
    : InspectionModel(win),
      c_(std::move(c)),
      w_(std::move(w)),
      hc_(bandwidth_c),
      hw_(std::move(bandwidth_w)),
      discrete_(std::move(discrete)) {
  if (c_.empty() || c_.size() != w_.size()) fail(ErrorKind::kArgument, "kernel inspection: bad data");
  if (!(hc_ > 0.0)) fail(ErrorKind::kArgument, "kernel inspection: bandwidth must be positive");
  lo_cdf_.resize(c_.size());
  norm_cols_.resize(c_.size());
  for (std::size_t i = 0; i < c_.size(); ++i) {
    lo_cdf_[i] = normal_cdf((win.c_lower - c_[i]) / hc_);
    norm_cols_[i] = normal_cdf((win.c_upper - c_[i]) / hc_) - lo_cdf_[i];
  }
}

void KernelInspection::weights(Covariate w, double* out) const {
  const std::size_t n = c_.size();
  const double neg_inf = -std::numeric_limits<double>::infinity();
  double best = neg_inf;
  for (std::size_t i = 0; i < n; ++i) {
    double lw = 0.0;
    for (std::size_t k = 0; k < hw_.size(); ++k) {
      if (discrete_[k]) {
        if (w[k] != w_[i][k]) {
          lw = neg_inf;
          break;
        }
      } else {
        const double z = (w[k] - w_[i][k]) / hw_[k];
        lw -= 0.5 * z * z;
      }
    }
    out[i] = lw;
    best = std::max(best, lw);
  }
  if (best == neg_inf) {
    // no stored row shares the discrete coordinates: fall back to equal weights
    std::fill(out, out + n, 1.0 / static_cast<double>(n));
    return;
  }
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = out[i] == neg_inf ? 0.0 : std::exp(out[i] - best);
    s += out[i];
  }
  for (std::size_t i = 0; i < n; ++i) out[i] /= s;
}

double KernelInspection::density(double c, Covariate w) const {
  const auto& win = window();
  if (c < win.c_lower || c > win.c_upper) return 0.0;
  std::vector<double> a(c_.size());
  weights(w, a.data());
  double num = 0.0, z = 0.0;
  for (std::size_t i = 0; i < c_.size(); ++i) {
    const double u = (c - c_[i]) / hc_;
    num += a[i] * std::exp(-0.5 * u * u);
    z += a[i] * norm_cols_[i];
  }
  return num / (hc_ * std::sqrt(2.0 * M_PI)) / z;
}

double KernelInspection::cdf(double c, Covariate w) const {
  const auto& win = window();
  if (c <= win.c_lower) return 0.0;
  if (c >= win.c_upper) return 1.0;
  std::vector<double> a(c_.size());
  weights(w, a.data());
  double num = 0.0, z = 0.0;
  for (std::size_t i = 0; i < c_.size(); ++i) {
    num += a[i] * (normal_cdf((c - c_[i]) / hc_) - lo_cdf_[i]);
    z += a[i] * norm_cols_[i];
  }
  return std::clamp(num / z, 0.0, 1.0);
}

Eigen::MatrixXd KernelInspection::cdf_matrix(const Eigen::MatrixXd& ws, std::span<const double> points) const {
  const auto& win = window();
  const auto n = static_cast<Eigen::Index>(c_.size());
  std::vector<Eigen::Index> inside;
  for (std::size_t k = 0; k < points.size(); ++k)
    if (points[k] > win.c_lower && points[k] < win.c_upper) inside.push_back(static_cast<Eigen::Index>(k));
  Eigen::MatrixXd a(ws.rows(), n);
  std::vector<double> w(ws.cols()), buf(c_.size());
  for (Eigen::Index i = 0; i < ws.rows(); ++i) {
    for (Eigen::Index k = 0; k < ws.cols(); ++k) w[k] = ws(i, k);
    weights(w, buf.data());
    for (Eigen::Index j = 0; j < n; ++j) a(i, j) = buf[j];
  }
  Eigen::MatrixXd phi(n, static_cast<Eigen::Index>(inside.size()));
  for (Eigen::Index m = 0; m < phi.cols(); ++m) {
    const double c = points[inside[m]];
    for (Eigen::Index j = 0; j < n; ++j) phi(j, m) = normal_cdf((c - c_[j]) / hc_) - lo_cdf_[j];
  }
  const Eigen::VectorXd z = a * Eigen::Map<const Eigen::VectorXd>(norm_cols_.data(), n);
  Eigen::MatrixXd r = a * phi;
  Eigen::MatrixXd out(ws.rows(), static_cast<Eigen::Index>(points.size()));
  for (std::size_t k = 0; k < points.size(); ++k)
    out.col(static_cast<Eigen::Index>(k)).setConstant(points[k] >= win.c_upper ? 1.0 : 0.0);
  for (Eigen::Index m = 0; m < r.cols(); ++m)
    out.col(inside[m]) = (r.col(m).array() / z.array()).min(1.0).max(0.0);
  return out;
}

Eigen::MatrixXd KernelInspection::density_matrix(const Eigen::MatrixXd& ws, std::span<const double> points) const {
  const auto& win = window();
  const auto n = static_cast<Eigen::Index>(c_.size());
  Eigen::MatrixXd a(ws.rows(), n);
  std::vector<double> w(ws.cols()), buf(c_.size());
  for (Eigen::Index i = 0; i < ws.rows(); ++i) {
    for (Eigen::Index k = 0; k < ws.cols(); ++k) w[k] = ws(i, k);
    weights(w, buf.data());
    for (Eigen::Index j = 0; j < n; ++j) a(i, j) = buf[j];
  }
  const auto m = static_cast<Eigen::Index>(points.size());
  Eigen::MatrixXd kern(n, m);
  for (Eigen::Index k = 0; k < m; ++k) {
    const double c = points[k];
    const bool in = c >= win.c_lower && c <= win.c_upper;
    for (Eigen::Index j = 0; j < n; ++j) {
      const double u = (c - c_[j]) / hc_;
      kern(j, k) = in ? std::exp(-0.5 * u * u) : 0.0;
    }
  }
  const Eigen::VectorXd z = a * Eigen::Map<const Eigen::VectorXd>(norm_cols_.data(), n);
  Eigen::MatrixXd out = a * kern;
  out.array().colwise() /= z.array() * (hc_ * std::sqrt(2.0 * M_PI));
  return out;
}

std::string KernelInspection::describe() const {
  std::ostringstream s;
  s.precision(6);
  s << "kernel conditional density (n0=" << c_.size() << ", h_c=" << hc_ << ", h_w=[";
  for (std::size_t k = 0; k < hw_.size(); ++k) s << (k ? ", " : "") << (discrete_[k] ? std::string("discrete") : std::to_string(hw_[k]));
  s << "])";
  return s.str();
}

std::shared_ptr<const KernelInspection> fit_inspection_density(const FusedSample& sample, const FitOptions& opts) {
  const InspectionWindow win = opts.window ? *opts.window : inspection_window(sample);
  std::vector<double> c;
  std::vector<std::vector<double>> w;
  for (const auto& o : sample.observations())
    if (o.source == 0 && win.contains(o.c)) {
      c.push_back(o.c);
      w.push_back(o.w);
    }
  if (c.size() < 5) fail(ErrorKind::kInsufficientData, "inspection density needs at least 5 current-status rows");
  const std::size_t d = sample.dim();
  const double hc = opts.bandwidth_c ? *opts.bandwidth_c : silverman_bandwidth(c);
  std::vector<double> hw(d, 0.0);
  std::vector<bool> discrete(d, false);
  for (std::size_t k = 0; k < d; ++k) {
    std::vector<double> col(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) col[i] = w[i][k];
    std::set<double> distinct(col.begin(), col.end());
    if (distinct.size() <= 10) {
      discrete[k] = true;
      continue;
    }
    hw[k] = k < opts.bandwidth_w.size() ? opts.bandwidth_w[k] : silverman_bandwidth(col);
  }
  return std::make_shared<KernelInspection>(win, std::move(c), std::move(w), hc, std::move(hw), std::move(discrete));
}

BetaInspection::BetaInspection(DgpSpec dgp)
    : InspectionModel({dgp.c_lower, dgp.c_upper}), dgp_(std::move(dgp)) {}

double BetaInspection::density(double c, Covariate w) const {
  const auto& win = window();
  // the density may be unbounded at c_u (b < 1); the open end is reported as 0
  if (c < win.c_lower || c >= win.c_upper) return 0.0;
  const double width = win.c_upper - win.c_lower;
  const double x = (c - win.c_lower) / width;
  const double b = dgp_.beta_b(w);
  return b * std::pow(1.0 - x, b - 1.0) / width;
}

double BetaInspection::cdf(double c, Covariate w) const {
  const auto& win = window();
  if (c <= win.c_lower) return 0.0;
  if (c >= win.c_upper) return 1.0;
  const double x = (c - win.c_lower) / (win.c_upper - win.c_lower);
  return -std::expm1(dgp_.beta_b(w) * std::log1p(-x));
}

double UniformInspection::density(double c, Covariate) const {
  const auto& win = window();
  return win.contains(c) ? 1.0 / (win.c_upper - win.c_lower) : 0.0;
}

double UniformInspection::cdf(double c, Covariate) const {
  const auto& win = window();
  return std::clamp((c - win.c_lower) / (win.c_upper - win.c_lower), 0.0, 1.0);
}

// ------------------------------------------------------------ bundles

NuisanceBundle fit_bundle(const FusedSample& sample, const FitOptions& opts) {
  NuisanceBundle b;
  b.event = fit_event_model(sample, opts.event_family);
  b.censoring = fit_censoring_model(sample, opts.censoring_family);
  b.inspection = fit_inspection_density(sample, opts);
  if (opts.fit_ratio) b.ratio = fit_density_ratio(sample, opts.ratio_clip);
  if (b.censoring->degenerate()) b.warnings.push_back("no censored observations: censoring survival set to 1");
  b.provenance = "fitted(event=" + to_string(opts.event_family) + ", censoring=" +
                 (b.censoring->degenerate() ? std::string("none") : to_string(opts.censoring_family)) +
                 ", inspection=kernel" + (opts.fit_ratio ? ", ratio=logistic" : "") + ")";
  return b;
}

namespace {

std::shared_ptr<const HazardModel> dgp_hazard(const double* coef) {
  return std::make_shared<ParametricHazard>(HazardFamily::kLinearRate, FeatureMap(2),
                                            std::vector<double>(coef, coef + 4));
}

std::shared_ptr<const HazardModel> constant_hazard(double rate) {
  return std::make_shared<ParametricHazard>(HazardFamily::kLinearRate, FeatureMap::intercept_only(2),
                                            std::vector<double>{rate});
}

// mean of a + b w1 + c w2 + d w1 w2 under independent U(0,1) x Bernoulli(1/2)
double mean_rate(const double* k) { return k[0] + 0.5 * k[1] + 0.5 * k[2] + 0.25 * k[3]; }

}  // namespace

NuisanceBundle oracle_bundle(const DgpSpec& dgp) {
  NuisanceBundle b;
  b.event = dgp_hazard(dgp.event_coef);
  b.censoring = dgp_hazard(dgp.censor_coef);
  b.inspection = std::make_shared<BetaInspection>(dgp);
  if (dgp.shift_cs_w1)
    b.ratio = std::make_shared<ShiftOracleRatio>();
  else
    b.ratio = std::make_shared<ConstantRatio>();
  b.provenance = "oracle:" + dgp.id;
  return b;
}

NuisanceBundle misspecified_bundle(const DgpSpec& dgp, Misspecification which) {
  NuisanceBundle b = oracle_bundle(dgp);
  if (which == Misspecification::kEvent) {
    b.event = constant_hazard(0.6 * mean_rate(dgp.event_coef));
    b.provenance = "misspec-event:" + dgp.id;
  } else {
    b.inspection = std::make_shared<UniformInspection>(InspectionWindow{dgp.c_lower, dgp.c_upper});
    b.censoring = constant_hazard(0.6 * mean_rate(dgp.censor_coef));
    b.provenance = "misspec-gR:" + dgp.id;
  }
  return b;
}

// ----------------------------------------------------- conditional means

double truncated_expectation(const StepFunctionOnGrid& h, const HazardModel& event, double u, Covariate w) {
  const TimeGrid& g = h.grid;
  if (h.values.size() != g.size()) fail(ErrorKind::kArgument, "step function does not match its grid");
  if (u < g.front() || u > g.back()) fail(ErrorKind::kRange, "truncation time outside the grid span");
  const double su = event.survival(u, w);
  if (su < kZetaNum) fail(ErrorKind::kPositivity, "conditional survival below the positivity floor");
  const std::size_t last = g.size() - 1;
  if (u >= g.back()) return h.values[last];
  std::size_t i = g.floor_index(u) + 1;
  double prev = su, acc = 0.0;
  for (; i < last; ++i) {
    const double s = event.survival(g[i], w);
    acc += h.values[i] * (prev - s);
    prev = s;
  }
  acc += h.values[last] * prev;
  return acc / su;
}

}  // namespace survfuse

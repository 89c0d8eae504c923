/*
 * Copyright 2026 The survfuse Authors
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */
#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "survfuse/data.hpp"
#include "survfuse/numerics.hpp"
#include "survfuse/nuisance.hpp"

namespace survfuse {

/// Weights (dP_1/dP_i, dP_0/dP_i) of the covariate-shift equation; (1,1) otherwise.
struct RatioWeights {
  double alpha = 1.0;  // multiplies the pi term
  double beta = 1.0;   // multiplies the (1-pi) and gamma terms
};

struct FredholmProblem {
  double pi = 0.5;
  double t_star = 0.0;
  InspectionWindow window;
  const NuisanceBundle* nuisances = nullptr;
  std::vector<double> w;
  TimeGrid grid;  // must contain t*, c_l and c_u
  RatioWeights ratio;
  bool condition_estimate = true;  // banded route: run the (slow) LAPACK condition estimator
};

/// Standard grid for one problem: n uniform points on [0, t_max] plus
/// t*, c_l, c_u and any extra points.
TimeGrid problem_grid(double t_max, std::size_t n, double t_star, const InspectionWindow& win,
                      std::span<const double> extra = {});

/// Nuisance values for one covariate on the problem grid.
struct CovariateProfile {
  std::vector<double> surv;   // S(u_j|w)
  std::vector<double> gamma;  // censoring survival, floored
  std::vector<double> dG;     // G(u_j|w) - G(u_{j-1}|w), zero outside the window
  double mu = 0.0;            // S(t*|w)

  // derived discrete law of T on the grid
  std::vector<double> p;      // mass of cell (u_{j-1}, u_j]; the last point carries the tail
  std::vector<double> sigma;  // P(T >= u_j) = S(u_{j-1})
  std::vector<double> sdisc;  // P(T > u_j) under the discrete law (0 at the last point)
};

/// Evaluates the nuisances (dG may be supplied from a batched evaluation).
CovariateProfile make_profile(const FredholmProblem& prob, const std::vector<double>* g_on_grid = nullptr);
/// Fills p, sigma and sdisc from surv.
void finish_profile(CovariateProfile& prof);

enum class SolveMethod { kBanded, kDense };

struct FredholmSolution {
  enum class Kind { kHStar, kEtaStar } kind = Kind::kHStar;
  StepFunctionOnGrid values;
  /// H*(u_j) = sum_{i<j} h_i p_i, or Theta*(u_j) = sum_{i<j} eta_i dLambda_i.
  std::vector<double> derived;
  double gamma_w = 0.0;
  double residual_sup = 0.0;
  double mean_zero = 0.0;  // sum_j h_j p_j (h* only)
  double rcond = -1.0;  // -1: not estimated
  bool regularized = false;
  std::string method = "grid-linear";
  double t_star = 0.0;
};

double kernel_K(double t, double s, const FredholmProblem& prob);

FredholmSolution solve_h_grid(const FredholmProblem& prob, SolveMethod method = SolveMethod::kBanded);
FredholmSolution solve_h_grid(const FredholmProblem& prob, const CovariateProfile& prof,
                              SolveMethod method = SolveMethod::kBanded);
FredholmSolution solve_eta_grid(const FredholmProblem& prob, SolveMethod method = SolveMethod::kBanded);
FredholmSolution solve_eta_grid(const FredholmProblem& prob, const CovariateProfile& prof,
                                SolveMethod method = SolveMethod::kBanded);

/// Residuals of the discrete equations at a candidate solution (h and gamma).
std::vector<double> h_residuals(const FredholmProblem& prob, const CovariateProfile& prof,
                                std::span<const double> h);
std::vector<double> eta_residuals(const FredholmProblem& prob, const CovariateProfile& prof,
                                  std::span<const double> eta);

/// Dense assembly of the h* system in the unknowns (h_0..h_{B-1}, gamma).
void assemble_h_system(const FredholmProblem& prob, const CovariateProfile& prof, Eigen::MatrixXd& a,
                       Eigen::VectorXd& b);

enum class BasisLayout {
  kGraded,      // piecewise Chebyshev on segments cut at c_l, t*, c_u and knots graded toward c_u
  kStarSplit,   // Chebyshev on [0, t_max] times {1(t>t*), 1(t<=t*)}
  kPolynomial,  // one Chebyshev series of degree 2*degree+1 (no break at t*)
};

std::string to_string(BasisLayout l);

struct BasisSolution {
  BasisLayout layout = BasisLayout::kGraded;
  int degree = 10;
  double t_star = 0.0;
  double t_max = 0.0;
  std::vector<double> breaks;        // segment ends for the graded layout
  std::vector<int> segment_degree;   // graded layout: degree used on each segment
  Eigen::VectorXd coef;
  double residual_sup = 0.0;   // least-squares residual of the discrete equations
  bool rank_deficient = false;
  std::vector<std::string> warnings;

  std::size_t size() const { return static_cast<std::size_t>(coef.size()); }
};

BasisSolution solve_h_basis(const FredholmProblem& prob, int degree = 10, BasisLayout layout = BasisLayout::kGraded);

enum class GridInterpolation { kNearest, kLinear };

/// Grid solutions: nearest grid point (or linear) on the same side of t*;
/// basis solutions: analytic. At t = t* the 1(t>t*) = 0 branch is returned.
double evaluate_solution(const FredholmSolution& sol, double t,
                         GridInterpolation how = GridInterpolation::kNearest);
double evaluate_solution(const BasisSolution& sol, double t);

}  // namespace survfuse

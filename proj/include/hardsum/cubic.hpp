#pragma once

#include "hardsum/linalg.hpp"

namespace hardsum {

/// m(h) = <v, h> + 1/2 <U h, h> + (M/6) |h|^3.
struct CubicModel {
  Vector v;
  SymMatrix u;
  double penalty;  // M

  CubicModel(Vector gradient, SymMatrix hessian, double m);
  Index dim() const { return v.size(); }
};

double model_value(const CubicModel& model, const Vector& h);

/// Global minimizer of the cubic model together with the residuals of its
/// three optimality conditions:
///   v + U h + (M/2)|h| h = 0,   U + (M/2)|h| I >= 0,   m(h) <= -(M/12)|h|^3.
struct CubicSolution {
  Vector h;
  double step_norm = 0.0;
  double first_order_residual = 0.0;  // |v + U h + (M/2)|h| h|
  double curvature_slack = 0.0;       // lambda_min(U) + (M/2)|h|
  double value = 0.0;                 // m(h)
  double decrease_slack = 0.0;        // m(h) + (M/12)|h|^3, <= 0 at the optimum
  bool hard_case = false;
};

inline constexpr double kDefaultCubicTolerance = 1e-10;

/// Exact solve through one eigendecomposition of U and a bracketed search on
/// the secular equation |h(s)| = s, h(s) = -(U + (M/2) s I)^{-1} v. The hard
/// case (v orthogonal to the bottom eigenspace) adds a component along that
/// eigenspace. Throws NumericalFailure if a condition misses tol * (1 + |v|).
CubicSolution solve_cubic(const CubicModel& model, double tol = kDefaultCubicTolerance);

}  // namespace hardsum

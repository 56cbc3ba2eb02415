#pragma once

#include "hardsum/oracle.hpp"

#include <vector>

namespace hardsum {

/// f_i(x) = 1/2 x^T A_i x + b_i^T x + c_i.
class QuadraticFiniteSum : public FiniteSumFunction {
 public:
  QuadraticFiniteSum(std::vector<SymMatrix> a, std::vector<Vector> b, std::vector<double> c);

  Index num_components() const override { return static_cast<Index>(a_.size()); }
  Index dimension() const override { return dim_; }
  Derivatives component(Index i, const Vector& x, int order) const override;

 private:
  std::vector<SymMatrix> a_;
  std::vector<Vector> b_;
  std::vector<double> c_;
  Index dim_;
};

/// f_i(x) = b_i^T x + 1/2 x^T A_i x + (c_i / 6) |x - z_i|^3 with A_i possibly
/// indefinite. The Hessian of f_i is c_i-Lipschitz, and F is bounded below.
class CubicFiniteSum : public FiniteSumFunction {
 public:
  CubicFiniteSum(std::vector<SymMatrix> a, std::vector<Vector> b, std::vector<double> c, std::vector<Vector> z);

  Index num_components() const override { return static_cast<Index>(a_.size()); }
  Index dimension() const override { return dim_; }
  Derivatives component(Index i, const Vector& x, int order) const override;

  /// max_i c_i, the individual Hessian-Lipschitz constant.
  double max_cubic_weight() const;
  /// ((1/n) sum_i c_i^3)^{1/3}.
  double cubic_weight_third_moment() const;

 private:
  std::vector<SymMatrix> a_;
  std::vector<Vector> b_;
  std::vector<double> c_;
  std::vector<Vector> z_;
  Index dim_;
};

struct CubicSumOptions {
  double curvature = 1.0;     // entries of A_i are N(0, curvature^2 / d), symmetrized
  double linear = 0.5;        // b_i ~ N(0, linear^2 I)
  double weight_min = 0.5;    // c_i ~ U[weight_min, weight_max]
  double weight_max = 2.0;
  double center_spread = 1.0; // z_i ~ N(0, center_spread^2 I)
};

CubicFiniteSum make_cubic_finite_sum(Index n, Index d, Rng& rng, const CubicSumOptions& options = {});

/// Random convex quadratics with A_i = G G^T / d + I.
QuadraticFiniteSum make_quadratic_finite_sum(Index n, Index d, Rng& rng);

/// Serves precomputed derivatives of every component at one point and
/// delegates everywhere else. Used by Monte-Carlo checks that query the
/// same point many times.
class PointCachedFunction : public FiniteSumFunction {
 public:
  PointCachedFunction(const FiniteSumFunction& base, const Vector& point);

  Index num_components() const override { return base_.num_components(); }
  Index dimension() const override { return base_.dimension(); }
  Derivatives component(Index i, const Vector& x, int order) const override;

 private:
  const FiniteSumFunction& base_;
  Vector point_;
  std::vector<Derivatives> cache_;
};

}  // namespace hardsum

#include "hardsum/cubic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

namespace hardsum {

CubicModel::CubicModel(Vector gradient, SymMatrix hessian, double m)
    : v(std::move(gradient)), u(std::move(hessian)), penalty(m) {
  if (!(penalty > 0.0) || !std::isfinite(penalty)) {
    throw std::invalid_argument("CubicModel: penalty M must be positive");
  }
  if (u.dim() != v.size()) throw std::invalid_argument("CubicModel: dimension mismatch");
}

double model_value(const CubicModel& model, const Vector& h) {
  if (h.size() != model.dim()) throw std::invalid_argument("model_value: dimension mismatch");
  const double r = h.norm();
  return model.v.dot(h) + 0.5 * h.dot(model.u.matrix() * h) + model.penalty / 6.0 * r * r * r;
}

namespace {

// Everything below works in the eigenbasis of U with the spectrum written as
// lambda_1 + gap_j, so shifted eigenvalues gap_j + delta never cancel.
struct Spectral {
  Matrix q;
  Vector coeff;  // Q^T v
  Vector gap;    // lambda_j - lambda_1 >= 0
  double lambda1;
  double penalty;

  // |h| as a function of delta = lambda_1 + (M/2)s.
  double step_norm(double delta) const {
    double acc = 0.0;
    for (Index j = 0; j < coeff.size(); ++j) {
      if (coeff(j) == 0.0) continue;
      const double shift = gap(j) + delta;
      if (shift <= 0.0) return std::numeric_limits<double>::infinity();
      const double t = coeff(j) / shift;
      acc += t * t;
    }
    return std::sqrt(acc);
  }
  double radius(double delta) const { return 2.0 * (delta - lambda1) / penalty; }
  double secular(double delta) const { return step_norm(delta) - radius(delta); }

  Vector step(double delta) const {
    Vector w(coeff.size());
    for (Index j = 0; j < coeff.size(); ++j) w(j) = coeff(j) == 0.0 ? 0.0 : -coeff(j) / (gap(j) + delta);
    return q * w;
  }
};

CubicSolution certify(const CubicModel& model, Vector h, bool hard_case) {
  CubicSolution sol;
  sol.h = std::move(h);
  sol.hard_case = hard_case;
  sol.step_norm = sol.h.norm();
  const double m = model.penalty;
  sol.first_order_residual =
      (model.v + model.u.matrix() * sol.h + 0.5 * m * sol.step_norm * sol.h).norm();
  sol.curvature_slack = lambda_min(model.u) + 0.5 * m * sol.step_norm;
  sol.value = model_value(model, sol.h);
  sol.decrease_slack = sol.value + m / 12.0 * std::pow(sol.step_norm, 3);
  return sol;
}

double violation(const CubicSolution& s, double scale) {
  return std::max({s.first_order_residual / scale, -s.curvature_slack / scale, s.decrease_slack / scale, 0.0});
}

}  // namespace

CubicSolution solve_cubic(const CubicModel& model, double tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("solve_cubic: tolerance must be positive");
  const Index d = model.dim();
  const double m = model.penalty;
  const double scale = 1.0 + model.v.norm();
  if (d == 0) return certify(model, Vector(0), false);

  const EigenDecomposition eig = eig_sym(model.u);
  Spectral sp;
  sp.q = eig.vectors;
  sp.coeff = eig.vectors.transpose() * model.v;
  sp.lambda1 = eig.values(0);
  sp.gap = (eig.values.array() - sp.lambda1).max(0.0).matrix();
  sp.penalty = m;

  const double g_norm = sp.coeff.norm();
  if (g_norm == 0.0) {
    // Stationary model: either h = 0 or a pure negative-curvature step.
    Vector h = Vector::Zero(d);
    if (sp.lambda1 < 0.0) h = (-2.0 * sp.lambda1 / m) * sp.q.col(0);
    return certify(model, std::move(h), sp.lambda1 < 0.0);
  }

  const double delta_lo = std::max(0.0, sp.lambda1);
  std::optional<CubicSolution> interior;
  if (sp.secular(delta_lo) > 0.0) {
    // Root of the decreasing secular function inside (delta_lo, delta_hi].
    double lo = delta_lo;
    double hi = 0.5 * (sp.lambda1 + std::sqrt(sp.lambda1 * sp.lambda1 + 2.0 * m * g_norm));
    hi = std::max(hi, delta_lo) * (1.0 + 1e-12) + std::numeric_limits<double>::min();
    while (sp.secular(hi) > 0.0) hi *= 2.0;
    for (int it = 0; it < 2000; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      if (sp.secular(mid) > 0.0) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    const double delta = std::abs(sp.secular(lo)) < std::abs(sp.secular(hi)) ? lo : hi;
    interior = certify(model, sp.step(delta), false);
  }

  std::optional<CubicSolution> boundary;
  const double s_lo = -2.0 * sp.lambda1 / m;
  if (sp.lambda1 < 0.0) {
    // Treat the bottom eigenspace as orthogonal to v and complete |h| = s_lo along it.
    const double cluster_tol = 1e-12 * (1.0 + eig.values.cwiseAbs().maxCoeff());
    Vector w = Vector::Zero(d);
    Index bottom = 0;
    for (Index j = 0; j < d; ++j) {
      if (sp.gap(j) <= cluster_tol) {
        if (std::abs(sp.coeff(j)) > std::abs(sp.coeff(bottom))) bottom = j;
        continue;
      }
      w(j) = -sp.coeff(j) / sp.gap(j);
    }
    const double rest = w.norm();
    if (rest <= s_lo) {
      const double tau = std::sqrt(std::max(0.0, s_lo * s_lo - rest * rest));
      w(bottom) = sp.coeff(bottom) > 0.0 ? -tau : tau;
      boundary = certify(model, sp.q * w, true);
    }
  }

  const CubicSolution* best = nullptr;
  for (const std::optional<CubicSolution>* cand : {&interior, &boundary}) {
    if (!cand->has_value()) continue;
    const CubicSolution& c = **cand;
    if (best == nullptr) {
      best = &c;
      continue;
    }
    const double vc = violation(c, scale);
    const double vb = violation(*best, scale);
    const bool c_ok = vc <= tol;
    const bool b_ok = vb <= tol;
    if ((c_ok && !b_ok) || (c_ok == b_ok && (c_ok ? c.value < best->value : vc < vb))) best = &c;
  }
  if (best == nullptr) throw NumericalFailure("solve_cubic: no candidate step (degenerate spectrum)");
  if (violation(*best, scale) > tol) {
    throw NumericalFailure("solve_cubic: optimality conditions not met (first-order residual " +
                           std::to_string(best->first_order_residual) + ", curvature slack " +
                           std::to_string(best->curvature_slack) + ", decrease slack " +
                           std::to_string(best->decrease_slack) + ")");
  }
  return *best;
}

}  // namespace hardsum

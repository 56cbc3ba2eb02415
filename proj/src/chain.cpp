#include "hardsum/chain.hpp"

#include <cmath>
#include <numbers>

namespace hardsum {

namespace {

constexpr double kSqrtE = 1.6487212707001282;  // e^{1/2}

// Below this point exp(1 - 1/(2x-1)^2) is far beneath the smallest double.
constexpr double kPsiCutoff = 0.5 + 1e-8;

}  // namespace

double psi(double x, int order) {
  check_order(order, 3);
  if (x <= kPsiCutoff) return 0.0;
  const double u = 2.0 * x - 1.0;
  const double exponent = 1.0 - 1.0 / (u * u);
  if (exponent < -745.0) return 0.0;
  const double value = std::exp(exponent);
  if (order == 0) return value;
  // derivatives of the exponent g(x) = 1 - u^{-2}
  const double inv = 1.0 / u;
  const double g1 = 4.0 * inv * inv * inv;
  if (order == 1) return value * g1;
  const double g2 = -24.0 * inv * inv * inv * inv;
  if (order == 2) return value * (g1 * g1 + g2);
  const double g3 = 192.0 * inv * inv * inv * inv * inv;
  return value * (g1 * g1 * g1 + 3.0 * g1 * g2 + g3);
}

double phi(double x, int order) {
  check_order(order, 3);
  if (order == 0) {
    // erfc keeps full relative accuracy in the left tail.
    return kSqrtE * std::sqrt(std::numbers::pi / 2.0) * std::erfc(-x / std::numbers::sqrt2);
  }
  const double d1 = kSqrtE * std::exp(-0.5 * x * x);
  if (order == 1) return d1;
  if (order == 2) return -x * d1;
  return (x * x - 1.0) * d1;
}

ChainMask::ChainMask(std::vector<bool> bits) : bits_(std::move(bits)) {}

Derivatives chain_eval(const ChainMask& mask, const Vector& x, int order) {
  check_order(order);
  const Index k = x.size();
  if (mask.size() != k) {
    throw std::invalid_argument("chain_eval: mask length " + std::to_string(mask.size()) +
                                " does not match input dimension " + std::to_string(k));
  }
  Derivatives out = Derivatives::zero(k, order);
  if (k == 0) return out;

  const double psi_one = psi(1.0, 0);
  if (mask[0]) {
    out.value -= psi_one * phi(x(0), 0);
    if (order >= 1) out.gradient(0) -= psi_one * phi(x(0), 1);
    if (order >= 2) out.hessian(0, 0) -= psi_one * phi(x(0), 2);
  }

  for (Index j = 1; j < k; ++j) {
    if (!mask[j]) continue;
    const double a = x(j - 1);
    const double b = x(j);
    const double pm = psi(-a, 0);
    const double pp = psi(a, 0);
    // Both gates closed: the link and all its derivatives vanish.
    if (pm == 0.0 && pp == 0.0) continue;
    const double fm = phi(-b, 0);
    const double fp = phi(b, 0);
    out.value += pm * fm - pp * fp;
    if (order >= 1) {
      const double pm1 = psi(-a, 1);
      const double pp1 = psi(a, 1);
      const double fm1 = phi(-b, 1);
      const double fp1 = phi(b, 1);
      out.gradient(j - 1) += -pm1 * fm - pp1 * fp;
      out.gradient(j) += -pm * fm1 - pp * fp1;
      if (order >= 2) {
        out.hessian(j - 1, j - 1) += psi(-a, 2) * fm - psi(a, 2) * fp;
        out.hessian(j, j) += pm * phi(-b, 2) - pp * phi(b, 2);
        const double cross = pm1 * fm1 - pp1 * fp1;
        out.hessian(j - 1, j) += cross;
        out.hessian(j, j - 1) += cross;
      }
    }
  }
  return out;
}

SoftClampParams::SoftClampParams(double r) : radius(r) {
  if (!(r > 0.0) || !std::isfinite(r)) {
    throw std::invalid_argument("SoftClampParams: radius must be positive and finite");
  }
}

SoftClampParams SoftClampParams::for_chain_length(Index k) {
  return SoftClampParams(230.0 * std::sqrt(static_cast<double>(k)));
}

SoftClamp soft_clamp(const Vector& y, const SoftClampParams& params, int order) {
  check_order(order);
  const double r2 = params.radius * params.radius;
  SoftClamp out;
  out.scale = 1.0 / std::sqrt(1.0 + y.squaredNorm() / r2);
  out.value = out.scale * y;
  if (order >= 1) {
    const double s = out.scale;
    out.jacobian = s * (Matrix::Identity(y.size(), y.size()) - (s * s / r2) * y * y.transpose());
  }
  return out;
}

Matrix soft_clamp_curvature(const Vector& y, const SoftClampParams& params, const Vector& w) {
  if (w.size() != y.size()) throw std::invalid_argument("soft_clamp_curvature: dimension mismatch");
  const double r2 = params.radius * params.radius;
  const double s = 1.0 / std::sqrt(1.0 + y.squaredNorm() / r2);
  const double s3 = s * s * s;
  const double wy = w.dot(y);
  Matrix h = -(s3 / r2) * (w * y.transpose() + y * w.transpose());
  h.diagonal().array() -= (s3 / r2) * wy;
  h += (3.0 * s3 * s * s / (r2 * r2)) * wy * (y * y.transpose());
  return h;
}

HatFunction::HatFunction(TallOrthogonal basis)
    : HatFunction(basis, SoftClampParams::for_chain_length(basis.cols())) {}

HatFunction::HatFunction(TallOrthogonal basis, SoftClampParams clamp)
    : basis_(std::move(basis)), clamp_(clamp) {
  if (basis_.cols() < 1) throw std::invalid_argument("HatFunction: empty basis");
}

Derivatives HatFunction::eval(const Vector& y, int order) const {
  check_order(order);
  if (y.size() != input_dim()) {
    throw std::invalid_argument("HatFunction: input has dimension " + std::to_string(y.size()) +
                                ", expected " + std::to_string(input_dim()));
  }
  const Matrix& b = basis_.matrix();
  const SoftClamp clamped = soft_clamp(y, clamp_, order);
  const Vector z = b.transpose() * clamped.value;
  const Derivatives inner = chain_eval(ChainMask::all_ones(chain_length()), z, order);

  Derivatives out;
  out.order = order;
  out.value = inner.value + 0.1 * y.squaredNorm();
  if (order >= 1) {
    const Vector w = b * inner.gradient;  // gradient of the chain w.r.t. rho(y)
    out.gradient = clamped.jacobian * w + 0.2 * y;
    if (order >= 2) {
      const Matrix jb = clamped.jacobian * b;
      Matrix h = jb * inner.hessian * jb.transpose();
      h += soft_clamp_curvature(y, clamp_, w);
      h.diagonal().array() += 0.2;
      out.hessian = 0.5 * (h + h.transpose());
    }
  }
  return out;
}

Derivatives hat_f_eval(Index k, const TallOrthogonal& basis, const Vector& y, int order) {
  if (basis.cols() != k) {
    throw std::invalid_argument("hat_f_eval: basis has " + std::to_string(basis.cols()) +
                                " columns, expected K = " + std::to_string(k));
  }
  return HatFunction(basis).eval(y, order);
}

}  // namespace hardsum

#pragma once

#include "hardsum/derivatives.hpp"
#include "hardsum/linalg.hpp"

#include <vector>

namespace hardsum {

/// Smooth gate: 0 for x <= 1/2, exp(1 - 1/(2x-1)^2) above. `order` in 0..3.
double psi(double x, int order = 0);

/// sqrt(e) times the integral of exp(-t^2/2) over (-inf, x]. `order` in 0..3.
double phi(double x, int order = 0);

/// Which links of the chain are switched on (delta_k in {0,1}).
class ChainMask {
 public:
  ChainMask() = default;
  explicit ChainMask(std::vector<bool> bits);

  static ChainMask all_ones(Index k) { return ChainMask(std::vector<bool>(static_cast<size_t>(k), true)); }
  static ChainMask all_zeros(Index k) { return ChainMask(std::vector<bool>(static_cast<size_t>(k), false)); }

  Index size() const { return static_cast<Index>(bits_.size()); }
  bool operator[](Index k) const { return bits_[static_cast<size_t>(k)]; }
  void set(Index k, bool on) { bits_[static_cast<size_t>(k)] = on; }
  const std::vector<bool>& bits() const { return bits_; }

 private:
  std::vector<bool> bits_;
};

/// Masked chain
///   -m_1 Psi(1) Phi(x_1) + sum_{k>=2} m_k [Psi(-x_{k-1}) Phi(-x_k) - Psi(x_{k-1}) Phi(x_k)].
/// The Hessian is tridiagonal. With the all-ones mask this is the zero-chain
/// function used by every randomized instance.
Derivatives chain_eval(const ChainMask& mask, const Vector& x, int order);

struct SoftClampParams {
  double radius;
  explicit SoftClampParams(double r);
  /// 230 sqrt(K), the radius used by the randomized instances.
  static SoftClampParams for_chain_length(Index k);
};

/// rho(y) = y / sqrt(1 + |y|^2 / R^2) and its Jacobian s (I - s^2 y y^T / R^2).
struct SoftClamp {
  Vector value;
  Matrix jacobian;  // filled when order >= 1
  double scale = 1.0;  // s
};

SoftClamp soft_clamp(const Vector& y, const SoftClampParams& params, int order);

/// Hessian of y -> <w, rho(y)>, the second-derivative term of the chain rule.
Matrix soft_clamp_curvature(const Vector& y, const SoftClampParams& params, const Vector& w);

/// y -> chain(B^T rho(y)) + |y|^2 / 10 with B an m x K block of orthonormal columns.
class HatFunction {
 public:
  explicit HatFunction(TallOrthogonal basis);
  HatFunction(TallOrthogonal basis, SoftClampParams clamp);

  Derivatives eval(const Vector& y, int order) const;

  Index chain_length() const { return basis_.cols(); }
  Index input_dim() const { return basis_.rows(); }
  const TallOrthogonal& basis() const { return basis_; }
  const SoftClampParams& clamp() const { return clamp_; }

 private:
  TallOrthogonal basis_;
  SoftClampParams clamp_;
};

Derivatives hat_f_eval(Index k, const TallOrthogonal& basis, const Vector& y, int order);

}  // namespace hardsum

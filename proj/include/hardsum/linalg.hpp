#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>

namespace hardsum {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Every stochastic routine takes its generator explicitly; there is no global RNG.
using Rng = std::mt19937_64;

/// Raised when a factorization or iterative solve cannot produce a certified answer.
class NumericalFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Symmetric dense matrix. Construction rejects inputs whose asymmetry exceeds
/// 1e-12 relative to the largest entry; the stored matrix is exactly symmetrized.
class SymMatrix {
 public:
  SymMatrix() = default;
  explicit SymMatrix(Matrix entries);

  static SymMatrix zero(Index d) { return SymMatrix(Matrix::Zero(d, d)); }
  static SymMatrix identity(Index d) { return SymMatrix(Matrix::Identity(d, d)); }

  const Matrix& matrix() const { return entries_; }
  Index dim() const { return entries_.rows(); }

 private:
  Matrix entries_;
};

/// d x k matrix with orthonormal columns (d >= k).
class TallOrthogonal {
 public:
  TallOrthogonal() = default;
  explicit TallOrthogonal(Matrix columns);

  const Matrix& matrix() const { return columns_; }
  Index rows() const { return columns_.rows(); }
  Index cols() const { return columns_.cols(); }
  /// Columns [first, first + count) as a new tall orthogonal block.
  TallOrthogonal block(Index first, Index count) const;

 private:
  Matrix columns_;
};

/// Haar-distributed point on the Stiefel manifold: QR of a Gaussian d x k
/// matrix with the sign of each column fixed so that diag(R) > 0.
TallOrthogonal sample_orthonormal_columns(Index d, Index k, Rng& rng);

struct EigenDecomposition {
  Vector values;   // ascending
  Matrix vectors;  // column j pairs with values(j)
};

EigenDecomposition eig_sym(const SymMatrix& a);

/// Smallest eigenvalue of a symmetric matrix.
double lambda_min(const SymMatrix& a);

/// Spectral norm of a symmetric matrix (largest absolute eigenvalue).
double sym_operator_norm(const Matrix& a);

double max_abs(const Matrix& a);

Vector gaussian_vector(Index d, Rng& rng);

using ScalarField = std::function<double(const Vector&)>;
using VectorField = std::function<Vector(const Vector&)>;

/// 1e-5 * max(1, |x|).
double default_fd_step(const Vector& x);

/// Central differences of a scalar function.
Vector finite_diff_gradient(const ScalarField& f, const Vector& x, double step);

/// Central-difference Jacobian of a gradient field, symmetrized.
Matrix finite_diff_hessian(const VectorField& grad, const Vector& x, double step);

/// Second-order central differences of the values only.
Matrix finite_diff_hessian_values(const ScalarField& f, const Vector& x, double step);

/// |a - b| / max(1, |b|) in the Frobenius norm, used by every derivative check.
double relative_error(const Matrix& analytic, const Matrix& reference);

}  // namespace hardsum

#include "hardsum/linalg.hpp"

#include <algorithm>
#include <cmath>

namespace hardsum {

SymMatrix::SymMatrix(Matrix entries) {
  if (entries.rows() != entries.cols()) {
    throw std::invalid_argument("SymMatrix: matrix is not square");
  }
  if (!entries.allFinite()) {
    throw std::invalid_argument("SymMatrix: non-finite entry");
  }
  const double scale = max_abs(entries);
  const double asym = max_abs(entries - entries.transpose());
  if (asym > 1e-12 * scale) {
    throw std::invalid_argument("SymMatrix: input is not symmetric");
  }
  entries_ = 0.5 * (entries + entries.transpose());
}

TallOrthogonal::TallOrthogonal(Matrix columns) : columns_(std::move(columns)) {
  if (columns_.rows() < columns_.cols()) {
    throw std::invalid_argument("TallOrthogonal: more columns than rows");
  }
  const Index k = columns_.cols();
  const double defect = max_abs(columns_.transpose() * columns_ - Matrix::Identity(k, k));
  if (defect > 1e-10) {
    throw std::invalid_argument("TallOrthogonal: columns are not orthonormal");
  }
}

TallOrthogonal TallOrthogonal::block(Index first, Index count) const {
  if (first < 0 || count < 0 || first + count > cols()) {
    throw std::invalid_argument("TallOrthogonal::block: column range out of bounds");
  }
  TallOrthogonal out;
  out.columns_ = columns_.middleCols(first, count);
  return out;
}

Vector gaussian_vector(Index d, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector g(d);
  for (Index j = 0; j < d; ++j) g(j) = normal(rng);
  return g;
}

TallOrthogonal sample_orthonormal_columns(Index d, Index k, Rng& rng) {
  if (k < 1 || k > d) {
    throw std::invalid_argument("sample_orthonormal_columns: need 1 <= k <= d");
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix g(d, k);
  // Column-major fill keeps the draw order independent of Eigen internals.
  for (Index c = 0; c < k; ++c)
    for (Index r = 0; r < d; ++r) g(r, c) = normal(rng);

  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ() * Matrix::Identity(d, k);
  const Matrix& r = qr.matrixQR();
  for (Index c = 0; c < k; ++c) {
    if (r(c, c) < 0.0) q.col(c) = -q.col(c);
  }
  return TallOrthogonal(std::move(q));
}

EigenDecomposition eig_sym(const SymMatrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(a.matrix());
  if (solver.info() != Eigen::Success) {
    throw NumericalFailure("eig_sym: eigensolver did not converge");
  }
  return {solver.eigenvalues(), solver.eigenvectors()};
}

double lambda_min(const SymMatrix& a) {
  if (a.dim() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> solver(a.matrix(), Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) {
    throw NumericalFailure("lambda_min: eigensolver did not converge");
  }
  return solver.eigenvalues()(0);
}

double sym_operator_norm(const Matrix& a) {
  if (a.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> solver(0.5 * (a + a.transpose()), Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) {
    throw NumericalFailure("sym_operator_norm: eigensolver did not converge");
  }
  const Vector& ev = solver.eigenvalues();
  return std::max(std::abs(ev(0)), std::abs(ev(ev.size() - 1)));
}

double max_abs(const Matrix& a) { return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff(); }

double default_fd_step(const Vector& x) { return 1e-5 * std::max(1.0, x.norm()); }

Vector finite_diff_gradient(const ScalarField& f, const Vector& x, double step) {
  if (!(step > 0.0)) throw std::invalid_argument("finite_diff_gradient: step must be positive");
  Vector g(x.size());
  Vector probe = x;
  for (Index j = 0; j < x.size(); ++j) {
    probe(j) = x(j) + step;
    const double up = f(probe);
    probe(j) = x(j) - step;
    const double down = f(probe);
    probe(j) = x(j);
    g(j) = (up - down) / (2.0 * step);
  }
  return g;
}

Matrix finite_diff_hessian(const VectorField& grad, const Vector& x, double step) {
  if (!(step > 0.0)) throw std::invalid_argument("finite_diff_hessian: step must be positive");
  const Index d = x.size();
  Matrix h(d, d);
  Vector probe = x;
  for (Index j = 0; j < d; ++j) {
    probe(j) = x(j) + step;
    const Vector up = grad(probe);
    probe(j) = x(j) - step;
    const Vector down = grad(probe);
    probe(j) = x(j);
    h.col(j) = (up - down) / (2.0 * step);
  }
  return 0.5 * (h + h.transpose());
}

Matrix finite_diff_hessian_values(const ScalarField& f, const Vector& x, double step) {
  if (!(step > 0.0)) throw std::invalid_argument("finite_diff_hessian_values: step must be positive");
  const Index d = x.size();
  Matrix h(d, d);
  const double f0 = f(x);
  Vector probe = x;
  for (Index j = 0; j < d; ++j) {
    probe(j) = x(j) + step;
    const double up = f(probe);
    probe(j) = x(j) - step;
    const double down = f(probe);
    probe(j) = x(j);
    h(j, j) = (up - 2.0 * f0 + down) / (step * step);
    for (Index k = j + 1; k < d; ++k) {
      auto at = [&](double sj, double sk) {
        probe(j) = x(j) + sj * step;
        probe(k) = x(k) + sk * step;
        const double v = f(probe);
        probe(j) = x(j);
        probe(k) = x(k);
        return v;
      };
      const double v = (at(1, 1) - at(1, -1) - at(-1, 1) + at(-1, -1)) / (4.0 * step * step);
      h(j, k) = v;
      h(k, j) = v;
    }
  }
  return h;
}

double relative_error(const Matrix& analytic, const Matrix& reference) {
  return (analytic - reference).norm() / std::max(1.0, reference.norm());
}

}  // namespace hardsum

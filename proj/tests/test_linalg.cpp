#include "hardsum/linalg.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

using namespace hardsum;

namespace {

// det(A - t I) by Gaussian elimination with partial pivoting, written out so
// the eigenvalue check does not lean on any Eigen decomposition.
double char_poly(const Matrix& a, double t) {
  const Index d = a.rows();
  std::vector<std::vector<double>> m(static_cast<size_t>(d), std::vector<double>(static_cast<size_t>(d)));
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < d; ++j) m[i][j] = a(i, j) - (i == j ? t : 0.0);
  double det = 1.0;
  for (Index c = 0; c < d; ++c) {
    Index piv = c;
    for (Index r = c + 1; r < d; ++r)
      if (std::abs(m[r][c]) > std::abs(m[piv][c])) piv = r;
    if (m[piv][c] == 0.0) return 0.0;
    if (piv != c) {
      std::swap(m[piv], m[c]);
      det = -det;
    }
    det *= m[c][c];
    for (Index r = c + 1; r < d; ++r) {
      const double f = m[r][c] / m[c][c];
      for (Index k = c; k < d; ++k) m[r][k] -= f * m[c][k];
    }
  }
  return det;
}

std::vector<double> roots_by_bisection(const Matrix& a) {
  const double r = a.norm() + 1.0;
  const int grid = 40000;
  std::vector<double> roots;
  double prev_t = -r;
  double prev = char_poly(a, prev_t);
  for (int k = 1; k <= grid; ++k) {
    const double t = -r + 2.0 * r * k / grid;
    const double cur = char_poly(a, t);
    if ((prev < 0) != (cur < 0)) {
      double lo = prev_t, hi = t;
      const bool lo_neg = prev < 0;
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if ((char_poly(a, mid) < 0) == lo_neg) lo = mid; else hi = mid;
      }
      roots.push_back(0.5 * (lo + hi));
    }
    prev = cur;
    prev_t = t;
  }
  return roots;
}

Matrix random_symmetric(Index d, Rng& rng) {
  Matrix g(d, d);
  for (Index c = 0; c < d; ++c) g.col(c) = gaussian_vector(d, rng);
  return 0.5 * (g + g.transpose());
}

}  // namespace

TEST(SampleOrthonormalColumns, SquareIsOrthogonal) {
  Rng rng(1);
  const TallOrthogonal q = sample_orthonormal_columns(3, 3, rng);
  EXPECT_LE(max_abs(q.matrix().transpose() * q.matrix() - Matrix::Identity(3, 3)), 1e-10);
}

TEST(SampleOrthonormalColumns, TallColumnsHaveUnitNorm) {
  Rng rng(2);
  const TallOrthogonal q = sample_orthonormal_columns(4, 2, rng);
  ASSERT_EQ(q.rows(), 4);
  ASSERT_EQ(q.cols(), 2);
  for (Index c = 0; c < 2; ++c) EXPECT_NEAR(q.matrix().col(c).norm(), 1.0, 1e-10);
  EXPECT_LE(std::abs(q.matrix().col(0).dot(q.matrix().col(1))), 1e-10);
}

TEST(SampleOrthonormalColumns, RejectsMoreColumnsThanRows) {
  Rng rng(3);
  EXPECT_THROW(sample_orthonormal_columns(2, 3, rng), std::invalid_argument);
}

TEST(SampleOrthonormalColumns, FirstColumnIsCenteredOnE1) {
  // For a uniform unit vector in R^8, <q, e1> has mean 0 and variance 1/8.
  Rng rng(4);
  const int draws = 10000;
  double sum = 0.0;
  for (int k = 0; k < draws; ++k) sum += sample_orthonormal_columns(8, 2, rng).matrix()(0, 0);
  const double sd_of_mean = std::sqrt(1.0 / 8.0 / draws);
  EXPECT_LE(std::abs(sum / draws), 3.0 * sd_of_mean);
}

TEST(SampleOrthonormalColumns, TransposeIsAContraction) {
  Rng rng(5);
  const TallOrthogonal q = sample_orthonormal_columns(10, 4, rng);
  for (int k = 0; k < 100; ++k) {
    const Vector x = gaussian_vector(10, rng);
    const Vector y = gaussian_vector(10, rng);
    EXPECT_LE((q.matrix().transpose() * (x - y)).norm(), (x - y).norm() * (1.0 + 1e-12));
  }
}

TEST(SymMatrix, RejectsAsymmetricInput) {
  Matrix a(2, 2);
  a << 1.0, 2.0, 0.0, 1.0;
  EXPECT_THROW(SymMatrix{a}, std::invalid_argument);
}

TEST(EigSym, IdentityHasUnitEigenvalues) {
  const EigenDecomposition e = eig_sym(SymMatrix::identity(2));
  EXPECT_DOUBLE_EQ(e.values(0), 1.0);
  EXPECT_DOUBLE_EQ(e.values(1), 1.0);
}

TEST(EigSym, DiagonalSortsAscending) {
  Matrix a = Matrix::Zero(2, 2);
  a(0, 0) = 3.0;
  a(1, 1) = -2.0;
  const EigenDecomposition e = eig_sym(SymMatrix(a));
  EXPECT_NEAR(e.values(0), -2.0, 1e-14);
  EXPECT_NEAR(e.values(1), 3.0, 1e-14);
}

TEST(EigSym, MatchesCharacteristicPolynomialRoots) {
  Rng rng(6);
  for (int trial = 0; trial < 5; ++trial) {
    const Matrix a = random_symmetric(4, rng);
    const EigenDecomposition e = eig_sym(SymMatrix(a));
    const std::vector<double> roots = roots_by_bisection(a);
    ASSERT_EQ(roots.size(), 4u);
    for (Index j = 0; j < 4; ++j) EXPECT_NEAR(e.values(j), roots[static_cast<size_t>(j)], 1e-9);
  }
}

TEST(EigSym, ResidualAndReconstruction) {
  Rng rng(7);
  for (Index d : {1, 3, 8, 20}) {
    const Matrix a = random_symmetric(d, rng);
    const EigenDecomposition e = eig_sym(SymMatrix(a));
    const double scale = 1.0 + sym_operator_norm(a);
    for (Index j = 0; j < d; ++j) {
      EXPECT_LE((a * e.vectors.col(j) - e.values(j) * e.vectors.col(j)).norm(), 1e-9 * scale);
      if (j > 0) {
        EXPECT_LE(e.values(j - 1), e.values(j));
      }
    }
    const Matrix rebuilt = e.vectors * e.values.asDiagonal() * e.vectors.transpose();
    EXPECT_LE(sym_operator_norm(a - rebuilt), 1e-8 * scale);
    EXPECT_DOUBLE_EQ(lambda_min(SymMatrix(a)), e.values(0));
  }
}

TEST(FiniteDifferences, HalfSquaredNormGradient) {
  Rng rng(8);
  const Vector x = gaussian_vector(6, rng);
  const double step = 1e-4;
  const Vector g = finite_diff_gradient([](const Vector& y) { return 0.5 * y.squaredNorm(); }, x, step);
  EXPECT_LE((g - x).norm(), step * step * 6);
}

TEST(FiniteDifferences, ConstantHasZeroGradient) {
  const Vector x = Vector::Constant(4, 0.3);
  const Vector g = finite_diff_gradient([](const Vector&) { return 7.25; }, x, 1e-5);
  EXPECT_LE(g.lpNorm<Eigen::Infinity>(), 1e-12);
}

TEST(FiniteDifferences, CubeDerivativeAtTwo) {
  Vector x(1);
  x << 2.0;
  const Vector g = finite_diff_gradient([](const Vector& y) { return y(0) * y(0) * y(0); }, x, 1e-5);
  EXPECT_NEAR(g(0), 12.0, 12.0 * 1e-8);
}

TEST(FiniteDifferences, HessianOfQuadratic) {
  Matrix a(2, 2);
  a << 2.0, 0.5, 0.5, -1.0;
  const Vector x = Vector::Constant(2, 0.7);
  const Matrix h = finite_diff_hessian([&](const Vector& y) { return Vector(a * y); }, x, 1e-5);
  EXPECT_LE(max_abs(h - a), 1e-9);
  const Matrix hv = finite_diff_hessian_values([&](const Vector& y) { return 0.5 * y.dot(a * y); }, x, 1e-4);
  EXPECT_LE(max_abs(hv - a), 1e-6);
}

TEST(FiniteDifferences, DefaultStepFollowsNorm) {
  EXPECT_DOUBLE_EQ(default_fd_step(Vector::Zero(3)), 1e-5);
  Vector x(2);
  x << 3.0, 4.0;
  EXPECT_DOUBLE_EQ(default_fd_step(x), 5e-5);
}

#include "hardsum/synthetic.hpp"

#include <algorithm>
#include <cmath>

namespace hardsum {

QuadraticFiniteSum::QuadraticFiniteSum(std::vector<SymMatrix> a, std::vector<Vector> b, std::vector<double> c)
    : a_(std::move(a)), b_(std::move(b)), c_(std::move(c)) {
  if (a_.empty()) throw std::invalid_argument("QuadraticFiniteSum: need at least one component");
  if (b_.size() != a_.size() || c_.size() != a_.size()) {
    throw std::invalid_argument("QuadraticFiniteSum: component lists differ in length");
  }
  dim_ = a_.front().dim();
  for (size_t i = 0; i < a_.size(); ++i) {
    if (a_[i].dim() != dim_ || b_[i].size() != dim_) {
      throw std::invalid_argument("QuadraticFiniteSum: inconsistent dimensions");
    }
  }
}

Derivatives QuadraticFiniteSum::component(Index i, const Vector& x, int order) const {
  check_component_args(i, x, order);
  const auto k = static_cast<size_t>(i);
  const Vector ax = a_[k].matrix() * x;
  Derivatives out;
  out.order = order;
  out.value = 0.5 * x.dot(ax) + b_[k].dot(x) + c_[k];
  if (order >= 1) out.gradient = ax + b_[k];
  if (order >= 2) out.hessian = a_[k].matrix();
  return out;
}

CubicFiniteSum::CubicFiniteSum(std::vector<SymMatrix> a, std::vector<Vector> b, std::vector<double> c,
                               std::vector<Vector> z)
    : a_(std::move(a)), b_(std::move(b)), c_(std::move(c)), z_(std::move(z)) {
  if (a_.empty()) throw std::invalid_argument("CubicFiniteSum: need at least one component");
  if (b_.size() != a_.size() || c_.size() != a_.size() || z_.size() != a_.size()) {
    throw std::invalid_argument("CubicFiniteSum: component lists differ in length");
  }
  dim_ = a_.front().dim();
  for (size_t i = 0; i < a_.size(); ++i) {
    if (a_[i].dim() != dim_ || b_[i].size() != dim_ || z_[i].size() != dim_) {
      throw std::invalid_argument("CubicFiniteSum: inconsistent dimensions");
    }
    if (!(c_[i] > 0.0)) throw std::invalid_argument("CubicFiniteSum: cubic weights must be positive");
  }
}

Derivatives CubicFiniteSum::component(Index i, const Vector& x, int order) const {
  check_component_args(i, x, order);
  const auto k = static_cast<size_t>(i);
  const Vector ax = a_[k].matrix() * x;
  const Vector u = x - z_[k];
  const double r = u.norm();
  const double c = c_[k];
  Derivatives out;
  out.order = order;
  out.value = b_[k].dot(x) + 0.5 * x.dot(ax) + c / 6.0 * r * r * r;
  if (order >= 1) out.gradient = b_[k] + ax + (0.5 * c * r) * u;
  if (order >= 2) {
    out.hessian = a_[k].matrix();
    out.hessian.diagonal().array() += 0.5 * c * r;
    if (r > 0.0) out.hessian += (0.5 * c / r) * (u * u.transpose());
  }
  return out;
}

double CubicFiniteSum::max_cubic_weight() const { return *std::max_element(c_.begin(), c_.end()); }

double CubicFiniteSum::cubic_weight_third_moment() const {
  double acc = 0.0;
  for (double c : c_) acc += c * c * c;
  return std::cbrt(acc / static_cast<double>(c_.size()));
}

CubicFiniteSum make_cubic_finite_sum(Index n, Index d, Rng& rng, const CubicSumOptions& options) {
  if (n < 1 || d < 1) throw std::invalid_argument("make_cubic_finite_sum: need n, d >= 1");
  std::uniform_real_distribution<double> weight(options.weight_min, options.weight_max);
  std::vector<SymMatrix> a;
  std::vector<Vector> b, z;
  std::vector<double> c;
  for (Index i = 0; i < n; ++i) {
    Matrix g(d, d);
    for (Index col = 0; col < d; ++col) g.col(col) = gaussian_vector(d, rng);
    g *= options.curvature / std::sqrt(static_cast<double>(d));
    a.emplace_back(Matrix(0.5 * (g + g.transpose())));
    b.push_back(options.linear * gaussian_vector(d, rng));
    c.push_back(weight(rng));
    z.push_back(options.center_spread * gaussian_vector(d, rng));
  }
  return CubicFiniteSum(std::move(a), std::move(b), std::move(c), std::move(z));
}

QuadraticFiniteSum make_quadratic_finite_sum(Index n, Index d, Rng& rng) {
  if (n < 1 || d < 1) throw std::invalid_argument("make_quadratic_finite_sum: need n, d >= 1");
  std::vector<SymMatrix> a;
  std::vector<Vector> b;
  std::vector<double> c;
  for (Index i = 0; i < n; ++i) {
    Matrix g(d, d);
    for (Index col = 0; col < d; ++col) g.col(col) = gaussian_vector(d, rng);
    Matrix s = g * g.transpose() / static_cast<double>(d) + Matrix::Identity(d, d);
    a.emplace_back(Matrix(0.5 * (s + s.transpose())));
    b.push_back(gaussian_vector(d, rng));
    c.push_back(0.0);
  }
  return QuadraticFiniteSum(std::move(a), std::move(b), std::move(c));
}

PointCachedFunction::PointCachedFunction(const FiniteSumFunction& base, const Vector& point)
    : base_(base), point_(point) {
  cache_.reserve(static_cast<size_t>(base.num_components()));
  for (Index i = 0; i < base.num_components(); ++i) cache_.push_back(base.component(i, point, 2));
}

Derivatives PointCachedFunction::component(Index i, const Vector& x, int order) const {
  check_component_args(i, x, order);
  if (x.size() != point_.size() || !(x.array() == point_.array()).all()) return base_.component(i, x, order);
  Derivatives out = cache_[static_cast<size_t>(i)];
  out.order = order;
  if (order < 2) out.hessian.resize(0, 0);
  if (order < 1) out.gradient.resize(0);
  return out;
}

}  // namespace hardsum

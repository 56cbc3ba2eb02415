#include "hardsum/oracle.hpp"

#include <string>

namespace hardsum {

void FiniteSumFunction::check_component_args(Index i, const Vector& x, int order) const {
  check_order(order);
  if (i < 0 || i >= num_components()) {
    throw std::invalid_argument("component index " + std::to_string(i) + " outside [0, " +
                                std::to_string(num_components()) + ")");
  }
  if (x.size() != dimension()) {
    throw std::invalid_argument("point has dimension " + std::to_string(x.size()) + ", expected " +
                                std::to_string(dimension()));
  }
}

Derivatives FiniteSumFunction::full(const Vector& x, int order) const {
  Derivatives sum = Derivatives::zero(dimension(), order);
  for (Index i = 0; i < num_components(); ++i) sum += component(i, x, order);
  sum *= 1.0 / static_cast<double>(num_components());
  return sum;
}

OracleLedger::OracleLedger(Index n, double eps)
    : per_index(static_cast<size_t>(n), 0), epsilon(eps) {}

void OracleLedger::charge(Index i, int order, std::uint64_t times) {
  check_order(order);
  per_index.at(static_cast<size_t>(i)) += times;
  total_queries += times;
  value_queries += times;
  if (order >= 1) gradient_queries += times;
  if (order >= 2) hessian_queries += times;
}

void OracleLedger::record_iterate(double grad_norm, std::uint64_t t) {
  if (first_hit) return;
  if (grad_norm <= epsilon) {
    first_hit = t;
    first_hit_queries = total_queries;
  }
}

Oracle::Oracle(Index n, Index d, double epsilon) : n_(n), d_(d), ledger_(n, epsilon) {
  if (n < 1) throw std::invalid_argument("Oracle: need at least one component");
}

Derivatives Oracle::query(Index i, const Vector& x, int order, std::uint64_t times) {
  check_order(order);
  if (i < 0 || i >= n_) {
    throw std::invalid_argument("oracle query index " + std::to_string(i) + " outside [0, " +
                                std::to_string(n_) + ")");
  }
  if (times == 0) throw std::invalid_argument("oracle query repeated zero times");
  Derivatives out = respond(i, x, order);
  ledger_.charge(i, order, times);
  return out;
}

CountingOracle::CountingOracle(const FiniteSumFunction& f, double epsilon)
    : Oracle(f.num_components(), f.dimension(), epsilon), f_(f) {}

Derivatives CountingOracle::measure(const Vector& x, int order) const { return f_.full(x, order); }

Derivatives CountingOracle::respond(Index i, const Vector& x, int order) {
  return f_.component(i, x, order);
}

}  // namespace hardsum

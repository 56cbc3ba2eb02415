#pragma once

#include "hardsum/linalg.hpp"

namespace hardsum {

/// Value and derivatives up to `order` (0, 1 or 2). Entries above `order`
/// are left empty.
struct Derivatives {
  int order = 0;
  double value = 0.0;
  Vector gradient;
  Matrix hessian;

  static Derivatives zero(Index d, int order) {
    Derivatives out;
    out.order = order;
    if (order >= 1) out.gradient = Vector::Zero(d);
    if (order >= 2) out.hessian = Matrix::Zero(d, d);
    return out;
  }

  Derivatives& operator+=(const Derivatives& other) {
    value += other.value;
    if (order >= 1) gradient += other.gradient;
    if (order >= 2) hessian += other.hessian;
    return *this;
  }

  Derivatives& operator*=(double s) {
    value *= s;
    if (order >= 1) gradient *= s;
    if (order >= 2) hessian *= s;
    return *this;
  }
};

inline void check_order(int order, int max_order = 2) {
  if (order < 0 || order > max_order) {
    throw std::invalid_argument("derivative order out of range: " + std::to_string(order));
  }
}

}  // namespace hardsum

#pragma once

#include "hardsum/derivatives.hpp"
#include "hardsum/linalg.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace hardsum {

/// F(x) = (1/n) sum_i f_i(x). Components are indexed 0..n-1 and are immutable,
/// so a single instance may be evaluated from several threads.
class FiniteSumFunction {
 public:
  virtual ~FiniteSumFunction() = default;

  virtual Index num_components() const = 0;
  virtual Index dimension() const = 0;
  /// Derivatives of f_i at x up to `order` (0..2).
  virtual Derivatives component(Index i, const Vector& x, int order) const = 0;

  /// Exact average over all components.
  virtual Derivatives full(const Vector& x, int order) const;

 protected:
  void check_component_args(Index i, const Vector& x, int order) const;
};

/// Query accounting for one run of one algorithm.
///
/// `per_index[i]` counts every query to f_i; the per-order counters count a
/// query once for each derivative order it returned, so an order-2 query
/// bumps the value, gradient and Hessian counters. `cached_lookups` counts
/// derivative reads served from an already-paid snapshot pass; they are not
/// part of `total_queries`.
struct OracleLedger {
  explicit OracleLedger(Index n = 0, double epsilon = 0.0);

  std::vector<std::uint64_t> per_index;
  std::uint64_t total_queries = 0;
  std::uint64_t value_queries = 0;
  std::uint64_t gradient_queries = 0;
  std::uint64_t hessian_queries = 0;
  std::uint64_t cached_lookups = 0;

  double epsilon = 0.0;
  /// First iterate index t with |grad F(x_t)| <= epsilon, and the query count at that moment.
  std::optional<std::uint64_t> first_hit;
  std::optional<std::uint64_t> first_hit_queries;

  void charge(Index i, int order, std::uint64_t times = 1);
  /// Records the measured full-gradient norm of iterate t. Idempotent once a hit exists.
  void record_iterate(double grad_norm, std::uint64_t t);

  /// Raw count: oracle queries plus snapshot re-reads.
  std::uint64_t raw_queries() const { return total_queries + cached_lookups; }
};

/// Incremental higher-order oracle: answers (i, x) with derivatives of f_i
/// and charges the ledger. `measure` is the experimenter's side channel for
/// logging and never touches the ledger.
class Oracle {
 public:
  Oracle(Index n, Index d, double epsilon);
  virtual ~Oracle() = default;

  Index num_components() const { return n_; }
  Index dimension() const { return d_; }

  /// Query f_i at x. `times` > 1 stands for that many identical queries:
  /// the ledger is charged `times` while the answer is computed once.
  Derivatives query(Index i, const Vector& x, int order, std::uint64_t times = 1);

  /// Full-function derivatives for monitoring. Free of charge.
  virtual Derivatives measure(const Vector& x, int order) const = 0;

  const OracleLedger& ledger() const { return ledger_; }
  OracleLedger& ledger() { return ledger_; }

 protected:
  virtual Derivatives respond(Index i, const Vector& x, int order) = 0;

 private:
  Index n_;
  Index d_;
  OracleLedger ledger_;
};

/// Oracle over a fixed FiniteSumFunction.
class CountingOracle : public Oracle {
 public:
  explicit CountingOracle(const FiniteSumFunction& f, double epsilon = 0.0);

  Derivatives measure(const Vector& x, int order) const override;
  const FiniteSumFunction& function() const { return f_; }

 protected:
  Derivatives respond(Index i, const Vector& x, int order) override;

 private:
  const FiniteSumFunction& f_;
};

}  // namespace hardsum

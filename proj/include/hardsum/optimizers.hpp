#pragma once

#include "hardsum/cubic.hpp"
#include "hardsum/oracle.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace hardsum {

inline constexpr double kSvrcPenaltyFactor = 150.0;  // C_M

enum class BatchMode {
  WithReplacement,  // i.i.d. uniform indices
  FullPass,         // every index exactly once
};

std::string to_string(BatchMode mode);
BatchMode batch_mode_from_string(const std::string& name);

struct SvrcParams {
  double penalty = 0.0;  // M
  Index grad_batch = 1;  // b_g
  Index hess_batch = 1;  // b_h
  Index epochs = 1;      // S
  Index steps = 2;       // T
  double epsilon = 0.0;
  double gap = 0.0;         // Delta
  double smoothness = 0.0;  // L_2
  std::uint64_t seed = 0;
  BatchMode batch_mode = BatchMode::WithReplacement;
  double cubic_tolerance = kDefaultCubicTolerance;
};

/// The default schedule: M = 150 L_2, T = max{2, n^{1/5}},
/// S = max{1, 240 C_M^2 sqrt(L_2) Delta n^{-1/5} eps^{-3/2}}, b_g = 5 max{n^{4/5}, 16},
/// b_h = 3000 max{4, n^{2/5}} log^3 d, each rounded up.
SvrcParams svrc_default_params(Index n, Index d, double gap, double smoothness, double epsilon);

/// ceil(x), ignoring a relative excess of 1e-12 so that e.g. 1024^{1/5} counts as 4.
Index ceil_count(double x);

/// Batch as (index, multiplicity) pairs sorted by index.
using Batch = std::vector<std::pair<Index, std::uint64_t>>;

Batch sample_batch(Index n, Index size, BatchMode mode, Rng& rng);
std::uint64_t batch_size(const Batch& batch);

/// Exact snapshot: g = grad F(x_hat), H = hess F(x_hat), plus every component's
/// gradient and Hessian at x_hat so estimators can reuse them.
struct Snapshot {
  Vector point;
  Vector gradient;
  SymMatrix hessian;
  std::vector<Vector> component_gradients;
  std::vector<Matrix> component_hessians;
};

/// Queries every component once at x_hat with order 2.
Snapshot take_snapshot(Oracle& oracle, const Vector& x_hat);

/// v = (1/b) sum_{i in I} [grad f_i(x) - grad f_i(x_hat)] + g
///     - ((1/b) sum_{i in I} hess f_i(x_hat) - H)(x - x_hat).
/// Gradients at x are oracle queries; the snapshot terms are cached reads.
Vector svrc_gradient_estimator(Oracle& oracle, const Snapshot& snap, const Vector& x, const Batch& batch);

/// U = (1/b) sum_{j in J} [hess f_j(x) - hess f_j(x_hat)] + H.
SymMatrix svrc_hessian_estimator(Oracle& oracle, const Snapshot& snap, const Vector& x, const Batch& batch);

/// max{|grad F|^{3/2}, -lambda_min(hess F)^3 / L_2^{3/2}}.
double mu(const Vector& gradient, const SymMatrix& hessian, double smoothness);
double mu(const FiniteSumFunction& f, const Vector& x, double smoothness);

struct TrajectoryRecord {
  std::uint64_t iter = 0;
  Index epoch = 0;
  Index step = 0;
  double f = 0.0;
  double grad_norm = 0.0;
  double mu = 0.0;
  double h_norm = 0.0;
  std::uint64_t q_val = 0;
  std::uint64_t q_grad = 0;
  std::uint64_t q_hess = 0;
  std::uint64_t q_total = 0;
  std::uint64_t q_cached = 0;
  Index i_queried = 0;  // distinct components queried since the previous record
};

struct RunResult {
  std::vector<TrajectoryRecord> trajectory;
  std::vector<Vector> iterates;  // iterates[k] pairs with trajectory[k]
  Vector x_out;
  std::uint64_t out_iter = 0;
  OracleLedger ledger;
  bool aborted = false;
  std::string abort_reason;
  /// Steps after which F went up (possible with sampled estimators).
  Index increases = 0;
};

/// Monitoring hooks shared by every optimizer: the free side channel plus the
/// smoothness constant used in mu.
struct RunMonitor {
  double mu_smoothness = 1.0;
};

/// SVRC from x0 for S epochs of T cubic steps. Stops early, without error,
/// once the next epoch or step would exceed `budget` total queries. A failed
/// cubic solve ends the run with aborted = true and the trajectory so far.
/// x_out is drawn uniformly from the post-step iterates.
RunResult svrc_run(Oracle& oracle, const Vector& x0, const SvrcParams& params,
                   std::optional<std::uint64_t> budget = std::nullopt);

/// Full gradient descent with a constant step; n order-1 queries per iteration.
RunResult baseline_full_gd(Oracle& oracle, const Vector& x0, double step, std::uint64_t budget,
                           const RunMonitor& monitor = {});

/// Full cubic regularization with penalty M; n order-2 queries per iteration.
RunResult baseline_full_cubic(Oracle& oracle, const Vector& x0, double penalty, std::uint64_t budget,
                              const RunMonitor& monitor = {}, double tol = kDefaultCubicTolerance);

}  // namespace hardsum

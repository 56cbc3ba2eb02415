#pragma once

#include "hardsum/chain.hpp"
#include "hardsum/hard_instances.hpp"
#include "hardsum/optimizers.hpp"

#include <json.hpp>

#include <functional>
#include <string>
#include <vector>

namespace hardsum {

enum class CheckStatus { Pass, Fail, Skipped };
std::string to_string(CheckStatus status);

/// Pass unless any part failed; Skipped only if every part was skipped.
CheckStatus combine(const std::vector<CheckStatus>& parts);

// --- derivative checks -----------------------------------------------------

/// A scalar function with closed-form derivatives, f(x, order).
struct ScalarPrimitive {
  std::string name;
  std::function<double(double, int)> eval;
  double lo = -1.0;
  double hi = 1.0;
};

/// Psi on [0.3, 3] and Phi on [-8, 8].
std::vector<ScalarPrimitive> default_scalar_primitives();

struct DerivativeReport {
  std::string target;
  CheckStatus status = CheckStatus::Skipped;
  std::size_t points = 0;
  double tolerance = 0.0;
  double worst_gradient_error = 0.0;
  double worst_hessian_error = 0.0;
  Index worst_component = -1;
  Vector worst_point;
};

/// First and second derivatives against central differences of the lower order.
DerivativeReport check_scalar_derivatives(const ScalarPrimitive& f, Index num_points, double tol, Rng& rng);

using PointSampler = std::function<Vector(Rng&)>;
using HessianField = std::function<Matrix(const Vector&)>;

/// Gradient against differences of `value`, Hessian against differences of `gradient`.
DerivativeReport check_field_derivatives(const std::string& name, const ScalarField& value,
                                         const VectorField& gradient, const HessianField& hessian,
                                         const PointSampler& sampler, Index num_points, double tol, Rng& rng);

/// Every component of F at `num_points` sampled points.
DerivativeReport check_derivatives(const std::string& name, const FiniteSumFunction& f, Index num_points,
                                   double tol, Rng& rng, const PointSampler& sampler);

/// Jacobian of rho(y) column by column, plus the curvature term of <w, rho(y)>.
DerivativeReport check_soft_clamp(Index dim, const SoftClampParams& params, Index num_points, double tol, Rng& rng);

// --- zero-chain ------------------------------------------------------------

struct ZeroChainPoint {
  CheckStatus status = CheckStatus::Skipped;
  Index prefix = 0;  // 1-based i with |x_j| < 1/2 for all j >= i
  double max_tail_partial = 0.0;
  double value_change = 0.0;
};

/// Finds the smallest i with |x_j| < 1/2 for j >= i and checks that partials
/// beyond i vanish and zeroing the tail leaves the value unchanged. Skipped
/// when no coordinate lies beyond such an i.
ZeroChainPoint check_zero_chain_point(const Vector& x, double tol = 1e-12);

struct ZeroChainReport {
  CheckStatus status = CheckStatus::Skipped;
  Index chain_length = 0;
  std::size_t samples = 0;
  std::size_t skipped = 0;
  double max_tail_partial = 0.0;
  double max_value_change = 0.0;
};

ZeroChainReport check_zero_chain(Index k, Index num_samples, Rng& rng, double tol = 1e-12);

// --- smoothness ------------------------------------------------------------

enum class SmoothnessMode {
  IndividualGradient,  // max_i |grad f_i(x) - grad f_i(y)| / |x - y|
  IndividualHessian,   // max_i |hess f_i(x) - hess f_i(y)| / |x - y|
  MeanSquared,         // ((1/n) sum_i |grad f_i(x) - grad f_i(y)|^2)^{1/2} / |x - y|
  ThirdMoment,         // ((1/n) sum_i |hess f_i(x) - hess f_i(y)|^3)^{1/3} / |x - y|
};

std::string to_string(SmoothnessMode mode);

struct SmoothnessSampling {
  Vector center;  // empty means the origin
  double radius = 1.0;
};

/// Largest observed ratio. A lower estimate of the true constant.
struct SmoothnessReport {
  SmoothnessMode mode = SmoothnessMode::IndividualHessian;
  double constant = 0.0;
  std::size_t samples = 0;
  std::string scheme;
};

/// Pairs cycle through four kinds: independent points center + radius g / sqrt(d),
/// and local pairs at separations 1e-3, 1e-1 and 1 around such a point.
SmoothnessReport estimate_smoothness(const FiniteSumFunction& f, SmoothnessMode mode, Index num_pairs, Rng& rng,
                                     const SmoothnessSampling& sampling = {});

// --- SVRC estimators -------------------------------------------------------

struct EstimatorBoundReport {
  CheckStatus status = CheckStatus::Skipped;
  std::size_t trials = 0;
  Index grad_batch = 0;
  Index hess_batch = 0;
  double smoothness = 0.0;
  double distance = 0.0;  // |x - x_hat|
  double grad_mean = 0.0;  // mean |grad F(x) - v|^{3/2}
  double grad_bound = 0.0;  // 2 L^{3/2} / b_g^{3/4} |x - x_hat|^3
  double hess_mean = 0.0;  // mean |hess F(x) - U|^3
  double hess_bound = 0.0;  // 15000 L^3 (log d / b_h)^{3/2} |x - x_hat|^3
  bool grad_ok = true;
  bool hess_ok = true;
};

/// Monte-Carlo means of both estimator errors; pass iff each mean <= bound (1 + slack).
/// Requires trials >= 1000 (0 means skipped).
EstimatorBoundReport verify_estimator_bounds(const FiniteSumFunction& f, const Vector& x_hat, const Vector& x,
                                             Index grad_batch, Index hess_batch, double smoothness, Index trials,
                                             Rng& rng, double slack = 0.1);

// --- large gradient and suboptimality --------------------------------------

struct LargeGradientReport {
  CheckStatus status = CheckStatus::Skipped;
  double bound = 0.0;
  std::size_t points = 0;
  double min_norm = 0.0;
  std::string source;
};

/// Unscaled |grad F*| at x = 0 and at `num_points` constructed points: each block
/// has a random discovered prefix of B_i, coordinates beyond it below 1/2 in
/// magnitude after the soft clamp, and at most floor(n/2) blocks fully discovered.
LargeGradientReport verify_large_gradient(const RandomizedHardInstance& instance, Index num_points, Rng& rng);

/// Certificate of a finalized adversary: every archived point has |grad F| > lambda sigma^p / 4.
LargeGradientReport verify_large_gradient(const ResistingOracle& oracle);

struct SuboptimalityReport {
  CheckStatus status = CheckStatus::Skipped;
  Index chain_length = 0;
  std::size_t starts = 0;
  double value_at_zero = 0.0;
  double best_found = 0.0;
  double lowest_sampled = 0.0;
  double bound = 0.0;  // 12 K
};

/// Multistart gradient descent with backtracking on the masked chain, plus
/// uniform samples in [-10, 10]^K: f(0) - best <= 12K and every value > -12K.
SuboptimalityReport verify_suboptimality(const ChainMask& mask, Index starts, Rng& rng);

// --- resisting construction ------------------------------------------------

enum class FullBaseline { GradientDescent, CubicRegularization };

struct ResistingRunReport {
  CheckStatus status = CheckStatus::Skipped;
  int p = 1;
  Index n = 0;
  Index chain_length = 0;
  std::string optimizer;
  std::size_t archived = 0;
  double max_final_overlap = 0.0;
  double max_late_overlap = 0.0;
  double max_replay_error = 0.0;
  bool all_exceed = true;
  double min_norm = 0.0;
  double bound = 0.0;
  Index rounds_closed_by_queries = 0;
};

/// Runs a full-information baseline against the adversary with L_p = l_p, eps = 1 and
/// Delta = 192 (K + 1), finalizes it, then checks orthogonality to v_{K+1} and to every
/// later direction (<= 1e-10), the gradient certificate, and replay (<= 1e-10 relative).
ResistingRunReport verify_resisting_run(int p, Index n, Index k, FullBaseline optimizer, Rng& rng);

// --- cubic solver ----------------------------------------------------------

struct CubicBatteryReport {
  CheckStatus status = CheckStatus::Skipped;
  std::size_t models = 0;
  std::size_t hard_cases = 0;
  double worst_violation = 0.0;  // max over conditions, relative to 1 + |v|
  std::size_t grid_checked = 0;
  double worst_grid_excess = 0.0;  // m(h_solver) - min over grid, <= 1e-6 required
};

/// Random models with d in [1, max_dim], a third of them forced into the hard case
/// or next to it, and `grid_models` extra models with d <= 3 compared against grid search.
CubicBatteryReport verify_cubic_solver(Index num_models, Index max_dim, Index grid_models, Rng& rng,
                                       double tol = 1e-8);

/// Exhaustive grid minimum of the model over the box of radius 2 sqrt(2|v|/M) + 2.
double grid_search_cubic(const CubicModel& model, double step = 1e-2);

// --- battery ---------------------------------------------------------------

struct VerifySettings {
  Index derivative_points = 100;
  double derivative_tol = 1e-6;
  Index zero_chain_samples = 1000;
  Index smoothness_pairs = 400;
  Index estimator_trials = 1000;
  Index large_gradient_points = 50;
  Index multistart_starts = 100;
  Index resisting_max_k = 3;
  Index cubic_models = 200;
  Index cubic_grid_models = 3;
  bool operator==(const VerifySettings&) const = default;
};

/// Test seam: replaces the scalar primitives whose derivatives are checked.
struct VerifyHooks {
  std::vector<ScalarPrimitive> primitives;
};

struct BatteryResult {
  bool passed = true;
  std::vector<std::string> failed_sections;
  nlohmann::ordered_json report;
};

BatteryResult run_verification_battery(const VerifySettings& settings, std::uint64_t seed,
                                       const VerifyHooks& hooks = {});

nlohmann::ordered_json to_json(const DerivativeReport& r);
nlohmann::ordered_json to_json(const ZeroChainReport& r);
nlohmann::ordered_json to_json(const SmoothnessReport& r);
nlohmann::ordered_json to_json(const EstimatorBoundReport& r);
nlohmann::ordered_json to_json(const LargeGradientReport& r);
nlohmann::ordered_json to_json(const SuboptimalityReport& r);
nlohmann::ordered_json to_json(const ResistingRunReport& r);
nlohmann::ordered_json to_json(const CubicBatteryReport& r);

}  // namespace hardsum

#pragma once

#include "hardsum/chain.hpp"
#include "hardsum/oracle.hpp"

#include <optional>
#include <string>
#include <vector>

namespace hardsum {

enum class InstanceMode { Deterministic, RandomizedIndividual, RandomizedThirdMoment };

std::string to_string(InstanceMode mode);
InstanceMode instance_mode_from_string(const std::string& name);

/// Inputs (order, n, gap, smoothness, accuracy) and the scalings derived from them.
struct HardInstanceSpec {
  InstanceMode mode = InstanceMode::Deterministic;
  int p = 1;
  Index n = 1;
  double gap = 0.0;         // Delta
  double smoothness = 0.0;  // L_p (L_2 in third-moment mode)
  double epsilon = 0.0;

  double lambda = 0.0;
  double sigma = 0.0;
  Index chain_length = 0;  // K
  Index d = 0;
  double ell = 0.0;  // chain smoothness constant: explicit l_p or the configured hat-l_p

  /// Multiplier in front of the unscaled function (lambda sigma^{p+1}, or n^{1/3} lambda sigma^3).
  double scale = 0.0;
  /// Gradient-norm floor the construction certifies, in scaled units.
  double gradient_floor = 0.0;

  /// Dimension the high-probability argument asks for: c0 n^3 K^2 log(2 n^2 K^2). Informational.
  double required_dimension = 0.0;
  double c0 = 1.0;
  std::vector<std::string> warnings;
};

/// Thrown when the requested accuracy leaves no room for a single chain link.
class InstanceTooSmall : public std::invalid_argument {
 public:
  InstanceTooSmall(const std::string& what, double minimal_gap)
      : std::invalid_argument(what), minimal_gap_(minimal_gap) {}
  /// Smallest Delta for which the same configuration yields K >= 1.
  double minimal_gap() const { return minimal_gap_; }

 private:
  double minimal_gap_;
};

/// 2^{p+1} exp(2.5p + log p + 4p + 10): p-th order smoothness of every masked chain.
double chain_smoothness_constant(int p);

/// Frozen defaults for hat-l_1 and hat-l_2: 1.5x the empirical estimates of
/// the soft-clamped chain (see estimate_smoothness), since no closed form is known.
inline constexpr double kDefaultHatEll1 = 201.0;
inline constexpr double kDefaultHatEll2 = 2830.0;
double default_hat_ell(int p);

/// Scalings for the resisting-oracle instance. `query_budget` sizes the ambient
/// dimension: d = K + 1 + query_budget.
HardInstanceSpec deterministic_params(int p, Index n, double gap, double smoothness, double epsilon,
                                      Index query_budget);

/// Scalings for the randomized instance. `d` defaults to the smallest admissible
/// value n * n * K; overrides must be divisible by n with d / n >= n K.
HardInstanceSpec randomized_params(InstanceMode mode, int p, Index n, double gap, double smoothness,
                                   double epsilon, double hat_ell, double c0 = 1.0,
                                   std::optional<Index> d = std::nullopt);

/// The finalized deterministic instance: f_i(x) = scale * chain_{delta_i}(V^T x / sigma).
class DeterministicHardInstance : public FiniteSumFunction {
 public:
  DeterministicHardInstance(Matrix directions, std::vector<ChainMask> masks, double scale, double sigma);

  Index num_components() const override { return static_cast<Index>(masks_.size()); }
  Index dimension() const override { return directions_.rows(); }
  Derivatives component(Index i, const Vector& x, int order) const override;
  Derivatives full(const Vector& x, int order) const override;

  const Matrix& directions() const { return directions_; }
  const std::vector<ChainMask>& masks() const { return masks_; }

 private:
  Matrix directions_;
  std::vector<ChainMask> masks_;
  double scale_;
  double sigma_;
};

/// One answered query, kept so the final function can be checked against it.
struct ArchivedQuery {
  Index index = 0;
  Vector point;
  int order = 0;
  Derivatives response;
  Index round = 0;  // round during which it was answered (2..K+1)
};

/// Adversary that fixes the hard instance lazily.
///
/// Rounds run from 2 to K+1; a round ends once ceil(n/2) distinct components
/// were queried in it. During round r answers use only links k < r, so they
/// depend on v_1..v_{r-1} alone. When round r closes, v_r is drawn orthogonal
/// to v_1..v_{r-1} and to every point queried so far, and delta_{i,r} = 1 iff
/// i was not queried in the round. After round K+1 the function is frozen and
/// later queries are answered from it without being archived.
class ResistingOracle : public Oracle {
 public:
  ResistingOracle(const HardInstanceSpec& spec, Rng rng, double epsilon = 0.0);

  Derivatives measure(const Vector& x, int order) const override;

  /// Closes every open round as if no further queries were made.
  void finalize();
  bool finalized() const { return round_ > spec_.chain_length + 1; }
  Index round() const { return round_; }

  const HardInstanceSpec& spec() const { return spec_; }
  const std::vector<ArchivedQuery>& archive() const { return archive_; }
  /// Columns v_1..v_{r-1} drawn so far (all K+1 once finalized).
  Matrix directions() const { return directions_.leftCols(round_ - 1); }
  bool delta(Index i, Index k) const;  // k is 1-based
  /// Ledger total at the moment each round 2, 3, ... closed.
  const std::vector<std::uint64_t>& round_close_queries() const { return round_close_queries_; }

  /// Frozen instance; requires finalized().
  DeterministicHardInstance final_function() const;

 protected:
  Derivatives respond(Index i, const Vector& x, int order) override;

 private:
  DeterministicHardInstance provisional() const;
  void close_round(std::uint64_t queries_so_far);
  void absorb(const Vector& x);
  Vector draw_direction();

  HardInstanceSpec spec_;
  Rng rng_;
  Index round_ = 2;
  Index required_distinct_;
  std::vector<bool> queried_in_round_;
  Index distinct_in_round_ = 0;
  Matrix directions_;              // d x (K+1)
  std::vector<std::vector<bool>> deltas_;  // n x (K+1)
  Matrix span_;                    // orthonormal basis of span(archive, directions)
  std::vector<ArchivedQuery> archive_;
  std::vector<std::uint64_t> round_close_queries_;
};

struct ResistingCertificate {
  std::vector<double> gradient_norms;  // one per archived query
  double bound = 0.0;                  // lambda sigma^p / 4
  bool all_exceed = true;
  double min_norm = 0.0;
};

/// Full-gradient norms of the frozen instance at every archived point.
/// Throws std::logic_error unless the adversary is finalized.
ResistingCertificate resisting_certificate(const ResistingOracle& oracle);

struct ReplayReport {
  std::size_t checked = 0;
  double max_relative_error = 0.0;
  /// Largest |<v_k, x>| over archived x and directions v_k drawn after x was queried.
  double max_late_overlap = 0.0;
  /// Largest |<v_{K+1}, x>| over all archived points.
  double max_final_overlap = 0.0;
};

/// Re-evaluates the frozen instance at every archived query. Requires finalized().
ReplayReport replay_archive(const ResistingOracle& oracle);

/// F(x) = (1/n) sum_i scale * hat_f_{K;B_i}(C_i^T x / sigma).
class RandomizedHardInstance : public FiniteSumFunction {
 public:
  /// `rotation` empty means C is the block identity.
  RandomizedHardInstance(HardInstanceSpec spec, TallOrthogonal basis, std::optional<TallOrthogonal> rotation);

  Index num_components() const override { return spec_.n; }
  Index dimension() const override { return spec_.d; }
  Derivatives component(Index i, const Vector& x, int order) const override;

  /// The same draw with scale = sigma = 1 (the unscaled F*).
  RandomizedHardInstance unscaled() const;

  const HardInstanceSpec& spec() const { return spec_; }
  /// (d/n) x (nK) matrix holding B_1 | ... | B_n.
  const TallOrthogonal& basis() const { return basis_; }
  const HatFunction& hat(Index i) const { return hats_.at(static_cast<size_t>(i)); }
  Index block_dim() const { return spec_.d / spec_.n; }
  bool has_rotation() const { return rotation_.has_value(); }

  /// C_i^T x.
  Vector to_block(Index i, const Vector& x) const;
  /// C_i y.
  Vector from_block(Index i, const Vector& y) const;

 private:
  HardInstanceSpec spec_;
  TallOrthogonal basis_;
  std::optional<TallOrthogonal> rotation_;
  std::vector<HatFunction> hats_;
  double scale_;
  double sigma_;
};

RandomizedHardInstance sample_randomized_instance(const HardInstanceSpec& spec, Rng& rng,
                                                  bool haar_rotation = false);

/// B as stored on disk: 16-byte header (magic "HSB1", d, n, K as little-endian
/// uint32) followed by the (d/n) x (nK) matrix as row-major little-endian doubles.
struct BasisFile {
  std::uint32_t d = 0;
  std::uint32_t n = 0;
  std::uint32_t k = 0;
  Matrix basis;
};

void write_basis_file(const std::string& path, const RandomizedHardInstance& instance);
BasisFile read_basis_file(const std::string& path);

}  // namespace hardsum

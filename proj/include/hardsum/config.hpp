#pragma once

#include "hardsum/verification.hpp"

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>

namespace hardsum {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// What `gen` and `run` build. Zero means "derive the default".
struct InstanceConfig {
  /// deterministic | individual | third-moment (hard instances),
  /// quadratic | nonconvex (synthetic finite sums).
  std::string mode = "deterministic";
  int p = 1;
  Index n = 4;
  double gap = 384.0;        // Delta
  double smoothness = 0.0;   // L_p; 0 takes l_p or hat-l_p
  double epsilon = 1.0;
  Index d = 0;               // randomized dimension override
  Index query_budget = 0;    // deterministic mode: d = K + 1 + query_budget
  double hat_ell = 0.0;      // 0 takes the frozen default
  double c0 = 1.0;
  bool haar_rotation = false;
  Index dim = 10;            // synthetic dimension
  bool operator==(const InstanceConfig&) const = default;
};

struct OptimizerConfig {
  std::string name = "svrc";  // svrc | gd | cubic
  double step = 0.0;          // gd
  double penalty = 0.0;       // cubic / svrc M
  Index grad_batch = 0;
  Index hess_batch = 0;
  Index epochs = 0;
  Index steps = 0;
  std::string batch_mode = "with-replacement";
  Index num_seeds = 1;
  bool operator==(const OptimizerConfig&) const = default;
};

struct RunConfig {
  InstanceConfig instance;
  OptimizerConfig optimizer;
  VerifySettings verify;
  std::uint64_t seed = 0;
  std::uint64_t budget = 0;  // total oracle queries; 0 means unlimited
  std::string out;
  bool operator==(const RunConfig&) const = default;
};

/// INI text: top-level seed / budget / out, then [instance], [optimizer], [verify].
/// Missing keys keep their defaults; unknown keys and malformed values throw ConfigError.
RunConfig parse_config(std::istream& in);
RunConfig parse_config_text(const std::string& text);
RunConfig load_config(const std::string& path);

/// Canonical text with every key; doubles keep 17 significant digits so
/// parse_config_text(serialize_config(c)) == c.
std::string serialize_config(const RunConfig& config);

}  // namespace hardsum

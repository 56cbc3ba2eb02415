#pragma once

#include "hardsum/config.hpp"
#include "hardsum/optimizers.hpp"

#include <json.hpp>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace hardsum {

/// Flags that shape output but are not part of the config.
struct CliOptions {
  bool quiet = false;
  std::string csv;  // CSV projection path; empty means none
};

/// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;     // verification failed
inline constexpr int kExitBadInstance = 2; // K < 1 or an invalid config

/// Everything `run` emits for one seed.
struct RunOutput {
  std::vector<nlohmann::ordered_json> records;
  std::vector<TrajectoryRecord> trajectory;
  nlohmann::ordered_json summary;
};

/// One optimizer run for `seed`; deterministic in (config, seed).
/// Throws InstanceTooSmall or std::invalid_argument on unusable configs.
RunOutput run_once(const RunConfig& config, std::uint64_t seed);

/// JSONL line for a trajectory record (stable field order).
nlohmann::ordered_json record_json(const TrajectoryRecord& r);

/// Column header and row of the CSV projection.
std::string csv_header();
std::string csv_row(const TrajectoryRecord& r);

/// The derived scalings of the configured hard instance as JSON.
nlohmann::ordered_json instance_spec_json(const HardInstanceSpec& spec);

int cmd_gen(const RunConfig& config, const CliOptions& opts, std::ostream& out, std::ostream& err);
int cmd_run(const RunConfig& config, const CliOptions& opts, std::ostream& out, std::ostream& err);
int cmd_verify(const RunConfig& config, const CliOptions& opts, std::ostream& out, std::ostream& err,
               const VerifyHooks& hooks = {});

/// Parallel seed cap: HARDSUM_THREADS if set and positive, else the hardware count.
unsigned thread_cap();

/// Full command line: `hardsum <gen|run|verify> [--config PATH] [--seed N] [--out PATH]
/// [--budget N] [--quiet] [--csv PATH]`.
int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace hardsum

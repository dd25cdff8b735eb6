#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "cdnsim/config.hpp"
#include "cdnsim/subproblem.hpp"

namespace cdnsim {

namespace exit_code {
inline constexpr int kOk = 0;
inline constexpr int kConfig = 1;
inline constexpr int kRuntime = 2;
}  // namespace exit_code

/// Entry point shared by the executable and the tests; `args` excludes the
/// program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

struct SweepCell {
  Policy policy = Policy::kTopX;
  double cache_size_pct = 0.0;
  std::size_t cache_interval = 1;
  std::uint64_t seed = 0;

  std::string name() const;
};

struct CellOutcome {
  SweepCell cell;
  bool ok = false;
  std::string error;
  RunSummary summary;
};

struct SimulateOptions {
  std::filesystem::path out_dir;
  unsigned jobs = 1;
  bool detail = false;  // also write events, dual trace and final prices
};

/// Expands the sweep axes in (policy, size, interval, seed) order.
std::vector<SweepCell> expand_sweep(const SweepConfig& config);

/// Runs every cell on a bounded pool and writes per-cell CSVs plus
/// summary.csv and comparison.csv. A failing cell is reported, not fatal.
std::vector<CellOutcome> run_sweep(const SweepConfig& config, const SimulateOptions& options);

/// Instance text: `capacity C`, `penalty <spec>`, then one price per line.
/// Throws ConfigError.
SubproblemInstance parse_subproblem(std::istream& in);

}  // namespace cdnsim

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "cdnsim/simulator.hpp"
#include "cdnsim/workload.hpp"

namespace cdnsim {

enum class WorkloadKind { kZipf, kDecay, kTrace, kStream };

WorkloadKind parse_workload_kind(std::string_view name);

/// Parameters for one workload generator; unused fields are ignored.
struct WorkloadSpec {
  WorkloadKind kind = WorkloadKind::kZipf;
  // zipf
  std::size_t files = 1000;
  double skew = 0.8;
  double size_min = 0.5;
  double size_max = 5.0;
  double rate = 10.0;
  bool fixed_count = false;
  bool shuffle = true;
  // decay; profiles_path empty means synthetic profiles
  SyntheticProfileOptions synthetic;
  std::filesystem::path profiles_path;
  std::uint64_t upscale = 1;
  // trace and stream
  std::filesystem::path path;
  std::filesystem::path catalog_path;
  TraceOptions trace;
};

struct Workload {
  Catalog catalog;
  std::vector<RequestEvent> events;
  std::vector<PopularityProfile> profiles;  // decay workloads only
};

/// Generators are seeded with `seed`; events at or past `horizon` are dropped.
Workload build_workload(const WorkloadSpec& spec, std::uint64_t seed, std::size_t horizon, std::size_t num_caches);

/// A parsed config file: the shared experiment settings plus sweep axes.
struct SweepConfig {
  ExperimentConfig base;
  WorkloadSpec workload;
  std::vector<Policy> policies;
  std::vector<double> cache_sizes_pct;  // percent of total catalog volume
  std::vector<std::size_t> cache_intervals;
  std::vector<std::uint64_t> seeds;
};

/// INI with [experiment], [network] and [workload] sections; sweep axes are
/// comma-separated lists. `overrides` are `section.key=value` strings applied
/// on top of the text. Relative paths resolve against `base_dir`. Unknown keys
/// are rejected. Throws ConfigError.
SweepConfig parse_config(std::string_view text, const std::filesystem::path& base_dir = ".",
                         const std::vector<std::string>& overrides = {});
SweepConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});

}  // namespace cdnsim

#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cdnsim/baselines.hpp"
#include "cdnsim/dual_engine.hpp"
#include "cdnsim/placement.hpp"
#include "cdnsim/types.hpp"
#include "cdnsim/workload.hpp"

namespace cdnsim {

enum class Topology { kOne, kTwo };

enum class Policy { kTopX, kLeastX, kLeastXTh, kLeastXF, kLru, kLfu, kRandom, kPerceivedRandom, kTwoLru };

/// Accepts lru|lfu|rr|prr|2lru|topx|leastx|leastxth|leastxf. Throws ConfigError.
Policy parse_policy(std::string_view name);
std::string_view policy_name(Policy p);
/// True for the four policies driven by anticipated flows.
bool is_flow_policy(Policy p);

enum class InitialFill { kDefault, kEmpty, kRandom };

struct ExperimentConfig {
  Topology topology = Topology::kOne;
  Policy policy = Policy::kTopX;
  NetworkConfig network;
  std::optional<double> mu;            // defaults to half the strong-convexity modulus
  InitMode init = InitMode::kFloor;
  std::size_t dual_interval = 1;       // slots between dual updates
  std::size_t cache_interval = 1;      // slots between cache updates
  std::size_t horizon = 1;             // slots
  std::size_t warmup = 0;              // leading slots excluded from the summary
  std::uint64_t seed = 0;
  InitialFill fill = InitialFill::kDefault;  // random for topology one, empty for two
  std::size_t miss_log_capacity = 0;   // 0 selects the default per cache
  std::size_t virtual_capacity = 0;    // 2LRU ids; 0 selects the default
  double tolerance = 1e-9;

  /// Throws ConfigError on inconsistent settings.
  void validate() const;
};

struct SlotMetrics {
  std::size_t slot = 0;
  CacheId cache = 0;
  double nc = 0.0;
  double rdv = 0.0;
  double bbc = 0.0;
  std::uint64_t hits = 0;
  std::uint64_t misses = 0;
  double demand = 0.0;         // total requested volume
  double cache_served = 0.0;   // volume served from the cache
  bool cache_over = false;     // cache-served volume above C^c
  bool root_over = false;      // root-served volume above C^r
};

enum class EventKind { kAdmit, kEvict, kSkip };

struct PlacementEvent {
  std::size_t slot = 0;
  CacheId cache = 0;
  EventKind kind = EventKind::kAdmit;
  FileId file = 0;
  double size = 0.0;
};

struct RunSummary {
  std::string policy;
  std::size_t slots = 0;  // post-warmup slots averaged
  double mean_nc = 0.0;   // per slot, summed over caches
  double mean_rdv = 0.0;
  double mean_bbc = 0.0;
  std::uint64_t hits = 0;
  std::uint64_t misses = 0;
  double hit_ratio = 0.0;
  std::size_t capacity_violations = 0;
  std::size_t bound_violations = 0;
};

struct DualTracePoint {
  std::size_t step = 0;
  std::size_t slot = 0;  // last slot folded into the step
  double mean_abs_residual = 0.0;  // |running average of r| averaged over (i, f)
  double max_abs_residual = 0.0;
};

struct RunResult {
  std::vector<SlotMetrics> metrics;  // ordered by (slot, cache)
  std::vector<PlacementEvent> events;
  RunSummary summary;
  std::vector<BoundViolation> bound_violations;
  std::vector<DualTracePoint> dual_trace;
  Matrix final_lambda;  // empty for eviction baselines
};

struct CapacityViolation {
  std::size_t slot = 0;
  CacheId cache = 0;
  bool cache_path = false;  // false: root path
  double volume = 0.0;
  double capacity = 0.0;
};

/// NC = sum_f chi(m_f d_f) + phi((1 - m_f) d_f); RDV = sum_f (1 - m_f) d_f.
struct SlotCost {
  double nc = 0.0;
  double rdv = 0.0;
};
SlotCost slot_metrics(std::span<const double> demand, std::span<const double> stored, const CacheLink& link);
/// Same, from per-file volumes already split between the two paths.
SlotCost slot_metrics_split(std::span<const double> cache_volume, std::span<const double> root_volume,
                            const CacheLink& link);

/// Topology one: admitted volume per slot from the event log. Topology two:
/// the RDV series itself.
std::vector<double> bbc_accounting(Topology topology, std::span<const SlotMetrics> metrics,
                                   std::span<const PlacementEvent> events);

/// Slots whose cache- or root-served volume exceeds the link capacity.
std::vector<CapacityViolation> capacity_audit(std::span<const SlotMetrics> metrics, const NetworkConfig& network);

/// Runs the slot loop of the placement algorithm over one stream.
class Simulator {
 public:
  Simulator(ExperimentConfig config, const Catalog& catalog);

  /// Replaces the initial fill of one cache. Call before run().
  void preload(CacheId cache, std::span<const FileId> files);
  /// Placement decisions use these cache-path flows instead of primal_step.
  void override_flows(Matrix x);

  /// Throws std::invalid_argument for events outside the horizon or catalog.
  RunResult run(std::span<const RequestEvent> stream);

  const ExperimentConfig& config() const { return config_; }

 private:
  ExperimentConfig config_;
  const Catalog& catalog_;
  std::vector<std::optional<std::vector<FileId>>> preload_;
  std::optional<Matrix> flow_override_;
};

// CSV writers. Numbers use the shortest round-trip representation.
void write_metrics_csv(std::ostream& out, std::span<const SlotMetrics> metrics);
void write_events_csv(std::ostream& out, std::span<const PlacementEvent> events);
void write_summary_header(std::ostream& out);
void write_summary_row(std::ostream& out, const RunSummary& s);
void write_dual_trace_csv(std::ostream& out, std::span<const DualTracePoint> trace);
void write_lambda_csv(std::ostream& out, const Matrix& lambda);

}  // namespace cdnsim

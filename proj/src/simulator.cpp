#include "cdnsim/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>
#include <stdexcept>

#include <fmt/format.h>
#include <fmt/ostream.h>

namespace cdnsim {

namespace {

struct PolicyName {
  Policy policy;
  std::string_view name;
};

constexpr PolicyName kPolicies[] = {
    {Policy::kTopX, "topx"},  {Policy::kLeastX, "leastx"}, {Policy::kLeastXTh, "leastxth"},
    {Policy::kLeastXF, "leastxf"}, {Policy::kLru, "lru"},   {Policy::kLfu, "lfu"},
    {Policy::kRandom, "rr"},  {Policy::kPerceivedRandom, "prr"}, {Policy::kTwoLru, "2lru"},
};

BaselineKind baseline_kind(Policy p) {
  switch (p) {
    case Policy::kLru: return BaselineKind::kLru;
    case Policy::kLfu: return BaselineKind::kLfu;
    case Policy::kRandom: return BaselineKind::kRandom;
    case Policy::kPerceivedRandom: return BaselineKind::kPerceivedRandom;
    case Policy::kTwoLru: return BaselineKind::kTwoLru;
    default: break;
  }
  throw std::logic_error("not an eviction baseline");
}

// Cost of one path; volumes outside the penalty's domain cost +inf.
double path_cost(const Penalty& h, double v) {
  try {
    return h.eval(v);
  } catch (const std::domain_error&) {
    return std::numeric_limits<double>::infinity();
  }
}

std::string_view event_name(EventKind k) {
  switch (k) {
    case EventKind::kAdmit: return "admit";
    case EventKind::kEvict: return "evict";
    case EventKind::kSkip: return "skip";
  }
  return "?";
}

std::vector<FileId> random_fill(std::span<const double> sizes, double capacity, std::uint64_t seed) {
  std::vector<FileId> order(sizes.size());
  for (FileId f = 0; f < order.size(); ++f) order[f] = f;
  std::mt19937_64 rng(seed);
  for (std::size_t i = order.size(); i > 1; --i) {
    const auto j = std::min<std::size_t>(
        i - 1, static_cast<std::size_t>(static_cast<double>(rng() >> 11) * 0x1.0p-53 * static_cast<double>(i)));
    std::swap(order[i - 1], order[j]);
  }
  std::vector<FileId> chosen;
  double used = 0.0;
  for (FileId f : order) {
    if (used + sizes[f] <= capacity + CacheState::kSizeSlack) {
      chosen.push_back(f);
      used += sizes[f];
    }
  }
  return chosen;
}

}  // namespace

Policy parse_policy(std::string_view name) {
  for (const PolicyName& p : kPolicies) {
    if (p.name == name) return p.policy;
  }
  throw ConfigError(fmt::format("unknown policy '{}' (expected lru|lfu|rr|prr|2lru|topx|leastx|leastxth|leastxf)", name));
}

std::string_view policy_name(Policy policy) {
  for (const PolicyName& p : kPolicies) {
    if (p.policy == policy) return p.name;
  }
  return "?";
}

bool is_flow_policy(Policy p) {
  return p == Policy::kTopX || p == Policy::kLeastX || p == Policy::kLeastXTh || p == Policy::kLeastXF;
}

void ExperimentConfig::validate() const {
  if (horizon == 0) throw ConfigError("experiment: horizon must be at least one slot");
  if (dual_interval == 0 || cache_interval == 0) throw ConfigError("experiment: update intervals must be positive");
  if (is_flow_policy(policy) && dual_interval > cache_interval) {
    throw ConfigError(fmt::format("experiment: dual interval {} exceeds cache interval {}", dual_interval,
                                  cache_interval));
  }
  if (policy == Policy::kLeastXF && topology != Topology::kTwo) {
    throw ConfigError("experiment: leastxf admits per download and needs topology two");
  }
  if (warmup >= horizon) throw ConfigError("experiment: warmup must be shorter than the horizon");
  if (!(tolerance > 0.0)) throw ConfigError("experiment: solver tolerance must be positive");
  if (network.caches.empty()) throw ConfigError("experiment: network has no caches");
}

SlotCost slot_metrics_split(std::span<const double> cache_volume, std::span<const double> root_volume,
                            const CacheLink& link) {
  if (cache_volume.size() != root_volume.size()) throw std::invalid_argument("slot_metrics: shape mismatch");
  SlotCost c;
  for (std::size_t f = 0; f < cache_volume.size(); ++f) {
    c.nc += path_cost(link.chi, cache_volume[f]) + path_cost(link.phi, root_volume[f]);
    c.rdv += root_volume[f];
  }
  return c;
}

SlotCost slot_metrics(std::span<const double> demand, std::span<const double> stored, const CacheLink& link) {
  if (demand.size() != stored.size()) throw std::invalid_argument("slot_metrics: shape mismatch");
  std::vector<double> local(demand.size());
  std::vector<double> root(demand.size());
  for (std::size_t f = 0; f < demand.size(); ++f) {
    local[f] = stored[f] * demand[f];
    root[f] = (1.0 - stored[f]) * demand[f];
  }
  return slot_metrics_split(local, root, link);
}

std::vector<double> bbc_accounting(Topology topology, std::span<const SlotMetrics> metrics,
                                   std::span<const PlacementEvent> events) {
  std::vector<double> out(metrics.size(), 0.0);
  if (topology == Topology::kTwo) {
    for (std::size_t k = 0; k < metrics.size(); ++k) out[k] = metrics[k].rdv;
    return out;
  }
  for (std::size_t k = 0; k < metrics.size(); ++k) {
    for (const PlacementEvent& e : events) {
      if (e.kind == EventKind::kAdmit && e.slot == metrics[k].slot && e.cache == metrics[k].cache) out[k] += e.size;
    }
  }
  return out;
}

std::vector<CapacityViolation> capacity_audit(std::span<const SlotMetrics> metrics, const NetworkConfig& network) {
  std::vector<CapacityViolation> out;
  for (const SlotMetrics& m : metrics) {
    const CacheLink& link = network.caches.at(m.cache);
    if (m.cache_served > link.cache_capacity) {
      out.push_back({m.slot, m.cache, true, m.cache_served, link.cache_capacity});
    }
    if (m.rdv > link.root_capacity) out.push_back({m.slot, m.cache, false, m.rdv, link.root_capacity});
  }
  return out;
}

Simulator::Simulator(ExperimentConfig config, const Catalog& catalog) : config_(std::move(config)), catalog_(catalog) {
  if (catalog_.size() == 0) throw ConfigError("simulator: catalog is empty");
  if (config_.network.num_files == 0) config_.network.num_files = catalog_.size();
  if (config_.network.num_files != catalog_.size()) {
    throw ConfigError(fmt::format("simulator: network expects {} files but the catalog has {}",
                                  config_.network.num_files, catalog_.size()));
  }
  config_.validate();
  config_.network.finalize();
  preload_.resize(config_.network.num_caches());
}

void Simulator::preload(CacheId cache, std::span<const FileId> files) {
  if (cache >= preload_.size()) throw std::invalid_argument(fmt::format("preload: unknown cache {}", cache));
  preload_[cache] = std::vector<FileId>(files.begin(), files.end());
}

void Simulator::override_flows(Matrix x) {
  if (x.rows() != config_.network.num_caches() || x.cols() != catalog_.size()) {
    throw std::invalid_argument("override_flows: expected an N x F matrix");
  }
  flow_override_ = std::move(x);
}

RunResult Simulator::run(std::span<const RequestEvent> stream) {
  const ExperimentConfig& cfg = config_;
  const NetworkConfig& net = cfg.network;
  const std::size_t N = net.num_caches();
  const std::size_t F = catalog_.size();
  const std::span<const double> sizes = catalog_.sizes;

  for (std::size_t k = 0; k < stream.size(); ++k) {
    const RequestEvent& e = stream[k];
    if (e.file >= F) throw std::invalid_argument(fmt::format("stream event {}: unknown file {}", k, e.file));
    if (e.cache >= N) throw std::invalid_argument(fmt::format("stream event {}: unknown cache {}", k, e.cache));
    if (!(e.time >= 0.0) || !(e.time < static_cast<double>(cfg.horizon))) {
      throw std::invalid_argument(fmt::format("stream event {}: time {} outside [0, {})", k, e.time, cfg.horizon));
    }
    if (k > 0 && e.time < stream[k - 1].time) throw std::invalid_argument("stream is not in time order");
  }

  const bool flow_policy = is_flow_policy(cfg.policy);
  const bool per_request = cfg.topology == Topology::kTwo && (cfg.policy == Policy::kLeastXF || !flow_policy);

  // Storage.
  std::vector<CacheState> states;
  std::vector<std::unique_ptr<EvictionCache>> baselines;
  std::vector<MissLog> misses;
  for (std::size_t i = 0; i < N; ++i) {
    const double M = net.caches[i].storage;
    if (flow_policy) {
      states.emplace_back(sizes, M);
    } else {
      baselines.push_back(make_baseline(baseline_kind(cfg.policy), sizes, M, cfg.seed * 0x9E3779B97F4A7C15ULL + i + 1,
                                        cfg.virtual_capacity));
    }
    misses.emplace_back(cfg.miss_log_capacity != 0 ? cfg.miss_log_capacity : default_miss_log_capacity(sizes, M));

    InitialFill fill = cfg.fill;
    if (fill == InitialFill::kDefault) fill = cfg.topology == Topology::kOne ? InitialFill::kRandom : InitialFill::kEmpty;
    std::vector<FileId> initial;
    if (preload_[i]) {
      initial = *preload_[i];
    } else if (fill == InitialFill::kRandom) {
      initial = random_fill(sizes, M, cfg.seed + 7919 * (i + 1));
    }
    for (FileId f : initial) {
      if (f >= F) throw std::invalid_argument(fmt::format("preload: unknown file {}", f));
      if (flow_policy) {
        states[i].insert(f);
      } else {
        baselines[i]->preload(f, -1);
      }
    }
  }
  auto stored = [&](std::size_t i) -> const CacheState& { return flow_policy ? states[i] : baselines[i]->state(); };

  RunResult result;
  result.summary.policy = std::string(policy_name(cfg.policy));

  // Dual engine.
  DualState dual;
  AnticipatedFlows flows;
  std::optional<DualHistory> history;
  Matrix accumulated(N, F);
  if (flow_policy) {
    dual = init_dual(net, cfg.init, cfg.mu);
    flows = primal_step(dual, net, cfg.tolerance);
    history.emplace(dual.lambda);
  }
  auto placement_x = [&](std::size_t i) -> std::span<const double> {
    return flow_override_ ? flow_override_->row(i) : flows.x.row(i);
  };

  Matrix cache_volume(N, F);
  Matrix root_volume(N, F);
  std::vector<std::uint64_t> hits(N), miss_count(N);
  std::vector<double> admitted(N);
  std::int64_t seq = 0;
  std::size_t next = 0;

  auto log_delta = [&](std::size_t slot, std::size_t i, const PlacementDelta& d) {
    for (FileId f : d.evicted) result.events.push_back({slot, static_cast<CacheId>(i), EventKind::kEvict, f, sizes[f]});
    for (FileId f : d.admitted) result.events.push_back({slot, static_cast<CacheId>(i), EventKind::kAdmit, f, sizes[f]});
    admitted[i] += d.bytes_admitted;
  };

  for (std::size_t t = 0; t < cfg.horizon; ++t) {
    std::fill(admitted.begin(), admitted.end(), 0.0);

    // Cache update event at the start of the slot.
    if (!per_request && t > 0 && t % cfg.cache_interval == 0) {
      for (std::size_t i = 0; i < N; ++i) {
        PlacementDelta d;
        switch (cfg.policy) {
          case Policy::kTopX: d = apply_top_x(states[i], placement_x(i)); break;
          case Policy::kLeastX: d = least_x(states[i], placement_x(i), misses[i]); break;
          case Policy::kLeastXTh: d = least_x_th(states[i], placement_x(i), misses[i]); break;
          case Policy::kLeastXF: throw std::logic_error("leastxf has no periodic update");
          default: d = baselines[i]->periodic_update(misses[i]); break;
        }
        log_delta(t, i, d);
        misses[i].clear();
      }
    }

    // Serve the slot's requests.
    while (next < stream.size() && static_cast<std::size_t>(stream[next].time) == t) {
      const RequestEvent& e = stream[next++];
      const std::size_t i = e.cache;
      const FileId f = e.file;
      accumulated(i, f) += e.volume;
      bool hit = stored(i).contains(f);

      if (per_request) {
        if (flow_policy) {
          if (!hit) {
            AdmissionDecision a = least_x_f(states[i], placement_x(i), f);
            if (a.cached) {
              PlacementDelta d{{f}, std::move(a.evicted), sizes[f]};
              log_delta(t, i, d);
            }
          }
        } else {
          RequestResult r = baselines[i]->on_request(f, seq);
          if (!r.hit) {
            PlacementDelta d{{}, std::move(r.evicted), 0.0};
            if (r.admitted) {
              d.admitted.push_back(f);
              d.bytes_admitted = sizes[f];
            } else if (sizes[f] > baselines[i]->state().capacity() + CacheState::kSizeSlack) {
              result.events.push_back({t, e.cache, EventKind::kSkip, f, sizes[f]});
            }
            log_delta(t, i, d);
          }
        }
      } else if (hit) {
        if (!flow_policy) baselines[i]->on_hit(f, seq);
      } else {
        misses[i].record(f, seq);
        if (!flow_policy) baselines[i]->on_miss(f, seq);
      }

      if (hit) {
        cache_volume(i, f) += e.volume;
        ++hits[i];
      } else {
        root_volume(i, f) += e.volume;
        ++miss_count[i];
      }
      ++seq;
    }

    // Per-slot metrics.
    for (std::size_t i = 0; i < N; ++i) {
      const CacheLink& link = net.caches[i];
      const SlotCost cost = slot_metrics_split(cache_volume.row(i), root_volume.row(i), link);
      SlotMetrics m;
      m.slot = t;
      m.cache = static_cast<CacheId>(i);
      m.nc = cost.nc;
      m.rdv = cost.rdv;
      m.bbc = cfg.topology == Topology::kTwo ? cost.rdv : admitted[i];
      m.hits = hits[i];
      m.misses = miss_count[i];
      for (double v : cache_volume.row(i)) m.cache_served += v;
      m.demand = m.cache_served + m.rdv;
      m.cache_over = m.cache_served > link.cache_capacity;
      m.root_over = m.rdv > link.root_capacity;
      result.metrics.push_back(m);
    }
    cache_volume.fill(0.0);
    root_volume.fill(0.0);
    std::fill(hits.begin(), hits.end(), 0);
    std::fill(miss_count.begin(), miss_count.end(), 0);

    // Dual update on the demand accumulated since the previous one, as a
    // per-slot average so capacities keep their per-slot meaning.
    if (flow_policy && (t + 1) % cfg.dual_interval == 0) {
      const double scale = 1.0 / static_cast<double>(cfg.dual_interval);
      for (double& v : accumulated.data()) v *= scale;
      apply_dual_step(dual, flows, accumulated, &result.bound_violations);
      history->record(flows, accumulated, dual.lambda);
      accumulated.fill(0.0);

      DualTracePoint p;
      p.step = history->steps();
      p.slot = t;
      const double T = static_cast<double>(p.step);
      for (double r : history->residual_sum().data()) {
        const double a = std::abs(r / T);
        p.mean_abs_residual += a;
        p.max_abs_residual = std::max(p.max_abs_residual, a);
      }
      p.mean_abs_residual /= static_cast<double>(N * F);
      result.dual_trace.push_back(p);

      flows = primal_step(dual, net, cfg.tolerance);
    }
  }
  if (flow_policy) result.final_lambda = dual.lambda;

  RunSummary& s = result.summary;
  double nc = 0.0, rdv = 0.0, bbc = 0.0;
  for (const SlotMetrics& m : result.metrics) {
    if (m.cache_over || m.root_over) ++s.capacity_violations;
    if (m.slot < cfg.warmup) continue;
    nc += m.nc;
    rdv += m.rdv;
    bbc += m.bbc;
    s.hits += m.hits;
    s.misses += m.misses;
  }
  s.slots = cfg.horizon - cfg.warmup;
  s.mean_nc = nc / static_cast<double>(s.slots);
  s.mean_rdv = rdv / static_cast<double>(s.slots);
  s.mean_bbc = bbc / static_cast<double>(s.slots);
  s.hit_ratio = s.hits + s.misses == 0 ? 0.0 : static_cast<double>(s.hits) / static_cast<double>(s.hits + s.misses);
  s.bound_violations = result.bound_violations.size();
  return result;
}

void write_metrics_csv(std::ostream& out, std::span<const SlotMetrics> metrics) {
  out << "slot,cache_id,nc,rdv,bbc,hits,misses\n";
  for (const SlotMetrics& m : metrics) {
    fmt::print(out, "{},{},{},{},{},{},{}\n", m.slot, m.cache, m.nc, m.rdv, m.bbc, m.hits, m.misses);
  }
}

void write_events_csv(std::ostream& out, std::span<const PlacementEvent> events) {
  out << "slot,cache_id,event,file_id,size\n";
  for (const PlacementEvent& e : events) {
    fmt::print(out, "{},{},{},{},{}\n", e.slot, e.cache, event_name(e.kind), e.file, e.size);
  }
}

void write_summary_header(std::ostream& out) {
  out << "policy,slots,mean_nc,mean_rdv,mean_bbc,hits,misses,hit_ratio,capacity_violations,bound_violations\n";
}

void write_summary_row(std::ostream& out, const RunSummary& s) {
  fmt::print(out, "{},{},{},{},{},{},{},{},{},{}\n", s.policy, s.slots, s.mean_nc, s.mean_rdv, s.mean_bbc, s.hits,
             s.misses, s.hit_ratio, s.capacity_violations, s.bound_violations);
}

void write_dual_trace_csv(std::ostream& out, std::span<const DualTracePoint> trace) {
  out << "step,slot,mean_abs_residual,max_abs_residual\n";
  for (const DualTracePoint& p : trace) {
    fmt::print(out, "{},{},{},{}\n", p.step, p.slot, p.mean_abs_residual, p.max_abs_residual);
  }
}

void write_lambda_csv(std::ostream& out, const Matrix& lambda) {
  out << "cache_id,file_id,lambda\n";
  for (std::size_t i = 0; i < lambda.rows(); ++i) {
    for (std::size_t f = 0; f < lambda.cols(); ++f) fmt::print(out, "{},{},{}\n", i, f, lambda(i, f));
  }
}

}  // namespace cdnsim

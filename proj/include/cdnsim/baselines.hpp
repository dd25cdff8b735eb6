#pragma once

#include <cstdint>
#include <list>
#include <tuple>
#include <memory>
#include <random>
#include <set>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cdnsim/placement.hpp"
#include "cdnsim/types.hpp"

namespace cdnsim {

enum class BaselineKind { kLru, kLfu, kRandom, kPerceivedRandom, kTwoLru };

struct RequestResult {
  bool hit = false;
  bool admitted = false;
  std::vector<FileId> evicted;
};

/// Eviction-driven cache. Timestamps are logical and must be non-decreasing;
/// the simulator passes a global request counter.
///
/// Per-request use (every download passes through the cache) goes through
/// on_request(). Periodic use records hits/misses with on_hit()/on_miss() and
/// applies the collected misses at update events via periodic_update().
class EvictionCache {
 public:
  EvictionCache(std::span<const double> sizes, double capacity);
  virtual ~EvictionCache() = default;

  EvictionCache(const EvictionCache&) = delete;
  EvictionCache& operator=(const EvictionCache&) = delete;

  RequestResult on_request(FileId f, std::int64_t time);

  void on_hit(FileId f, std::int64_t time);
  virtual void on_miss(FileId f, std::int64_t time) { (void)f; (void)time; }
  PlacementDelta periodic_update(const MissLog& misses);

  /// Installs an initial file without touching policy history.
  void preload(FileId f, std::int64_t time);

  const CacheState& state() const { return state_; }
  bool contains(FileId f) const { return state_.contains(f); }
  virtual BaselineKind kind() const = 0;

 protected:
  /// Metadata update for a request that hit.
  virtual void touch(FileId f, std::int64_t time) = 0;
  /// Metadata for a newly stored file; `count` seeds frequency counters.
  virtual void on_insert(FileId f, std::int64_t time, std::uint32_t count) = 0;
  virtual void on_erase(FileId f) = 0;
  /// Next file to evict, skipping `protect`. Only called with at least one
  /// unprotected file stored.
  virtual FileId choose_victim(std::span<const FileId> protect) = 0;
  /// Whether a per-request miss should be stored (2LRU filters here).
  virtual bool admit_on_miss(FileId f, std::int64_t time) { (void)f; (void)time; return true; }
  /// Miss-log entries in the order periodic_update() admits them.
  virtual std::vector<MissEntry> admission_order(std::vector<MissEntry> entries);
  /// Whether a missed file may displace `stored` at an update event. The
  /// random policies always allow it.
  virtual bool outranks(const MissEntry& incoming, FileId stored) const { (void)incoming; (void)stored; return true; }

  static bool is_protected(std::span<const FileId> protect, FileId f);

 private:
  /// With `ranked`, gives up (changing nothing) as soon as a needed victim
  /// outranks the incoming entry.
  bool admit(const MissEntry& entry, std::span<const FileId> protect, bool ranked, std::vector<FileId>& evicted);

  CacheState state_;
};

class LruCache : public EvictionCache {
 public:
  using EvictionCache::EvictionCache;
  BaselineKind kind() const override { return BaselineKind::kLru; }

 protected:
  void touch(FileId f, std::int64_t time) override;
  void on_insert(FileId f, std::int64_t time, std::uint32_t count) override;
  void on_erase(FileId f) override;
  FileId choose_victim(std::span<const FileId> protect) override;
  bool outranks(const MissEntry& incoming, FileId stored) const override;

 private:
  std::set<std::pair<std::int64_t, FileId>> order_;  // (last access, id)
  std::unordered_map<FileId, std::int64_t> last_;
};

/// In-cache LFU: counters live only while the file is stored and never reset.
/// Ties go to the least recently used file, then the lower id.
class LfuCache : public EvictionCache {
 public:
  using EvictionCache::EvictionCache;
  BaselineKind kind() const override { return BaselineKind::kLfu; }
  std::uint64_t count_of(FileId f) const;

 protected:
  void touch(FileId f, std::int64_t time) override;
  void on_insert(FileId f, std::int64_t time, std::uint32_t count) override;
  void on_erase(FileId f) override;
  FileId choose_victim(std::span<const FileId> protect) override;
  std::vector<MissEntry> admission_order(std::vector<MissEntry> entries) override;
  bool outranks(const MissEntry& incoming, FileId stored) const override;

 private:
  struct Meta {
    std::uint64_t count;
    std::int64_t last;
  };
  using Key = std::tuple<std::uint64_t, std::int64_t, FileId>;
  std::set<Key> order_;
  std::unordered_map<FileId, Meta> meta_;
};

/// Uniform random eviction.
class RandomCache : public EvictionCache {
 public:
  RandomCache(std::span<const double> sizes, double capacity, std::uint64_t seed);
  BaselineKind kind() const override { return BaselineKind::kRandom; }

 protected:
  void touch(FileId, std::int64_t) override {}
  void on_insert(FileId f, std::int64_t time, std::uint32_t count) override;
  void on_erase(FileId f) override;
  FileId choose_victim(std::span<const FileId> protect) override;
  std::vector<MissEntry> admission_order(std::vector<MissEntry> entries) override;

  std::vector<FileId> members_;
  std::unordered_map<FileId, std::size_t> slot_;
  std::mt19937_64 rng_;
};

/// Popularity-weighted random eviction. The perceived popularity is the
/// last-request timestamp; a file's eviction weight is its staleness rank
/// (stalest = n, freshest = 1, ties share the average rank).
class PerceivedRandomCache : public RandomCache {
 public:
  PerceivedRandomCache(std::span<const double> sizes, double capacity, std::uint64_t seed);
  BaselineKind kind() const override { return BaselineKind::kPerceivedRandom; }

  /// Draws a victim without evicting it.
  FileId sample_victim(std::span<const FileId> protect = {});
  /// Eviction probability per stored file (ascending id), for inspection.
  std::vector<std::pair<FileId, double>> eviction_probabilities() const;

 protected:
  void touch(FileId f, std::int64_t time) override;
  void on_insert(FileId f, std::int64_t time, std::uint32_t count) override;
  void on_erase(FileId f) override;
  FileId choose_victim(std::span<const FileId> protect) override;
  std::vector<MissEntry> admission_order(std::vector<MissEntry> entries) override;

 private:
  std::vector<std::pair<FileId, double>> weights(std::span<const FileId> protect) const;
  std::unordered_map<FileId, std::int64_t> last_;
};

/// LRU real cache fronted by an id-only LRU virtual cache: a missed file is
/// stored only when its id was already in the virtual cache.
class TwoLruCache : public LruCache {
 public:
  TwoLruCache(std::span<const double> sizes, double capacity, std::size_t virtual_capacity);
  BaselineKind kind() const override { return BaselineKind::kTwoLru; }

  void on_miss(FileId f, std::int64_t time) override;
  bool in_virtual(FileId f) const { return virtual_index_.count(f) != 0; }
  std::size_t virtual_capacity() const { return virtual_capacity_; }

 protected:
  void touch(FileId f, std::int64_t time) override;
  bool admit_on_miss(FileId f, std::int64_t time) override;
  std::vector<MissEntry> admission_order(std::vector<MissEntry> entries) override;

 private:
  /// Moves f to the front of the virtual cache; returns whether it was there.
  bool touch_virtual(FileId f);

  std::size_t virtual_capacity_;
  std::list<FileId> virtual_;
  std::unordered_map<FileId, std::list<FileId>::iterator> virtual_index_;
  std::set<FileId> eligible_;  // periodic mode: misses that hit the virtual cache
};

/// Default 2LRU virtual-cache size: files that fit in `capacity` at mean size.
std::size_t default_virtual_capacity(std::span<const double> sizes, double capacity);

std::unique_ptr<EvictionCache> make_baseline(BaselineKind kind, std::span<const double> sizes, double capacity,
                                             std::uint64_t seed, std::size_t virtual_capacity = 0);

}  // namespace cdnsim

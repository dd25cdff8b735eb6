#pragma once

#include <cstdint>
#include <list>
#include <span>
#include <unordered_map>
#include <vector>

#include "cdnsim/types.hpp"

namespace cdnsim {

/// Files held by one cache server. Keeps sum of stored sizes <= capacity.
class CacheState {
 public:
  CacheState(std::span<const double> sizes, double capacity);

  bool contains(FileId f) const { return member_[f] != 0; }
  double used() const { return used_; }
  double capacity() const { return capacity_; }
  double free() const { return capacity_ - used_; }
  double size_of(FileId f) const { return sizes_[f]; }
  std::size_t count() const { return files_.size(); }
  std::size_t num_files() const { return sizes_.size(); }
  bool fits(FileId f) const { return sizes_[f] <= free() + kSizeSlack; }

  /// Stored files in ascending id order.
  std::vector<FileId> files() const;

  /// Throws std::logic_error when the file is already present or does not fit.
  void insert(FileId f);
  /// Throws std::logic_error when the file is absent.
  void erase(FileId f);

  static constexpr double kSizeSlack = 1e-9;

 private:
  std::span<const double> sizes_;
  double capacity_ = 0.0;
  double used_ = 0.0;
  std::vector<char> member_;
  std::vector<FileId> files_;
  std::vector<std::size_t> slot_;  // index of each member inside files_
};

struct MissEntry {
  FileId file = 0;
  std::int64_t last_request = 0;  // logical timestamp of the latest miss
  std::uint32_t count = 0;        // misses since the entry was created
};

/// Bounded, time-ordered list of requested-but-absent files (oldest first).
/// Re-recording a file moves it to the newest position; overflow drops the
/// oldest entry.
class MissLog {
 public:
  explicit MissLog(std::size_t capacity);

  void record(FileId f, std::int64_t time);
  void erase(FileId f);
  void clear();

  bool contains(FileId f) const { return index_.count(f) != 0; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  std::size_t capacity() const { return capacity_; }
  std::vector<MissEntry> entries() const { return {entries_.begin(), entries_.end()}; }

 private:
  std::size_t capacity_;
  std::list<MissEntry> entries_;
  std::unordered_map<FileId, std::list<MissEntry>::iterator> index_;
};

struct PlacementDelta {
  std::vector<FileId> admitted;
  std::vector<FileId> evicted;
  double bytes_admitted = 0.0;
};

/// Greedy scan in descending x (ties by ascending id), admitting every file
/// that fits in the remaining capacity.
std::vector<FileId> top_x(std::span<const double> x, std::span<const double> sizes, double capacity);

/// Replaces the cache contents with top_x and reports the difference.
PlacementDelta apply_top_x(CacheState& state, std::span<const double> x);

/// Admits missed files in descending x, evicting previously stored files in
/// ascending x to make room. Files admitted by this call are never evicted by
/// it; a missed file that cannot fit even with every incumbent gone is skipped.
PlacementDelta least_x(CacheState& state, std::span<const double> x, const MissLog& misses);

/// Two thresholds: th1 = min stored x, th2 = max missed x. Stored files with
/// x < th2 are evicted; missed files with x >= th1 are admitted in descending x
/// while they fit. An empty miss log leaves the cache untouched.
PlacementDelta least_x_th(CacheState& state, std::span<const double> x, const MissLog& misses);

struct AdmissionDecision {
  bool cached = false;
  std::vector<FileId> evicted;
};

/// Per-download admission: keep `incoming` only when its x is at least the
/// smallest stored x, evicting ascending-x files no more popular than it until
/// it fits. Nothing changes when it cannot be made to fit.
AdmissionDecision least_x_f(CacheState& state, std::span<const double> x, FileId incoming);

/// Default miss-log bound: 10x the number of average-size files that fit.
std::size_t default_miss_log_capacity(std::span<const double> sizes, double capacity);

}  // namespace cdnsim

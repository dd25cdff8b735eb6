#include "cdnsim/placement.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <fmt/format.h>

namespace cdnsim {

namespace {

// Descending x, ties by ascending id.
auto by_x_desc(std::span<const double> x) {
  return [x](FileId l, FileId r) { return x[l] > x[r] || (x[l] == x[r] && l < r); };
}

// Ascending x, ties by ascending id.
auto by_x_asc(std::span<const double> x) {
  return [x](FileId l, FileId r) { return x[l] < x[r] || (x[l] == x[r] && l < r); };
}

std::vector<FileId> missed_absent(const CacheState& state, const MissLog& misses) {
  std::vector<FileId> out;
  for (const MissEntry& e : misses.entries()) {
    if (!state.contains(e.file)) out.push_back(e.file);
  }
  return out;
}

void check_row(const CacheState& state, std::span<const double> x) {
  if (x.size() != state.num_files()) {
    throw std::invalid_argument(
        fmt::format("placement: flow row has {} entries, catalog has {}", x.size(), state.num_files()));
  }
}

}  // namespace

CacheState::CacheState(std::span<const double> sizes, double capacity)
    : sizes_(sizes), capacity_(capacity), member_(sizes.size(), 0), slot_(sizes.size(), 0) {
  if (!(capacity >= 0.0)) throw std::invalid_argument("cache capacity must be non-negative");
}

std::vector<FileId> CacheState::files() const {
  std::vector<FileId> out = files_;
  std::sort(out.begin(), out.end());
  return out;
}

void CacheState::insert(FileId f) {
  if (f >= member_.size()) throw std::logic_error(fmt::format("cache insert: file {} is not in the catalog", f));
  if (member_[f]) throw std::logic_error(fmt::format("cache insert: file {} already stored", f));
  if (!fits(f)) {
    throw std::logic_error(fmt::format("cache insert: file {} of size {} exceeds free space {}", f, sizes_[f], free()));
  }
  member_[f] = 1;
  slot_[f] = files_.size();
  files_.push_back(f);
  used_ += sizes_[f];
}

void CacheState::erase(FileId f) {
  if (f >= member_.size() || !member_[f]) throw std::logic_error(fmt::format("cache erase: file {} not stored", f));
  const std::size_t pos = slot_[f];
  const FileId last = files_.back();
  files_[pos] = last;
  slot_[last] = pos;
  files_.pop_back();
  member_[f] = 0;
  used_ -= sizes_[f];
  if (files_.empty()) used_ = 0.0;
}

MissLog::MissLog(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("miss log capacity must be positive");
}

void MissLog::record(FileId f, std::int64_t time) {
  if (auto it = index_.find(f); it != index_.end()) {
    MissEntry e = *it->second;
    e.last_request = time;
    ++e.count;
    entries_.erase(it->second);
    entries_.push_back(e);
    it->second = std::prev(entries_.end());
    return;
  }
  entries_.push_back({f, time, 1});
  index_[f] = std::prev(entries_.end());
  while (entries_.size() > capacity_) {
    index_.erase(entries_.front().file);
    entries_.pop_front();
  }
}

void MissLog::erase(FileId f) {
  if (auto it = index_.find(f); it != index_.end()) {
    entries_.erase(it->second);
    index_.erase(it);
  }
}

void MissLog::clear() {
  entries_.clear();
  index_.clear();
}

namespace {

std::vector<FileId> greedy_fill(std::span<const FileId> order, std::span<const double> sizes, double capacity) {
  std::vector<FileId> chosen;
  double remaining = capacity;
  for (FileId f : order) {
    if (sizes[f] <= remaining + CacheState::kSizeSlack) {
      chosen.push_back(f);
      remaining -= sizes[f];
    }
  }
  return chosen;
}

}  // namespace

std::vector<FileId> top_x(std::span<const double> x, std::span<const double> sizes, double capacity) {
  if (x.size() != sizes.size()) throw std::invalid_argument("top_x: flow and size vectors differ in length");
  std::vector<FileId> order(x.size());
  std::iota(order.begin(), order.end(), FileId{0});
  std::sort(order.begin(), order.end(), by_x_desc(x));
  return greedy_fill(order, sizes, capacity);
}

PlacementDelta apply_top_x(CacheState& state, std::span<const double> x) {
  check_row(state, x);
  std::vector<double> sizes(x.size());
  for (FileId f = 0; f < x.size(); ++f) sizes[f] = state.size_of(f);
  // Stored files win ties so equal flows never cause churn.
  std::vector<FileId> order(x.size());
  std::iota(order.begin(), order.end(), FileId{0});
  std::sort(order.begin(), order.end(), [&](FileId a, FileId b) {
    if (x[a] != x[b]) return x[a] > x[b];
    if (state.contains(a) != state.contains(b)) return state.contains(a);
    return a < b;
  });
  const std::vector<FileId> target = greedy_fill(order, sizes, state.capacity());
  std::vector<char> keep(x.size(), 0);
  for (FileId f : target) keep[f] = 1;

  PlacementDelta delta;
  for (FileId f : state.files()) {
    if (!keep[f]) {
      state.erase(f);
      delta.evicted.push_back(f);
    }
  }
  for (FileId f : target) {
    if (!state.contains(f)) {
      state.insert(f);
      delta.admitted.push_back(f);
      delta.bytes_admitted += state.size_of(f);
    }
  }
  return delta;
}

PlacementDelta least_x(CacheState& state, std::span<const double> x, const MissLog& misses) {
  check_row(state, x);
  PlacementDelta delta;
  std::vector<FileId> candidates = missed_absent(state, misses);
  if (candidates.empty()) return delta;
  std::sort(candidates.begin(), candidates.end(), by_x_desc(x));

  std::vector<FileId> incumbents = state.files();
  std::sort(incumbents.begin(), incumbents.end(), by_x_asc(x));
  double evictable = 0.0;
  for (FileId f : incumbents) evictable += state.size_of(f);

  std::size_t next_victim = 0;
  for (FileId f : candidates) {
    const double size = state.size_of(f);
    if (size > state.free() + evictable + CacheState::kSizeSlack) continue;
    while (!state.fits(f)) {
      const FileId victim = incumbents[next_victim++];
      state.erase(victim);
      evictable -= state.size_of(victim);
      delta.evicted.push_back(victim);
    }
    state.insert(f);
    delta.admitted.push_back(f);
    delta.bytes_admitted += size;
  }
  return delta;
}

PlacementDelta least_x_th(CacheState& state, std::span<const double> x, const MissLog& misses) {
  check_row(state, x);
  PlacementDelta delta;
  std::vector<FileId> candidates = missed_absent(state, misses);
  if (candidates.empty()) return delta;

  const std::vector<FileId> stored = state.files();
  double th1 = -std::numeric_limits<double>::infinity();
  if (!stored.empty()) {
    th1 = x[*std::min_element(stored.begin(), stored.end(), by_x_asc(x))];
  }
  const double th2 = x[*std::min_element(candidates.begin(), candidates.end(), by_x_desc(x))];

  for (FileId f : stored) {
    if (x[f] < th2) {
      state.erase(f);
      delta.evicted.push_back(f);
    }
  }
  std::sort(delta.evicted.begin(), delta.evicted.end(), by_x_asc(x));

  std::sort(candidates.begin(), candidates.end(), by_x_desc(x));
  for (FileId f : candidates) {
    if (x[f] < th1) break;
    if (!state.fits(f)) continue;
    state.insert(f);
    delta.admitted.push_back(f);
    delta.bytes_admitted += state.size_of(f);
  }
  return delta;
}

AdmissionDecision least_x_f(CacheState& state, std::span<const double> x, FileId incoming) {
  check_row(state, x);
  AdmissionDecision out;
  if (state.contains(incoming)) throw std::logic_error("least_x_f: incoming file is already stored");
  const double size = state.size_of(incoming);
  if (size > state.capacity() + CacheState::kSizeSlack) return out;

  std::vector<FileId> stored = state.files();
  std::sort(stored.begin(), stored.end(), by_x_asc(x));
  if (!stored.empty() && x[incoming] < x[stored.front()]) return out;

  double free = state.free();
  std::size_t take = 0;
  while (size > free + CacheState::kSizeSlack && take < stored.size() && x[stored[take]] <= x[incoming]) {
    free += state.size_of(stored[take]);
    ++take;
  }
  if (size > free + CacheState::kSizeSlack) return out;

  for (std::size_t k = 0; k < take; ++k) {
    state.erase(stored[k]);
    out.evicted.push_back(stored[k]);
  }
  state.insert(incoming);
  out.cached = true;
  return out;
}

std::size_t default_miss_log_capacity(std::span<const double> sizes, double capacity) {
  if (sizes.empty()) return 16;
  const double mean = std::accumulate(sizes.begin(), sizes.end(), 0.0) / static_cast<double>(sizes.size());
  const double fit = mean > 0.0 ? capacity / mean : 0.0;
  return std::max<std::size_t>(16, static_cast<std::size_t>(std::ceil(10.0 * fit)));
}

}  // namespace cdnsim

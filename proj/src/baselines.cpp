#include "cdnsim/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <tuple>

#include <fmt/format.h>

namespace cdnsim {

namespace {

// Portable draws: libstdc++ and libc++ distributions differ, so sampling is
// done directly on the raw engine output to keep runs reproducible.
double unit_draw(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::size_t index_draw(std::mt19937_64& rng, std::size_t n) {
  return std::min(n - 1, static_cast<std::size_t>(unit_draw(rng) * static_cast<double>(n)));
}

template <typename T>
void shuffle(std::vector<T>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[index_draw(rng, i)]);
}

std::vector<MissEntry> newest_first(std::vector<MissEntry> entries) {
  std::stable_sort(entries.begin(), entries.end(), [](const MissEntry& l, const MissEntry& r) {
    return l.last_request > r.last_request || (l.last_request == r.last_request && l.file < r.file);
  });
  return entries;
}

}  // namespace

EvictionCache::EvictionCache(std::span<const double> sizes, double capacity) : state_(sizes, capacity) {}

bool EvictionCache::is_protected(std::span<const FileId> protect, FileId f) {
  return std::find(protect.begin(), protect.end(), f) != protect.end();
}

bool EvictionCache::admit(const MissEntry& entry, std::span<const FileId> protect, bool ranked,
                          std::vector<FileId>& evicted) {
  const FileId f = entry.file;
  const double size = state_.size_of(f);
  if (size > state_.capacity() + CacheState::kSizeSlack) return false;
  double evictable = 0.0;
  for (FileId g : state_.files()) {
    if (!is_protected(protect, g)) evictable += state_.size_of(g);
  }
  if (size > state_.free() + evictable + CacheState::kSizeSlack) return false;

  // Pick every victim first so a refusal leaves the cache untouched.
  std::vector<FileId> excluded(protect.begin(), protect.end());
  const std::size_t first = excluded.size();
  double freed = state_.free();
  while (size > freed + CacheState::kSizeSlack) {
    const FileId victim = choose_victim(excluded);
    if (ranked && !outranks(entry, victim)) return false;
    excluded.push_back(victim);
    freed += state_.size_of(victim);
  }
  for (std::size_t k = first; k < excluded.size(); ++k) {
    on_erase(excluded[k]);
    state_.erase(excluded[k]);
    evicted.push_back(excluded[k]);
  }
  state_.insert(f);
  on_insert(f, entry.last_request, entry.count);
  return true;
}

RequestResult EvictionCache::on_request(FileId f, std::int64_t time) {
  if (f >= state_.num_files()) throw std::out_of_range(fmt::format("request for unknown file {}", f));
  RequestResult out;
  if (state_.contains(f)) {
    touch(f, time);
    out.hit = true;
    return out;
  }
  if (!admit_on_miss(f, time)) return out;
  out.admitted = admit({f, time, 1}, {}, false, out.evicted);
  return out;
}

void EvictionCache::on_hit(FileId f, std::int64_t time) {
  if (!state_.contains(f)) throw std::logic_error(fmt::format("on_hit: file {} is not stored", f));
  touch(f, time);
}

std::vector<MissEntry> EvictionCache::admission_order(std::vector<MissEntry> entries) {
  return newest_first(std::move(entries));
}

PlacementDelta EvictionCache::periodic_update(const MissLog& misses) {
  std::vector<MissEntry> pending;
  for (const MissEntry& e : misses.entries()) {
    if (!state_.contains(e.file)) pending.push_back(e);
  }
  PlacementDelta delta;
  if (pending.empty()) return delta;
  for (const MissEntry& e : admission_order(std::move(pending))) {
    if (admit(e, delta.admitted, true, delta.evicted)) {
      delta.admitted.push_back(e.file);
      delta.bytes_admitted += state_.size_of(e.file);
    }
  }
  return delta;
}

void EvictionCache::preload(FileId f, std::int64_t time) {
  state_.insert(f);
  on_insert(f, time, 0);
}

// LRU

void LruCache::touch(FileId f, std::int64_t time) {
  auto it = last_.find(f);
  order_.erase({it->second, f});
  it->second = time;
  order_.insert({time, f});
}

void LruCache::on_insert(FileId f, std::int64_t time, std::uint32_t) {
  last_[f] = time;
  order_.insert({time, f});
}

void LruCache::on_erase(FileId f) {
  auto it = last_.find(f);
  order_.erase({it->second, f});
  last_.erase(it);
}

FileId LruCache::choose_victim(std::span<const FileId> protect) {
  for (const auto& [time, f] : order_) {
    if (!is_protected(protect, f)) return f;
  }
  throw std::logic_error("LRU: no evictable file");
}

bool LruCache::outranks(const MissEntry& incoming, FileId stored) const {
  return incoming.last_request > last_.at(stored);
}

// LFU

std::uint64_t LfuCache::count_of(FileId f) const {
  auto it = meta_.find(f);
  return it == meta_.end() ? 0 : it->second.count;
}

void LfuCache::touch(FileId f, std::int64_t time) {
  Meta& m = meta_.at(f);
  order_.erase({m.count, m.last, f});
  ++m.count;
  m.last = time;
  order_.insert({m.count, m.last, f});
}

void LfuCache::on_insert(FileId f, std::int64_t time, std::uint32_t count) {
  meta_[f] = {count, time};
  order_.insert({count, time, f});
}

void LfuCache::on_erase(FileId f) {
  auto it = meta_.find(f);
  order_.erase({it->second.count, it->second.last, f});
  meta_.erase(it);
}

FileId LfuCache::choose_victim(std::span<const FileId> protect) {
  for (const auto& [count, last, f] : order_) {
    if (!is_protected(protect, f)) return f;
  }
  throw std::logic_error("LFU: no evictable file");
}

std::vector<MissEntry> LfuCache::admission_order(std::vector<MissEntry> entries) {
  std::stable_sort(entries.begin(), entries.end(), [](const MissEntry& l, const MissEntry& r) {
    return std::tuple(r.count, r.last_request, l.file) < std::tuple(l.count, l.last_request, r.file);
  });
  return entries;
}

bool LfuCache::outranks(const MissEntry& incoming, FileId stored) const {
  const Meta& m = meta_.at(stored);
  return std::pair<std::uint64_t, std::int64_t>(incoming.count, incoming.last_request) >
         std::pair<std::uint64_t, std::int64_t>(m.count, m.last);
}

// RR

RandomCache::RandomCache(std::span<const double> sizes, double capacity, std::uint64_t seed)
    : EvictionCache(sizes, capacity), rng_(seed) {}

void RandomCache::on_insert(FileId f, std::int64_t, std::uint32_t) {
  slot_[f] = members_.size();
  members_.push_back(f);
}

void RandomCache::on_erase(FileId f) {
  auto it = slot_.find(f);
  const std::size_t pos = it->second;
  members_[pos] = members_.back();
  slot_[members_[pos]] = pos;
  members_.pop_back();
  slot_.erase(f);
}

FileId RandomCache::choose_victim(std::span<const FileId> protect) {
  std::vector<FileId> pool;
  pool.reserve(members_.size());
  for (FileId f : members_) {
    if (!is_protected(protect, f)) pool.push_back(f);
  }
  if (pool.empty()) throw std::logic_error("RR: no evictable file");
  std::sort(pool.begin(), pool.end());
  return pool[index_draw(rng_, pool.size())];
}

std::vector<MissEntry> RandomCache::admission_order(std::vector<MissEntry> entries) {
  std::sort(entries.begin(), entries.end(), [](const MissEntry& l, const MissEntry& r) { return l.file < r.file; });
  shuffle(entries, rng_);
  return entries;
}

// PRR

PerceivedRandomCache::PerceivedRandomCache(std::span<const double> sizes, double capacity, std::uint64_t seed)
    : RandomCache(sizes, capacity, seed) {}

void PerceivedRandomCache::touch(FileId f, std::int64_t time) { last_[f] = time; }

void PerceivedRandomCache::on_insert(FileId f, std::int64_t time, std::uint32_t count) {
  RandomCache::on_insert(f, time, count);
  last_[f] = time;
}

void PerceivedRandomCache::on_erase(FileId f) {
  RandomCache::on_erase(f);
  last_.erase(f);
}

std::vector<std::pair<FileId, double>> PerceivedRandomCache::weights(std::span<const FileId> protect) const {
  std::vector<std::pair<std::int64_t, FileId>> by_age;
  for (FileId f : members_) {
    if (!is_protected(protect, f)) by_age.emplace_back(last_.at(f), f);
  }
  // Newest first so that freshest gets rank 1.
  std::sort(by_age.begin(), by_age.end(), [](const auto& l, const auto& r) {
    return l.first > r.first || (l.first == r.first && l.second < r.second);
  });
  std::vector<std::pair<FileId, double>> out;
  out.reserve(by_age.size());
  std::size_t i = 0;
  while (i < by_age.size()) {
    std::size_t j = i;
    while (j < by_age.size() && by_age[j].first == by_age[i].first) ++j;
    const double rank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
    for (std::size_t k = i; k < j; ++k) out.emplace_back(by_age[k].second, rank);
    i = j;
  }
  std::sort(out.begin(), out.end());
  return out;
}

FileId PerceivedRandomCache::sample_victim(std::span<const FileId> protect) {
  const auto w = weights(protect);
  if (w.empty()) throw std::logic_error("PRR: no evictable file");
  double total = 0.0;
  for (const auto& [f, v] : w) total += v;
  double u = unit_draw(rng_) * total;
  for (const auto& [f, v] : w) {
    if (u < v) return f;
    u -= v;
  }
  return w.back().first;
}

std::vector<std::pair<FileId, double>> PerceivedRandomCache::eviction_probabilities() const {
  auto w = weights({});
  double total = 0.0;
  for (const auto& [f, v] : w) total += v;
  for (auto& [f, v] : w) v /= total;
  return w;
}

FileId PerceivedRandomCache::choose_victim(std::span<const FileId> protect) { return sample_victim(protect); }

std::vector<MissEntry> PerceivedRandomCache::admission_order(std::vector<MissEntry> entries) {
  return newest_first(std::move(entries));
}

// 2LRU

TwoLruCache::TwoLruCache(std::span<const double> sizes, double capacity, std::size_t virtual_capacity)
    : LruCache(sizes, capacity), virtual_capacity_(virtual_capacity) {
  if (virtual_capacity == 0) throw std::invalid_argument("2LRU virtual cache capacity must be positive");
}

bool TwoLruCache::touch_virtual(FileId f) {
  if (auto it = virtual_index_.find(f); it != virtual_index_.end()) {
    virtual_.splice(virtual_.begin(), virtual_, it->second);
    return true;
  }
  virtual_.push_front(f);
  virtual_index_[f] = virtual_.begin();
  while (virtual_.size() > virtual_capacity_) {
    virtual_index_.erase(virtual_.back());
    virtual_.pop_back();
  }
  return false;
}

void TwoLruCache::touch(FileId f, std::int64_t time) {
  LruCache::touch(f, time);
  touch_virtual(f);
}

bool TwoLruCache::admit_on_miss(FileId f, std::int64_t) { return touch_virtual(f); }

void TwoLruCache::on_miss(FileId f, std::int64_t) {
  if (touch_virtual(f)) eligible_.insert(f);
}

std::vector<MissEntry> TwoLruCache::admission_order(std::vector<MissEntry> entries) {
  std::vector<MissEntry> kept;
  for (const MissEntry& e : entries) {
    if (eligible_.count(e.file) != 0) kept.push_back(e);
  }
  eligible_.clear();
  return newest_first(std::move(kept));
}

std::size_t default_virtual_capacity(std::span<const double> sizes, double capacity) {
  if (sizes.empty()) return 1;
  const double mean = std::accumulate(sizes.begin(), sizes.end(), 0.0) / static_cast<double>(sizes.size());
  if (!(mean > 0.0)) return 1;
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(capacity / mean)));
}

std::unique_ptr<EvictionCache> make_baseline(BaselineKind kind, std::span<const double> sizes, double capacity,
                                             std::uint64_t seed, std::size_t virtual_capacity) {
  switch (kind) {
    case BaselineKind::kLru:
      return std::make_unique<LruCache>(sizes, capacity);
    case BaselineKind::kLfu:
      return std::make_unique<LfuCache>(sizes, capacity);
    case BaselineKind::kRandom:
      return std::make_unique<RandomCache>(sizes, capacity, seed);
    case BaselineKind::kPerceivedRandom:
      return std::make_unique<PerceivedRandomCache>(sizes, capacity, seed);
    case BaselineKind::kTwoLru:
      return std::make_unique<TwoLruCache>(
          sizes, capacity, virtual_capacity != 0 ? virtual_capacity : default_virtual_capacity(sizes, capacity));
  }
  throw std::invalid_argument("unknown baseline kind");
}

}  // namespace cdnsim

#include <doctest.h>

#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <stdexcept>
#include <vector>

#include "cdnsim/baselines.hpp"

using namespace cdnsim;

namespace {

enum : FileId { A, B, C, D, E };

const std::vector<double> kUnit(8, 1.0);

std::set<FileId> stored(const EvictionCache& c) {
  const auto f = c.state().files();
  return {f.begin(), f.end()};
}

}  // namespace

TEST_SUITE("baselines") {
  TEST_CASE("lru per request") {
    LruCache c(kUnit, 2);
    CHECK_FALSE(c.on_request(A, 0).hit);
    c.on_request(B, 1);
    const RequestResult r = c.on_request(C, 2);
    CHECK(r.admitted);
    CHECK(r.evicted == std::vector<FileId>{A});
    CHECK(stored(c) == std::set<FileId>{B, C});
    CHECK(c.on_request(B, 3).hit);
    c.on_request(D, 4);
    CHECK(stored(c) == std::set<FileId>{B, D});
    CHECK_THROWS_AS(c.on_request(99, 5), std::out_of_range);
  }

  TEST_CASE("lfu per request") {
    LfuCache c(kUnit, 2);
    c.on_request(A, 0);
    c.on_request(A, 1);
    c.on_request(B, 2);
    c.on_request(C, 3);
    CHECK(stored(c) == std::set<FileId>{A, C});
    CHECK(c.count_of(A) == 2);
  }

  TEST_CASE("lfu counters never decrease") {
    LfuCache c(kUnit, 3);
    std::mt19937_64 rng(1);
    std::map<FileId, std::uint64_t> last;
    for (int t = 0; t < 500; ++t) {
      const FileId f = static_cast<FileId>(rng() % 5);
      c.on_request(f, t);
      for (FileId g : c.state().files()) {
        if (last.count(g)) CHECK(c.count_of(g) >= last[g]);
        last[g] = c.count_of(g);
      }
      for (auto it = last.begin(); it != last.end();) it = c.contains(it->first) ? std::next(it) : last.erase(it);
    }
  }

  TEST_CASE("2lru admits on the second request") {
    TwoLruCache c(kUnit, 2, 4);
    const RequestResult first = c.on_request(A, 0);
    CHECK_FALSE(first.admitted);
    CHECK(c.in_virtual(A));
    CHECK_FALSE(c.contains(A));
    CHECK(c.on_request(A, 1).admitted);
    CHECK(c.contains(A));
  }

  TEST_CASE("2lru virtual list is bounded") {
    TwoLruCache c(kUnit, 2, 2);
    c.on_request(A, 0);
    c.on_request(B, 1);
    c.on_request(C, 2);
    CHECK_FALSE(c.in_virtual(A));
    CHECK_FALSE(c.on_request(A, 3).admitted);
    CHECK(c.virtual_capacity() == 2);
    CHECK(default_virtual_capacity(kUnit, 3.5) == 3);
    CHECK(default_virtual_capacity(kUnit, 0.1) == 1);
  }

  TEST_CASE("oversized file is served without caching") {
    const std::vector<double> sizes = {1, 5};
    LruCache c(sizes, 2);
    c.on_request(0, 0);
    const RequestResult r = c.on_request(1, 1);
    CHECK_FALSE(r.hit);
    CHECK_FALSE(r.admitted);
    CHECK(c.contains(0));
  }

  TEST_CASE("periodic update with an empty log changes nothing") {
    for (BaselineKind k : {BaselineKind::kLru, BaselineKind::kLfu, BaselineKind::kRandom,
                           BaselineKind::kPerceivedRandom, BaselineKind::kTwoLru}) {
      auto c = make_baseline(k, kUnit, 2, 3);
      c->preload(A, -1);
      c->preload(B, -1);
      const PlacementDelta d = c->periodic_update(MissLog(4));
      CHECK(d.admitted.empty());
      CHECK(d.evicted.empty());
      CHECK(stored(*c) == std::set<FileId>{A, B});
      CHECK(c->kind() == k);
    }
  }

  TEST_CASE("periodic lru replaces the least recently used file") {
    LruCache c(kUnit, 3);
    c.preload(A, -1);
    c.preload(B, -1);
    c.preload(C, -1);
    c.on_hit(A, 0);
    c.on_hit(C, 1);
    MissLog log(4);
    log.record(D, 2);
    const PlacementDelta d = c.periodic_update(log);
    CHECK(d.admitted == std::vector<FileId>{D});
    CHECK(d.evicted == std::vector<FileId>{B});
    CHECK(d.bytes_admitted == 1.0);
    CHECK_THROWS_AS(c.on_hit(B, 3), std::logic_error);
  }

  TEST_CASE("periodic lru never evicts a fresher file for a staler miss") {
    LruCache c(kUnit, 1);
    c.preload(A, -1);
    c.on_hit(A, 5);
    MissLog log(4);
    log.record(B, 3);
    const PlacementDelta d = c.periodic_update(log);
    CHECK(d.admitted.empty());
    CHECK(c.contains(A));
  }

  TEST_CASE("periodic lfu admits by count and protects same-round admissions") {
    LfuCache c(kUnit, 2);
    c.preload(A, -1);
    c.preload(B, -1);
    c.on_hit(A, 0);
    MissLog log(8);
    log.record(C, 1);
    log.record(C, 2);
    log.record(D, 3);
    log.record(D, 4);
    log.record(D, 5);
    log.record(E, 6);
    const PlacementDelta d = c.periodic_update(log);
    CHECK(d.admitted == std::vector<FileId>{D, C});
    CHECK(stored(c) == std::set<FileId>{C, D});
    CHECK(c.count_of(D) == 3);
  }

  TEST_CASE("random replacement is reproducible") {
    auto run = [](std::uint64_t seed) {
      RandomCache c(kUnit, 3, seed);
      for (FileId f : {A, B, C}) c.preload(f, -1);
      MissLog log(4);
      log.record(D, 0);
      log.record(E, 1);
      c.periodic_update(log);
      for (int t = 0; t < 20; ++t) c.on_request(static_cast<FileId>(t % 8), t + 2);
      return c.state().files();
    };
    CHECK(run(11) == run(11));
    bool differs = false;
    for (std::uint64_t s = 12; s < 20 && !differs; ++s) differs = run(s) != run(11);
    CHECK(differs);
  }

  TEST_CASE("lru stack property") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 40; ++trial) {
      std::vector<FileId> trace(300);
      const std::vector<double> sizes(20, 1.0);
      for (FileId& f : trace) f = static_cast<FileId>(std::min<std::uint64_t>(rng() % 20, rng() % 20));
      std::vector<std::set<std::size_t>> hits;
      for (double m = 1; m <= 6; ++m) {
        LruCache c(sizes, m);
        std::set<std::size_t> h;
        for (std::size_t k = 0; k < trace.size(); ++k) {
          if (c.on_request(trace[k], static_cast<std::int64_t>(k)).hit) h.insert(k);
        }
        hits.push_back(h);
      }
      for (std::size_t m = 0; m + 1 < hits.size(); ++m) {
        CHECK(std::includes(hits[m + 1].begin(), hits[m + 1].end(), hits[m].begin(), hits[m].end()));
      }
    }
  }

  TEST_CASE("prr weights follow staleness rank") {
    PerceivedRandomCache c(kUnit, 3, 5);
    c.preload(A, 0);
    c.preload(B, 1);
    c.preload(C, 2);
    std::map<FileId, double> p;
    for (auto [f, w] : c.eviction_probabilities()) p[f] = w;
    CHECK(p[A] == doctest::Approx(3.0 / 6));
    CHECK(p[B] == doctest::Approx(2.0 / 6));
    CHECK(p[C] == doctest::Approx(1.0 / 6));
  }

  TEST_CASE("prr with a uniform signal is uniform") {
    PerceivedRandomCache c(kUnit, 5, 21);
    for (FileId f = 0; f < 5; ++f) c.preload(f, -1);
    std::map<FileId, int> counts;
    const int trials = 10000;
    for (int k = 0; k < trials; ++k) ++counts[c.sample_victim()];
    double chi2 = 0.0;
    const double expected = trials / 5.0;
    for (FileId f = 0; f < 5; ++f) chi2 += (counts[f] - expected) * (counts[f] - expected) / expected;
    // 99th percentile of chi-square with 4 degrees of freedom.
    CHECK(chi2 < 13.277);
    std::vector<FileId> protect = {0, 1};
    for (int k = 0; k < 200; ++k) CHECK(c.sample_victim(protect) >= 2);
  }

  TEST_CASE("feasibility under random traffic") {
    std::mt19937_64 rng(4);
    std::vector<double> sizes(30);
    for (double& s : sizes) s = 0.5 + static_cast<double>(rng() % 40) / 10.0;
    for (BaselineKind k : {BaselineKind::kLru, BaselineKind::kLfu, BaselineKind::kRandom,
                           BaselineKind::kPerceivedRandom, BaselineKind::kTwoLru}) {
      auto c = make_baseline(k, sizes, 12.0, 8);
      MissLog log(40);
      for (int t = 0; t < 2000; ++t) {
        const FileId f = static_cast<FileId>(std::min<std::uint64_t>(rng() % 30, rng() % 30));
        if (t % 2) {
          c->on_request(f, t);
        } else if (c->contains(f)) {
          c->on_hit(f, t);
        } else {
          c->on_miss(f, t);
          log.record(f, t);
        }
        if (t % 50 == 49) {
          c->periodic_update(log);
          log.clear();
        }
        double used = 0;
        for (FileId g : c->state().files()) used += sizes[g];
        CHECK(used <= 12.0 + CacheState::kSizeSlack);
      }
    }
  }
}

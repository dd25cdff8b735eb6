#include "cdnsim/workload.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>
#include <random>
#include <stdexcept>
#include <unordered_map>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "csv_util.hpp"

namespace cdnsim {

namespace {

double unit_draw(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

double exponential_draw(std::mt19937_64& rng, double rate) { return -std::log1p(-unit_draw(rng)) / rate; }

std::size_t sample_index(std::span<const double> cdf, double u) {
  const auto it = std::upper_bound(cdf.begin(), cdf.end(), u * cdf.back());
  return std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), cdf.size() - 1);
}

void sort_events(std::vector<RequestEvent>& events) {
  std::stable_sort(events.begin(), events.end(), [](const RequestEvent& l, const RequestEvent& r) {
    return l.time < r.time || (l.time == r.time && l.file < r.file);
  });
}

}  // namespace

double Catalog::total_volume() const { return std::accumulate(sizes.begin(), sizes.end(), 0.0); }

ZipfWorkload zipf_catalog(std::size_t num_files, double s, double size_lo, double size_hi, std::uint64_t seed) {
  if (num_files == 0) throw std::invalid_argument("zipf_catalog: need at least one file");
  if (!(s >= 0.0)) throw std::invalid_argument("zipf_catalog: skew must be non-negative");
  if (!(size_lo > 0.0) || !(size_hi >= size_lo)) throw std::invalid_argument("zipf_catalog: bad size range");
  ZipfWorkload w;
  w.popularity.resize(num_files);
  double norm = 0.0;
  for (std::size_t k = 0; k < num_files; ++k) {
    w.popularity[k] = std::pow(static_cast<double>(k + 1), -s);
    norm += w.popularity[k];
  }
  for (double& p : w.popularity) p /= norm;
  std::mt19937_64 rng(seed);
  w.catalog.sizes.resize(num_files);
  for (double& sz : w.catalog.sizes) sz = size_lo + (size_hi - size_lo) * unit_draw(rng);
  return w;
}

std::vector<double> shuffle_popularity(std::span<const double> p, std::uint64_t seed) {
  std::vector<double> out(p.begin(), p.end());
  std::mt19937_64 rng(seed);
  for (std::size_t i = out.size(); i > 1; --i) {
    const auto j = std::min<std::size_t>(i - 1, static_cast<std::size_t>(unit_draw(rng) * static_cast<double>(i)));
    std::swap(out[i - 1], out[j]);
  }
  return out;
}

std::vector<RequestEvent> static_stream(const Catalog& catalog, std::span<const double> p,
                                        const StaticStreamOptions& opts) {
  if (p.size() != catalog.size()) throw std::invalid_argument("static_stream: popularity and catalog sizes differ");
  if (!(opts.rate > 0.0)) throw std::invalid_argument("static_stream: rate must be positive");
  if (opts.num_caches == 0) throw std::invalid_argument("static_stream: need at least one cache");
  std::vector<double> cdf(p.size());
  std::partial_sum(p.begin(), p.end(), cdf.begin());

  std::mt19937_64 rng(opts.seed);
  std::poisson_distribution<long> count(opts.rate);
  std::vector<RequestEvent> events;
  events.reserve(static_cast<std::size_t>(opts.rate * static_cast<double>(opts.horizon * opts.num_caches) * 1.1));
  for (std::size_t t = 0; t < opts.horizon; ++t) {
    std::vector<RequestEvent> slot;
    for (CacheId c = 0; c < opts.num_caches; ++c) {
      const long n = opts.fixed_count ? std::lround(opts.rate) : count(rng);
      for (long j = 0; j < n; ++j) {
        const auto f = static_cast<FileId>(sample_index(cdf, unit_draw(rng)));
        const double time = static_cast<double>(t) + static_cast<double>(j) / static_cast<double>(n);
        slot.push_back({time, c, f, catalog.sizes[f]});
      }
    }
    std::stable_sort(slot.begin(), slot.end(),
                     [](const RequestEvent& l, const RequestEvent& r) { return l.time < r.time; });
    events.insert(events.end(), slot.begin(), slot.end());
  }
  return events;
}

DecayWorkload synthetic_profiles(const SyntheticProfileOptions& o) {
  if (o.num_files == 0) throw std::invalid_argument("synthetic_profiles: need at least one file");
  if (!(o.horizon > 0.0) || !(o.tau_span > 0.0) || !(o.volume_min >= 1.0) || !(o.volume_alpha > 0.0) ||
      o.volume_max < 1 || !(o.duration_lo > 0.0) || !(o.duration_hi >= o.duration_lo) || !(o.bitrate > 0.0)) {
    throw std::invalid_argument("synthetic_profiles: invalid options");
  }
  std::mt19937_64 rng(o.seed);
  std::lognormal_distribution<double> lifetime(o.lifetime_log_mean, o.lifetime_log_sd);
  DecayWorkload w;
  w.catalog.sizes.resize(o.num_files);
  w.profiles.resize(o.num_files);
  for (FileId f = 0; f < o.num_files; ++f) {
    PopularityProfile& p = w.profiles[f];
    p.file = f;
    p.tau = o.tau_span * o.horizon * unit_draw(rng);
    const double pareto = o.volume_min * std::pow(1.0 - unit_draw(rng), -1.0 / o.volume_alpha);
    p.V = std::clamp<std::uint64_t>(static_cast<std::uint64_t>(std::floor(pareto)), 1, o.volume_max);
    p.omega = 1.0 / lifetime(rng);
    w.catalog.sizes[f] = o.bitrate * (o.duration_lo + (o.duration_hi - o.duration_lo) * unit_draw(rng));
  }
  return w;
}

std::vector<RequestEvent> decay_stream(std::span<const PopularityProfile> profiles, const Catalog& catalog,
                                       std::uint64_t seed, double horizon, std::size_t num_caches) {
  if (num_caches == 0) throw std::invalid_argument("decay_stream: need at least one cache");
  std::mt19937_64 rng(seed);
  std::vector<RequestEvent> events;
  for (const PopularityProfile& p : profiles) {
    if (p.file >= catalog.size()) throw std::invalid_argument(fmt::format("decay_stream: unknown file {}", p.file));
    if (p.V < 1 || !(p.omega > 0.0) || !std::isfinite(p.tau)) {
      throw std::invalid_argument(fmt::format("decay_stream: invalid profile for file {}", p.file));
    }
    for (std::uint64_t j = 0; j < p.V; ++j) {
      const double t = p.tau + exponential_draw(rng, p.omega);
      const auto cache = static_cast<CacheId>(
          num_caches == 1 ? 0 : std::min<std::size_t>(num_caches - 1, static_cast<std::size_t>(unit_draw(rng) * num_caches)));
      if (t < horizon) events.push_back({t, cache, p.file, catalog.sizes[p.file]});
    }
  }
  sort_events(events);
  return events;
}

DecayFit fit_decay(std::span<const double> times, double default_omega) {
  if (times.empty()) throw std::invalid_argument("fit_decay: no requests");
  DecayFit fit;
  fit.V = times.size();
  fit.tau = *std::min_element(times.begin(), times.end());
  double offsets = 0.0;
  for (double t : times) offsets += t - fit.tau;
  if (times.size() == 1 || !(offsets > 0.0)) {
    fit.omega = default_omega;
    fit.degenerate = true;
  } else {
    // The first request is the anchor; the remaining n-1 offsets are the sample.
    fit.omega = static_cast<double>(times.size() - 1) / offsets;
  }
  return fit;
}

std::vector<PopularityProfile> fit_profiles(std::span<const RequestEvent> events, std::size_t num_files,
                                            std::optional<double> default_omega) {
  std::vector<std::vector<double>> times(num_files);
  for (const RequestEvent& e : events) {
    if (e.file >= num_files) throw std::invalid_argument(fmt::format("fit_profiles: unknown file {}", e.file));
    times[e.file].push_back(e.time);
  }
  std::vector<DecayFit> fits(num_files);
  std::vector<double> estimates;
  for (FileId f = 0; f < num_files; ++f) {
    if (times[f].empty()) continue;
    fits[f] = fit_decay(times[f], 0.0);
    if (!fits[f].degenerate) estimates.push_back(fits[f].omega);
  }
  double fallback = 1.0;
  if (default_omega) {
    fallback = *default_omega;
  } else if (!estimates.empty()) {
    std::sort(estimates.begin(), estimates.end());
    const std::size_t n = estimates.size();
    fallback = n % 2 == 1 ? estimates[n / 2] : 0.5 * (estimates[n / 2 - 1] + estimates[n / 2]);
  }
  std::vector<PopularityProfile> out;
  for (FileId f = 0; f < num_files; ++f) {
    if (times[f].empty()) continue;
    out.push_back({f, fits[f].tau, fits[f].V, fits[f].degenerate ? fallback : fits[f].omega});
  }
  return out;
}

std::vector<PopularityProfile> upscale(std::span<const PopularityProfile> profiles, std::uint64_t k) {
  if (k < 1) throw std::invalid_argument("upscale: factor must be at least 1");
  std::vector<PopularityProfile> out(profiles.begin(), profiles.end());
  for (PopularityProfile& p : out) p.V *= k;
  return out;
}

Trace parse_trace(std::istream& in, const TraceOptions& opts, std::string_view source) {
  if (opts.format != "csv") throw ConfigError(fmt::format("{}: unknown trace format '{}'", source, opts.format));
  if (!(opts.bitrate > 0.0) || !(opts.slot_length > 0.0)) {
    throw ConfigError("trace: bitrate and slot length must be positive");
  }
  csv::Reader reader(in, source, "timestamp,cache_id,file_id,duration_minutes");
  Trace trace;
  std::unordered_map<std::uint64_t, FileId> dense;
  std::vector<double> duration;
  std::vector<std::string_view> fields;
  double previous = -std::numeric_limits<double>::infinity();
  while (reader.next(fields)) {
    reader.expect_fields(fields, 4);
    const auto ts = reader.field<double>(fields, 0, "timestamp");
    const auto cache = reader.field<CacheId>(fields, 1, "cache_id");
    const auto id = reader.field<std::uint64_t>(fields, 2, "file_id");
    const auto minutes = reader.field<double>(fields, 3, "duration_minutes");
    if (!std::isfinite(ts) || ts < 0.0) reader.fail(fmt::format("negative or non-finite timestamp {}", ts));
    if (!std::isfinite(minutes) || !(minutes > 0.0)) reader.fail(fmt::format("duration must be positive, got {}", minutes));
    if (ts < previous && !opts.allow_unsorted) reader.fail("timestamps are not sorted");
    previous = std::max(previous, ts);

    auto [it, fresh] = dense.try_emplace(id, static_cast<FileId>(trace.original_ids.size()));
    if (fresh) {
      trace.original_ids.push_back(id);
      duration.push_back(minutes);
    } else {
      duration[it->second] = std::max(duration[it->second], minutes);
    }
    trace.events.push_back({ts / opts.slot_length, cache, it->second, 0.0});
  }
  if (trace.events.empty()) throw ConfigError(fmt::format("{}: trace has no requests", source));
  trace.catalog.sizes.resize(duration.size());
  for (std::size_t f = 0; f < duration.size(); ++f) trace.catalog.sizes[f] = duration[f] * opts.bitrate;
  for (RequestEvent& e : trace.events) e.volume = trace.catalog.sizes[e.file];
  std::stable_sort(trace.events.begin(), trace.events.end(),
                   [](const RequestEvent& l, const RequestEvent& r) { return l.time < r.time; });
  return trace;
}

Trace ingest_trace(const std::string& path, const TraceOptions& opts) {
  if (opts.format != "csv") throw ConfigError(fmt::format("{}: unknown trace format '{}'", path, opts.format));
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open trace '{}'", path));
  return parse_trace(in, opts, path);
}

void write_stream(std::ostream& out, std::span<const RequestEvent> events) {
  out << "time,cache_id,file_id,volume\n";
  for (const RequestEvent& e : events) fmt::print(out, "{},{},{},{}\n", e.time, e.cache, e.file, e.volume);
}

std::vector<RequestEvent> read_stream(std::istream& in, std::string_view source) {
  csv::Reader reader(in, source, "time,cache_id,file_id,volume");
  std::vector<RequestEvent> events;
  std::vector<std::string_view> fields;
  while (reader.next(fields)) {
    reader.expect_fields(fields, 4);
    RequestEvent e{reader.field<double>(fields, 0, "time"), reader.field<CacheId>(fields, 1, "cache_id"),
                   reader.field<FileId>(fields, 2, "file_id"), reader.field<double>(fields, 3, "volume")};
    if (!std::isfinite(e.time) || e.time < 0.0) reader.fail("time must be finite and non-negative");
    if (!events.empty() && e.time < events.back().time) reader.fail("events are not in time order");
    if (!(e.volume >= 0.0)) reader.fail("volume must be non-negative");
    events.push_back(e);
  }
  return events;
}

void write_catalog(std::ostream& out, const Catalog& catalog) {
  out << "file_id,size\n";
  for (std::size_t f = 0; f < catalog.size(); ++f) fmt::print(out, "{},{}\n", f, catalog.sizes[f]);
}

Catalog read_catalog(std::istream& in, std::string_view source) {
  csv::Reader reader(in, source, "file_id,size");
  Catalog c;
  std::vector<std::string_view> fields;
  while (reader.next(fields)) {
    reader.expect_fields(fields, 2);
    const auto f = reader.field<FileId>(fields, 0, "file_id");
    const auto size = reader.field<double>(fields, 1, "size");
    if (f != c.sizes.size()) reader.fail(fmt::format("file ids must be dense and ascending, expected {}", c.sizes.size()));
    if (!(size > 0.0) || !std::isfinite(size)) reader.fail("size must be positive");
    c.sizes.push_back(size);
  }
  if (c.sizes.empty()) throw ConfigError(fmt::format("{}: catalog is empty", source));
  return c;
}

void write_profiles(std::ostream& out, std::span<const PopularityProfile> profiles) {
  out << "file_id,tau,V,omega\n";
  for (const PopularityProfile& p : profiles) fmt::print(out, "{},{},{},{}\n", p.file, p.tau, p.V, p.omega);
}

std::vector<PopularityProfile> read_profiles(std::istream& in, std::string_view source) {
  csv::Reader reader(in, source, "file_id,tau,V,omega");
  std::vector<PopularityProfile> out;
  std::vector<std::string_view> fields;
  while (reader.next(fields)) {
    reader.expect_fields(fields, 4);
    PopularityProfile p{reader.field<FileId>(fields, 0, "file_id"), reader.field<double>(fields, 1, "tau"),
                        reader.field<std::uint64_t>(fields, 2, "V"), reader.field<double>(fields, 3, "omega")};
    if (p.V < 1) reader.fail("V must be at least 1");
    if (!(p.omega > 0.0) || !std::isfinite(p.omega)) reader.fail("omega must be positive");
    if (!std::isfinite(p.tau)) reader.fail("tau must be finite");
    out.push_back(p);
  }
  return out;
}

}  // namespace cdnsim

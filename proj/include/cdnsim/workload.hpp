#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cdnsim/types.hpp"

namespace cdnsim {

struct Catalog {
  std::vector<double> sizes;  // volume units per file, indexed by FileId

  std::size_t size() const { return sizes.size(); }
  double total_volume() const;
};

/// One download. `time` is in slots (slot index = floor(time)); `volume` is the
/// size of the requested file.
struct RequestEvent {
  double time = 0.0;
  CacheId cache = 0;
  FileId file = 0;
  double volume = 0.0;

  bool operator==(const RequestEvent&) const = default;
};

struct PopularityProfile {
  FileId file = 0;
  double tau = 0.0;       // first request time
  std::uint64_t V = 1;    // total requests
  double omega = 1.0;     // decay rate, 1/slot

  bool operator==(const PopularityProfile&) const = default;
};

struct ZipfWorkload {
  Catalog catalog;
  std::vector<double> popularity;  // p_f, sums to one
};

/// p_k proportional to k^-s for k = 1..F, with file k-1 holding rank k. Sizes
/// are i.i.d. uniform on [size_lo, size_hi].
ZipfWorkload zipf_catalog(std::size_t num_files, double s, double size_lo, double size_hi, std::uint64_t seed);

/// Permutes which file holds which popularity rank.
std::vector<double> shuffle_popularity(std::span<const double> p, std::uint64_t seed);

struct StaticStreamOptions {
  double rate = 1.0;            // mean requests per slot per cache
  std::size_t horizon = 1;      // slots
  std::size_t num_caches = 1;
  bool fixed_count = false;     // exactly round(rate) requests per slot instead of Poisson
  std::uint64_t seed = 0;
};

/// Per slot and cache, a Poisson(rate) number of i.i.d. p-distributed requests
/// spread evenly over the slot.
std::vector<RequestEvent> static_stream(const Catalog& catalog, std::span<const double> p,
                                        const StaticStreamOptions& opts);

struct SyntheticProfileOptions {
  std::size_t num_files = 1000;
  double horizon = 1000.0;        // first-request times are uniform on [0, tau_span * horizon)
  double tau_span = 0.8;
  double volume_min = 2.0;        // V ~ floor(volume_min * Pareto(volume_alpha)), capped at volume_max
  double volume_alpha = 1.2;
  std::uint64_t volume_max = 2000;
  double lifetime_log_mean = 4.5; // 1/omega ~ lognormal(log_mean, log_sd) in slots
  double lifetime_log_sd = 0.8;
  double duration_lo = 20.0;      // minutes, uniform
  double duration_hi = 120.0;
  double bitrate = 1.0;           // volume units per minute
  std::uint64_t seed = 0;
};

struct DecayWorkload {
  Catalog catalog;
  std::vector<PopularityProfile> profiles;
};

DecayWorkload synthetic_profiles(const SyntheticProfileOptions& opts);

/// Each profile contributes V requests at tau + Exp(omega) offsets. Events at or
/// past `horizon` are dropped. Sorted by (time, file).
std::vector<RequestEvent> decay_stream(std::span<const PopularityProfile> profiles, const Catalog& catalog,
                                       std::uint64_t seed,
                                       double horizon = std::numeric_limits<double>::infinity(),
                                       std::size_t num_caches = 1);

struct DecayFit {
  double tau = 0.0;
  std::uint64_t V = 0;
  double omega = 0.0;
  bool degenerate = false;  // omega fell back to the default
};

/// Exponential-rate MLE of the offsets from the first request. Files with a
/// single request, or whose later requests all coincide with the first, get
/// `default_omega`. Throws std::invalid_argument on an empty sample.
DecayFit fit_decay(std::span<const double> times, double default_omega);

/// Fits every requested file. The fallback rate defaults to the median of the
/// non-degenerate estimates (1.0 when there are none).
std::vector<PopularityProfile> fit_profiles(std::span<const RequestEvent> events, std::size_t num_files,
                                            std::optional<double> default_omega = std::nullopt);

/// V multiplied by k, everything else unchanged. Throws for k < 1.
std::vector<PopularityProfile> upscale(std::span<const PopularityProfile> profiles, std::uint64_t k);

struct TraceOptions {
  std::string format = "csv";
  double bitrate = 1.0;        // volume units per minute of duration
  double slot_length = 1.0;    // timestamp units per slot
  bool allow_unsorted = true;  // sort instead of rejecting out-of-order rows
};

struct Trace {
  Catalog catalog;
  std::vector<RequestEvent> events;
  std::vector<std::uint64_t> original_ids;  // trace file_id for each dense FileId
};

/// Reads `timestamp,cache_id,file_id,duration_minutes`. File ids are remapped
/// densely in order of first appearance; a file's size is its largest
/// duration times the bit rate. Throws ConfigError with the offending line.
Trace ingest_trace(const std::string& path, const TraceOptions& opts = {});
Trace parse_trace(std::istream& in, const TraceOptions& opts = {}, std::string_view source = "<stream>");

// CSV round trips. Headers: `time,cache_id,file_id,volume`, `file_id,size`,
// `file_id,tau,V,omega`.
void write_stream(std::ostream& out, std::span<const RequestEvent> events);
std::vector<RequestEvent> read_stream(std::istream& in, std::string_view source = "<stream>");
void write_catalog(std::ostream& out, const Catalog& catalog);
Catalog read_catalog(std::istream& in, std::string_view source = "<catalog>");
void write_profiles(std::ostream& out, std::span<const PopularityProfile> profiles);
std::vector<PopularityProfile> read_profiles(std::istream& in, std::string_view source = "<profiles>");

}  // namespace cdnsim

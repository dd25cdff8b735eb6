#include "cdnsim/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include "csv_util.hpp"

namespace cdnsim {

namespace pt = boost::property_tree;

namespace {

const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys = {
      {"experiment",
       {"topology", "policies", "cache_sizes", "cache_intervals", "seeds", "dual_interval", "horizon", "warmup", "mu",
        "init", "fill", "miss_log_capacity", "virtual_capacity", "tolerance"}},
      {"network", {"caches", "cache_capacity", "root_capacity", "chi", "phi", "a_x", "a_y"}},
      {"workload",
       {"kind", "files", "skew", "size_min", "size_max", "rate", "fixed_count", "shuffle", "profiles", "upscale",
        "tau_span", "volume_min", "volume_alpha", "volume_max", "lifetime_log_mean", "lifetime_log_sd",
        "duration_min", "duration_max", "bitrate", "path", "catalog", "slot_length", "allow_unsorted"}},
  };
  return keys;
}

void check_keys(const pt::ptree& tree) {
  for (const auto& [section, body] : tree) {
    auto it = known_keys().find(section);
    if (it == known_keys().end()) throw ConfigError(fmt::format("config: unknown section [{}]", section));
    if (body.empty() && !body.data().empty()) {
      throw ConfigError(fmt::format("config: key '{}' must live inside a section", section));
    }
    for (const auto& [key, value] : body) {
      if (it->second.count(key) == 0) throw ConfigError(fmt::format("config: unknown key '{}.{}'", section, key));
    }
  }
}

class Fields {
 public:
  Fields(const pt::ptree& tree, std::string section) : section_(std::move(section)) {
    if (auto child = tree.get_child_optional(section_)) node_ = &*child;
  }

  bool has(const std::string& key) const { return node_ != nullptr && node_->get_child_optional(key).has_value(); }

  std::string text(const std::string& key, const std::string& fallback) const {
    if (!has(key)) return fallback;
    return std::string(csv::trim(node_->get<std::string>(key)));
  }

  template <typename T>
  T number(const std::string& key, T fallback) const {
    if (!has(key)) return fallback;
    return parse_number<T>(key, text(key, ""));
  }

  bool flag(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const std::string v = text(key, "");
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError(fmt::format("config: {}.{} must be true or false, got '{}'", section_, key, v));
  }

  template <typename T>
  std::vector<T> list(const std::string& key, std::vector<T> fallback) const {
    if (!has(key)) return fallback;
    std::vector<T> out;
    const std::string raw = text(key, "");
    for (std::string_view item : csv::split(raw)) out.push_back(parse_number<T>(key, item));
    return out;
  }

  std::vector<std::string> strings(const std::string& key, std::vector<std::string> fallback) const {
    if (!has(key)) return fallback;
    std::vector<std::string> out;
    const std::string raw = text(key, "");
    for (std::string_view item : csv::split(raw)) {
      if (item.empty()) throw ConfigError(fmt::format("config: {}.{} has an empty entry", section_, key));
      out.emplace_back(item);
    }
    return out;
  }

 private:
  template <typename T>
  T parse_number(const std::string& key, std::string_view v) const {
    T out{};
    if (!csv::parse(v, out)) throw ConfigError(fmt::format("config: {}.{} has invalid value '{}'", section_, key, v));
    if constexpr (std::is_floating_point_v<T>) {
      if (!std::isfinite(out)) throw ConfigError(fmt::format("config: {}.{} must be finite", section_, key));
    }
    return out;
  }

  std::string section_;
  const pt::ptree* node_ = nullptr;
};

template <typename T>
std::vector<T> broadcast(std::vector<T> v, std::size_t n, std::string_view what) {
  if (v.size() == 1) return std::vector<T>(n, v.front());
  if (v.size() != n) throw ConfigError(fmt::format("config: {} lists {} values for {} caches", what, v.size(), n));
  return v;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  if (p.empty()) return {};
  std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

SweepConfig interpret(const pt::ptree& tree, const std::filesystem::path& base_dir) {
  check_keys(tree);
  SweepConfig c;
  ExperimentConfig& e = c.base;

  const Fields ex(tree, "experiment");
  const std::string topo = ex.text("topology", "1");
  if (topo == "1" || topo == "one") {
    e.topology = Topology::kOne;
  } else if (topo == "2" || topo == "two") {
    e.topology = Topology::kTwo;
  } else {
    throw ConfigError(fmt::format("config: experiment.topology must be 1 or 2, got '{}'", topo));
  }
  for (const std::string& p : ex.strings("policies", {"topx"})) c.policies.push_back(parse_policy(p));
  c.cache_sizes_pct = ex.list<double>("cache_sizes", {1.0});
  c.cache_intervals = ex.list<std::size_t>("cache_intervals", {1});
  c.seeds = ex.list<std::uint64_t>("seeds", {1});
  for (double pct : c.cache_sizes_pct) {
    if (!(pct >= 0.0) || pct > 100.0) throw ConfigError(fmt::format("config: cache size {}% is not in [0, 100]", pct));
  }
  if (c.policies.empty() || c.cache_sizes_pct.empty() || c.cache_intervals.empty() || c.seeds.empty()) {
    throw ConfigError("config: sweep axes must be non-empty");
  }
  e.dual_interval = ex.number<std::size_t>("dual_interval", 1);
  e.horizon = ex.number<std::size_t>("horizon", 100);
  e.warmup = ex.number<std::size_t>("warmup", 0);
  if (ex.has("mu")) e.mu = ex.number<double>("mu", 0.0);
  const std::string init = ex.text("init", "floor");
  if (init == "floor") {
    e.init = InitMode::kFloor;
  } else if (init == "uniform_cap") {
    e.init = InitMode::kUniformCap;
  } else {
    throw ConfigError(fmt::format("config: experiment.init must be floor or uniform_cap, got '{}'", init));
  }
  const std::string fill = ex.text("fill", "default");
  if (fill == "default") {
    e.fill = InitialFill::kDefault;
  } else if (fill == "empty") {
    e.fill = InitialFill::kEmpty;
  } else if (fill == "random") {
    e.fill = InitialFill::kRandom;
  } else {
    throw ConfigError(fmt::format("config: experiment.fill must be default, empty or random, got '{}'", fill));
  }
  e.miss_log_capacity = ex.number<std::size_t>("miss_log_capacity", 0);
  e.virtual_capacity = ex.number<std::size_t>("virtual_capacity", 0);
  e.tolerance = ex.number<double>("tolerance", 1e-9);

  const Fields nw(tree, "network");
  const auto n = nw.number<std::size_t>("caches", 1);
  if (n == 0) throw ConfigError("config: network.caches must be positive");
  const auto cc = broadcast(nw.list<double>("cache_capacity", {100.0}), n, "network.cache_capacity");
  const auto rc = broadcast(nw.list<double>("root_capacity", {100.0}), n, "network.root_capacity");
  const double ax = nw.number<double>("a_x", 1.0);
  const double ay = nw.number<double>("a_y", 10.0);
  const auto chi = broadcast(nw.strings("chi", {fmt::format("quadratic a={}", ax)}), n, "network.chi");
  const auto phi = broadcast(nw.strings("phi", {fmt::format("quadratic a={}", ay)}), n, "network.phi");
  for (std::size_t i = 0; i < n; ++i) {
    CacheLink link;
    link.cache_capacity = cc[i];
    link.root_capacity = rc[i];
    link.chi = Penalty::parse(chi[i]);
    link.phi = Penalty::parse(phi[i]);
    e.network.caches.push_back(link);
  }

  const Fields wl(tree, "workload");
  WorkloadSpec& w = c.workload;
  w.kind = parse_workload_kind(wl.text("kind", "zipf"));
  w.files = wl.number<std::size_t>("files", w.files);
  w.skew = wl.number<double>("skew", w.skew);
  w.size_min = wl.number<double>("size_min", w.size_min);
  w.size_max = wl.number<double>("size_max", w.size_max);
  w.rate = wl.number<double>("rate", w.rate);
  w.fixed_count = wl.flag("fixed_count", w.fixed_count);
  w.shuffle = wl.flag("shuffle", w.shuffle);
  w.profiles_path = resolve(base_dir, wl.text("profiles", ""));
  w.upscale = wl.number<std::uint64_t>("upscale", 1);
  if (w.upscale < 1) throw ConfigError("config: workload.upscale must be at least 1");
  SyntheticProfileOptions& s = w.synthetic;
  s.num_files = w.files;
  s.tau_span = wl.number<double>("tau_span", s.tau_span);
  s.volume_min = wl.number<double>("volume_min", s.volume_min);
  s.volume_alpha = wl.number<double>("volume_alpha", s.volume_alpha);
  s.volume_max = wl.number<std::uint64_t>("volume_max", s.volume_max);
  s.lifetime_log_mean = wl.number<double>("lifetime_log_mean", s.lifetime_log_mean);
  s.lifetime_log_sd = wl.number<double>("lifetime_log_sd", s.lifetime_log_sd);
  s.duration_lo = wl.number<double>("duration_min", s.duration_lo);
  s.duration_hi = wl.number<double>("duration_max", s.duration_hi);
  s.bitrate = wl.number<double>("bitrate", s.bitrate);
  s.horizon = static_cast<double>(e.horizon);
  w.path = resolve(base_dir, wl.text("path", ""));
  w.catalog_path = resolve(base_dir, wl.text("catalog", ""));
  w.trace.bitrate = s.bitrate;
  w.trace.slot_length = wl.number<double>("slot_length", 1.0);
  w.trace.allow_unsorted = wl.flag("allow_unsorted", true);
  if ((w.kind == WorkloadKind::kTrace || w.kind == WorkloadKind::kStream) && w.path.empty()) {
    throw ConfigError("config: workload.path is required for trace and stream workloads");
  }
  if (w.kind == WorkloadKind::kStream && w.catalog_path.empty()) {
    throw ConfigError("config: workload.catalog is required for stream workloads");
  }
  return c;
}

}  // namespace

WorkloadKind parse_workload_kind(std::string_view name) {
  if (name == "zipf") return WorkloadKind::kZipf;
  if (name == "decay") return WorkloadKind::kDecay;
  if (name == "trace") return WorkloadKind::kTrace;
  if (name == "stream") return WorkloadKind::kStream;
  throw ConfigError(fmt::format("unknown workload kind '{}' (expected zipf|decay|trace|stream)", name));
}

Workload build_workload(const WorkloadSpec& spec, std::uint64_t seed, std::size_t horizon, std::size_t num_caches) {
  Workload w;
  const double end = static_cast<double>(horizon);
  switch (spec.kind) {
    case WorkloadKind::kZipf: {
      ZipfWorkload z = zipf_catalog(spec.files, spec.skew, spec.size_min, spec.size_max, seed);
      if (spec.shuffle) z.popularity = shuffle_popularity(z.popularity, seed ^ 0x5DEECE66DULL);
      StaticStreamOptions o;
      o.rate = spec.rate;
      o.horizon = horizon;
      o.num_caches = num_caches;
      o.fixed_count = spec.fixed_count;
      o.seed = seed + 1;
      w.events = static_stream(z.catalog, z.popularity, o);
      w.catalog = std::move(z.catalog);
      break;
    }
    case WorkloadKind::kDecay: {
      if (spec.profiles_path.empty()) {
        SyntheticProfileOptions o = spec.synthetic;
        o.seed = seed;
        DecayWorkload d = synthetic_profiles(o);
        w.catalog = std::move(d.catalog);
        w.profiles = std::move(d.profiles);
      } else {
        std::ifstream in(spec.profiles_path);
        if (!in) throw ConfigError(fmt::format("cannot open profiles '{}'", spec.profiles_path.string()));
        w.profiles = read_profiles(in, spec.profiles_path.string());
        if (w.profiles.empty()) throw ConfigError("profiles file has no rows");
        if (!spec.catalog_path.empty()) {
          std::ifstream cin(spec.catalog_path);
          if (!cin) throw ConfigError(fmt::format("cannot open catalog '{}'", spec.catalog_path.string()));
          w.catalog = read_catalog(cin, spec.catalog_path.string());
        } else {
          // No sizes on record: draw durations the same way the synthetic model does.
          FileId max_id = 0;
          for (const PopularityProfile& p : w.profiles) max_id = std::max(max_id, p.file);
          SyntheticProfileOptions o = spec.synthetic;
          o.num_files = static_cast<std::size_t>(max_id) + 1;
          o.seed = seed;
          w.catalog = synthetic_profiles(o).catalog;
        }
      }
      w.profiles = upscale(w.profiles, spec.upscale);
      w.events = decay_stream(w.profiles, w.catalog, seed + 1, end, num_caches);
      break;
    }
    case WorkloadKind::kTrace: {
      Trace t = ingest_trace(spec.path.string(), spec.trace);
      w.catalog = std::move(t.catalog);
      w.events = std::move(t.events);
      break;
    }
    case WorkloadKind::kStream: {
      std::ifstream in(spec.path);
      if (!in) throw ConfigError(fmt::format("cannot open stream '{}'", spec.path.string()));
      w.events = read_stream(in, spec.path.string());
      std::ifstream cin(spec.catalog_path);
      if (!cin) throw ConfigError(fmt::format("cannot open catalog '{}'", spec.catalog_path.string()));
      w.catalog = read_catalog(cin, spec.catalog_path.string());
      break;
    }
  }
  if (spec.kind == WorkloadKind::kTrace || spec.kind == WorkloadKind::kStream) {
    std::erase_if(w.events, [end](const RequestEvent& e) { return e.time >= end; });
    for (const RequestEvent& e : w.events) {
      if (e.file >= w.catalog.size()) throw ConfigError(fmt::format("workload references unknown file {}", e.file));
      if (e.cache >= num_caches) throw ConfigError(fmt::format("workload references unknown cache {}", e.cache));
    }
  }
  return w;
}

SweepConfig parse_config(std::string_view text, const std::filesystem::path& base_dir,
                         const std::vector<std::string>& overrides) {
  pt::ptree tree;
  std::istringstream in{std::string(text)};
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(fmt::format("config:{}: {}", e.line(), e.message()));
  }
  for (const std::string& o : overrides) {
    const auto eq = o.find('=');
    const auto dot = o.find('.');
    if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
      throw ConfigError(fmt::format("override '{}' must look like section.key=value", o));
    }
    tree.put(pt::ptree::path_type(std::string(csv::trim(o.substr(0, eq))), '.'),
             std::string(csv::trim(o.substr(eq + 1))));
  }
  return interpret(tree, base_dir);
}

SweepConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open config '{}'", path.string()));
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.parent_path().empty() ? "." : path.parent_path(), overrides);
}

}  // namespace cdnsim

#include "cdnsim/cli.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include "csv_util.hpp"

namespace cdnsim {

namespace fs = std::filesystem;

namespace {

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p);
  if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", p.string()));
  return out;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw ConfigError(fmt::format("cannot create output directory '{}'", dir.string()));
}

struct CellRun {
  RunResult result;
  ExperimentConfig config;
};

CellRun run_cell(const SweepConfig& sweep, const SweepCell& cell, const Workload& workload) {
  ExperimentConfig cfg = sweep.base;
  cfg.policy = cell.policy;
  cfg.cache_interval = cell.cache_interval;
  cfg.seed = cell.seed;
  const double storage = cell.cache_size_pct / 100.0 * workload.catalog.total_volume();
  for (CacheLink& c : cfg.network.caches) c.storage = storage;
  cfg.network.num_files = workload.catalog.size();
  Simulator sim(cfg, workload.catalog);
  return {sim.run(workload.events), sim.config()};
}

void write_cell(const fs::path& dir, const SweepCell& cell, const CellRun& run, bool detail) {
  const std::string base = cell.name();
  {
    auto out = open_out(dir / (base + ".metrics.csv"));
    write_metrics_csv(out, run.result.metrics);
  }
  {
    auto out = open_out(dir / (base + ".summary.csv"));
    write_summary_header(out);
    write_summary_row(out, run.result.summary);
  }
  if (!detail) return;
  {
    auto out = open_out(dir / (base + ".events.csv"));
    write_events_csv(out, run.result.events);
  }
  if (is_flow_policy(cell.policy)) {
    auto trace = open_out(dir / (base + ".dual.csv"));
    write_dual_trace_csv(trace, run.result.dual_trace);
    auto lam = open_out(dir / (base + ".lambda.csv"));
    write_lambda_csv(lam, run.result.final_lambda);
  }
}

void write_tables(const fs::path& dir, const std::vector<CellOutcome>& outcomes) {
  auto summary = open_out(dir / "summary.csv");
  summary << "policy,cache_size_pct,cache_interval,seed,slots,mean_nc,mean_rdv,mean_bbc,hits,misses,hit_ratio,"
             "capacity_violations,bound_violations,status\n";
  for (const CellOutcome& o : outcomes) {
    const RunSummary& s = o.summary;
    fmt::print(summary, "{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n", policy_name(o.cell.policy),
               o.cell.cache_size_pct, o.cell.cache_interval, o.cell.seed, s.slots, s.mean_nc, s.mean_rdv, s.mean_bbc,
               s.hits, s.misses, s.hit_ratio, s.capacity_violations, s.bound_violations, o.ok ? "ok" : "error");
  }

  // Seed averages: one row per (policy, interval, size).
  struct Acc {
    std::size_t n = 0;
    double nc = 0.0, rdv = 0.0, bbc = 0.0, hit = 0.0;
  };
  std::vector<std::tuple<std::string, std::size_t, double>> order;
  std::map<std::tuple<std::string, std::size_t, double>, Acc> acc;
  for (const CellOutcome& o : outcomes) {
    const auto key = std::make_tuple(std::string(policy_name(o.cell.policy)), o.cell.cache_interval, o.cell.cache_size_pct);
    if (!acc.count(key)) order.push_back(key);
    Acc& a = acc[key];
    if (!o.ok) continue;
    ++a.n;
    a.nc += o.summary.mean_nc;
    a.rdv += o.summary.mean_rdv;
    a.bbc += o.summary.mean_bbc;
    a.hit += o.summary.hit_ratio;
  }
  auto cmp = open_out(dir / "comparison.csv");
  cmp << "policy,cache_interval,cache_size_pct,seeds,mean_nc,mean_rdv,mean_bbc,hit_ratio\n";
  for (const auto& key : order) {
    const Acc& a = acc[key];
    if (a.n == 0) continue;
    const double n = static_cast<double>(a.n);
    fmt::print(cmp, "{},{},{},{},{},{},{},{}\n", std::get<0>(key), std::get<1>(key), std::get<2>(key), a.n, a.nc / n,
               a.rdv / n, a.bbc / n, a.hit / n);
  }
}

int cmd_simulate(const fs::path& config_path, const std::vector<std::string>& overrides,
                 const std::vector<std::uint64_t>& seeds, const SimulateOptions& opts, std::ostream& out,
                 std::ostream& err) {
  SweepConfig sweep = load_config(config_path, overrides);
  if (!seeds.empty()) sweep.seeds = seeds;
  ensure_dir(opts.out_dir);
  const auto outcomes = run_sweep(sweep, opts);
  std::size_t failed = 0;
  for (const CellOutcome& o : outcomes) {
    if (!o.ok) {
      ++failed;
      fmt::print(err, "cell {} failed: {}\n", o.cell.name(), o.error);
    }
  }
  fmt::print(out, "{} cells, {} failed, results in {}\n", outcomes.size(), failed, opts.out_dir.string());
  return failed == 0 ? exit_code::kOk : exit_code::kRuntime;
}

int cmd_gen_workload(const std::string& kind, const fs::path& config_path, std::vector<std::string> overrides,
                     std::uint64_t seed, std::optional<std::size_t> files, const fs::path& out_dir, std::ostream& out) {
  const WorkloadKind k = parse_workload_kind(kind);
  if (k != WorkloadKind::kZipf && k != WorkloadKind::kDecay) {
    throw ConfigError(fmt::format("gen-workload: kind must be zipf or decay, got '{}'", kind));
  }
  overrides.insert(overrides.begin(), "workload.kind=" + kind);
  if (files) overrides.push_back(fmt::format("workload.files={}", *files));
  const SweepConfig sweep =
      config_path.empty() ? parse_config("", ".", overrides) : load_config(config_path, overrides);
  const Workload w =
      build_workload(sweep.workload, seed, sweep.base.horizon, sweep.base.network.caches.size());
  ensure_dir(out_dir);
  {
    auto s = open_out(out_dir / "stream.csv");
    write_stream(s, w.events);
  }
  {
    auto c = open_out(out_dir / "catalog.csv");
    write_catalog(c, w.catalog);
  }
  if (k == WorkloadKind::kDecay) {
    auto p = open_out(out_dir / "profiles.csv");
    write_profiles(p, w.profiles);
    // Same events in the ingestible trace layout, so `fit` can consume them.
    auto t = open_out(out_dir / "trace.csv");
    t << "timestamp,cache_id,file_id,duration_minutes\n";
    const double bitrate = sweep.workload.synthetic.bitrate;
    for (const RequestEvent& e : w.events) {
      fmt::print(t, "{},{},{},{}\n", e.time, e.cache, e.file, w.catalog.sizes[e.file] / bitrate);
    }
  }
  fmt::print(out, "{} events over {} files written to {}\n", w.events.size(), w.catalog.size(), out_dir.string());
  return exit_code::kOk;
}

int cmd_fit(const fs::path& trace_path, const fs::path& out_path, std::uint64_t k, const TraceOptions& opts,
            std::ostream& out) {
  if (k < 1) throw ConfigError("fit: --upscale must be at least 1");
  const Trace trace = ingest_trace(trace_path.string(), opts);
  auto profiles = upscale(fit_profiles(trace.events, trace.catalog.size()), k);
  // Report profiles under the trace's own file ids.
  for (PopularityProfile& p : profiles) p.file = static_cast<FileId>(trace.original_ids[p.file]);
  if (out_path.has_parent_path()) ensure_dir(out_path.parent_path());
  auto o = open_out(out_path);
  write_profiles(o, profiles);
  fmt::print(out, "fitted {} files from {} requests\n", profiles.size(), trace.events.size());
  return exit_code::kOk;
}

int cmd_solve(const fs::path& path, const std::string& backend_name, double tol, std::ostream& out) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open instance '{}'", path.string()));
  const SubproblemInstance inst = parse_subproblem(in);
  SubproblemBackend backend = SubproblemBackend::kAuto;
  if (backend_name == "waterfill") {
    backend = SubproblemBackend::kWaterFilling;
  } else if (backend_name == "bisection") {
    backend = SubproblemBackend::kBisection;
  } else if (backend_name != "auto") {
    throw ConfigError(fmt::format("unknown backend '{}'", backend_name));
  }
  const SubproblemSolution sol = solve(inst, tol, backend);
  fmt::print(out, "multiplier {}\n", sol.multiplier);
  fmt::print(out, "saturated {}\n", sol.saturated ? "true" : "false");
  for (std::size_t f = 0; f < sol.flows.size(); ++f) fmt::print(out, "flow {} {}\n", f, sol.flows[f]);
  fmt::print(out, "kkt_residual {}\n", verify_kkt(inst, sol));
  return exit_code::kOk;
}

}  // namespace

std::string SweepCell::name() const {
  return fmt::format("{}_c{}_tv{}_s{}", policy_name(policy), cache_size_pct, cache_interval, seed);
}

std::vector<SweepCell> expand_sweep(const SweepConfig& config) {
  std::vector<SweepCell> cells;
  for (Policy p : config.policies) {
    for (double c : config.cache_sizes_pct) {
      for (std::size_t tv : config.cache_intervals) {
        for (std::uint64_t s : config.seeds) cells.push_back({p, c, tv, s});
      }
    }
  }
  return cells;
}

std::vector<CellOutcome> run_sweep(const SweepConfig& config, const SimulateOptions& options) {
  const std::vector<SweepCell> cells = expand_sweep(config);
  std::vector<CellOutcome> outcomes(cells.size());
  for (std::size_t k = 0; k < cells.size(); ++k) outcomes[k].cell = cells[k];

  // Workloads depend only on the seed; build each once up front.
  std::map<std::uint64_t, Workload> workloads;
  std::map<std::uint64_t, std::string> workload_errors;
  for (std::uint64_t s : config.seeds) {
    if (workloads.count(s) || workload_errors.count(s)) continue;
    try {
      workloads.emplace(s, build_workload(config.workload, s, config.base.horizon, config.base.network.caches.size()));
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      workload_errors[s] = e.what();
    }
  }

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < cells.size(); k = next++) {
      CellOutcome& o = outcomes[k];
      try {
        if (auto it = workload_errors.find(o.cell.seed); it != workload_errors.end()) {
          throw std::runtime_error("workload: " + it->second);
        }
        const CellRun run = run_cell(config, o.cell, workloads.at(o.cell.seed));
        write_cell(options.out_dir, o.cell, run, options.detail);
        o.summary = run.result.summary;
        o.ok = true;
      } catch (const std::exception& e) {
        o.error = e.what();
        o.summary.policy = std::string(policy_name(o.cell.policy));
      }
    }
  };
  const unsigned jobs = std::max(1u, std::min<unsigned>(options.jobs, static_cast<unsigned>(cells.size())));
  std::vector<std::thread> pool;
  for (unsigned j = 1; j < jobs; ++j) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();

  write_tables(options.out_dir, outcomes);
  return outcomes;
}

SubproblemInstance parse_subproblem(std::istream& in) {
  SubproblemInstance inst;
  std::string line;
  std::size_t line_no = 0;
  bool have_capacity = false;
  bool have_penalty = false;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view t = csv::trim(line);
    if (t.empty() || t.front() == '#') continue;
    if (t.starts_with("capacity")) {
      double c = 0.0;
      if (!csv::parse(csv::trim(t.substr(8)), c) || !(c > 0.0) || !std::isfinite(c)) {
        throw ConfigError(fmt::format("instance:{}: capacity must be a positive number", line_no));
      }
      inst.capacity = c;
      have_capacity = true;
    } else if (t.starts_with("penalty")) {
      inst.penalty = Penalty::parse(csv::trim(t.substr(7)));
      have_penalty = true;
    } else {
      if (!have_capacity || !have_penalty) {
        throw ConfigError(fmt::format("instance:{}: 'capacity' and 'penalty' header lines must come first", line_no));
      }
      double v = 0.0;
      if (!csv::parse(t, v) || !std::isfinite(v)) throw ConfigError(fmt::format("instance:{}: bad price '{}'", line_no, t));
      inst.prices.push_back(v);
    }
  }
  if (!have_capacity || !have_penalty) throw ConfigError("instance: missing 'capacity' or 'penalty' header");
  if (inst.prices.empty()) throw ConfigError("instance: no prices given");
  return inst;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Dual-ascent CDN cache placement simulator", "cdnsim"};
  app.require_subcommand(1);

  auto* sim = app.add_subcommand("simulate", "Run a sweep of experiment cells from a config file");
  fs::path sim_config, sim_out;
  std::vector<std::string> sim_set;
  std::vector<std::uint64_t> sim_seeds;
  SimulateOptions sim_opts;
  sim->add_option("--config", sim_config, "INI experiment config")->required();
  sim->add_option("--out", sim_out, "Output directory")->required();
  sim->add_option("--seed", sim_seeds, "Replace the seed axis");
  sim->add_option("--jobs", sim_opts.jobs, "Parallel cells")->check(CLI::PositiveNumber);
  sim->add_option("--set", sim_set, "Override as section.key=value");
  sim->add_flag("--detail", sim_opts.detail, "Also write events, dual trace and final prices");

  auto* gen = app.add_subcommand("gen-workload", "Generate a request stream");
  std::string gen_kind;
  fs::path gen_config, gen_out;
  std::vector<std::string> gen_set;
  std::uint64_t gen_seed = 1;
  std::optional<std::size_t> gen_files;
  gen->add_option("--kind", gen_kind, "zipf or decay")->required();
  gen->add_option("--config", gen_config, "INI config supplying [workload] and [experiment] horizon");
  gen->add_option("--set", gen_set, "Override as section.key=value");
  gen->add_option("--seed", gen_seed, "Generator seed");
  gen->add_option("--files", gen_files, "Catalog size");
  gen->add_option("--out", gen_out, "Output directory")->required();

  auto* fit = app.add_subcommand("fit", "Fit decay profiles to a trace");
  fs::path fit_trace, fit_out;
  std::uint64_t fit_k = 1;
  TraceOptions fit_opts;
  fit->add_option("trace", fit_trace, "Trace CSV")->required();
  fit->add_option("--out", fit_out, "Profile CSV to write")->required();
  fit->add_option("--upscale", fit_k, "Multiply every V by this factor");
  fit->add_option("--bitrate", fit_opts.bitrate, "Volume units per minute");
  fit->add_option("--slot-length", fit_opts.slot_length, "Timestamp units per slot");

  auto* sp = app.add_subcommand("solve-subproblem", "Solve one per-cache subproblem instance");
  fs::path sp_path;
  std::string sp_backend = "auto";
  double sp_tol = 1e-9;
  sp->add_option("instance", sp_path, "Instance file")->required();
  sp->add_option("--backend", sp_backend, "auto, waterfill or bisection");
  sp->add_option("--tol", sp_tol, "Solver tolerance")->check(CLI::PositiveNumber);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return exit_code::kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return exit_code::kOk;
  } catch (const CLI::ParseError& e) {
    fmt::print(err, "error: {}\n{}", e.what(), app.help());
    return exit_code::kConfig;
  }

  try {
    if (sim->parsed()) {
      sim_opts.out_dir = sim_out;
      return cmd_simulate(sim_config, sim_set, sim_seeds, sim_opts, out, err);
    }
    if (gen->parsed()) return cmd_gen_workload(gen_kind, gen_config, gen_set, gen_seed, gen_files, gen_out, out);
    if (fit->parsed()) return cmd_fit(fit_trace, fit_out, fit_k, fit_opts, out);
    if (sp->parsed()) return cmd_solve(sp_path, sp_backend, sp_tol, out);
  } catch (const ConfigError& e) {
    fmt::print(err, "error: {}\n", e.what());
    return exit_code::kConfig;
  } catch (const std::exception& e) {
    fmt::print(err, "error: {}\n", e.what());
    return exit_code::kRuntime;
  }
  return exit_code::kConfig;
}

}  // namespace cdnsim

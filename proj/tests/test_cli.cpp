#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cdnsim/cli.hpp"

using namespace cdnsim;
namespace fs = std::filesystem;

namespace {

constexpr const char* kSmallRun = R"([experiment]
policies = topx
cache_sizes = 1
seeds = 1
horizon = 24
warmup = 4
[network]
caches = 1
cache_capacity = 40
root_capacity = 40
[workload]
files = 80
rate = 6
)";

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("cdnsim_cli_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream f(p);
  f << text;
}

std::string read_file(const fs::path& p) {
  std::ifstream f(p);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> v;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) v.push_back(l);
  return v;
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("simulate writes per-cell and summary tables") {
    TempDir d("sim");
    write_file(d.path / "run.ini", kSmallRun);
    const Run r = cli({"simulate", "--config", (d.path / "run.ini").string(), "--out", (d.path / "o").string()});
    REQUIRE(r.code == exit_code::kOk);
    CHECK(fs::exists(d.path / "o/topx_c1_tv1_s1.metrics.csv"));
    CHECK(fs::exists(d.path / "o/topx_c1_tv1_s1.summary.csv"));
    CHECK_FALSE(fs::exists(d.path / "o/topx_c1_tv1_s1.events.csv"));
    const auto summary = lines(read_file(d.path / "o/summary.csv"));
    REQUIRE(summary.size() == 2);
    CHECK(summary[0].rfind("policy,cache_size_pct", 0) == 0);
    CHECK(summary[1].rfind("topx,1,1,1,", 0) == 0);
    CHECK(summary[1].find(",ok") != std::string::npos);
    CHECK(lines(read_file(d.path / "o/topx_c1_tv1_s1.metrics.csv")).size() == 25);
  }

  TEST_CASE("sweep expansion and reruns") {
    TempDir d("sweep");
    write_file(d.path / "run.ini", kSmallRun);
    const std::vector<std::string> base = {"simulate", "--config", (d.path / "run.ini").string(),
                                           "--set", "experiment.policies=lru,topx,rr",
                                           "--set", "experiment.cache_sizes=1,2", "--jobs", "3"};
    auto with_out = [&](const std::string& o) {
      auto a = base;
      a.push_back("--out");
      a.push_back((d.path / o).string());
      return a;
    };
    REQUIRE(cli(with_out("a")).code == exit_code::kOk);
    REQUIRE(cli(with_out("b")).code == exit_code::kOk);
    CHECK(lines(read_file(d.path / "a/summary.csv")).size() == 7);
    CHECK(lines(read_file(d.path / "a/comparison.csv")).size() == 7);
    for (const auto& e : fs::directory_iterator(d.path / "a")) {
      CHECK(read_file(e.path()) == read_file(d.path / "b" / e.path().filename()));
    }
  }

  TEST_CASE("detail and seed override") {
    TempDir d("detail");
    write_file(d.path / "run.ini", kSmallRun);
    const Run r = cli({"simulate", "--config", (d.path / "run.ini").string(), "--out", (d.path / "o").string(),
                       "--detail", "--seed", "9"});
    REQUIRE(r.code == exit_code::kOk);
    for (const char* ext : {"events", "dual", "lambda"}) {
      CHECK(fs::exists(d.path / "o" / (std::string("topx_c1_tv1_s9.") + ext + ".csv")));
    }
  }

  TEST_CASE("simulate errors") {
    TempDir d("simerr");
    write_file(d.path / "bad.ini", "[experiment]\ntopology = 7\n");
    CHECK(cli({"simulate", "--config", (d.path / "bad.ini").string(), "--out", (d.path / "o").string()}).code ==
          exit_code::kConfig);
    CHECK(cli({"simulate", "--out", (d.path / "o").string()}).code == exit_code::kConfig);
    CHECK(cli({"frobnicate"}).code == exit_code::kConfig);
    CHECK(cli({}).code == exit_code::kConfig);

    write_file(d.path / "run.ini", kSmallRun);
    fs::create_directories(d.path / "o/summary.csv");
    const Run r = cli({"simulate", "--config", (d.path / "run.ini").string(), "--out", (d.path / "o").string()});
    CHECK(r.code == exit_code::kRuntime);
    CHECK(r.err.find("error:") != std::string::npos);
  }

  TEST_CASE("gen-workload zipf") {
    TempDir d("genz");
    const Run r = cli({"gen-workload", "--kind", "zipf", "--files", "30", "--seed", "4", "--set",
                       "experiment.horizon=10", "--out", (d.path / "g").string()});
    REQUIRE(r.code == exit_code::kOk);
    const auto stream = lines(read_file(d.path / "g/stream.csv"));
    CHECK(stream.front() == "time,cache_id,file_id,volume");
    CHECK(stream.size() > 1);
    CHECK(lines(read_file(d.path / "g/catalog.csv")).size() == 31);
    CHECK_FALSE(fs::exists(d.path / "g/profiles.csv"));
    CHECK(cli({"gen-workload", "--kind", "trace", "--out", (d.path / "h").string()}).code == exit_code::kConfig);
  }

  TEST_CASE("gen-workload decay then fit") {
    TempDir d("gend");
    REQUIRE(cli({"gen-workload", "--kind", "decay", "--files", "40", "--set", "experiment.horizon=200", "--out",
                 (d.path / "g").string()})
                .code == exit_code::kOk);
    const auto trace = lines(read_file(d.path / "g/trace.csv"));
    REQUIRE(trace.size() > 2);
    double prev = -1.0;
    for (std::size_t k = 1; k < trace.size(); ++k) {
      const double t = std::stod(trace[k].substr(0, trace[k].find(',')));
      CHECK(t >= prev);
      prev = t;
    }
    CHECK(lines(read_file(d.path / "g/profiles.csv")).size() == 41);

    REQUIRE(cli({"fit", (d.path / "g/trace.csv").string(), "--out", (d.path / "p1.csv").string()}).code ==
            exit_code::kOk);
    REQUIRE(cli({"fit", (d.path / "g/trace.csv").string(), "--out", (d.path / "p10.csv").string(), "--upscale",
                 "10"})
                .code == exit_code::kOk);
    const auto p1 = lines(read_file(d.path / "p1.csv"));
    const auto p10 = lines(read_file(d.path / "p10.csv"));
    REQUIRE(p1.size() == p10.size());
    REQUIRE(p1.size() > 1);
    for (std::size_t k = 1; k < p1.size(); ++k) {
      auto field = [](const std::string& l, int n) {
        std::size_t pos = 0;
        for (int i = 0; i < n; ++i) pos = l.find(',', pos) + 1;
        return l.substr(pos, l.find(',', pos) - pos);
      };
      CHECK(field(p1[k], 0) == field(p10[k], 0));
      CHECK(std::stoull(field(p10[k], 2)) == 10 * std::stoull(field(p1[k], 2)));
    }
    CHECK(cli({"fit", (d.path / "g/trace.csv").string(), "--out", (d.path / "x.csv").string(), "--upscale", "0"})
              .code == exit_code::kConfig);
    write_file(d.path / "empty.csv", "timestamp,cache_id,file_id,duration_minutes\n");
    CHECK(cli({"fit", (d.path / "empty.csv").string(), "--out", (d.path / "x.csv").string()}).code !=
          exit_code::kOk);
  }

  TEST_CASE("gen-workload decay from a profile file") {
    TempDir d("genp");
    write_file(d.path / "profiles.csv", "file_id,tau,V,omega\n0,1.0,5,0.5\n1,2.0,3,0.25\n");
    write_file(d.path / "catalog.csv", "file_id,size\n0,2\n1,3\n");
    const Run r = cli({"gen-workload", "--kind", "decay", "--set",
                       "workload.profiles=" + (d.path / "profiles.csv").string(), "--set",
                       "workload.catalog=" + (d.path / "catalog.csv").string(), "--set", "experiment.horizon=1000",
                       "--out", (d.path / "g").string()});
    REQUIRE(r.code == exit_code::kOk);
    CHECK(lines(read_file(d.path / "g/stream.csv")).size() == 9);
  }

  TEST_CASE("solve-subproblem") {
    TempDir d("solve");
    write_file(d.path / "inst.txt", "# two files\ncapacity 2\npenalty quadratic a=1\n3\n1\n");
    const Run r = cli({"solve-subproblem", (d.path / "inst.txt").string()});
    REQUIRE(r.code == exit_code::kOk);
    const auto out = lines(r.out);
    REQUIRE(out.size() == 5);
    CHECK(out[0] == "multiplier 1");
    CHECK(out[1] == "saturated true");
    CHECK(out[2] == "flow 0 2");
    CHECK(out[3] == "flow 1 0");
    CHECK(out[4] == "kkt_residual 0");

    CHECK(cli({"solve-subproblem", (d.path / "inst.txt").string(), "--backend", "bisection"}).code ==
          exit_code::kOk);
    CHECK(cli({"solve-subproblem", (d.path / "inst.txt").string(), "--backend", "newton"}).code ==
          exit_code::kConfig);

    write_file(d.path / "low.txt", "capacity 2\npenalty linquad w=1\n0.5\n-2\n");
    const auto low = lines(cli({"solve-subproblem", (d.path / "low.txt").string()}).out);
    REQUIRE(low.size() == 5);
    CHECK(low[2] == "flow 0 0");
    CHECK(low[3] == "flow 1 0");

    write_file(d.path / "nohdr.txt", "3\n1\n");
    CHECK(cli({"solve-subproblem", (d.path / "nohdr.txt").string()}).code == exit_code::kConfig);
    write_file(d.path / "neg.txt", "capacity -1\npenalty quadratic a=1\n3\n");
    CHECK(cli({"solve-subproblem", (d.path / "neg.txt").string()}).code == exit_code::kConfig);
    CHECK(cli({"solve-subproblem", (d.path / "missing.txt").string()}).code == exit_code::kConfig);
  }

  TEST_CASE("parse_subproblem") {
    std::istringstream ok("capacity 4\npenalty kleinrock cap=9 dmax=8\n\n1.5\n2.5\n");
    const SubproblemInstance inst = parse_subproblem(ok);
    CHECK(inst.capacity == 4.0);
    CHECK(inst.prices == std::vector<double>{1.5, 2.5});
    CHECK(inst.penalty.family() == PenaltyFamily::kKleinrock);
    std::istringstream none("capacity 4\npenalty quadratic a=1\n");
    CHECK_THROWS_AS(parse_subproblem(none), ConfigError);
    std::istringstream bad("capacity 4\npenalty quadratic a=1\nabc\n");
    CHECK_THROWS_AS(parse_subproblem(bad), ConfigError);
  }

  TEST_CASE("expand_sweep order and cell names") {
    SweepConfig c = parse_config("");
    c.policies = {Policy::kLru, Policy::kTopX};
    c.cache_sizes_pct = {0.5, 2};
    c.cache_intervals = {6};
    c.seeds = {1, 2};
    const auto cells = expand_sweep(c);
    REQUIRE(cells.size() == 8);
    CHECK(cells[0].name() == "lru_c0.5_tv6_s1");
    CHECK(cells[1].name() == "lru_c0.5_tv6_s2");
    CHECK(cells[2].name() == "lru_c2_tv6_s1");
    CHECK(cells[4].name() == "topx_c0.5_tv6_s1");
    CHECK(cells[7].name() == "topx_c2_tv6_s2");
  }
}

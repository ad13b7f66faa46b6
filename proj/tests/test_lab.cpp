#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "qclock/lab/lab.hpp"

using namespace qclock;
using namespace qclock::lab;
using Catch::Matchers::ContainsSubstring;

namespace fs = std::filesystem;

namespace {

json small_convergence() {
  return json::parse(R"({
    "scenario": "convergence",
    "system": {"grid": {"min": 0.0, "max": 1.0, "n": 64}},
    "clock": {"E": [50, 100, 200]},
    "modes": {"count": 4, "initial_state": {"kind": "gaussian", "center": 0.4, "width": 0.08}},
    "run": {"t_max": 0.5, "clock_nodes": 201}
  })");
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("qclock_lab_test_" + std::to_string(::getpid()) + "_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_json(const fs::path& p, const json& j) {
  std::ofstream f(p);
  f << j.dump(2);
}

struct Cli {
  int code;
  std::string out;
};

// Runs the CLI binary with stdout and stderr captured together.
Cli cli(const std::string& args, const fs::path& dir) {
  const auto log = dir / "cli.log";
  const std::string cmd = "cd '" + dir.string() + "' && '" + std::string(QCLOCK_LAB_BINARY) + "' " + args + " > '" +
                          log.string() + "' 2>&1";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(log)};
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::stringstream ss(slurp(p));
  std::string line;
  while (std::getline(ss, line)) {
    std::vector<std::string> fields;
    std::stringstream ls(line);
    std::string f;
    while (std::getline(ls, f, ',')) fields.push_back(f);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    rows.push_back(fields);
  }
  return rows;
}

std::string config_error_path(const json& doc) {
  try {
    parse_config(doc);
  } catch (const ConfigError& e) {
    return e.path();
  }
  return "<accepted>";
}

}  // namespace

TEST_CASE("config parsing is strict", "[lab][config]") {
  SECTION("valid document") {
    const auto c = parse_config(small_convergence());
    CHECK(c.scenario == "convergence");
    CHECK(c.clock.type == "free");
    CHECK(c.clock.energies == std::vector<double>{50, 100, 200});
    CHECK(c.system.grid.n == 64);
    CHECK(c.modes.eta == 0.5);
    CHECK(c.output.formats == std::vector<std::string>{"json", "csv"});
  }

  SECTION("unknown keys are reported with their path") {
    auto doc = small_convergence();
    doc["extra"] = 1;
    CHECK(config_error_path(doc) == "extra");
    doc = small_convergence();
    doc["system"]["grid"]["nn"] = 10;
    CHECK(config_error_path(doc) == "system.grid.nn");
    doc = small_convergence();
    doc["modes"]["initial_state"]["sigma"] = 0.1;
    CHECK(config_error_path(doc) == "modes.initial_state.sigma");
  }

  SECTION("values are checked") {
    auto doc = small_convergence();
    doc["scenario"] = "tunneling";
    CHECK(config_error_path(doc) == "scenario");
    doc = small_convergence();
    doc["clock"]["E"] = {100, 50};
    CHECK(config_error_path(doc) == "clock.E");
    doc = small_convergence();
    doc["clock"]["E"] = "big";
    CHECK(config_error_path(doc) == "clock.E");
    doc = small_convergence();
    doc["system"]["grid"]["n"] = 64.5;
    CHECK(config_error_path(doc) == "system.grid.n");
    doc = small_convergence();
    doc["clock"]["type"] = "harmonic";
    CHECK(config_error_path(doc) == "clock.type");
    doc = small_convergence();
    doc.erase("clock");
    CHECK(config_error_path(doc) == "clock");
    doc = small_convergence();
    doc["modes"]["count"] = 63;
    CHECK(config_error_path(doc) == "modes.count");
    doc = small_convergence();
    doc["modes"]["initial_state"] = {{"kind", "random"}, {"members", 2}, {"weights", {0.5, 0.6}}};
    CHECK(config_error_path(doc) == "modes.initial_state.weights");
    doc = small_convergence();
    doc["output"] = {{"formats", {"xml"}}};
    CHECK(config_error_path(doc) == "output.formats");
  }

  SECTION("tolerances must name a metric") {
    auto doc = small_convergence();
    doc["run"]["tolerances"] = {{"terminal_eror", 1.0}};
    const auto c = parse_config(doc);
    CHECK_THROWS_AS(validate_tolerances(c), ConfigError);
    doc["run"]["tolerances"] = {{"terminal_error", 1.0}};
    CHECK_NOTHROW(validate_tolerances(parse_config(doc)));
  }

  SECTION("malformed JSON") { CHECK_THROWS_AS(parse_config_text("{\"scenario\": "), ConfigError); }
}

TEST_CASE("axis paths", "[lab][config]") {
  const auto doc = small_convergence();
  CHECK(with_value(doc, "clock.E", 80.0)["clock"]["E"] == 80.0);
  CHECK(with_value(doc, "run.clock_nodes", 401)["run"]["clock_nodes"].is_number_integer());
  CHECK(parse_config(with_value(doc, "run.t_max", 0.25)).run.t_max == 0.25);
  CHECK_THROWS_AS(with_value(doc, "clock.energy", 1.0), ConfigError);
  CHECK_THROWS_AS(with_value(doc, "scenario", 1.0), ConfigError);
  CHECK_THROWS_AS(with_value(doc, "system.grid", 1.0), ConfigError);
  CHECK_THROWS_AS(parse_value_list("1,two"), ConfigError);
  CHECK(parse_value_list("50, 100,200") == std::vector<double>{50, 100, 200});
}

TEST_CASE("convergence scenario", "[lab][scenario]") {
  const auto c = parse_config(small_convergence());
  const auto r = run_scenario(c);
  REQUIRE(r.metrics.rows.size() == 3);
  const auto err = r.metrics.values("terminal_error");
  CHECK(err[1] < err[0]);
  CHECK(err[2] < err[1]);
  CHECK(r.metrics.values("norm_drift")[2] <= 1e-12);
  CHECK(r.metrics.values("current_error")[2] <= 1e-3);
  CHECK(r.curves.size() == 3);
  CHECK_NOTHROW(check_tolerances(c, r));

  SECTION("tail warning") {
    REQUIRE(r.metadata.contains("tail_norm"));
    CHECK(r.metadata["tail_norm"].get<double>() > 1e-6);
    CHECK(r.warnings.size() == 1);

    auto doc = small_convergence();
    doc["modes"]["initial_state"] = {{"kind", "mode"}, {"index", 1}};
    const auto quiet = run_scenario(parse_config(doc));
    CHECK(quiet.warnings.empty());
    CHECK(quiet.metadata["tail_norm"].get<double>() <= 1e-12);
  }

  SECTION("breached tolerance names the metric") {
    auto doc = small_convergence();
    doc["run"]["tolerances"] = {{"max_error", 1e-12}};
    const auto cfg = parse_config(doc);
    try {
      check_tolerances(cfg, run_scenario(cfg));
      FAIL("no failure raised");
    } catch (const MetricFailure& e) {
      CHECK(e.metric() == "max_error");
      CHECK_THAT(std::string(e.what()), ContainsSubstring("max_error"));
    }
  }
}

TEST_CASE("other scenarios produce finite metrics", "[lab][scenario]") {
  auto shrink = [](json doc) {
    doc.erase("output");
    return doc;
  };
  SECTION("built-in configs that are cheap") {
    for (const char* name : {"wkb-clock", "harmonic-clock", "mixed", "two-time"}) {
      INFO(name);
      auto doc = shrink(builtin_config(name));
      if (doc["clock"]["E"].is_array()) doc["clock"]["E"] = {doc["clock"]["E"][0], doc["clock"]["E"][1]};
      const auto c = parse_config(doc);
      const auto r = run_scenario(c);
      CHECK(r.metrics.columns == metric_columns(c));
      CHECK_NOTHROW(check_tolerances(c, r));
      CHECK(!r.curves.empty());
    }
  }
  SECTION("paraxial columns depend on the medium") {
    auto doc = json::parse(R"({
      "scenario": "paraxial",
      "system": {"potential": {"name": "zero"}, "grid": {"min": -10.0, "max": 10.0, "n": 200}},
      "clock": {"E": 20.0, "E_scale": "absolute"},
      "modes": {"count": 60, "initial_state": {"kind": "gaussian", "center": 0.0, "width": 0.8}},
      "run": {"t_max": 1.0, "clock_nodes": 5}
    })");
    auto r = run_scenario(parse_config(doc));
    CHECK(r.metrics.values("width_error")[0] <= 0.01);
    CHECK(r.metrics.values("spectral_agreement")[0] <= 1e-10);
    doc["system"]["potential"] = {{"name", "harmonic"}, {"omega", 0.5}};
    r = run_scenario(parse_config(doc));
    CHECK_THROWS_AS(r.metrics.column("width_error"), ValidationError);
    CHECK(r.metrics.values("spectral_agreement")[0] <= 1e-10);
    doc["clock"]["mass"] = 2.0;
    CHECK(config_error_path(doc) == "clock.mass");
  }
  SECTION("model rejections surface as qclock errors") {
    auto doc = small_convergence();
    doc["clock"]["E"] = {0.1};
    CHECK_THROWS_AS(run_scenario(parse_config(doc)), EvanescentMode);
  }
}

TEST_CASE("output files", "[lab][output]") {
  const auto dir = scratch("outputs");
  auto cfg = parse_config(small_convergence());
  cfg.output.directory = (dir / "run").string();
  const auto r = run_scenario(cfg);
  const auto files = write_outputs(cfg, r);
  REQUIRE(files.size() == 3);

  const auto result = json::parse(slurp(dir / "run" / "result.json"));
  CHECK(result["schema_version"] == kSchemaVersion);
  CHECK(result["scenario"] == "convergence");
  CHECK(result["config"] == small_convergence());
  CHECK(result["environment"].contains("version"));
  CHECK(result["environment"]["seed"] == 0);
  CHECK(result["wall_clock_seconds"].get<double>() >= 0.0);
  CHECK(result["metrics"]["columns"].size() == r.metrics.columns.size());
  for (const auto& row : result["metrics"]["rows"])
    for (const auto& v : row) CHECK((v.is_number() && std::isfinite(v.get<double>())));

  const auto metrics = read_csv(dir / "run" / "metrics.csv");
  REQUIRE(metrics.size() == 4);
  CHECK(metrics[0][0] == "E");
  CHECK(std::stod(metrics[1][1]) == r.metrics.rows[0][1]);  // 17 digits round-trip

  const auto plot = read_csv(dir / "run" / "plotdata.csv");
  CHECK(plot[0] == std::vector<std::string>{"curve", "x", "y"});
  CHECK(plot.size() == 1 + 3 * cfg.run.clock_nodes);
  CHECK(slurp(dir / "run" / "metrics.csv").find('\r') == std::string::npos);

  SECTION("formats") {
    cfg.output.formats = {"csv"};
    cfg.output.directory = (dir / "csv-only").string();
    write_outputs(cfg, r);
    CHECK(!fs::exists(dir / "csv-only" / "result.json"));
    CHECK(fs::exists(dir / "csv-only" / "metrics.csv"));
  }

  SECTION("reproducible bytes") {
    auto again = cfg;
    again.output.directory = (dir / "again").string();
    write_outputs(again, run_scenario(again));
    CHECK(slurp(dir / "run" / "metrics.csv") == slurp(dir / "again" / "metrics.csv"));
    CHECK(slurp(dir / "run" / "plotdata.csv") == slurp(dir / "again" / "plotdata.csv"));
  }
  fs::remove_all(dir);
}

TEST_CASE("sweeps", "[lab][sweep]") {
  SECTION("doubling ladder in E") {
    const auto s = run_sweep(small_convergence(), "clock.E", {50, 100, 200, 400}, 2);
    REQUIRE(s.table.rows.size() == 4);
    CHECK(s.table.columns.front() == "clock.E");
    CHECK(s.table.columns.back() == "ratio_to_previous");
    const auto ratio = s.table.values("ratio_to_previous");
    CHECK(std::isnan(ratio[0]));
    for (std::size_t k = 2; k < 4; ++k) CHECK((ratio[k] >= 0.4 && ratio[k] <= 0.6));
    const auto axis = s.table.values("clock.E");
    CHECK(axis == std::vector<double>{50, 100, 200, 400});
  }

  SECTION("halving the clock spacing") {
    auto doc = small_convergence();
    doc["clock"]["E"] = 100;
    const auto s = run_sweep(doc, "run.clock_nodes", {1001, 2001, 4001}, 1);
    const auto res = s.table.values("exact_residual");
    for (std::size_t k = 1; k < res.size(); ++k) {
      const double factor = res[k - 1] / res[k];
      INFO("factor " << factor);
      CHECK((factor >= 3.5 && factor <= 4.5));
    }
  }

  SECTION("parallel width does not change the table") {
    const auto one = run_sweep(small_convergence(), "clock.E", {60, 120, 240}, 1);
    const auto three = run_sweep(small_convergence(), "clock.E", {60, 120, 240}, 3);
    CHECK(sweep_csv(one) == sweep_csv(three));
  }

  SECTION("bad axis") {
    CHECK_THROWS_AS(run_sweep(small_convergence(), "clock.speed", {1.0}, 1), ConfigError);
    CHECK_THROWS_AS(run_sweep(small_convergence(), "system.grid.n", {10.5}, 1), ConfigError);
  }

  SECTION("thread count from the environment") {
    ::setenv(kThreadsVariable, "3", 1);
    CHECK(parallel_width() == 3);
    ::setenv(kThreadsVariable, "zero", 1);
    CHECK(parallel_width() >= 1);
    ::unsetenv(kThreadsVariable);
  }
}

TEST_CASE("command line", "[lab][cli]") {
  const auto dir = scratch("cli");
  write_json(dir / "ok.json", small_convergence());

  SECTION("run writes three files") {
    const auto r = cli("run ok.json --out res", dir);
    INFO(r.out);
    CHECK(r.code == 0);
    CHECK(fs::exists(dir / "res" / "result.json"));
    CHECK(fs::exists(dir / "res" / "metrics.csv"));
    CHECK(fs::exists(dir / "res" / "plotdata.csv"));
    CHECK_THAT(r.out, ContainsSubstring("warning: initial state has out-of-span tail"));
  }

  SECTION("output block is honoured without --out") {
    auto doc = small_convergence();
    doc["output"] = {{"directory", "from-config"}, {"formats", {"json"}}};
    write_json(dir / "dir.json", doc);
    CHECK(cli("run dir.json", dir).code == 0);
    CHECK(fs::exists(dir / "from-config" / "result.json"));
    CHECK(!fs::exists(dir / "from-config" / "metrics.csv"));
  }

  SECTION("unknown scenario: exit 2 and nothing written") {
    auto doc = small_convergence();
    doc["scenario"] = "tunneling";
    write_json(dir / "bad.json", doc);
    const auto r = cli("run bad.json --out never", dir);
    CHECK(r.code == 2);
    CHECK_THAT(r.out, ContainsSubstring("scenario"));
    CHECK(!fs::exists(dir / "never"));
  }

  SECTION("typo in a nested key: exit 2 with the path") {
    auto doc = small_convergence();
    doc["clock"]["masss"] = 1.0;
    write_json(dir / "typo.json", doc);
    const auto r = cli("run typo.json --out never", dir);
    CHECK(r.code == 2);
    CHECK_THAT(r.out, ContainsSubstring("clock.masss"));
    CHECK(!fs::exists(dir / "never"));
  }

  SECTION("missing file and missing arguments are configuration errors") {
    CHECK(cli("run nope.json", dir).code == 2);
    CHECK(cli("sweep ok.json --axis clock.E", dir).code == 2);
    CHECK(cli("frobnicate", dir).code == 2);
  }

  SECTION("evanescent clock: exit 2") {
    auto doc = small_convergence();
    doc["clock"]["E"] = 0.5;
    write_json(dir / "slow.json", doc);
    CHECK(cli("run slow.json --out never", dir).code == 2);
    CHECK(!fs::exists(dir / "never"));
  }

  SECTION("tolerance breach: exit 1 naming the metric") {
    auto doc = small_convergence();
    doc["run"]["tolerances"] = {{"terminal_error", 1e-9}};
    write_json(dir / "tight.json", doc);
    const auto r = cli("run tight.json --out tight", dir);
    CHECK(r.code == 1);
    CHECK_THAT(r.out, ContainsSubstring("terminal_error"));
  }

  SECTION("sweep with a single value has one data row") {
    const auto r = cli("sweep ok.json --axis clock.E --values 80 --out sw", dir);
    INFO(r.out);
    CHECK(r.code == 0);
    const auto rows = read_csv(dir / "sw" / "sweep.csv");
    REQUIRE(rows.size() == 2);
    CHECK(rows[0][0] == "clock.E");
    CHECK(rows[1][0] == "80");
  }

  SECTION("sweep CSV is byte-identical across runs and thread counts") {
    CHECK(cli("sweep ok.json --axis clock.E --values 50,100,200 --out a", dir).code == 0);
    CHECK(::setenv(kThreadsVariable, "1", 1) == 0);
    CHECK(cli("sweep ok.json --axis clock.E --values 50,100,200 --out b", dir).code == 0);
    ::unsetenv(kThreadsVariable);
    CHECK(slurp(dir / "a" / "sweep.csv") == slurp(dir / "b" / "sweep.csv"));
    const auto rows = read_csv(dir / "a" / "sweep.csv");
    REQUIRE(rows.size() == 4);
    CHECK(rows[1].back().empty());
  }

  SECTION("unresolvable sweep axis: exit 2") {
    const auto r = cli("sweep ok.json --axis clock.Energy --values 1,2 --out never", dir);
    CHECK(r.code == 2);
    CHECK_THAT(r.out, ContainsSubstring("clock.Energy"));
    CHECK(!fs::exists(dir / "never"));
  }

  SECTION("check with an injected zero tolerance fails and names the criterion") {
    const auto r = cli("check --inject-zero-tolerance 3", dir);
    CHECK(r.code == 1);
    CHECK_THAT(r.out, ContainsSubstring("FAIL  3 clock current conservation"));
    CHECK_THAT(r.out, ContainsSubstring("failed criterion 3"));
    CHECK_THAT(r.out, ContainsSubstring("PASS 10 numerics base rates"));
    CHECK_THAT(r.out, ContainsSubstring("9/10 criteria passed"));
  }
  fs::remove_all(dir);
}

TEST_CASE("every criterion fails when its tolerance is zeroed", "[lab][acceptance]") {
  // Cheap criteria only; the CLI test above covers the end-to-end path.
  for (int id : {2, 3, 5, 9, 10}) {
    INFO("criterion " << id);
    const auto& c = acceptance_criteria()[static_cast<std::size_t>(id - 1)];
    lab::detail::Gate strict{0.0}, normal{1.0};
    c.run(strict);
    c.run(normal);
    CHECK(!strict.ok);
    CHECK(normal.ok);
  }
}

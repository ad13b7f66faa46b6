// qclock-lab: run scenarios, sweep parameters, run the acceptance checks.
//
// Exit codes: 0 success, 1 numerical or acceptance failure, 2 configuration error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "qclock/lab/lab.hpp"

namespace {

using namespace qclock;
using namespace qclock::lab;

constexpr int kOk = 0;
constexpr int kNumerical = 1;
constexpr int kConfig = 2;

json read_document(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("", "cannot read " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  try {
    return json::parse(ss.str());
  } catch (const json::parse_error& e) {
    throw ConfigError("", path + " is not valid JSON: " + e.what());
  }
}

// Maps exceptions onto exit codes. Errors raised by the model while checking
// parameters (evanescent modes, forbidden clock regions, cutoffs) are
// configuration problems; everything else that fails mid-run is numerical.
template <class Fn>
int guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const MetricFailure& e) {
    std::cerr << "failed: " << e.what() << "\n";
    return kNumerical;
  } catch (const ValidationError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const EvanescentMode& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const DomainError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const ResourceError& e) {
    std::cerr << "failed: resource limit: " << e.what() << "\n";
    return kNumerical;
  } catch (const std::exception& e) {
    std::cerr << "failed: " << e.what() << "\n";
    return kNumerical;
  }
}

void print_warnings(const RunResult& r) {
  for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
}

int cmd_run(const std::string& path, const std::string& out) {
  const auto doc = read_document(path);
  auto cfg = parse_config(doc);
  if (!out.empty()) cfg.output.directory = out;
  validate_tolerances(cfg);
  const auto result = run_scenario(cfg);
  print_warnings(result);

  int code = kOk;
  std::string failure;
  try {
    check_tolerances(cfg, result);
  } catch (const MetricFailure& e) {
    code = kNumerical;
    failure = e.what();
  }
  for (const auto& f : write_outputs(cfg, result)) std::cout << f.string() << "\n";
  std::cout << metrics_csv(result.metrics);
  if (code != kOk) std::cerr << "failed: " << failure << "\n";
  return code;
}

int cmd_sweep(const std::string& path, const std::string& axis, const std::string& values, const std::string& out) {
  const auto doc = read_document(path);
  const auto list = parse_value_list(values);
  const auto sweep = run_sweep(doc, axis, list);

  int code = kOk;
  std::string failure;
  for (std::size_t k = 0; k < sweep.runs.size(); ++k) {
    print_warnings(sweep.runs[k]);
    try {
      check_tolerances(sweep.configs[k], sweep.runs[k]);
    } catch (const MetricFailure& e) {
      if (code == kOk) failure = e.what() + std::string(" at ") + axis + " = " + format_number(list[k]);
      code = kNumerical;
    }
  }
  const std::filesystem::path dir(out.empty() ? sweep.configs.front().output.directory : out);
  std::filesystem::create_directories(dir);
  const auto csv = sweep_csv(sweep);
  write_text(dir / "sweep.csv", csv);
  std::cout << (dir / "sweep.csv").string() << "\n" << csv;
  if (code != kOk) std::cerr << "failed: " << failure << "\n";
  return code;
}

int cmd_check(int inject) {
  std::optional<int> zero;
  if (inject > 0) zero = inject;
  const auto results = run_acceptance(zero, [](const CriterionResult& r) { std::cout << report_line(r) << std::endl; });
  std::size_t passed = 0;
  for (const auto& r : results) passed += r.passed ? 1 : 0;
  std::cout << passed << "/" << results.size() << " criteria passed\n";
  if (passed == results.size()) return kOk;
  for (const auto& r : results)
    if (!r.passed) std::cerr << "failed criterion " << r.id << ": " << r.name << "\n";
  return kNumerical;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semiclassical clock experiments: scenarios, sweeps, acceptance checks"};
  app.set_version_flag("--version", std::string(QCLOCK_VERSION));
  app.require_subcommand(1);

  std::string config, out, axis, values;
  int inject = 0;

  auto* run = app.add_subcommand("run", "Run one scenario config");
  run->add_option("config", config, "Scenario config (JSON)")->required();
  run->add_option("--out", out, "Output directory (overrides output.directory)");

  auto* sweep = app.add_subcommand("sweep", "Run a config once per value of one parameter");
  sweep->add_option("config", config, "Scenario config (JSON)")->required();
  sweep->add_option("--axis", axis, "Dotted config path, e.g. clock.E")->required();
  sweep->add_option("--values", values, "Comma-separated values")->required();
  sweep->add_option("--out", out, "Output directory for sweep.csv");

  auto* check = app.add_subcommand("check", "Run the acceptance criteria");
  check->add_option("--inject-zero-tolerance", inject, "Force the tolerances of criterion N to zero (tests the failure path)")
      ->check(CLI::Range(1, 10));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  if (*run) return guarded([&] { return cmd_run(config, out); });
  if (*sweep) return guarded([&] { return cmd_sweep(config, axis, values, out); });
  return cmd_check(inject);
}

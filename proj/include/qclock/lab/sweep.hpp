#pragma once

// One run per axis value, possibly on several threads; rows come back in
// axis order regardless of which run finished first.

#include <atomic>
#include <cstdlib>
#include <exception>
#include <optional>
#include <sstream>
#include <thread>

#include "qclock/lab/output.hpp"

namespace qclock::lab {

inline constexpr const char* kThreadsVariable = "QCLOCK_THREADS";

inline std::size_t parallel_width() {
  if (const char* env = std::getenv(kThreadsVariable)) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

/// Comma-separated numbers, e.g. "50,100,200".
inline std::vector<double> parse_value_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    while (used < item.size() && std::isspace(static_cast<unsigned char>(item[used]))) ++used;
    if (used == 0 || used != item.size() || !std::isfinite(v))
      throw ConfigError("--values", "\"" + item + "\" is not a number");
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError("--values", "empty value list");
  return out;
}

struct SweepResult {
  std::string axis;
  std::vector<double> values;
  std::vector<ScenarioConfig> configs;
  std::vector<RunResult> runs;
  MetricTable table;  // axis, last-row metrics of each run, ratio of the primary metric to the previous row
};

/// Builds and validates every config before any run starts.
inline std::vector<ScenarioConfig> sweep_configs(const json& doc, const std::string& axis,
                                                 const std::vector<double>& values) {
  std::vector<ScenarioConfig> out;
  for (double v : values) {
    auto cfg = parse_config(with_value(doc, axis, v));
    validate_tolerances(cfg);
    out.push_back(std::move(cfg));
  }
  return out;
}

inline SweepResult run_sweep(const json& doc, const std::string& axis, const std::vector<double>& values,
                             std::size_t width = parallel_width()) {
  SweepResult s{axis, values, sweep_configs(doc, axis, values), {}, {}};
  const std::size_t n = values.size();
  std::vector<std::optional<RunResult>> slots(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < n; k = next++) {
      try {
        slots[k] = run_scenario(s.configs[k]);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::max<std::size_t>(1, std::min(width, n));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (std::size_t k = 0; k < n; ++k)
    if (errors[k]) std::rethrow_exception(errors[k]);
  for (auto& slot : slots) s.runs.push_back(std::move(*slot));

  const auto& first = s.runs.front();
  s.table.columns.push_back(axis);
  for (const auto& col : first.metrics.columns) s.table.columns.push_back(col);
  s.table.columns.push_back("ratio_to_previous");
  const std::size_t primary = first.metrics.column(first.primary_metric);
  double previous = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const auto& last = s.runs[k].metrics.rows.back();
    std::vector<double> row{values[k]};
    row.insert(row.end(), last.begin(), last.end());
    row.push_back(k == 0 ? std::nan("") : last[primary] / previous);
    previous = last[primary];
    s.table.rows.push_back(std::move(row));
  }
  return s;
}

/// Same conventions as metrics.csv; the first row has no previous value, so its
/// ratio field is empty.
inline std::string sweep_csv(const SweepResult& s) {
  std::string out;
  for (std::size_t k = 0; k < s.table.columns.size(); ++k) out += (k ? "," : "") + csv_field(s.table.columns[k]);
  out += '\n';
  for (const auto& row : s.table.rows) {
    for (std::size_t k = 0; k < row.size(); ++k) {
      if (k) out += ',';
      if (std::isfinite(row[k])) out += format_number(row[k]);
    }
    out += '\n';
  }
  return out;
}

}  // namespace qclock::lab

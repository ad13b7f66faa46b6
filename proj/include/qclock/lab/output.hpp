#pragma once

// Persistence: result.json, metrics.csv, plotdata.csv, sweep.csv.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "qclock/lab/scenarios.hpp"

#ifndef QCLOCK_VERSION
#define QCLOCK_VERSION "unknown"
#endif

namespace qclock::lab {

inline constexpr int kSchemaVersion = 1;

inline std::string format_number(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

inline std::string metrics_csv(const MetricTable& t) {
  std::string out;
  for (std::size_t k = 0; k < t.columns.size(); ++k) out += (k ? "," : "") + csv_field(t.columns[k]);
  out += '\n';
  for (const auto& row : t.rows) {
    for (std::size_t k = 0; k < row.size(); ++k) out += (k ? "," : "") + format_number(row[k]);
    out += '\n';
  }
  return out;
}

/// Long format: one line per point, curve name first.
inline std::string plotdata_csv(const std::vector<Curve>& curves) {
  std::string out = "curve,x,y\n";
  for (const auto& c : curves)
    for (std::size_t k = 0; k < c.x.size(); ++k)
      out += csv_field(c.name) + "," + format_number(c.x[k]) + "," + format_number(c.y[k]) + "\n";
  return out;
}

inline json result_json(const ScenarioConfig& c, const RunResult& r) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["scenario"] = r.scenario;
  j["config"] = c.source;
  j["primary_metric"] = r.primary_metric;
  j["metrics"] = {{"columns", r.metrics.columns}, {"rows", r.metrics.rows}};
  j["warnings"] = r.warnings;
  j["metadata"] = r.metadata;
  j["environment"] = {{"version", QCLOCK_VERSION}, {"seed", c.run.seed}};
  j["wall_clock_seconds"] = r.wall_clock_seconds;
  return j;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  f << text;
  if (!f) throw std::runtime_error("failed writing " + path.string());
}

inline bool wants(const ScenarioConfig& c, const std::string& format) {
  return std::find(c.output.formats.begin(), c.output.formats.end(), format) != c.output.formats.end();
}

/// Writes the configured formats into c.output.directory; returns the files written.
inline std::vector<std::filesystem::path> write_outputs(const ScenarioConfig& c, const RunResult& r) {
  const std::filesystem::path dir(c.output.directory);
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> files;
  if (wants(c, "json")) {
    files.push_back(dir / "result.json");
    write_text(files.back(), result_json(c, r).dump(2) + "\n");
  }
  if (wants(c, "csv")) {
    files.push_back(dir / "metrics.csv");
    write_text(files.back(), metrics_csv(r.metrics));
    files.push_back(dir / "plotdata.csv");
    write_text(files.back(), plotdata_csv(r.curves));
  }
  return files;
}

}  // namespace qclock::lab

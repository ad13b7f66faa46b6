#pragma once

// Scenario configuration: one JSON document, strict about unknown keys.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace qclock::lab {

using json = nlohmann::json;

/// Schema violation; `path` is the dotted location inside the document.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& path, const std::string& msg)
      : std::runtime_error((path.empty() ? std::string("config") : path) + ": " + msg), path_(path) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

inline const std::vector<std::string>& scenario_names() {
  static const std::vector<std::string> names{"convergence", "wkb-clock", "harmonic-clock", "mixed", "paraxial", "two-time"};
  return names;
}

struct PotentialSpec {
  std::string name = "zero";  // zero | constant | harmonic | linear | ramp
  double value = 0.0;         // constant
  double omega = 1.0;         // harmonic
  double center = 0.0;        // harmonic
  double slope = 0.0;         // linear
  double fraction = 0.0;      // ramp: U rises from 0 to fraction * E across the window
};

struct GridSpec {
  double min = 0.0;
  double max = 1.0;
  std::size_t n = 128;
};

struct SystemBlock {
  PotentialSpec potential;
  double mass = 1.0;
  double hbar = 1.0;
  GridSpec grid;
};

struct ClockBlock {
  std::string type;                  // free | potential | harmonic
  double mass = 1.0;
  std::vector<double> energies;      // E list, strictly increasing
  std::string energy_scale = "max_mode";  // max_mode: E = value * E_max of the retained basis; absolute
  PotentialSpec potential;           // potential clocks only (zero | constant | ramp)
  double quartic = 0.0;              // p^4 coefficient for the WKB correction metric
  double omega = 1.0;                // harmonic clock
};

struct InitialState {
  std::string kind = "gaussian";  // gaussian | mode | random
  double center = 0.5;
  double width = 0.1;
  double wavenumber = 0.0;
  std::size_t index = 0;
  std::size_t members = 1;
  std::vector<double> weights;
};

struct ModesBlock {
  std::size_t count = 8;
  InitialState initial;
  double eta = 0.5;
};

struct RunBlock {
  double t_max = 1.0;
  std::size_t clock_nodes = 401;
  std::uint64_t seed = 0;
  std::size_t ladder_dim = 32;
  std::size_t alpha_samples = 16;
  double alpha_step = 1e-3;
  std::map<std::string, double> tolerances;  // metric column -> max allowed value
};

struct OutputBlock {
  std::string directory = "qclock-out";
  std::vector<std::string> formats{"json", "csv"};
};

struct ScenarioConfig {
  std::string scenario;
  SystemBlock system;
  ClockBlock clock;
  ModesBlock modes;
  RunBlock run;
  OutputBlock output;
  json source;  // the document as given, echoed into result.json
};

namespace detail {

/// Walks one JSON object, remembering which keys were read so the rest can
/// be reported as unknown.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_, "expected an object");
  }

  std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  bool has(const std::string& key) const { return j_.contains(key); }

  const json& raw(const std::string& key) {
    used_.insert(key);
    return j_.at(key);
  }

  double number(const std::string& key, double fallback) { return has(key) ? number(key) : fallback; }
  double number(const std::string& key) {
    require(key);
    const auto& v = raw(key);
    if (!v.is_number()) throw ConfigError(at(key), "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw ConfigError(at(key), "must be finite");
    return x;
  }
  double positive(const std::string& key, double fallback) {
    const double x = number(key, fallback);
    if (!(x > 0.0)) throw ConfigError(at(key), "must be positive");
    return x;
  }

  std::uint64_t integer(const std::string& key, std::uint64_t fallback, std::uint64_t min_value = 0) {
    if (!has(key)) return fallback;
    const auto& v = raw(key);
    if (!v.is_number()) throw ConfigError(at(key), "expected an integer");
    const double x = v.get<double>();
    if (x != std::floor(x) || x < static_cast<double>(min_value) || x > 9.0e15)
      throw ConfigError(at(key), "expected an integer >= " + std::to_string(min_value));
    return static_cast<std::uint64_t>(x);
  }

  std::string string(const std::string& key, const std::string& fallback) { return has(key) ? string(key) : fallback; }
  std::string string(const std::string& key) {
    require(key);
    const auto& v = raw(key);
    if (!v.is_string()) throw ConfigError(at(key), "expected a string");
    return v.get<std::string>();
  }
  std::string choice(const std::string& key, const std::string& fallback, const std::vector<std::string>& allowed) {
    auto s = string(key, fallback);
    for (const auto& a : allowed)
      if (s == a) return s;
    std::string list;
    for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
    throw ConfigError(at(key), "unknown value \"" + s + "\" (expected one of: " + list + ")");
  }

  std::vector<double> numbers(const std::string& key) {
    require(key);
    const auto& v = raw(key);
    std::vector<double> out;
    if (v.is_number()) {
      out.push_back(v.get<double>());
    } else if (v.is_array() && !v.empty()) {
      for (std::size_t k = 0; k < v.size(); ++k) {
        if (!v[k].is_number()) throw ConfigError(at(key) + "[" + std::to_string(k) + "]", "expected a number");
        out.push_back(v[k].get<double>());
      }
    } else {
      throw ConfigError(at(key), "expected a number or a non-empty list of numbers");
    }
    for (double x : out)
      if (!std::isfinite(x)) throw ConfigError(at(key), "entries must be finite");
    return out;
  }

  Reader object(const std::string& key) {
    require(key);
    return Reader(raw(key), at(key));
  }

  void require(const std::string& key) const {
    if (!has(key)) throw ConfigError(at(key), "missing required field");
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!used_.count(it.key())) throw ConfigError(at(it.key()), "unknown key");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

inline PotentialSpec read_potential(Reader r, const std::vector<std::string>& allowed) {
  PotentialSpec p;
  p.name = r.choice("name", "zero", allowed);
  if (p.name == "constant") p.value = r.number("value");
  if (p.name == "harmonic") {
    p.omega = r.positive("omega", 1.0);
    p.center = r.number("center", 0.0);
  }
  if (p.name == "linear") p.slope = r.number("slope");
  if (p.name == "ramp") p.fraction = r.number("fraction");
  r.finish();
  return p;
}

inline std::string default_clock_type(const std::string& scenario) {
  if (scenario == "wkb-clock") return "potential";
  if (scenario == "harmonic-clock") return "harmonic";
  return "free";
}

}  // namespace detail

inline ScenarioConfig parse_config(const json& doc) {
  using detail::Reader;
  ScenarioConfig c;
  c.source = doc;
  Reader top(doc, "");
  c.scenario = top.choice("scenario", "", scenario_names());

  {
    auto s = top.object("system");
    if (s.has("potential"))
      c.system.potential = detail::read_potential(s.object("potential"), {"zero", "constant", "harmonic", "linear"});
    c.system.mass = s.positive("mass", 1.0);
    c.system.hbar = s.positive("hbar", 1.0);
    if (s.has("grid")) {
      auto g = s.object("grid");
      c.system.grid.min = g.number("min", 0.0);
      c.system.grid.max = g.number("max", 1.0);
      c.system.grid.n = g.integer("n", 128, 5);
      if (!(c.system.grid.max > c.system.grid.min)) throw ConfigError(g.at("max"), "must exceed min");
      g.finish();
    }
    s.finish();
  }

  {
    auto k = top.object("clock");
    const std::string expected = detail::default_clock_type(c.scenario);
    c.clock.type = k.choice("type", expected, {"free", "potential", "harmonic"});
    if (c.clock.type != expected)
      throw ConfigError(k.at("type"), "scenario " + c.scenario + " needs a " + expected + " clock");
    if (c.scenario == "paraxial" && k.has("mass"))
      throw ConfigError(k.at("mass"), "paraxial runs take the transverse mass from system.mass");
    c.clock.mass = k.positive("mass", 1.0);
    c.clock.energies = k.numbers("E");
    for (std::size_t i = 0; i < c.clock.energies.size(); ++i) {
      if (!(c.clock.energies[i] > 0.0)) throw ConfigError(k.at("E"), "energies must be positive");
      if (i > 0 && !(c.clock.energies[i] > c.clock.energies[i - 1]))
        throw ConfigError(k.at("E"), "energy list must be strictly increasing");
    }
    c.clock.energy_scale = k.choice("E_scale", "max_mode", {"max_mode", "absolute"});
    if (c.clock.type == "potential") {
      if (k.has("potential")) c.clock.potential = detail::read_potential(k.object("potential"), {"zero", "constant", "ramp"});
      c.clock.quartic = k.number("quartic", 0.0);
    }
    if (c.clock.type == "harmonic") c.clock.omega = k.positive("omega", 1.0);
    k.finish();
  }

  {
    auto m = top.object("modes");
    c.modes.count = m.integer("count", 8, 1);
    if (c.modes.count > c.system.grid.n - 2)
      throw ConfigError(m.at("count"), "at most grid n - 2 = " + std::to_string(c.system.grid.n - 2) + " modes");
    c.modes.eta = m.positive("eta", 0.5);
    if (m.has("initial_state")) {
      auto s = m.object("initial_state");
      auto& i = c.modes.initial;
      i.kind = s.choice("kind", "gaussian", {"gaussian", "mode", "random"});
      if (i.kind == "gaussian") {
        i.center = s.number("center", 0.5 * (c.system.grid.min + c.system.grid.max));
        i.width = s.positive("width", 0.1 * (c.system.grid.max - c.system.grid.min));
        i.wavenumber = s.number("wavenumber", 0.0);
      }
      if (i.kind == "mode") {
        i.index = s.integer("index", 0);
        if (i.index >= c.modes.count) throw ConfigError(s.at("index"), "must be below modes.count");
      }
      if (i.kind == "random") {
        i.members = s.integer("members", 1, 1);
        if (s.has("weights")) {
          i.weights = s.numbers("weights");
          if (i.weights.size() != i.members) throw ConfigError(s.at("weights"), "needs one weight per member");
          double total = 0.0;
          for (double w : i.weights) {
            if (w < 0.0) throw ConfigError(s.at("weights"), "weights must be nonnegative");
            total += w;
          }
          if (std::abs(total - 1.0) > 1e-10) throw ConfigError(s.at("weights"), "weights must sum to 1");
        }
      }
      s.finish();
    }
    if (c.modes.initial.weights.empty())
      c.modes.initial.weights.assign(c.modes.initial.members, 1.0 / static_cast<double>(c.modes.initial.members));
    m.finish();
  }

  if (top.has("run")) {
    auto r = top.object("run");
    c.run.t_max = r.positive("t_max", 1.0);
    c.run.clock_nodes = r.integer("clock_nodes", 401, 5);
    c.run.seed = r.integer("seed", 0);
    c.run.ladder_dim = r.integer("ladder_dim", 32, 2);
    c.run.alpha_samples = r.integer("alpha_samples", 16, 1);
    c.run.alpha_step = r.positive("alpha_step", 1e-3);
    if (r.has("tolerances")) {
      const auto& t = r.raw("tolerances");
      if (!t.is_object()) throw ConfigError(r.at("tolerances"), "expected an object of metric: max value");
      for (auto it = t.begin(); it != t.end(); ++it) {
        if (!it.value().is_number()) throw ConfigError(r.at("tolerances") + "." + it.key(), "expected a number");
        c.run.tolerances[it.key()] = it.value().get<double>();
      }
    }
    r.finish();
  }

  if (top.has("output")) {
    auto o = top.object("output");
    c.output.directory = o.string("directory", c.output.directory);
    if (o.has("formats")) {
      const auto& f = o.raw("formats");
      if (!f.is_array() || f.empty()) throw ConfigError(o.at("formats"), "expected a non-empty list");
      c.output.formats.clear();
      for (const auto& x : f) {
        if (!x.is_string() || (x != "json" && x != "csv"))
          throw ConfigError(o.at("formats"), "entries must be \"json\" or \"csv\"");
        c.output.formats.push_back(x.get<std::string>());
      }
    }
    o.finish();
  }

  top.finish();
  return c;
}

inline ScenarioConfig parse_config_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("", std::string("not valid JSON: ") + e.what());
  }
  return parse_config(doc);
}

/// Replaces the scalar at a dotted path. A numeric list (such as clock.E) is
/// replaced by the single value.
inline json with_value(json doc, const std::string& path, double value) {
  json* node = &doc;
  std::stringstream ss(path);
  std::string part, walked;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  if (parts.empty()) throw ConfigError(path, "empty axis path");
  for (std::size_t k = 0; k < parts.size(); ++k) {
    walked += (walked.empty() ? "" : ".") + parts[k];
    if (!node->is_object() || !node->contains(parts[k])) throw ConfigError(walked, "axis path does not resolve");
    node = &(*node)[parts[k]];
  }
  const bool numeric_list = node->is_array() && !node->empty() &&
                            std::all_of(node->begin(), node->end(), [](const json& x) { return x.is_number(); });
  if (!node->is_number() && !numeric_list) throw ConfigError(path, "axis path must name a numeric field");
  if (value == std::floor(value) && std::abs(value) < 9.0e15 && node->is_number_integer())
    *node = static_cast<std::int64_t>(value);
  else
    *node = value;
  return doc;
}

}  // namespace qclock::lab

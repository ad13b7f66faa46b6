#pragma once

// The release gate: ten property checks on desk-scale built-in configs.

#include <chrono>
#include <cstdio>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "qclock/lab/scenarios.hpp"

namespace qclock::lab {

// Built-in scenario configs; configs/ in the source tree holds the same documents.
inline json builtin_config(const std::string& name) {
  if (name == "convergence")
    return json::parse(R"({
      "scenario": "convergence",
      "system": {"potential": {"name": "zero"}, "mass": 1.0, "grid": {"min": 0.0, "max": 1.0, "n": 128}},
      "clock": {"mass": 1.0, "E": [50, 100, 200, 400], "E_scale": "max_mode"},
      "modes": {"count": 8, "initial_state": {"kind": "gaussian", "center": 0.35, "width": 0.05}},
      "run": {"t_max": 1.0, "clock_nodes": 401},
      "output": {"directory": "out/convergence"}
    })");
  if (name == "wkb-clock")
    return json::parse(R"({
      "scenario": "wkb-clock",
      "system": {"potential": {"name": "harmonic", "omega": 1.0}, "grid": {"min": -8.0, "max": 8.0, "n": 64}},
      "clock": {"type": "potential", "E": [25, 50, 100, 200], "potential": {"name": "ramp", "fraction": 0.3}},
      "modes": {"count": 4, "initial_state": {"kind": "gaussian", "center": 1.0, "width": 0.7071067811865476}},
      "run": {"t_max": 1.0, "clock_nodes": 4001},
      "output": {"directory": "out/wkb-clock"}
    })");
  if (name == "harmonic-clock")
    return json::parse(R"({
      "scenario": "harmonic-clock",
      "system": {"potential": {"name": "harmonic", "omega": 1.0}, "grid": {"min": -6.0, "max": 6.0, "n": 200}},
      "clock": {"type": "harmonic", "omega": 1.0, "E": 3.0, "E_scale": "absolute"},
      "modes": {"count": 3, "initial_state": {"kind": "random"}},
      "run": {"t_max": 6.283185307179586, "ladder_dim": 32, "alpha_samples": 16, "alpha_step": 0.001, "seed": 11},
      "output": {"directory": "out/harmonic-clock"}
    })");
  if (name == "mixed" || name == "two-time") {
    auto j = json::parse(R"({
      "system": {"potential": {"name": "zero"}, "grid": {"min": 0.0, "max": 1.0, "n": 32}},
      "clock": {"E": [50, 100, 200, 400]},
      "modes": {"count": 4, "initial_state": {"kind": "random", "members": 3, "weights": [0.5, 0.3, 0.2]}},
      "run": {"t_max": 0.01, "clock_nodes": 32, "seed": 7}
    })");
    j["scenario"] = name;
    j["output"] = {{"directory", "out/" + name}};
    return j;
  }
  if (name == "paraxial")
    return json::parse(R"({
      "scenario": "paraxial",
      "system": {"potential": {"name": "zero"}, "mass": 1.0, "grid": {"min": -15.0, "max": 15.0, "n": 600}},
      "clock": {"E": 50.0, "E_scale": "absolute"},
      "modes": {"count": 150, "initial_state": {"kind": "gaussian", "center": 0.0, "width": 0.5}},
      "run": {"t_max": 2.0, "clock_nodes": 11},
      "output": {"directory": "out/paraxial"}
    })");
  throw ValidationError("no built-in config named " + name);
}

struct CriterionResult {
  int id = 0;
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

namespace detail {

/// Tolerance gate. scale = 1 applies the stated tolerances; scale = 0 shrinks
/// every bound to nothing (test hook for the failure path).
struct Gate {
  double scale = 1.0;
  bool ok = true;

  bool below(double v, double bound) { return record(v <= bound * scale); }
  bool within(double v, double lo, double hi) {
    const double mid = 0.5 * (lo + hi);
    return record(v >= mid - (mid - lo) * scale && v <= mid + (hi - mid) * scale);
  }
  bool holds(bool condition) { return record(condition); }

 private:
  bool record(bool b) {
    ok = ok && b;
    return b;
  }
};

inline std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

inline std::string list(const std::vector<double>& v) {
  std::string s;
  for (double x : v) s += (s.empty() ? "" : " ") + fmt("%.4g", x);
  return s;
}

inline std::vector<double> ratios(const std::vector<double>& v) {
  std::vector<double> out;
  for (std::size_t k = 1; k < v.size(); ++k) out.push_back(v[k] / v[k - 1]);
  return out;
}

inline bool strictly_decreasing(const std::vector<double>& v) {
  for (std::size_t k = 1; k < v.size(); ++k)
    if (!(v[k] < v[k - 1])) return false;
  return true;
}

inline RunResult run_builtin(const std::string& name) { return run_scenario(parse_config(builtin_config(name))); }

inline std::string semiclassical_convergence(Gate& g) {
  const auto r = run_builtin("convergence");
  const auto err = r.metrics.values("terminal_error");
  const auto q = ratios(err);
  g.holds(strictly_decreasing(err));
  g.within(q.back(), 0.4, 0.6);
  return "terminal errors " + list(err) + "; ratios " + list(q);
}

inline std::string phase_expansion_bound(Gate& g) {
  const SystemSpec spec = make_system(Grid(0.0, 1.0, 128), [](double) { return 0.0; });
  const auto basis = spectral_basis(spec, 8);
  double worst = 0.0;  // largest remainder / bound
  std::size_t checked = 0;
  for (double mass : {0.5, 1.0, 3.0})
    for (double f : {2.0, 3.0, 10.0, 50.0, 400.0}) {
      const FreeClock clock(mass, f * basis.energies.back());
      const double k0 = clock.carrier_wavenumber();
      for (double en : basis.energies) {
        const double x = en / clock.energy;
        if (x > 0.5) continue;
        const double linear = k0 - en * std::sqrt(clock.mass / (2.0 * clock.energy)) / clock.hbar;
        const double remainder = std::abs(clock_wavenumber(clock, en) - linear);
        const double bound = k0 * x * x / 4.0;
        g.below(remainder, bound + 1e-12 * k0);
        worst = std::max(worst, remainder / bound);
        ++checked;
      }
    }
  return std::to_string(checked) + " modes checked; max remainder/bound " + fmt("%.4f", worst);
}

inline std::string current_conservation(Gate& g) {
  const SystemSpec spec = make_system(Grid(0.0, 1.0, 64), [](double) { return 0.0; });
  const auto basis = spectral_basis(spec, 4);
  const FreeClock clock(1.0, 4.0 * basis.energies.back());
  std::mt19937_64 rng(42);
  std::normal_distribution<double> normal;
  auto random_amps = [&] {
    ModeAmplitudes a;
    for (std::size_t n = 0; n < basis.count(); ++n) {
      const double re = normal(rng);
      const double im = normal(rng);
      a.coefficients.emplace_back(re, im);
    }
    return a;
  };

  const auto fwd = random_amps(), bwd = random_amps();
  const auto complete = complete_integral(fwd, bwd, basis, clock, Grid(-1.0, 1.0, 401));
  const auto profile = clock_current_profile(complete);
  double lo = profile[1], hi = profile[1];
  for (std::size_t j = 1; j + 1 < profile.size(); ++j) {
    lo = std::min(lo, profile[j]);
    hi = std::max(hi, profile[j]);
  }
  const double variation = (hi - lo) / std::abs(profile[1]);
  g.below(variation, 1e-8);

  // Forward branch on a fine clock grid: central differences are within
  // k^2 h^2 / 6 of the analytic current.
  auto psi0 = reconstruct(random_amps(), basis);
  psi0 *= 1.0 / psi0.norm();
  const auto amps = project(psi0, basis);
  const auto k = clock_wavenumbers(basis, clock);
  double expected = 0.0;
  for (std::size_t n = 0; n < k.size(); ++n) expected += std::norm(amps.coefficients[n]) * k[n];
  const auto forward = forward_solution(psi0, basis, clock, Grid(0.0, 0.1, 1001));
  const auto fp = clock_current_profile(forward);
  double forward_error = 0.0;
  for (std::size_t j = 1; j + 1 < fp.size(); ++j) forward_error = std::max(forward_error, std::abs(fp[j] - expected) / expected);
  g.below(forward_error, 1e-6);
  return "complete-integral variation " + fmt("%.2e", variation) + "; forward relative error " + fmt("%.2e", forward_error);
}

inline std::string exact_identity_order(Gate& g) {
  auto doc = builtin_config("convergence");
  doc["clock"]["E"] = json::array({100});
  std::vector<double> residual;
  for (int nodes : {1001, 2001, 4001, 8001}) {
    doc["run"]["clock_nodes"] = nodes;
    residual.push_back(run_scenario(parse_config(doc)).metrics.values("exact_residual").front());
  }
  const auto q = ratios(residual);
  for (double x : q) g.within(1.0 / x, 3.5, 4.5);
  std::vector<double> factors;
  for (double x : q) factors.push_back(1.0 / x);
  return "exact residual " + list(residual) + "; shrink factors " + list(factors);
}

inline std::string harmonic_clock(Gate& g) {
  const auto r = run_builtin("harmonic-clock");
  const double heis = r.metrics.values("heisenberg_error").front();
  const double res = r.metrics.values("alpha_residual").front();
  const double infid = r.metrics.values("alpha_infidelity").front();
  g.below(heis, 1e-12);
  g.below(res, 1e-5);
  g.below(infid, 1e-10);
  return "ladder identity " + fmt("%.2e", heis) + "; alpha residual " + fmt("%.2e", res) + "; alpha vs spectral " +
         fmt("%.2e", infid);
}

inline std::string mixed_states(Gate& g) {
  const auto r = run_builtin("mixed");
  const auto rms = r.metrics.values("von_neumann_rms");
  const auto q = ratios(rms);
  for (double x : q) g.within(x, 0.375, 0.625);
  double drift = 0.0, herm = 0.0, neg = 0.0, cons = 0.0;
  for (std::size_t i = 0; i < rms.size(); ++i) {
    drift = std::max(drift, r.metrics.values("trace_drift")[i]);
    herm = std::max(herm, r.metrics.values("hermiticity_error")[i]);
    neg = std::max(neg, r.metrics.values("negativity")[i]);
    cons = std::max(cons, r.metrics.values("pure_consistency")[i]);
  }
  g.below(drift, 1e-10);
  g.below(herm, 1e-10);
  g.below(neg, 1e-8);
  g.below(cons, 1e-10);
  return "residual ratios " + list(q) + "; trace drift " + fmt("%.1e", drift) + "; hermiticity " + fmt("%.1e", herm) +
         "; pure/mixed gap " + fmt("%.1e", cons);
}

inline std::string two_time(Gate& g) {
  const auto r = run_builtin("two-time");
  const auto rel = r.metrics.values("two_time_relative");
  const auto over = r.metrics.values("two_time_over_pure");
  for (double x : over) g.below(x, 5.0);
  g.holds(strictly_decreasing(rel));
  return "two-time residual " + list(rel) + "; over pure " + list(over);
}

inline std::string paraxial(Gate& g) {
  const auto r = run_builtin("paraxial");
  const double width = r.metrics.values("width_error").front();
  const double drift = r.metrics.values("norm_drift").front();
  const double agree = r.metrics.values("spectral_agreement").front();
  g.below(width, 0.01);
  g.below(drift, 1e-8);
  g.below(agree, 1e-10);
  return "width error " + fmt("%.2e", width) + "; norm drift " + fmt("%.1e", drift) + "; z/t agreement " +
         fmt("%.1e", agree);
}

/// p_0 solving p^2/2M + g p^4 + u = E by bisection.
inline double bisect_momentum(double mass, double g, double e, double u) {
  double lo = 0.0, hi = 1.0;
  auto h = [&](double p) { return p * p / (2.0 * mass) + g * p * p * p * p + u - e; };
  while (h(hi) < 0.0) hi *= 2.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (h(mid) < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

inline std::string wkb_clock(Gate& g) {
  const auto r = run_builtin("wkb-clock");
  const auto infid = r.metrics.values("terminal_infidelity");
  g.holds(strictly_decreasing(infid));
  g.below(infid.back(), 1e-3);

  bool zero = true;
  for (double v : r.metrics.values("correction_coefficient")) zero = zero && v == 0.0;
  const Grid qg(-1.0, 1.0, 41);
  auto u_of = [](double q) { return 0.2 * q * q - 0.1; };
  const PolynomialClock quadratic(1.0, 0.0, 5.0, qg, sample(qg, u_of));
  for (std::size_t j = 0; j < qg.size(); ++j) zero = zero && wkb_correction_coefficient(quadratic, qg.point(j)) == 0.0;
  g.holds(zero);

  // Quartic clock against finite differences of a bisection solve.
  const double mass = 1.0, quartic = 0.05, e = 5.0, d = 1e-4;
  const PolynomialClock clock(mass, quartic, e, qg, sample(qg, u_of));
  double worst = 0.0;
  for (std::size_t j = 1; j + 1 < qg.size(); j += 4) {
    const double q = qg.point(j);
    const double p = bisect_momentum(mass, quartic, e, u_of(q));
    const double dp = (bisect_momentum(mass, quartic, e, u_of(q + d)) - bisect_momentum(mass, quartic, e, u_of(q - d))) /
                      (2.0 * d);
    auto inv_speed = [&](double pp) { return (pp / mass + 4.0 * quartic * pp * pp * pp) / pp; };
    const double bracket = (inv_speed(p + d) - inv_speed(p - d)) / (2.0 * d);
    const double oracle = 0.5 * dp * p * bracket;
    const double got = wkb_correction_coefficient(clock, q);
    if (oracle != 0.0) worst = std::max(worst, std::abs(got - oracle) / std::abs(oracle));
  }
  g.below(worst, 1e-6);
  return "terminal fidelity " + fmt("%.6f", 1.0 - infid.back()) + " (infidelities " + list(infid) +
         "); quadratic coefficient zero: " + (zero ? "yes" : "no") + "; quartic relative error " + fmt("%.1e", worst);
}

inline std::string numerics_base(Gate& g) {
  double ortho = 0.0, resid = 0.0;
  for (std::uint64_t seed : {3u, 17u, 2024u}) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const std::size_t n = 40;
    ComplexMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) {
      m(i, i) = u(rng);
      for (std::size_t j = i + 1; j < n; ++j) {
        const double re = u(rng);
        const double im = u(rng);
        m(i, j) = cplx(re, im);
        m(j, i) = cplx(re, -im);
      }
    }
    const auto eig = eigh(m);
    const double scale = m.frobenius_norm();
    for (std::size_t a = 0; a < n; ++a) {
      const auto mv = m.apply(eig.vectors[a]);
      double r2 = 0.0;
      for (std::size_t i = 0; i < n; ++i) r2 += std::norm(mv[i] - eig.values[a] * eig.vectors[a][i]);
      resid = std::max(resid, std::sqrt(r2) / scale);
      for (std::size_t b = 0; b < n; ++b) {
        cplx dot{};
        for (std::size_t i = 0; i < n; ++i) dot += std::conj(eig.vectors[a][i]) * eig.vectors[b][i];
        ortho = std::max(ortho, std::abs(dot - (a == b ? 1.0 : 0.0)));
      }
    }
  }
  g.below(ortho, 1e-10);
  g.below(resid, 1e-9);

  auto error_at = [](std::size_t n) {
    const Grid grid(0.0, 10.0, n);
    const RealField zero(n, 0.0);
    const double h = grid.spacing();
    const auto chi = numerov_solve(grid, zero, 2.0, {cplx(1.0), cplx(std::cos(2.0 * h))});
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i) worst = std::max(worst, std::abs(chi[i] - std::cos(2.0 * grid.point(i))));
    return worst;
  };
  const std::vector<double> errs{error_at(101), error_at(201), error_at(401)};
  std::vector<double> factors;
  for (double x : ratios(errs)) factors.push_back(1.0 / x);
  for (double f : factors) g.within(f, 14.0, 18.0);
  return "orthonormality " + fmt("%.1e", ortho) + "; residual " + fmt("%.1e", resid) + "; Numerov factors " +
         list(factors);
}

}  // namespace detail

struct Criterion {
  int id;
  const char* name;
  std::string (*run)(detail::Gate&);
};

inline const std::vector<Criterion>& acceptance_criteria() {
  static const std::vector<Criterion> all{
      {1, "semiclassical convergence", detail::semiclassical_convergence},
      {2, "phase expansion bound", detail::phase_expansion_bound},
      {3, "clock current conservation", detail::current_conservation},
      {4, "exact envelope identity", detail::exact_identity_order},
      {5, "harmonic clock", detail::harmonic_clock},
      {6, "mixed states", detail::mixed_states},
      {7, "two-time structure", detail::two_time},
      {8, "paraxial propagation", detail::paraxial},
      {9, "WKB clock", detail::wkb_clock},
      {10, "numerics base rates", detail::numerics_base},
  };
  return all;
}

/// Runs every criterion in order. `zero_tolerance` names a criterion whose
/// tolerances are forced to 0, which must make it fail.
inline std::vector<CriterionResult> run_acceptance(std::optional<int> zero_tolerance = std::nullopt,
                                                   const std::function<void(const CriterionResult&)>& on_result = {}) {
  std::vector<CriterionResult> out;
  for (const auto& c : acceptance_criteria()) {
    CriterionResult res{c.id, c.name, false, "", 0.0};
    const auto start = std::chrono::steady_clock::now();
    detail::Gate gate{zero_tolerance == c.id ? 0.0 : 1.0};
    try {
      res.detail = c.run(gate);
      res.passed = gate.ok;
    } catch (const std::exception& e) {
      res.detail = std::string("error: ") + e.what();
    }
    res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (on_result) on_result(res);
    out.push_back(std::move(res));
  }
  return out;
}

inline std::string report_line(const CriterionResult& r) {
  char head[96];
  std::snprintf(head, sizeof head, "%s %2d %s (%.1fs): ", r.passed ? "PASS" : "FAIL", r.id, r.name.c_str(), r.seconds);
  return head + r.detail;
}

}  // namespace qclock::lab

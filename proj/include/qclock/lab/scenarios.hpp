#pragma once

// Named experiments. Each scenario produces one metric row per clock energy
// plus plot curves; nothing here touches the filesystem.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "qclock/lab/config.hpp"
#include "qclock/qclock.hpp"

namespace qclock::lab {

struct Curve {
  std::string name;
  std::vector<double> x, y;
};

struct MetricTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  std::size_t column(const std::string& name) const {
    for (std::size_t k = 0; k < columns.size(); ++k)
      if (columns[k] == name) return k;
    throw ValidationError("no metric column named " + name);
  }
  std::vector<double> values(const std::string& name) const {
    const std::size_t k = column(name);
    std::vector<double> out;
    for (const auto& r : rows) out.push_back(r[k]);
    return out;
  }
};

struct RunResult {
  std::string scenario;
  std::string primary_metric;
  MetricTable metrics;
  std::vector<Curve> curves;
  std::vector<std::string> warnings;
  json metadata = json::object();
  double wall_clock_seconds = 0.0;
};

/// A metric that broke its configured bound, or came out non-finite.
class MetricFailure : public std::runtime_error {
 public:
  MetricFailure(std::string metric, const std::string& msg) : std::runtime_error(msg), metric_(std::move(metric)) {}
  const std::string& metric() const { return metric_; }

 private:
  std::string metric_;
};

inline constexpr double kTailWarning = 1e-6;

/// Metric columns a config will produce, known before running.
inline std::vector<std::string> metric_columns(const ScenarioConfig& c) {
  const std::string& s = c.scenario;
  if (s == "convergence")
    return {"E", "terminal_error", "max_error", "terminal_infidelity", "exact_residual", "reduced_residual_relative",
            "max_semiclassicality", "current_error", "norm_drift"};
  if (s == "wkb-clock")
    return {"E", "terminal_infidelity", "max_infidelity", "terminal_error", "tau_final", "correction_coefficient"};
  if (s == "harmonic-clock") return {"E", "heisenberg_error", "alpha_residual", "alpha_infidelity"};
  if (s == "mixed")
    return {"E", "von_neumann_rms", "von_neumann_max", "trace_drift", "hermiticity_error", "negativity",
            "commutator_trace", "pure_consistency"};
  if (s == "two-time") return {"E", "two_time_relative", "pure_reduced_relative", "two_time_over_pure"};
  if (s == "paraxial") {
    std::vector<std::string> cols{"E", "z_max", "final_width", "norm_drift", "spectral_agreement"};
    if (c.system.potential.name == "zero" && c.modes.initial.kind == "gaussian") cols.insert(cols.begin() + 3, "width_error");
    return cols;
  }
  throw ValidationError("unknown scenario " + s);
}

inline std::string primary_metric(const ScenarioConfig& c) {
  const std::string& s = c.scenario;
  if (s == "convergence") return "terminal_error";
  if (s == "wkb-clock") return "terminal_infidelity";
  if (s == "harmonic-clock") return "alpha_residual";
  if (s == "mixed") return "von_neumann_rms";
  if (s == "two-time") return "two_time_relative";
  return "spectral_agreement";
}

/// Rejects tolerance keys that name no metric of this scenario.
inline void validate_tolerances(const ScenarioConfig& c) {
  const auto cols = metric_columns(c);
  for (const auto& [name, bound] : c.run.tolerances) {
    if (std::find(cols.begin(), cols.end(), name) == cols.end())
      throw ConfigError("run.tolerances." + name, "not a metric of scenario " + c.scenario);
    if (!(bound >= 0.0)) throw ConfigError("run.tolerances." + name, "must be nonnegative");
  }
}

namespace detail {

inline std::string label(const std::string& prefix, double e) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s E=%.6g", prefix.c_str(), e);
  return buf;
}

inline std::function<double(double)> potential_function(const PotentialSpec& p, double mass) {
  if (p.name == "constant") return [v = p.value](double) { return v; };
  if (p.name == "harmonic")
    return [k = mass * p.omega * p.omega, c = p.center](double q) { return 0.5 * k * (q - c) * (q - c); };
  if (p.name == "linear") return [s = p.slope](double q) { return s * q; };
  return [](double) { return 0.0; };
}

struct Setup {
  SystemSpec system;
  SpectralBasis basis;
  std::vector<WaveFunction> members;  // normalized, inside the retained span
  std::vector<double> weights;
  std::vector<double> energies;       // absolute clock energies
  double tail = 0.0;                  // relative out-of-span norm of the configured state
};

inline Setup prepare(const ScenarioConfig& c, RunResult& result) {
  const auto& sb = c.system;
  const Grid grid(sb.grid.min, sb.grid.max, sb.grid.n);
  auto system = make_system(grid, potential_function(sb.potential, sb.mass), sb.mass, sb.hbar);
  auto basis = spectral_basis(system, c.modes.count);
  Setup s{system, basis, {}, c.modes.initial.weights, {}, 0.0};

  const auto& init = c.modes.initial;
  std::vector<WaveFunction> raw;
  if (init.kind == "gaussian") {
    const double sigma = init.width, q0 = init.center, k0 = init.wavenumber;
    raw.push_back(make_wave_function(grid, [&](double q) {
      const double x = q - q0;
      return std::exp(-x * x / (4.0 * sigma * sigma)) * cplx(std::cos(k0 * q), std::sin(k0 * q));
    }));
  } else if (init.kind == "mode") {
    raw.push_back(basis.states[init.index]);
  } else {
    std::mt19937_64 rng(c.run.seed);
    std::normal_distribution<double> normal;
    for (std::size_t m = 0; m < init.members; ++m) {
      ModeAmplitudes a;
      for (std::size_t n = 0; n < basis.count(); ++n) {
        const double re = normal(rng);
        const double im = normal(rng);
        a.coefficients.emplace_back(re, im);
      }
      raw.push_back(reconstruct(a, basis));
    }
  }
  for (auto& w : raw) {
    const double norm = w.norm();
    if (!(norm > 0.0)) throw ValidationError("initial state vanishes on the grid");
    w *= 1.0 / norm;
    s.tail = std::max(s.tail, out_of_span_norm(w, basis));
    auto inside = reconstruct(project(w, basis), basis);
    const double kept = inside.norm();
    if (!(kept > 0.0)) throw ValidationError("initial state has no overlap with the retained modes");
    inside *= 1.0 / kept;
    s.members.push_back(std::move(inside));
  }
  result.metadata["tail_norm"] = s.tail;
  if (s.tail > kTailWarning) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "initial state has out-of-span tail %.3e of its norm; dynamics use the retained part",
                  s.tail);
    result.warnings.emplace_back(buf);
  }

  const double e_max = basis.energies.back();
  for (double e : c.clock.energies) s.energies.push_back(c.clock.energy_scale == "max_mode" ? e * e_max : e);
  result.metadata["max_mode_energy"] = e_max;
  result.metadata["clock_energies"] = s.energies;
  return s;
}

inline FreeClock free_clock(const ScenarioConfig& c, double e) { return FreeClock(c.clock.mass, e, c.system.hbar); }

inline Grid free_clock_grid(const ScenarioConfig& c, const FreeClock& clock) {
  return Grid(0.0, clock_position(clock, c.run.t_max), c.run.clock_nodes);
}

inline std::vector<ExtendedState> forward_members(const ScenarioConfig& c, const Setup& s, const FreeClock& clock,
                                                  const Grid& cg) {
  std::vector<ExtendedState> out;
  for (const auto& m : s.members) out.push_back(forward_solution(m, s.basis, clock, cg, ModeCutoff{c.modes.eta}));
  return out;
}

inline void run_convergence(const ScenarioConfig& c, const Setup& s, RunResult& r) {
  const auto& psi0 = s.members.front();
  const auto amps = project(psi0, s.basis);
  for (double e : s.energies) {
    const auto clock = free_clock(c, e);
    const auto cg = free_clock_grid(c, clock);
    const auto state = forward_solution(psi0, s.basis, clock, cg, ModeCutoff{c.modes.eta});
    const auto diag = envelope_and_residuals(state, clock);
    const auto env = envelope_trajectory(diag.envelope, clock);
    const auto ref = spectral_propagate(psi0, s.basis, env.parameters);
    const auto err = compare_trajectories(env, ref, PhaseMode::global_phase_removed);

    double max_error = 0.0;
    Curve curve{label("error", e), {}, {}};
    for (const auto& x : err) {
      max_error = std::max(max_error, x.l2_distance);
      curve.x.push_back(x.parameter);
      curve.y.push_back(x.l2_distance);
    }

    const auto k = clock_wavenumbers(s.basis, clock, ModeCutoff{c.modes.eta});
    double expected = 0.0;
    for (std::size_t n = 0; n < k.size(); ++n) expected += std::norm(amps.coefficients[n]) * k[n];
    // The carrier is usually far below the clock grid's resolution, so the
    // current is taken as k_0 n(q_c) plus the envelope's own (slow) current.
    const double k0 = clock.carrier_wavenumber();
    const auto slow = clock_current_profile(diag.envelope);
    const auto occupation = diag.envelope.slice_norms();
    double current_error = 0.0;
    for (std::size_t j = 1; j + 1 < slow.size(); ++j)
      current_error = std::max(current_error, std::abs(k0 * occupation[j] + slow[j] - expected) / expected);

    const auto norms = state.slice_norms();
    double drift = 0.0;
    for (double v : norms) drift = std::max(drift, std::abs(v - norms.front()));

    r.metrics.rows.push_back({e, err.back().l2_distance, max_error, err.back().infidelity, diag.exact_residual_norm,
                              diag.reduced_residual_norm / diag.hamiltonian_norm, diag.max_semiclassicality,
                              current_error, drift});
    r.curves.push_back(std::move(curve));
  }
}

inline PotentialClock potential_clock(const ScenarioConfig& c, double e) {
  const double q_max = c.run.t_max * std::sqrt(2.0 * e / c.clock.mass);
  const Grid cg(0.0, q_max, c.run.clock_nodes);
  const auto& p = c.clock.potential;
  auto u = sample(cg, [&](double q) {
    if (p.name == "constant") return p.value;
    if (p.name == "ramp") return p.fraction * e * q / q_max;
    return 0.0;
  });
  return PotentialClock(c.clock.mass, e, cg, std::move(u), c.system.hbar);
}

inline void run_wkb(const ScenarioConfig& c, const Setup& s, RunResult& r) {
  const auto& psi0 = s.members.front();
  for (double e : s.energies) {
    const auto clock = potential_clock(c, e);
    const auto state = wkb_extended_solution(psi0, s.basis, clock);
    const auto env = wkb_envelope_trajectory(state, clock);
    const auto tau = tau_propagate(psi0, s.basis, clock);
    const auto err = compare_trajectories(env, tau, PhaseMode::global_phase_removed);

    double worst = 0.0;
    Curve curve{label("infidelity", e), {}, {}};
    for (const auto& x : err) {
      worst = std::max(worst, x.infidelity);
      curve.x.push_back(x.parameter);
      curve.y.push_back(x.infidelity);
    }

    const PolynomialClock poly(c.clock.mass, c.clock.quartic, e, clock.grid, clock.potential, c.system.hbar);
    double coefficient = 0.0;
    for (std::size_t j = 1; j + 1 < clock.grid.size(); ++j)
      coefficient = std::max(coefficient, std::abs(wkb_correction_coefficient(poly, clock.grid.point(j))));

    const auto profile = wkb_momentum_and_tau(clock);
    r.metrics.rows.push_back(
        {e, err.back().infidelity, worst, err.back().l2_distance, profile.tau.back(), coefficient});
    r.curves.push_back(std::move(curve));
  }
}

inline double heisenberg_error(const HarmonicClock& hc, std::size_t dim) {
  const auto lad = ladder_matrices(hc, dim);
  auto lhs = commutator(lad.hamiltonian, lad.ladder.lowering);
  lhs *= cplx(0.0, 1.0 / hc.hbar);
  auto rhs = lad.ladder.lowering;
  rhs *= cplx(0.0, -hc.omega);
  return (lhs - rhs).max_abs();
}

inline void run_harmonic(const ScenarioConfig& c, const Setup& s, RunResult& r) {
  const HarmonicClock hc(c.clock.mass, c.clock.omega, c.system.hbar);
  const auto& psi0 = s.members.front();
  const auto amps = project(psi0, s.basis);
  const double hb = c.system.hbar;
  const double quantum = hb * hc.omega;
  const double step = c.run.alpha_step;
  const std::size_t samples = c.run.alpha_samples;
  const double heis = heisenberg_error(hc, c.run.ladder_dim);

  // Spectral evolution continued to complex tau.
  const TauEvolution psi_of_tau = [&](cplx tau) {
    ModeAmplitudes a = amps;
    for (std::size_t n = 0; n < s.basis.count(); ++n)
      a.coefficients[n] *= std::exp(cplx(0.0, -1.0) * s.basis.energies[n] * tau / hb);
    return reconstruct(a, s.basis);
  };

  std::vector<double> times(samples);
  for (std::size_t k = 0; k < samples; ++k)
    times[k] = samples == 1 ? 0.0 : c.run.t_max * static_cast<double>(k) / static_cast<double>(samples - 1);
  const auto ref = spectral_propagate(psi0, s.basis, times);

  for (double e : s.energies) {
    // hbar omega dPsi/dln(alpha) = (H - E - hbar omega/2) Psi, with ln(alpha) = i theta
    // so dPsi/dln(alpha) = -i dPsi/dtheta.
    double residual = 0.0;
    Curve curve{label("alpha_residual", e), {}, {}};
    for (std::size_t k = 0; k < samples; ++k) {
      const double theta = -hc.omega * times[k];
      auto at = [&](double th) { return alpha_clock_state_from_log(psi_of_tau, hc, e, cplx(0.0, th)).state; };
      const auto mid = at(theta);
      const auto plus = at(theta + step);
      const auto minus = at(theta - step);
      const auto h_psi = apply_hamiltonian(s.system, mid.values);
      ComplexField rhs(mid.values.size()), res(mid.values.size());
      for (std::size_t i = 0; i < rhs.size(); ++i) {
        rhs[i] = h_psi[i] - (e + 0.5 * quantum) * mid.values[i];
        const cplx d_theta = (plus.values[i] - minus.values[i]) / (2.0 * step);
        res[i] = quantum * cplx(0.0, -1.0) * d_theta - rhs[i];
      }
      const double rel = std::sqrt(norm_squared(res, s.system.grid) / norm_squared(rhs, s.system.grid));
      residual = std::max(residual, rel);
      curve.x.push_back(theta);
      curve.y.push_back(rel);
    }

    // Psi built directly in alpha on the unit circle, alpha = e^{-i omega t}.
    Trajectory alpha_route;
    alpha_route.parameters = times;
    for (double t : times) {
      const cplx log_alpha(0.0, -hc.omega * t);
      alpha_route.states.push_back(
          alpha_envelope(alpha_representation_solution(amps, s.basis, hc, e, log_alpha), hc, e, log_alpha));
    }
    double infid = 0.0;
    for (const auto& x : compare_trajectories(alpha_route, ref, PhaseMode::raw)) infid = std::max(infid, x.infidelity);

    r.metrics.rows.push_back({e, heis, residual, infid});
    r.curves.push_back(std::move(curve));
  }
}

inline void run_mixed(const ScenarioConfig& c, const Setup& s, RunResult& r) {
  const auto h = system_hamiltonian_matrix(s.system);
  for (double e : s.energies) {
    const auto clock = free_clock(c, e);
    const auto cg = free_clock_grid(c, clock);
    const auto states = forward_members(c, s, clock, cg);
    const auto rm = ensemble_density(states, s.weights);
    const auto family = conditional_family(rm);
    const auto vn = von_neumann_residual(family, h, clock, cg);

    const double t0 = family.front().trace();
    double drift = 0.0, herm = 0.0, negativity = 0.0;
    for (const auto& rho : family) {
      drift = std::max(drift, std::abs(rho.trace() - t0) / t0);
      herm = std::max(herm, rho.hermiticity_error());
      negativity = std::max(negativity, -rho.normalized().min_eigenvalue());
    }
    double trace_comm = 0.0;
    for (double t : vn.commutator_trace) trace_comm = std::max(trace_comm, t);

    // Same residual from the pure envelope of the first member alone.
    const std::vector<double> one{1.0};
    const auto single = ensemble_density(std::span(states).first(1), one);
    const auto mixed_one = von_neumann_residual(conditional_family(single), h, clock, cg);
    const auto diag = envelope_and_residuals(states.front(), clock);
    std::vector<ConditionalDensityMatrix> pure;
    const std::size_t nq = s.system.grid.size();
    for (std::size_t j = 0; j < cg.size(); ++j) {
      ComplexMatrix m(nq, nq);
      for (std::size_t a = 0; a < nq; ++a)
        for (std::size_t b = 0; b < nq; ++b) m(a, b) = diag.envelope(a, j) * std::conj(diag.envelope(b, j));
      pure.push_back({s.system.grid, j, cg.point(j), std::move(m)});
    }
    const auto from_pure = von_neumann_residual(pure, h, clock, cg);
    double consistency = 0.0;
    for (std::size_t k = 0; k < from_pure.relative.size(); ++k)
      consistency = std::max(consistency, std::abs(mixed_one.relative[k] - from_pure.relative[k]));

    Curve curve{label("von_neumann", e), {}, {}};
    for (std::size_t k = 0; k < vn.nodes.size(); ++k) {
      curve.x.push_back(cg.point(vn.nodes[k]));
      curve.y.push_back(vn.relative[k]);
    }
    r.metrics.rows.push_back(
        {e, vn.rms_relative(), vn.max_relative(), drift, herm, std::max(negativity, 0.0), trace_comm, consistency});
    r.curves.push_back(std::move(curve));
  }
}

inline void run_two_time(const ScenarioConfig& c, const Setup& s, RunResult& r) {
  Curve two{"two_time_relative", {}, {}}, pure_curve{"pure_reduced_relative", {}, {}};
  for (double e : s.energies) {
    const auto clock = free_clock(c, e);
    const auto cg = free_clock_grid(c, clock);
    const auto states = forward_members(c, s, clock, cg);
    const auto rm = ensemble_density(states, s.weights);
    const auto slow = slow_envelope_residuals(rm, clock);
    double pure = 0.0;
    for (const auto& st : states) {
      const auto d = envelope_and_residuals(st, clock);
      pure = std::max(pure, d.reduced_residual_norm / d.hamiltonian_norm);
    }
    r.metrics.rows.push_back({e, slow.relative_residual, pure, slow.relative_residual / pure});
    two.x.push_back(e);
    two.y.push_back(slow.relative_residual);
    pure_curve.x.push_back(e);
    pure_curve.y.push_back(pure);
  }
  r.curves.push_back(std::move(two));
  r.curves.push_back(std::move(pure_curve));
}

inline void run_paraxial(const ScenarioConfig& c, const Setup& s, RunResult& r) {
  const auto& psi0 = s.members.front();
  const bool closed_form = c.system.potential.name == "zero" && c.modes.initial.kind == "gaussian";
  const double m = c.system.mass, hb = c.system.hbar;
  const double sigma0 = position_width(psi0);
  for (double e : s.energies) {
    const double z_max = c.run.t_max * std::sqrt(2.0 * e / m);
    ParaxialSpec spec{s.system, e, Grid(0.0, z_max, c.run.clock_nodes), c.modes.count, {}};
    const auto beam = paraxial_propagate(spec, psi0);

    std::vector<double> times;
    for (double z : beam.parameters) times.push_back(spec.effective_time(z));
    const auto ref = spectral_propagate(psi0, s.basis, times);

    // Same static medium through the re-diagonalizing stepper.
    ParaxialSpec stepped = spec;
    stepped.potential_at = [&](double) { return s.system.potential; };
    const auto beam_stepped = paraxial_propagate(stepped, psi0);

    double agreement = 0.0;
    for (std::size_t k = 0; k < beam.size(); ++k) {
      agreement = std::max(agreement, (beam.states[k] - ref.states[k]).norm());
      agreement = std::max(agreement, (beam_stepped.states[k] - ref.states[k]).norm());
    }

    double drift = 0.0, width_error = 0.0;
    Curve widths{label("width", e), {}, {}}, law{label("width_closed_form", e), {}, {}};
    for (std::size_t k = 0; k < beam.size(); ++k) {
      drift = std::max(drift, std::abs(beam.states[k].norm() - 1.0));
      const double w = position_width(beam.states[k]);
      widths.x.push_back(beam.parameters[k]);
      widths.y.push_back(w);
      if (closed_form) {
        const double spread = hb * times[k] / (2.0 * m * sigma0 * sigma0);
        const double expected = sigma0 * std::sqrt(1.0 + spread * spread);
        width_error = std::max(width_error, std::abs(w - expected) / expected);
        law.x.push_back(beam.parameters[k]);
        law.y.push_back(expected);
      }
    }
    std::vector<double> row{e, z_max, widths.y.back()};
    if (closed_form) row.push_back(width_error);
    row.push_back(drift);
    row.push_back(agreement);
    r.metrics.rows.push_back(std::move(row));
    r.curves.push_back(std::move(widths));
    if (closed_form) r.curves.push_back(std::move(law));
  }
}

}  // namespace detail

/// Runs one config. Throws ConfigError for schema problems, qclock errors for
/// numerical ones; does not enforce tolerances (see check_tolerances).
inline RunResult run_scenario(const ScenarioConfig& c) {
  validate_tolerances(c);
  const auto start = std::chrono::steady_clock::now();
  RunResult r;
  r.scenario = c.scenario;
  r.primary_metric = primary_metric(c);
  r.metrics.columns = metric_columns(c);
  const auto setup = detail::prepare(c, r);

  if (c.scenario == "convergence") detail::run_convergence(c, setup, r);
  else if (c.scenario == "wkb-clock") detail::run_wkb(c, setup, r);
  else if (c.scenario == "harmonic-clock") detail::run_harmonic(c, setup, r);
  else if (c.scenario == "mixed") detail::run_mixed(c, setup, r);
  else if (c.scenario == "two-time") detail::run_two_time(c, setup, r);
  else detail::run_paraxial(c, setup, r);

  r.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

/// Throws MetricFailure for the first non-finite metric or breached bound.
inline void check_tolerances(const ScenarioConfig& c, const RunResult& r) {
  for (std::size_t i = 0; i < r.metrics.rows.size(); ++i)
    for (std::size_t k = 0; k < r.metrics.columns.size(); ++k)
      if (!std::isfinite(r.metrics.rows[i][k]))
        throw MetricFailure(r.metrics.columns[k], "metric " + r.metrics.columns[k] + " is not finite in row " +
                                                      std::to_string(i));
  for (const auto& [name, bound] : c.run.tolerances) {
    const std::size_t k = r.metrics.column(name);
    for (std::size_t i = 0; i < r.metrics.rows.size(); ++i) {
      const double v = r.metrics.rows[i][k];
      if (!(v <= bound)) {
        char buf[200];
        std::snprintf(buf, sizeof buf, "metric %s = %.6e exceeds tolerance %.6e (row %zu)", name.c_str(), v, bound, i);
        throw MetricFailure(name, buf);
      }
    }
  }
}

}  // namespace qclock::lab

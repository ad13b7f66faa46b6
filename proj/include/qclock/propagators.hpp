#pragma once

// Reference evolutions (spectral, clock-evened tau, paraxial z) and
// trajectory comparison.

#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "qclock/clock_models.hpp"
#include "qclock/extended_solver.hpp"
#include "qclock/quantum_core.hpp"

namespace qclock {

enum class ParameterKind { time, tau, clock_coordinate, z };

inline const char* to_string(ParameterKind k) {
  switch (k) {
    case ParameterKind::time: return "t";
    case ParameterKind::tau: return "tau";
    case ParameterKind::clock_coordinate: return "q_c";
    case ParameterKind::z: return "z";
  }
  return "?";
}

struct Trajectory {
  ParameterKind kind = ParameterKind::time;
  std::vector<double> parameters;
  std::vector<WaveFunction> states;
  double tail_norm = 0.0;  // out-of-span part of the initial state, if any

  std::size_t size() const { return parameters.size(); }

  void validate() const {
    require_size(states.size(), parameters.size(), "trajectory states");
    for (std::size_t k = 1; k < parameters.size(); ++k)
      if (!(parameters[k] > parameters[k - 1]))
        throw ValidationError("trajectory parameters must be strictly increasing (sample " + std::to_string(k) + ")");
    for (std::size_t k = 1; k < states.size(); ++k) require_same_grid(states[0].grid, states[k].grid, "trajectory");
  }
};

namespace detail {

inline WaveFunction evolve_amplitudes(const ModeAmplitudes& amps, const SpectralBasis& basis, double t) {
  ModeAmplitudes evolved = amps;
  const double hb = basis.system.hbar;
  for (std::size_t n = 0; n < basis.count(); ++n) evolved.coefficients[n] *= phase(-basis.energies[n] * t / hb);
  return reconstruct(evolved, basis);
}

}  // namespace detail

/// psi(t) = sum_n c_n e^{-i E_n t / hbar} psi_n.
inline Trajectory spectral_propagate(const WaveFunction& psi0, const SpectralBasis& basis, std::span<const double> times) {
  const auto amps = project(psi0, basis);
  Trajectory traj;
  traj.kind = ParameterKind::time;
  traj.parameters.assign(times.begin(), times.end());
  traj.tail_norm = (psi0 - reconstruct(amps, basis)).norm();
  traj.states.reserve(times.size());
  for (double t : times) traj.states.push_back(detail::evolve_amplitudes(amps, basis, t));
  traj.validate();
  return traj;
}

/// Spectral evolution to tau(q_c); samples are labelled by q_c.
inline Trajectory tau_propagate(const WaveFunction& psi0, const SpectralBasis& basis, const PotentialClock& clock) {
  const auto profile = wkb_momentum_and_tau(clock);
  auto traj = spectral_propagate(psi0, basis, profile.tau);
  traj.kind = ParameterKind::clock_coordinate;
  traj.parameters = clock.grid.points();
  return traj;
}

/// Transverse system, longitudinal energy E, and z sampling. When
/// `potential_at` is set it supplies U(x, z) and overrides the static
/// transverse potential.
struct ParaxialSpec {
  SystemSpec transverse;
  double energy;
  Grid z_grid;
  std::size_t mode_count;
  std::function<RealField(double)> potential_at;

  /// t(z) = z sqrt(m / 2E).
  double effective_time(double z) const { return z * std::sqrt(transverse.mass / (2.0 * energy)); }
};

/// Evolves the transverse state along z via i hbar sqrt(2E/m) dpsi/dz = H psi.
/// Static potentials use one spectral basis; z-dependent potentials are held
/// constant over each z step (midpoint value) and re-diagonalized.
inline Trajectory paraxial_propagate(const ParaxialSpec& spec, const WaveFunction& psi0) {
  if (!(spec.energy > 0.0)) throw ValidationError("paraxial longitudinal energy must be positive");
  require_same_grid(psi0.grid, spec.transverse.grid, "paraxial initial state");
  const auto zs = spec.z_grid.points();

  if (!spec.potential_at) {
    const auto basis = spectral_basis(spec.transverse, spec.mode_count);
    std::vector<double> times(zs.size());
    for (std::size_t k = 0; k < zs.size(); ++k) times[k] = spec.effective_time(zs[k]);
    auto traj = spectral_propagate(psi0, basis, times);
    traj.kind = ParameterKind::z;
    traj.parameters = zs;
    return traj;
  }

  Trajectory traj;
  traj.kind = ParameterKind::z;
  traj.parameters = zs;
  traj.states.reserve(zs.size());
  traj.states.push_back(psi0);
  WaveFunction current = psi0;
  for (std::size_t k = 0; k + 1 < zs.size(); ++k) {
    SystemSpec step = spec.transverse;
    step.potential = spec.potential_at(0.5 * (zs[k] + zs[k + 1]));
    const auto basis = spectral_basis(step, spec.mode_count);
    const double dt = spec.effective_time(zs[k + 1]) - spec.effective_time(zs[k]);
    const auto amps = project(current, basis);
    if (k == 0) traj.tail_norm = (current - reconstruct(amps, basis)).norm();
    current = detail::evolve_amplitudes(amps, basis, dt);
    traj.states.push_back(current);
  }
  traj.validate();
  return traj;
}

enum class PhaseMode { raw, global_phase_removed };

struct SampleError {
  double parameter;
  double l2_distance;
  double infidelity;  // 1 - |<a|b>| / (|a| |b|)
};

inline std::vector<SampleError> compare_trajectories(const Trajectory& a, const Trajectory& b, PhaseMode mode) {
  if (a.size() != b.size()) throw ValidationError("trajectories have different sample counts");
  std::vector<SampleError> out;
  out.reserve(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (a.parameters[k] != b.parameters[k])
      throw ValidationError("trajectory parameters differ at sample " + std::to_string(k));
    const auto& sa = a.states[k];
    const auto& sb = b.states[k];
    require_same_grid(sa.grid, sb.grid, "compare_trajectories");
    const cplx ov = overlap(sa, sb);
    const double na = sa.norm();
    const double nb = sb.norm();
    const double denom = na * nb;
    const double infid = denom > 0.0 ? 1.0 - std::abs(ov) / denom : (na == nb ? 0.0 : 1.0);

    WaveFunction aligned = sb;
    if (mode == PhaseMode::global_phase_removed && std::abs(ov) > 0.0) aligned *= std::conj(ov) / std::abs(ov);
    out.push_back({a.parameters[k], (sa - aligned).norm(), infid});
  }
  return out;
}

/// Clock slices of an envelope relabelled by t = q_c sqrt(M/2E).
inline Trajectory envelope_trajectory(const ExtendedState& envelope, const FreeClock& clock) {
  Trajectory traj;
  traj.kind = ParameterKind::time;
  for (std::size_t j = 0; j < envelope.clock_size(); ++j) {
    traj.parameters.push_back(time_map(clock, envelope.clock_grid().point(j)));
    traj.states.push_back(envelope.slice_state(j));
  }
  traj.validate();
  return traj;
}

/// Slow envelope of a potential-clock state: Psi sqrt(p_0(q_c)/p_0(q0))
/// e^{-i integral_{q0}^{q_c} p_0 / hbar}, labelled by q_c.
inline Trajectory wkb_envelope_trajectory(const ExtendedState& state, const PotentialClock& clock) {
  if (!(state.clock() == record_of(clock))) throw ValidationError("state was not built with this potential clock");
  const auto profile = wkb_momentum_and_tau(clock);
  const auto action = cumulative_integral<double>(profile.momentum, clock.grid);
  Trajectory traj;
  traj.kind = ParameterKind::clock_coordinate;
  for (std::size_t j = 0; j < state.clock_size(); ++j) {
    auto psi = state.slice_state(j);
    psi *= std::sqrt(profile.momentum[j] / profile.momentum[0]) * detail::phase(-action[j] / clock.hbar);
    traj.parameters.push_back(clock.grid.point(j));
    traj.states.push_back(std::move(psi));
  }
  traj.validate();
  return traj;
}

/// Position spread sqrt(<x^2> - <x>^2) of |psi|^2.
inline double position_width(const WaveFunction& psi) {
  const auto& g = psi.grid;
  const auto w = g.trapezoid_weights();
  double m0 = 0.0, m1 = 0.0, m2 = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double p = std::norm(psi.values[i]) * w[i];
    const double x = g.point(i);
    m0 += p;
    m1 += p * x;
    m2 += p * x * x;
  }
  const double mean = m1 / m0;
  return std::sqrt(std::max(0.0, m2 / m0 - mean * mean));
}

}  // namespace qclock

#pragma once

// Clock degrees of freedom: free particle, particle in a potential (WKB),
// polynomial-in-momentum clock, and the harmonic oscillator in the
// alpha (coherent-state) representation.

#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "qclock/numerics.hpp"
#include "qclock/quantum_core.hpp"

namespace qclock {

namespace detail {
inline void require_positive(double x, const char* what) {
  if (!(x > 0.0) || !std::isfinite(x)) throw ValidationError(std::string(what) + " must be positive and finite");
}
}  // namespace detail

/// H_c = p_c^2 / 2M.
struct FreeClock {
  double mass;
  double energy;
  double hbar = 1.0;

  FreeClock(double m, double e, double hb = 1.0) : mass(m), energy(e), hbar(hb) {
    detail::require_positive(mass, "clock mass");
    detail::require_positive(energy, "clock total energy");
    detail::require_positive(hbar, "hbar");
  }

  /// sqrt(2ME)/hbar, wavenumber of the fast carrier.
  double carrier_wavenumber() const { return std::sqrt(2.0 * mass * energy) / hbar; }
  /// sqrt(2E/M).
  double speed() const { return std::sqrt(2.0 * energy / mass); }

  friend bool operator==(const FreeClock&, const FreeClock&) = default;
};

/// k_n = sqrt(2M(E - E_n))/hbar; throws EvanescentMode when E_n >= E.
inline double clock_wavenumber(const FreeClock& clock, double mode_energy) {
  if (!(mode_energy < clock.energy)) throw EvanescentMode(mode_energy, clock.energy);
  return std::sqrt(2.0 * clock.mass * (clock.energy - mode_energy)) / clock.hbar;
}

/// t = q_c sqrt(M/2E).
inline double time_map(const FreeClock& clock, double q_c) { return q_c * std::sqrt(clock.mass / (2.0 * clock.energy)); }

inline double clock_position(const FreeClock& clock, double t) { return t * std::sqrt(2.0 * clock.energy / clock.mass); }

/// H_c = p_c^2/2M + U_c(q_c) sampled on the clock grid.
struct PotentialClock {
  double mass;
  double energy;
  Grid grid;
  RealField potential;
  double hbar = 1.0;

  PotentialClock(double m, double e, Grid g, RealField u, double hb = 1.0)
      : mass(m), energy(e), grid(std::move(g)), potential(std::move(u)), hbar(hb) {
    detail::require_positive(mass, "clock mass");
    detail::require_positive(hbar, "hbar");
    require_size(potential.size(), grid.size(), "clock potential");
  }

  /// First node where E - U_c <= 0, if any.
  std::optional<std::size_t> first_forbidden_node(double energy_offset = 0.0) const {
    for (std::size_t i = 0; i < potential.size(); ++i)
      if (!(energy - energy_offset - potential[i] > 0.0)) return i;
    return std::nullopt;
  }
};

struct WkbProfile {
  RealField momentum;     // p_0(q_c)
  RealField tau;          // clock-evened time, zero at the first node
  RealField clock_speed;  // dH_c/dp_c at p_0
};

inline WkbProfile wkb_momentum_and_tau(const PotentialClock& clock) {
  if (auto bad = clock.first_forbidden_node())
    throw ValidationError("potential clock not classically allowed at node " + std::to_string(*bad) +
                          " (q_c = " + std::to_string(clock.grid.point(*bad)) + ")");
  const std::size_t n = clock.grid.size();
  WkbProfile out;
  out.momentum.resize(n);
  out.clock_speed.resize(n);
  RealField integrand(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double kinetic = clock.energy - clock.potential[i];
    out.momentum[i] = std::sqrt(2.0 * clock.mass * kinetic);
    out.clock_speed[i] = out.momentum[i] / clock.mass;
    integrand[i] = 1.0 / std::sqrt(kinetic);
  }
  out.tau = cumulative_integral<double>(integrand, clock.grid);
  const double pref = std::sqrt(clock.mass / 2.0);
  for (auto& t : out.tau) t *= pref;
  return out;
}

/// H_c = p^2/2M + g p^4 + U_c(q_c).
struct PolynomialClock {
  double mass;
  double quartic;
  double energy;
  Grid grid;
  RealField potential;
  double hbar = 1.0;

  PolynomialClock(double m, double g, double e, Grid gr, RealField u, double hb = 1.0)
      : mass(m), quartic(g), energy(e), grid(std::move(gr)), potential(std::move(u)), hbar(hb) {
    detail::require_positive(mass, "clock mass");
    detail::require_positive(hbar, "hbar");
    require_size(potential.size(), grid.size(), "clock potential");
  }

  double hamiltonian(double p, double u) const { return p * p / (2.0 * mass) + quartic * p * p * p * p + u; }
  double dh_dp(double p) const { return p / mass + 4.0 * quartic * p * p * p; }

  /// Positive root of H_c(p, q_c) = E for potential value u.
  std::optional<double> momentum(double u) const {
    const double w = energy - u;
    const double a = 1.0 / (2.0 * mass);
    if (quartic == 0.0) {
      if (!(w > 0.0)) return std::nullopt;
      return std::sqrt(w / a);
    }
    const double disc = a * a + 4.0 * quartic * w;
    if (disc < 0.0) return std::nullopt;
    const double s = 2.0 * w / (a + std::sqrt(disc));  // p^2, rationalized root
    if (!(s > 0.0)) return std::nullopt;
    return std::sqrt(s);
  }
};

/// (1/2) (dp_0/dq_c) p_0 d/dp_c[(1/p_c) dH_c/dp_c] at p_c = p_0(q_c).
/// q_c must be a node of the clock grid; dU_c/dq_c comes from second-order
/// differences of the sampled potential.
inline double wkb_correction_coefficient(const PolynomialClock& clock, double q_c) {
  const auto node = clock.grid.node_of(q_c);
  if (!node) throw ValidationError("wkb_correction_coefficient: q_c = " + std::to_string(q_c) + " is not a clock grid node");
  const std::size_t i = *node;
  const auto p0 = clock.momentum(clock.potential[i]);
  if (!p0) throw ValidationError("no real clock momentum at q_c = " + std::to_string(q_c));

  const auto& u = clock.potential;
  const std::size_t n = u.size();
  const double h = clock.grid.spacing();
  double du;
  if (i == 0)
    du = (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * h);
  else if (i + 1 == n)
    du = (3.0 * u[n - 1] - 4.0 * u[n - 2] + u[n - 3]) / (2.0 * h);
  else
    du = (u[i + 1] - u[i - 1]) / (2.0 * h);

  const double p = *p0;
  const double dp0_dq = -du / clock.dh_dp(p);
  // (1/p) dH/dp = 1/M + 4 g p^2, so its p-derivative is 8 g p.
  const double bracket = 8.0 * clock.quartic * p;
  return 0.5 * dp0_dq * p * bracket;
}

// ---------------------------------------------------------------------------
// Harmonic-oscillator clock

struct HarmonicClock {
  double mass;
  double omega;
  double hbar = 1.0;

  HarmonicClock(double m, double w, double hb = 1.0) : mass(m), omega(w), hbar(hb) {
    detail::require_positive(mass, "clock mass");
    detail::require_positive(omega, "clock frequency");
    detail::require_positive(hbar, "hbar");
  }
};

struct LadderPair {
  ComplexMatrix lowering;  // a
  ComplexMatrix raising;   // a^dagger
};

struct LadderSystem {
  LadderPair ladder;
  ComplexMatrix hamiltonian;  // hbar omega (a^dagger a + 1/2), diagonal
};

/// Truncated Fock-space ladder operators: a|n> = sqrt(n)|n-1>.
inline LadderSystem ladder_matrices(const HarmonicClock& clock, std::size_t dim) {
  if (dim < 2) throw ValidationError("ladder truncation must be >= 2");
  ComplexMatrix a(dim, dim);
  for (std::size_t i = 0; i + 1 < dim; ++i) a(i, i + 1) = std::sqrt(static_cast<double>(i + 1));
  ComplexMatrix h(dim, dim);
  for (std::size_t i = 0; i < dim; ++i) h(i, i) = clock.hbar * clock.omega * (static_cast<double>(i) + 0.5);
  LadderSystem out{{a, a.adjoint()}, std::move(h)};
  return out;
}

/// tau = i Log(alpha) / omega on the principal branch.
inline cplx tau_of_alpha(const HarmonicClock& clock, cplx alpha) {
  if (alpha == cplx{}) throw DomainError("alpha must be nonzero");
  return cplx(0.0, 1.0) * std::log(alpha) / clock.omega;
}

inline cplx tau_of_log_alpha(const HarmonicClock& clock, cplx log_alpha) {
  return cplx(0.0, 1.0) * log_alpha / clock.omega;
}

/// log(alpha) with the phase accumulated continuously along a path, so a
/// sweep that winds around the origin never jumps across the branch cut.
inline std::vector<cplx> continuous_log_path(std::span<const cplx> alphas) {
  std::vector<cplx> out;
  out.reserve(alphas.size());
  double prev_phase = 0.0;
  for (std::size_t k = 0; k < alphas.size(); ++k) {
    if (alphas[k] == cplx{}) throw DomainError("alpha path passes through zero");
    double phase = std::arg(alphas[k]);
    if (k > 0) {
      const double two_pi = 2.0 * std::numbers::pi;
      phase += two_pi * std::round((prev_phase - phase) / two_pi);
    }
    out.emplace_back(std::log(std::abs(alphas[k])), phase);
    prev_phase = phase;
  }
  return out;
}

struct AlphaClockValue {
  WaveFunction state;  // Psi(q, alpha)
  cplx tau;
  bool on_unit_circle;
};

using TauEvolution = std::function<WaveFunction(cplx)>;

/// Psi = psi(q, tau(alpha)) * alpha^(-E/(hbar omega) - 1/2) for a given log(alpha).
inline AlphaClockValue alpha_clock_state_from_log(const TauEvolution& psi_of_tau, const HarmonicClock& clock,
                                                  double energy, cplx log_alpha) {
  const cplx tau = tau_of_log_alpha(clock, log_alpha);
  WaveFunction psi = psi_of_tau(tau);
  const double exponent = -energy / (clock.hbar * clock.omega) - 0.5;
  psi *= std::exp(exponent * log_alpha);
  return {std::move(psi), tau, std::abs(log_alpha.real()) <= 1e-12};
}

inline AlphaClockValue alpha_clock_state(const TauEvolution& psi_of_tau, const HarmonicClock& clock, double energy,
                                         cplx alpha) {
  if (alpha == cplx{}) throw DomainError("alpha must be nonzero");
  return alpha_clock_state_from_log(psi_of_tau, clock, energy, std::log(alpha));
}

/// Solution of hbar omega dPsi/dln(alpha) = (H - E - hbar omega/2) Psi built
/// directly in alpha: Psi = sum_n c_n alpha^((E_n - E)/(hbar omega) - 1/2) psi_n.
inline WaveFunction alpha_representation_solution(const ModeAmplitudes& amps, const SpectralBasis& basis,
                                                  const HarmonicClock& clock, double energy, cplx log_alpha) {
  require_size(amps.size(), basis.count(), "alpha solution amplitudes");
  ModeAmplitudes evolved = amps;
  const double quantum = clock.hbar * clock.omega;
  for (std::size_t n = 0; n < basis.count(); ++n) {
    const double exponent = (basis.energies[n] - energy) / quantum - 0.5;
    evolved.coefficients[n] *= std::exp(exponent * log_alpha);
  }
  return reconstruct(evolved, basis);
}

/// Removes the alpha^(-E/(hbar omega) - 1/2) factor: psi = Psi * alpha^(E/(hbar omega) + 1/2).
inline WaveFunction alpha_envelope(const WaveFunction& extended, const HarmonicClock& clock, double energy,
                                   cplx log_alpha) {
  WaveFunction out = extended;
  out *= std::exp((energy / (clock.hbar * clock.omega) + 0.5) * log_alpha);
  return out;
}

}  // namespace qclock

#pragma once

// Exact solutions Psi(q, q_c) of the extended stationary equation
// (H + H_c) Psi = E Psi, and the diagnostics that measure how closely their
// slow envelopes follow a time-dependent Schroedinger equation.

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "qclock/clock_models.hpp"
#include "qclock/numerics.hpp"
#include "qclock/quantum_core.hpp"

namespace qclock {

/// Which clock generated an extended state.
struct ClockRecord {
  std::string kind;  // "free", "potential"
  double mass = 0.0;
  double energy = 0.0;
  double hbar = 1.0;

  friend bool operator==(const ClockRecord&, const ClockRecord&) = default;
};

inline ClockRecord record_of(const FreeClock& c) { return {"free", c.mass, c.energy, c.hbar}; }
inline ClockRecord record_of(const PotentialClock& c) { return {"potential", c.mass, c.energy, c.hbar}; }

/// Complex field on system grid x clock grid, stored clock-slice by
/// clock-slice: value(i, j) lives at j * n_q + i.
class ExtendedState {
 public:
  ExtendedState(SystemSpec system, Grid clock_grid, ClockRecord clock, std::vector<double> mode_energies)
      : system_(std::move(system)),
        clock_grid_(std::move(clock_grid)),
        clock_(std::move(clock)),
        mode_energies_(std::move(mode_energies)),
        values_(system_.grid.size() * clock_grid_.size()) {}

  const SystemSpec& system() const { return system_; }
  const Grid& system_grid() const { return system_.grid; }
  const Grid& clock_grid() const { return clock_grid_; }
  const ClockRecord& clock() const { return clock_; }
  const std::vector<double>& mode_energies() const { return mode_energies_; }

  std::size_t system_size() const { return system_.grid.size(); }
  std::size_t clock_size() const { return clock_grid_.size(); }

  cplx& operator()(std::size_t i, std::size_t j) { return values_[j * system_size() + i]; }
  const cplx& operator()(std::size_t i, std::size_t j) const { return values_[j * system_size() + i]; }

  std::span<cplx> slice(std::size_t j) { return {values_.data() + j * system_size(), system_size()}; }
  std::span<const cplx> slice(std::size_t j) const { return {values_.data() + j * system_size(), system_size()}; }

  WaveFunction slice_state(std::size_t j) const {
    auto s = slice(j);
    return WaveFunction(system_grid(), ComplexField(s.begin(), s.end()));
  }

  /// n(q_c) = integral |Psi(q, q_c)|^2 dq at every clock node.
  RealField slice_norms() const {
    RealField out(clock_size());
    for (std::size_t j = 0; j < clock_size(); ++j) out[j] = norm_squared(slice(j), system_grid());
    return out;
  }

  std::vector<cplx>& data() { return values_; }
  const std::vector<cplx>& data() const { return values_; }

 private:
  SystemSpec system_;
  Grid clock_grid_;
  ClockRecord clock_;
  std::vector<double> mode_energies_;
  std::vector<cplx> values_;
};

/// Retained modes must satisfy E_n <= eta * E when a free clock is attached.
struct ModeCutoff {
  double eta = 0.5;
};

/// k_n for every retained mode, enforcing E_n < E and E_n <= eta E.
inline std::vector<double> clock_wavenumbers(const SpectralBasis& basis, const FreeClock& clock, ModeCutoff cutoff = {}) {
  std::vector<double> k;
  k.reserve(basis.count());
  for (std::size_t n = 0; n < basis.count(); ++n) k.push_back(clock_wavenumber(clock, basis.energies[n]));
  for (std::size_t n = 0; n < basis.count(); ++n) {
    const double en = basis.energies[n];
    if (en > cutoff.eta * clock.energy)
      throw ValidationError("mode " + std::to_string(n) + " with E_n = " + std::to_string(en) +
                            " exceeds the cutoff eta*E = " + std::to_string(cutoff.eta * clock.energy));
  }
  return k;
}

namespace detail {

/// Psi(., q_c_j) = sum_n coeff_n(j) psi_n for every clock node.
template <class CoefficientsAt>
ExtendedState synthesize(const SpectralBasis& basis, const Grid& clock_grid, ClockRecord record,
                         CoefficientsAt&& coefficients_at) {
  ExtendedState state(basis.system, clock_grid, std::move(record), basis.energies);
  const std::size_t nq = basis.grid().size();
  std::vector<cplx> coeff(basis.count());
  for (std::size_t j = 0; j < clock_grid.size(); ++j) {
    coefficients_at(clock_grid.point(j), coeff);
    auto out = state.slice(j);
    for (std::size_t n = 0; n < basis.count(); ++n) {
      const cplx c = coeff[n];
      if (c == cplx{}) continue;
      const auto& mode = basis.states[n].values;
      for (std::size_t i = 0; i < nq; ++i) out[i] += c * mode[i];
    }
  }
  return state;
}

inline cplx phase(double theta) { return {std::cos(theta), std::sin(theta)}; }

}  // namespace detail

/// Psi = sum_n psi_n(q) [A_n e^{i k_n q_c} + B_n e^{-i k_n q_c}].
inline ExtendedState complete_integral(const ModeAmplitudes& forward, const ModeAmplitudes& backward,
                                       const SpectralBasis& basis, const FreeClock& clock, const Grid& clock_grid,
                                       ModeCutoff cutoff = {}) {
  require_size(forward.size(), basis.count(), "complete_integral A");
  require_size(backward.size(), basis.count(), "complete_integral B");
  const auto k = clock_wavenumbers(basis, clock, cutoff);
  return detail::synthesize(basis, clock_grid, record_of(clock), [&](double qc, std::vector<cplx>& c) {
    for (std::size_t n = 0; n < k.size(); ++n) {
      const cplx e = detail::phase(k[n] * qc);
      c[n] = forward.coefficients[n] * e + backward.coefficients[n] * std::conj(e);
    }
  });
}

/// Cosine/sine solution fixed by Psi(., 0) = psi0 and dPsi/dq_c(., 0) = slope0.
inline ExtendedState initial_value_solution(const WaveFunction& psi0, const WaveFunction& slope0,
                                            const SpectralBasis& basis, const FreeClock& clock,
                                            const Grid& clock_grid, ModeCutoff cutoff = {}) {
  const auto a = project(psi0, basis);
  const auto b = project(slope0, basis);
  const auto k = clock_wavenumbers(basis, clock, cutoff);
  return detail::synthesize(basis, clock_grid, record_of(clock), [&](double qc, std::vector<cplx>& c) {
    for (std::size_t n = 0; n < k.size(); ++n)
      c[n] = a.coefficients[n] * std::cos(k[n] * qc) + b.coefficients[n] * (std::sin(k[n] * qc) / k[n]);
  });
}

/// Initial slope that selects the clock moving toward +q_c: coefficients i k_n c_n.
inline WaveFunction forward_slope(const WaveFunction& psi0, const SpectralBasis& basis, const FreeClock& clock,
                                  ModeCutoff cutoff = {}) {
  auto amps = project(psi0, basis);
  const auto k = clock_wavenumbers(basis, clock, cutoff);
  for (std::size_t n = 0; n < k.size(); ++n) amps.coefficients[n] *= cplx(0.0, k[n]);
  return reconstruct(amps, basis);
}

/// Psi = sum_n c_n psi_n(q) e^{i k_n q_c}, c = project(psi0).
inline ExtendedState forward_solution(const WaveFunction& psi0, const SpectralBasis& basis, const FreeClock& clock,
                                      const Grid& clock_grid, ModeCutoff cutoff = {}) {
  const auto amps = project(psi0, basis);
  ModeAmplitudes zero{std::vector<cplx>(basis.count())};
  return complete_integral(amps, zero, basis, clock, clock_grid, cutoff);
}

/// d^order Psi / dq_c^order along the clock axis, same layout as the state.
inline ComplexField clock_derivative(const ExtendedState& state, int order) {
  const std::size_t nq = state.system_size();
  const std::size_t nc = state.clock_size();
  if (nc < 5) throw ValidationError("clock grid needs at least 5 nodes");
  ComplexField out(nq * nc);
  ComplexField column(nc);
  for (std::size_t i = 0; i < nq; ++i) {
    for (std::size_t j = 0; j < nc; ++j) column[j] = state(i, j);
    const auto d = derivative_field(column, state.clock_grid(), order);
    for (std::size_t j = 0; j < nc; ++j) out[j * nq + i] = d.values[j];
  }
  return out;
}

/// Im integral conj(Psi) dPsi/dq_c dq at every clock node; zero at the two
/// one-sided boundary nodes.
inline RealField clock_current_profile(const ExtendedState& state) {
  const auto d = clock_derivative(state, 1);
  const std::size_t nq = state.system_size();
  RealField out(state.clock_size(), 0.0);
  for (std::size_t j = 1; j + 1 < state.clock_size(); ++j) {
    std::span<const cplx> dj(d.data() + j * nq, nq);
    out[j] = inner_product(dj, state.slice(j), state.system_grid()).imag();
  }
  return out;
}

inline double clock_current(const ExtendedState& state, std::size_t j) {
  const std::size_t nc = state.clock_size();
  if (nc < 5) throw ValidationError("clock grid needs at least 5 nodes");
  if (j == 0 || j + 1 >= nc)
    throw ValidationError("clock_current: node " + std::to_string(j) + " is not an interior clock node");
  const std::size_t nq = state.system_size();
  const double inv = 1.0 / (2.0 * state.clock_grid().spacing());
  ComplexField d(nq);
  for (std::size_t i = 0; i < nq; ++i) d[i] = (state(i, j + 1) - state(i, j - 1)) * inv;
  return inner_product(d, state.slice(j), state.system_grid()).imag();
}

/// Clock nodes dropped at each edge when forming residual norms.
inline constexpr std::size_t kResidualEdgeNodes = 2;

/// sqrt(sum_j h_c integral |f(q, q_c_j)|^2 dq) over interior clock nodes.
inline double interior_norm(std::span<const cplx> field, const Grid& system_grid, const Grid& clock_grid) {
  const std::size_t nq = system_grid.size();
  const std::size_t nc = clock_grid.size();
  require_size(field.size(), nq * nc, "interior_norm");
  double s = 0.0;
  for (std::size_t j = kResidualEdgeNodes; j + kResidualEdgeNodes < nc; ++j)
    s += norm_squared(field.subspan(j * nq, nq), system_grid);
  return std::sqrt(s * clock_grid.spacing());
}

struct EnvelopeDiagnostics {
  ExtendedState envelope;          // psi = Psi e^{-i sqrt(2ME) q_c / hbar}
  RealField semiclassicality;      // |dpsi/dq_c| / (|psi| 2 sqrt(2ME)/hbar)
  ComplexField exact_residual;     // i hbar v psi' + (hbar^2/2M) psi'' - H psi
  ComplexField reduced_residual;   // i hbar v psi' - H psi
  ComplexField hamiltonian_term;   // H psi
  double exact_residual_norm = 0.0;
  double reduced_residual_norm = 0.0;
  double hamiltonian_norm = 0.0;
  double max_semiclassicality = 0.0;
};

inline constexpr double kEnvelopeFloor = 1e-12;

inline ExtendedState strip_carrier(const ExtendedState& state, const FreeClock& clock) {
  ExtendedState env = state;
  const double k0 = clock.carrier_wavenumber();
  for (std::size_t j = 0; j < state.clock_size(); ++j) {
    const cplx c = detail::phase(-k0 * state.clock_grid().point(j));
    for (auto& z : env.slice(j)) z *= c;
  }
  return env;
}

inline ExtendedState restore_carrier(const ExtendedState& envelope, const FreeClock& clock) {
  ExtendedState out = envelope;
  const double k0 = clock.carrier_wavenumber();
  for (std::size_t j = 0; j < envelope.clock_size(); ++j) {
    const cplx c = detail::phase(k0 * envelope.clock_grid().point(j));
    for (auto& z : out.slice(j)) z *= c;
  }
  return out;
}

inline void require_free_clock(const ExtendedState& state, const FreeClock& clock) {
  if (!(state.clock() == record_of(clock))) throw ValidationError("state was not built with this free clock");
}

inline EnvelopeDiagnostics envelope_and_residuals(const ExtendedState& state, const FreeClock& clock) {
  require_free_clock(state, clock);
  const std::size_t nq = state.system_size();
  const std::size_t nc = state.clock_size();

  EnvelopeDiagnostics out{strip_carrier(state, clock), {}, {}, {}, {}};
  const auto& env = out.envelope;
  const auto d1 = clock_derivative(env, 1);
  const auto d2 = clock_derivative(env, 2);

  const double hb = clock.hbar;
  const double drift = hb * clock.speed();  // hbar sqrt(2E/M)
  const double kinetic = hb * hb / (2.0 * clock.mass);
  const double ratio_scale = 2.0 * clock.carrier_wavenumber();

  out.semiclassicality.resize(nq * nc);
  out.exact_residual.resize(nq * nc);
  out.reduced_residual.resize(nq * nc);
  out.hamiltonian_term.resize(nq * nc);
  const cplx i_drift(0.0, drift);
  for (std::size_t j = 0; j < nc; ++j) {
    const auto hpsi = apply_hamiltonian(state.system(), env.slice(j));
    for (std::size_t i = 0; i < nq; ++i) {
      const std::size_t idx = j * nq + i;
      const cplx psi = env(i, j);
      out.hamiltonian_term[idx] = hpsi[i];
      out.reduced_residual[idx] = i_drift * d1[idx] - hpsi[i];
      out.exact_residual[idx] = out.reduced_residual[idx] + kinetic * d2[idx];
      out.semiclassicality[idx] = std::abs(d1[idx]) / (std::max(std::abs(psi), kEnvelopeFloor) * ratio_scale);
    }
  }

  const auto& sg = state.system_grid();
  const auto& cg = state.clock_grid();
  out.exact_residual_norm = interior_norm(out.exact_residual, sg, cg);
  out.reduced_residual_norm = interior_norm(out.reduced_residual, sg, cg);
  out.hamiltonian_norm = interior_norm(out.hamiltonian_term, sg, cg);
  for (std::size_t j = kResidualEdgeNodes; j + kResidualEdgeNodes < nc; ++j)
    for (std::size_t i = 0; i < nq; ++i)
      out.max_semiclassicality = std::max(out.max_semiclassicality, out.semiclassicality[j * nq + i]);
  return out;
}

/// Per-mode exact clock factors for a potential clock, integrated with
/// Numerov from WKB seeds at the first clock node:
/// chi_n ~ sqrt(p_n(q0)/p_n(q_c)) exp(i integral_{q0}^{q_c} p_n / hbar),
/// p_n = sqrt(2M(E - E_n - U_c)). psi0 is the subsystem state at q0.
inline ExtendedState wkb_extended_solution(const WaveFunction& psi0, const SpectralBasis& basis,
                                           const PotentialClock& clock) {
  const auto amps = project(psi0, basis);
  const Grid& cg = clock.grid;
  const std::size_t nc = cg.size();
  const double h = cg.spacing();

  std::vector<ComplexField> chi(basis.count());
  for (std::size_t n = 0; n < basis.count(); ++n) {
    const double en = basis.energies[n];
    if (auto bad = clock.first_forbidden_node(en))
      throw ValidationError("mode " + std::to_string(n) + " (E_n = " + std::to_string(en) +
                            ") is not classically allowed at clock node " + std::to_string(*bad));
    if (amps.coefficients[n] == cplx{}) continue;
    const double p0 = std::sqrt(2.0 * clock.mass * (clock.energy - en - clock.potential[0]));
    const double p1 = std::sqrt(2.0 * clock.mass * (clock.energy - en - clock.potential[1]));
    const double phase1 = 0.5 * h * (p0 + p1) / clock.hbar;
    const std::array<cplx, 2> seeds{cplx(1.0), std::sqrt(p0 / p1) * detail::phase(phase1)};
    chi[n] = numerov_solve(cg, clock.potential, clock.energy - en, seeds, {clock.mass, clock.hbar});
  }

  ExtendedState state(basis.system, cg, record_of(clock), basis.energies);
  const std::size_t nq = basis.grid().size();
  for (std::size_t j = 0; j < nc; ++j) {
    auto out = state.slice(j);
    for (std::size_t n = 0; n < basis.count(); ++n) {
      if (chi[n].empty()) continue;
      const cplx c = amps.coefficients[n] * chi[n][j];
      const auto& mode = basis.states[n].values;
      for (std::size_t i = 0; i < nq; ++i) out[i] += c * mode[i];
    }
  }
  return state;
}

}  // namespace qclock

#pragma once

// Subsystem Hamiltonians on a grid and their spectral bases.

#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "qclock/numerics.hpp"

namespace qclock {

/// Non-clock part of the extended Hamiltonian: -(hbar^2/2m) d^2/dq^2 + V(q),
/// discretized with Dirichlet ends.
struct SystemSpec {
  Grid grid;
  RealField potential;
  double mass = 1.0;
  double hbar = 1.0;

  void validate() const {
    require_size(potential.size(), grid.size(), "system potential");
    if (!(mass > 0.0)) throw ValidationError("system mass must be positive");
    if (!(hbar > 0.0)) throw ValidationError("hbar must be positive");
    for (std::size_t i = 0; i < potential.size(); ++i)
      if (!std::isfinite(potential[i]))
        throw ValidationError("system potential not finite at node " + std::to_string(i));
  }
};

inline SystemSpec make_system(const Grid& grid, const std::function<double(double)>& potential, double mass = 1.0,
                              double hbar = 1.0) {
  SystemSpec s{grid, sample(grid, potential), mass, hbar};
  s.validate();
  return s;
}

struct WaveFunction {
  Grid grid;
  ComplexField values;

  WaveFunction(Grid g, ComplexField v) : grid(std::move(g)), values(std::move(v)) {
    require_size(values.size(), grid.size(), "wave function");
  }
  explicit WaveFunction(const Grid& g) : grid(g), values(g.size()) {}

  double norm_squared() const { return qclock::norm_squared(values, grid); }
  double norm() const { return std::sqrt(norm_squared()); }

  WaveFunction& operator*=(cplx s) {
    for (auto& z : values) z *= s;
    return *this;
  }
  WaveFunction& operator+=(const WaveFunction& o) {
    require_same_grid(grid, o.grid, "wave function sum");
    for (std::size_t i = 0; i < values.size(); ++i) values[i] += o.values[i];
    return *this;
  }
  WaveFunction& operator-=(const WaveFunction& o) {
    require_same_grid(grid, o.grid, "wave function difference");
    for (std::size_t i = 0; i < values.size(); ++i) values[i] -= o.values[i];
    return *this;
  }
  friend WaveFunction operator*(cplx s, WaveFunction w) { return w *= s; }
  friend WaveFunction operator+(WaveFunction a, const WaveFunction& b) { return a += b; }
  friend WaveFunction operator-(WaveFunction a, const WaveFunction& b) { return a -= b; }
};

inline WaveFunction make_wave_function(const Grid& grid, const std::function<cplx(double)>& fn) {
  WaveFunction w(grid);
  for (std::size_t i = 0; i < grid.size(); ++i) w.values[i] = fn(grid.point(i));
  return w;
}

/// <a|b> = integral of conj(a) b.
inline cplx overlap(const WaveFunction& a, const WaveFunction& b) {
  require_same_grid(a.grid, b.grid, "overlap");
  return inner_product(b.values, a.values, a.grid);
}

/// Lowest `count` eigenpairs of a SystemSpec, trapezoid-normalized.
struct SpectralBasis {
  SystemSpec system;
  std::vector<double> energies;
  std::vector<WaveFunction> states;

  std::size_t count() const { return energies.size(); }
  const Grid& grid() const { return system.grid; }
};

/// Expansion coefficients aligned with a SpectralBasis.
struct ModeAmplitudes {
  std::vector<cplx> coefficients;

  std::size_t size() const { return coefficients.size(); }
  double norm_squared() const {
    double s = 0.0;
    for (const auto& c : coefficients) s += std::norm(c);
    return s;
  }
};

/// H restricted to interior nodes: (n-2) x (n-2), real symmetric tridiagonal.
inline HermitianMatrix dirichlet_hamiltonian(const SystemSpec& spec) {
  spec.validate();
  const std::size_t n = spec.grid.size() - 2;
  const double h = spec.grid.spacing();
  const double t = spec.hbar * spec.hbar / (2.0 * spec.mass * h * h);
  HermitianMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    m(i, i) = 2.0 * t + spec.potential[i + 1];
    if (i + 1 < n) {
      m(i, i + 1) = -t;
      m(i + 1, i) = -t;
    }
  }
  return m;
}

/// H on the full grid with zero rows/columns at the pinned end nodes.
inline HermitianMatrix system_hamiltonian_matrix(const SystemSpec& spec) {
  const auto inner = dirichlet_hamiltonian(spec);
  const std::size_t n = spec.grid.size();
  HermitianMatrix m(n, n);
  for (std::size_t i = 0; i < inner.rows(); ++i)
    for (std::size_t j = 0; j < inner.cols(); ++j) m(i + 1, j + 1) = inner(i, j);
  return m;
}

/// H psi on the full grid; end nodes are treated as zero and return zero.
inline ComplexField apply_hamiltonian(const SystemSpec& spec, std::span<const cplx> psi) {
  const std::size_t n = spec.grid.size();
  require_size(psi.size(), n, "apply_hamiltonian");
  const double h = spec.grid.spacing();
  const double t = spec.hbar * spec.hbar / (2.0 * spec.mass * h * h);
  ComplexField out(n);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const cplx left = i > 1 ? psi[i - 1] : cplx{};
    const cplx right = i + 2 < n ? psi[i + 1] : cplx{};
    out[i] = (2.0 * t + spec.potential[i]) * psi[i] - t * (left + right);
  }
  return out;
}

inline SpectralBasis spectral_basis(const SystemSpec& spec, std::size_t count) {
  spec.validate();
  const std::size_t interior = spec.grid.size() - 2;
  if (count == 0 || count > interior)
    throw ValidationError("spectral_basis: count must be in [1, " + std::to_string(interior) + "], got " +
                          std::to_string(count));
  const auto dec = eigh(dirichlet_hamiltonian(spec));
  const double scale = 1.0 / std::sqrt(spec.grid.spacing());

  SpectralBasis basis{spec, {}, {}};
  basis.energies.assign(dec.values.begin(), dec.values.begin() + static_cast<std::ptrdiff_t>(count));
  basis.states.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    WaveFunction psi(spec.grid);
    for (std::size_t i = 0; i < interior; ++i) psi.values[i + 1] = dec.vectors[k][i] * scale;
    basis.states.push_back(std::move(psi));
  }
  return basis;
}

/// c_n = integral psi(q) conj(psi_n(q)) dq.
inline ModeAmplitudes project(const WaveFunction& state, const SpectralBasis& basis) {
  require_same_grid(state.grid, basis.grid(), "project");
  ModeAmplitudes amps;
  amps.coefficients.reserve(basis.count());
  for (const auto& mode : basis.states) amps.coefficients.push_back(inner_product(state.values, mode.values, state.grid));
  return amps;
}

inline WaveFunction reconstruct(const ModeAmplitudes& amps, const SpectralBasis& basis) {
  require_size(amps.size(), basis.count(), "reconstruct amplitudes");
  WaveFunction out(basis.grid());
  for (std::size_t k = 0; k < basis.count(); ++k) {
    const cplx c = amps.coefficients[k];
    if (c == cplx{}) continue;
    const auto& mode = basis.states[k].values;
    for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] += c * mode[i];
  }
  return out;
}

/// Norm of the part of `state` outside the retained span.
inline double out_of_span_norm(const WaveFunction& state, const SpectralBasis& basis) {
  return (state - reconstruct(project(state, basis), basis)).norm();
}

}  // namespace qclock

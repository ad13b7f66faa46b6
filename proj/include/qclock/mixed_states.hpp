#pragma once

// Density matrices on the extended (system x clock) grid, their
// clock-diagonal conditional slices, clock-reading collapse and averages.
//
// Grid delta convention: delta(q - q_k) on a grid is the indicator of node k
// divided by its trapezoid weight w_k (= h away from the ends). Kernel
// contractions integrate with the same weights, so a delta kernel returns
// the sampled density-matrix entry.

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "qclock/extended_solver.hpp"
#include "qclock/numerics.hpp"

namespace qclock {

inline constexpr std::size_t kMaxCompositeDim = 4096;
inline constexpr double kResidualFloor = 1e-14;

/// R(q, q_c, q', q_c') as a dense matrix over the composite index
/// x = j * n_q + i (clock node j, system node i).
class ExtendedDensityMatrix {
 public:
  ExtendedDensityMatrix(SystemSpec system, Grid clock_grid, ClockRecord clock, ComplexMatrix values,
                        std::vector<double> ensemble_weights)
      : system_(std::move(system)),
        clock_grid_(std::move(clock_grid)),
        clock_(std::move(clock)),
        values_(std::move(values)),
        ensemble_weights_(std::move(ensemble_weights)) {
    const std::size_t d = dim();
    if (d > kMaxCompositeDim)
      throw ResourceError("composite dimension " + std::to_string(d) + " exceeds cap " + std::to_string(kMaxCompositeDim));
    if (values_.rows() != d || values_.cols() != d) throw ValidationError("density matrix shape mismatch");
  }

  const SystemSpec& system() const { return system_; }
  const Grid& system_grid() const { return system_.grid; }
  const Grid& clock_grid() const { return clock_grid_; }
  const ClockRecord& clock() const { return clock_; }
  const ComplexMatrix& values() const { return values_; }
  const std::vector<double>& ensemble_weights() const { return ensemble_weights_; }

  std::size_t system_size() const { return system_.grid.size(); }
  std::size_t clock_size() const { return clock_grid_.size(); }
  std::size_t dim() const { return system_size() * clock_size(); }
  std::size_t composite(std::size_t i, std::size_t j) const { return j * system_size() + i; }

  const cplx& operator()(std::size_t i, std::size_t j, std::size_t i2, std::size_t j2) const {
    return values_(composite(i, j), composite(i2, j2));
  }

  /// Quadrature weight of every composite node.
  RealField composite_weights() const {
    const auto wq = system_grid().trapezoid_weights();
    const auto wc = clock_grid_.trapezoid_weights();
    RealField w(dim());
    for (std::size_t j = 0; j < clock_size(); ++j)
      for (std::size_t i = 0; i < system_size(); ++i) w[composite(i, j)] = wq[i] * wc[j];
    return w;
  }

  /// integral R(x, x) dx.
  double trace() const {
    const auto w = composite_weights();
    double t = 0.0;
    for (std::size_t x = 0; x < dim(); ++x) t += w[x] * values_(x, x).real();
    return t;
  }

  /// Tr(R^2) / Tr(R)^2 with quadrature weights.
  double purity() const {
    const auto w = composite_weights();
    double t2 = 0.0;
    for (std::size_t x = 0; x < dim(); ++x)
      for (std::size_t y = 0; y < dim(); ++y) t2 += w[x] * w[y] * std::norm(values_(x, y));
    const double t = trace();
    return t2 / (t * t);
  }

  double hermiticity_error() const { return qclock::hermiticity_error(values_); }

  /// Smallest eigenvalue of the weighted operator W^1/2 R W^1/2. Dense
  /// eigensolve; meant for small grids.
  double min_eigenvalue() const {
    const auto w = composite_weights();
    ComplexMatrix m(dim(), dim());
    for (std::size_t x = 0; x < dim(); ++x)
      for (std::size_t y = 0; y < dim(); ++y) m(x, y) = std::sqrt(w[x] * w[y]) * values_(x, y);
    for (std::size_t x = 0; x < dim(); ++x) {
      for (std::size_t y = x + 1; y < dim(); ++y) {
        const cplx avg = 0.5 * (m(x, y) + std::conj(m(y, x)));
        m(x, y) = avg;
        m(y, x) = std::conj(avg);
      }
      m(x, x) = m(x, x).real();
    }
    return eigh(m).values.front();
  }

 private:
  SystemSpec system_;
  Grid clock_grid_;
  ClockRecord clock_;
  ComplexMatrix values_;
  std::vector<double> ensemble_weights_;
};

/// R = sum_k w_k Psi_k Psi_k^dagger over states sharing one clock and grid.
inline ExtendedDensityMatrix ensemble_density(std::span<const ExtendedState> states, std::span<const double> weights) {
  if (states.empty()) throw ValidationError("ensemble needs at least one state");
  require_size(weights.size(), states.size(), "ensemble weights");
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw ValidationError("ensemble weights must be nonnegative");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-10) throw ValidationError("ensemble weights sum to " + std::to_string(total) + ", not 1");
  const auto& first = states.front();
  for (const auto& s : states) {
    require_same_grid(s.system_grid(), first.system_grid(), "ensemble system grid");
    require_same_grid(s.clock_grid(), first.clock_grid(), "ensemble clock grid");
    if (!(s.clock() == first.clock())) throw ValidationError("ensemble members were built with different clocks");
  }
  const std::size_t d = first.data().size();
  if (d > kMaxCompositeDim)
    throw ResourceError("composite dimension " + std::to_string(d) + " exceeds cap " + std::to_string(kMaxCompositeDim));

  ComplexMatrix r(d, d);
  for (std::size_t k = 0; k < states.size(); ++k) {
    if (weights[k] == 0.0) continue;
    const auto& psi = states[k].data();
    for (std::size_t x = 0; x < d; ++x) {
      const cplx a = weights[k] * psi[x];
      auto row = r.row(x);
      for (std::size_t y = 0; y < d; ++y) row[y] += a * std::conj(psi[y]);
    }
  }
  return ExtendedDensityMatrix(first.system(), first.clock_grid(), first.clock(), std::move(r),
                               std::vector<double>(weights.begin(), weights.end()));
}

struct SlowEnvelopeResult {
  ComplexMatrix slow;            // R_s = e^{-i sqrt(2ME)(q_c - q_c')/hbar} R
  double residual_norm = 0.0;    // |[H,R_s] - i hbar v (d_qc + d_qc') R_s| on interior clock pairs
  double commutator_norm = 0.0;  // |[H,R_s]| on the same entries
  double relative_residual = 0.0;
};

/// Two-time residual of the slow part of R. Frobenius norms over entries
/// whose clock nodes are both interior.
inline SlowEnvelopeResult slow_envelope_residuals(const ExtendedDensityMatrix& r, const FreeClock& clock) {
  if (!(r.clock() == record_of(clock))) throw ValidationError("density matrix was not built with this free clock");
  const std::size_t nq = r.system_size();
  const std::size_t nc = r.clock_size();
  const std::size_t d = r.dim();
  if (d > kMaxCompositeDim) throw ResourceError("two-time residual: composite dimension above cap");
  if (nc < 5) throw ValidationError("two-time residual needs at least 5 clock nodes");

  const auto& cg = r.clock_grid();
  const double k0 = clock.carrier_wavenumber();
  std::vector<cplx> carrier(nc);
  for (std::size_t j = 0; j < nc; ++j) carrier[j] = detail::phase(-k0 * cg.point(j));

  SlowEnvelopeResult out{ComplexMatrix(d, d)};
  ComplexMatrix& s = out.slow;
  for (std::size_t j = 0; j < nc; ++j)
    for (std::size_t i = 0; i < nq; ++i) {
      const std::size_t x = r.composite(i, j);
      for (std::size_t j2 = 0; j2 < nc; ++j2) {
        const cplx c = carrier[j] * std::conj(carrier[j2]);
        for (std::size_t i2 = 0; i2 < nq; ++i2) {
          const std::size_t y = r.composite(i2, j2);
          s(x, y) = c * r.values()(x, y);
        }
      }
    }

  // [H, R_s]: H acts on the system part of the row index, and from the right
  // on the system part of the column index (H real symmetric).
  ComplexMatrix comm(d, d);
  ComplexField buf(nq);
  for (std::size_t y = 0; y < d; ++y)
    for (std::size_t j = 0; j < nc; ++j) {
      for (std::size_t i = 0; i < nq; ++i) buf[i] = s(r.composite(i, j), y);
      const auto hb = apply_hamiltonian(r.system(), buf);
      for (std::size_t i = 0; i < nq; ++i) comm(r.composite(i, j), y) = hb[i];
    }
  for (std::size_t x = 0; x < d; ++x)
    for (std::size_t j2 = 0; j2 < nc; ++j2) {
      for (std::size_t i2 = 0; i2 < nq; ++i2) buf[i2] = s(x, r.composite(i2, j2));
      const auto bh = apply_hamiltonian(r.system(), buf);
      for (std::size_t i2 = 0; i2 < nq; ++i2) comm(x, r.composite(i2, j2)) -= bh[i2];
    }

  const double h = cg.spacing();
  const cplx i_drift(0.0, clock.hbar * clock.speed());
  const std::size_t lo = kResidualEdgeNodes;
  const std::size_t hi = nc - kResidualEdgeNodes;
  double res2 = 0.0, comm2 = 0.0;
  for (std::size_t j = lo; j < hi; ++j)
    for (std::size_t i = 0; i < nq; ++i)
      for (std::size_t j2 = lo; j2 < hi; ++j2)
        for (std::size_t i2 = 0; i2 < nq; ++i2) {
          const std::size_t x = r.composite(i, j);
          const std::size_t y = r.composite(i2, j2);
          const cplx d_row = (s(r.composite(i, j + 1), y) - s(r.composite(i, j - 1), y)) / (2.0 * h);
          const cplx d_col = (s(x, r.composite(i2, j2 + 1)) - s(x, r.composite(i2, j2 - 1))) / (2.0 * h);
          const cplx res = comm(x, y) - i_drift * (d_row + d_col);
          res2 += std::norm(res);
          comm2 += std::norm(comm(x, y));
        }
  out.residual_norm = std::sqrt(res2);
  out.commutator_norm = std::sqrt(comm2);
  out.relative_residual = out.residual_norm / (out.commutator_norm + kResidualFloor);
  return out;
}

/// rho(q, q') at one clock reading: the clock-diagonal block of R.
struct ConditionalDensityMatrix {
  Grid grid;
  std::size_t clock_node = 0;
  double clock_value = 0.0;
  ComplexMatrix values;  // rho(q_i, q_k)

  double trace() const {
    const auto w = grid.trapezoid_weights();
    double t = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) t += w[i] * values(i, i).real();
    return t;
  }

  ConditionalDensityMatrix normalized() const {
    const double t = trace();
    if (!(t > 0.0)) throw ValidationError("conditional density matrix has non-positive trace");
    ConditionalDensityMatrix out = *this;
    out.values *= 1.0 / t;
    return out;
  }

  double hermiticity_error() const { return qclock::hermiticity_error(values); }

  /// Smallest eigenvalue of W^1/2 rho W^1/2.
  double min_eigenvalue() const {
    const auto w = grid.trapezoid_weights();
    const std::size_t n = grid.size();
    ComplexMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < n; ++k) m(i, k) = std::sqrt(w[i] * w[k]) * values(i, k);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = i + 1; k < n; ++k) {
        const cplx avg = 0.5 * (m(i, k) + std::conj(m(k, i)));
        m(i, k) = avg;
        m(k, i) = std::conj(avg);
      }
      m(i, i) = m(i, i).real();
    }
    return eigh(m).values.front();
  }
};

inline std::size_t require_clock_node(const Grid& clock_grid, double q_c) {
  const auto node = clock_grid.node_of(q_c);
  if (!node) throw ValidationError("clock reading " + std::to_string(q_c) + " is not a clock grid node");
  return *node;
}

inline ConditionalDensityMatrix conditional_density(const ExtendedDensityMatrix& r, std::size_t clock_node) {
  if (clock_node >= r.clock_size()) throw ValidationError("clock node out of range");
  const std::size_t nq = r.system_size();
  ConditionalDensityMatrix rho{r.system_grid(), clock_node, r.clock_grid().point(clock_node), ComplexMatrix(nq, nq)};
  for (std::size_t i = 0; i < nq; ++i)
    for (std::size_t k = 0; k < nq; ++k) rho.values(i, k) = r(i, clock_node, k, clock_node);
  return rho;
}

inline ConditionalDensityMatrix conditional_density_at(const ExtendedDensityMatrix& r, double q_c) {
  return conditional_density(r, require_clock_node(r.clock_grid(), q_c));
}

inline std::vector<ConditionalDensityMatrix> conditional_family(const ExtendedDensityMatrix& r) {
  std::vector<ConditionalDensityMatrix> out;
  out.reserve(r.clock_size());
  for (std::size_t j = 0; j < r.clock_size(); ++j) out.push_back(conditional_density(r, j));
  return out;
}

/// Post-measurement state after reading the clock at node `clock_node`:
/// R_m = delta(q_c0 - q_c) delta(q_c0 - q_c') rho(q, q', q_c0). The deltas
/// are kept symbolic through `delta_weight` = 1 / w_c(node).
struct CollapsedDensity {
  std::size_t clock_node;
  double clock_value;
  double delta_weight;
  ConditionalDensityMatrix rho;

  /// R_m sampled on the composite grid: one nonzero clock block.
  ExtendedDensityMatrix to_extended(const ExtendedDensityMatrix& like) const {
    const std::size_t nq = like.system_size();
    ComplexMatrix m(like.dim(), like.dim());
    const double dd = delta_weight * delta_weight;
    for (std::size_t i = 0; i < nq; ++i)
      for (std::size_t k = 0; k < nq; ++k)
        m(like.composite(i, clock_node), like.composite(k, clock_node)) = dd * rho.values(i, k);
    return ExtendedDensityMatrix(like.system(), like.clock_grid(), like.clock(), std::move(m), like.ensemble_weights());
  }
};

inline CollapsedDensity measurement_collapse(const ExtendedDensityMatrix& r, std::size_t clock_node) {
  auto rho = conditional_density(r, clock_node);
  const double w = r.clock_grid().trapezoid_weights()[clock_node];
  return {clock_node, rho.clock_value, 1.0 / w, std::move(rho)};
}

inline CollapsedDensity measurement_collapse_at(const ExtendedDensityMatrix& r, double q_c) {
  return measurement_collapse(r, require_clock_node(r.clock_grid(), q_c));
}

struct VonNeumannResidual {
  std::vector<std::size_t> nodes;  // interior clock nodes evaluated
  RealField relative;              // |i hbar v drho/dq_c - [H,rho]|_F / (|[H,rho]|_F + floor)
  RealField absolute;
  RealField commutator_trace;      // |Tr [H, rho]| at each evaluated node

  double max_relative() const { return relative.empty() ? 0.0 : *std::max_element(relative.begin(), relative.end()); }
  double rms_relative() const {
    double s = 0.0;
    for (double r : relative) s += r * r;
    return relative.empty() ? 0.0 : std::sqrt(s / static_cast<double>(relative.size()));
  }
};

/// Residual of i hbar sqrt(2E/M) drho/dq_c = [H, rho] along a family of
/// conditional density matrices sampled on every node of `clock_grid`.
inline VonNeumannResidual von_neumann_residual(std::span<const ConditionalDensityMatrix> family,
                                               const ComplexMatrix& hamiltonian, const FreeClock& clock,
                                               const Grid& clock_grid) {
  const std::size_t nc = family.size();
  if (nc < 5) throw ValidationError("von Neumann residual needs at least 5 clock nodes");
  require_size(nc, clock_grid.size(), "conditional family");
  const std::size_t nq = family.front().grid.size();
  if (hamiltonian.rows() != nq || hamiltonian.cols() != nq) throw ValidationError("Hamiltonian shape mismatch");
  for (std::size_t j = 0; j < nc; ++j) {
    require_same_grid(family[j].grid, family.front().grid, "conditional family");
    if (family[j].values.rows() != nq || family[j].values.cols() != nq)
      throw ValidationError("conditional density shape mismatch");
  }

  const cplx i_drift(0.0, clock.hbar * clock.speed());
  const double inv2h = 1.0 / (2.0 * clock_grid.spacing());
  VonNeumannResidual out;
  for (std::size_t j = kResidualEdgeNodes; j + kResidualEdgeNodes < nc; ++j) {
    const auto comm = commutator(hamiltonian, family[j].values);
    double res2 = 0.0;
    for (std::size_t a = 0; a < nq; ++a)
      for (std::size_t b = 0; b < nq; ++b) {
        const cplx drho = (family[j + 1].values(a, b) - family[j - 1].values(a, b)) * inv2h;
        res2 += std::norm(i_drift * drho - comm(a, b));
      }
    const double cn = comm.frobenius_norm();
    out.nodes.push_back(j);
    out.absolute.push_back(std::sqrt(res2));
    out.relative.push_back(std::sqrt(res2) / (cn + kResidualFloor));
    out.commutator_trace.push_back(std::abs(comm.trace()));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Averages

/// Probability density of finding the system at node i0 with clock reading j0.
inline double probability(const ExtendedDensityMatrix& r, std::size_t i0, std::size_t j0) {
  if (i0 >= r.system_size() || j0 >= r.clock_size()) throw ValidationError("probability: node out of range");
  return r(i0, j0, i0, j0).real();
}

inline double probability(const ConditionalDensityMatrix& rho, std::size_t i0) {
  if (i0 >= rho.grid.size()) throw ValidationError("probability: node out of range");
  return rho.values(i0, i0).real();
}

inline double probability_at(const ExtendedDensityMatrix& r, double q0, double q_c0) {
  const auto i0 = r.system_grid().node_of(q0);
  if (!i0) throw ValidationError("probability: q0 is not a system grid node");
  return probability(r, *i0, require_clock_node(r.clock_grid(), q_c0));
}

/// Sp(f rho) for an operator given as a matrix acting on nodal values.
inline cplx operator_mean(const ComplexMatrix& f, const ConditionalDensityMatrix& rho) {
  const std::size_t n = rho.grid.size();
  if (f.rows() != n || f.cols() != n) throw ValidationError("operator_mean: operator shape mismatch");
  const auto w = rho.grid.trapezoid_weights();
  cplx s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    cplx row = 0.0;
    for (std::size_t k = 0; k < n; ++k) row += f(i, k) * rho.values(k, i);
    s += row * w[i];
  }
  return s;
}

/// Sp(f rho) for a position-diagonal operator f(q).
inline double operator_mean(std::span<const double> f, const ConditionalDensityMatrix& rho) {
  require_size(f.size(), rho.grid.size(), "operator_mean");
  const auto w = rho.grid.trapezoid_weights();
  double s = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) s += f[i] * rho.values(i, i).real() * w[i];
  return s;
}

/// integral phi(x, y) R(x, y) dx dy over the composite grid.
inline cplx general_kernel(const ComplexMatrix& phi, const ExtendedDensityMatrix& r) {
  const std::size_t d = r.dim();
  if (d > kMaxCompositeDim) throw ResourceError("general_kernel: composite dimension above cap");
  if (phi.rows() != d || phi.cols() != d) throw ValidationError("general_kernel: kernel shape mismatch");
  const auto w = r.composite_weights();
  cplx s = 0.0;
  for (std::size_t x = 0; x < d; ++x) {
    cplx row = 0.0;
    for (std::size_t y = 0; y < d; ++y) row += phi(x, y) * r.values()(x, y) * w[y];
    s += row * w[x];
  }
  return s;
}

/// Kernel delta(q-q0) delta(q_c-q_c0) delta(q'-q0) delta(q_c'-q_c0) on the grid.
inline ComplexMatrix point_probability_kernel(const ExtendedDensityMatrix& r, std::size_t i0, std::size_t j0) {
  const auto w = r.composite_weights();
  const std::size_t x0 = r.composite(i0, j0);
  ComplexMatrix phi(r.dim(), r.dim());
  phi(x0, x0) = 1.0 / (w[x0] * w[x0]);
  return phi;
}

}  // namespace qclock

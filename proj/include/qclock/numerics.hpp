#pragma once

// Grids, dense Hermitian eigendecomposition, Numerov integration, trapezoid
// quadrature and finite-difference derivatives. No quantum semantics here.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "qclock/error.hpp"

namespace qclock {

using cplx = std::complex<double>;
using RealField = std::vector<double>;
using ComplexField = std::vector<cplx>;

/// Uniform 1D sampling q_i = q_min + i*h, i in [0, n-1].
class Grid {
 public:
  Grid(double q_min, double q_max, std::size_t n) : q_min_(q_min), q_max_(q_max), n_(n) {
    if (n < 3) throw ValidationError("grid needs at least 3 points, got " + std::to_string(n));
    if (!std::isfinite(q_min) || !std::isfinite(q_max) || !(q_max > q_min))
      throw ValidationError("grid requires finite q_min < q_max");
    h_ = (q_max - q_min) / static_cast<double>(n - 1);
  }

  double q_min() const { return q_min_; }
  double q_max() const { return q_max_; }
  std::size_t size() const { return n_; }
  double spacing() const { return h_; }
  double point(std::size_t i) const { return q_min_ + static_cast<double>(i) * h_; }

  RealField points() const {
    RealField out(n_);
    for (std::size_t i = 0; i < n_; ++i) out[i] = point(i);
    return out;
  }

  /// Trapezoid weights: h inside, h/2 at both ends.
  RealField trapezoid_weights() const {
    RealField w(n_, h_);
    w.front() = w.back() = 0.5 * h_;
    return w;
  }

  /// Node index whose coordinate equals q to within `rel_tol * h`.
  std::optional<std::size_t> node_of(double q, double rel_tol = 1e-9) const {
    const double s = (q - q_min_) / h_;
    const double r = std::round(s);
    if (r < 0.0 || r > static_cast<double>(n_ - 1) || std::abs(s - r) > rel_tol) return std::nullopt;
    return static_cast<std::size_t>(r);
  }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  double q_min_;
  double q_max_;
  std::size_t n_;
  double h_;
};

inline RealField sample(const Grid& grid, auto&& fn) {
  RealField out(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) out[i] = fn(grid.point(i));
  return out;
}

inline void require_same_grid(const Grid& a, const Grid& b, const char* what) {
  if (!(a == b)) throw ValidationError(std::string("grid mismatch in ") + what);
}

inline void require_size(std::size_t got, std::size_t want, const char* what) {
  if (got != want)
    throw ValidationError(std::string(what) + ": expected " + std::to_string(want) +
                          " values, got " + std::to_string(got));
}

// ---------------------------------------------------------------------------
// Dense complex matrices

/// Dense row-major complex matrix.
class ComplexMatrix {
 public:
  ComplexMatrix() = default;
  ComplexMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols) {}

  static ComplexMatrix identity(std::size_t n) {
    ComplexMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  static ComplexMatrix diagonal(std::span<const double> d) {
    ComplexMatrix m(d.size(), d.size());
    for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool square() const { return rows_ == cols_; }

  cplx& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  const cplx& operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<cplx> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const cplx> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

  std::vector<cplx>& data() { return data_; }
  const std::vector<cplx>& data() const { return data_; }

  ComplexMatrix adjoint() const {
    ComplexMatrix out(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) out(j, i) = std::conj((*this)(i, j));
    return out;
  }

  double max_abs() const {
    double m = 0.0;
    for (const auto& z : data_) m = std::max(m, std::abs(z));
    return m;
  }

  double frobenius_norm() const {
    double s = 0.0;
    for (const auto& z : data_) s += std::norm(z);
    return std::sqrt(s);
  }

  cplx trace() const {
    cplx t = 0.0;
    for (std::size_t i = 0; i < std::min(rows_, cols_); ++i) t += (*this)(i, i);
    return t;
  }

  ComplexMatrix& operator+=(const ComplexMatrix& o) {
    check_shape(o);
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += o.data_[k];
    return *this;
  }
  ComplexMatrix& operator-=(const ComplexMatrix& o) {
    check_shape(o);
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= o.data_[k];
    return *this;
  }
  ComplexMatrix& operator*=(cplx s) {
    for (auto& z : data_) z *= s;
    return *this;
  }

  friend ComplexMatrix operator+(ComplexMatrix a, const ComplexMatrix& b) { return a += b; }
  friend ComplexMatrix operator-(ComplexMatrix a, const ComplexMatrix& b) { return a -= b; }
  friend ComplexMatrix operator*(ComplexMatrix a, cplx s) { return a *= s; }
  friend ComplexMatrix operator*(cplx s, ComplexMatrix a) { return a *= s; }

  friend ComplexMatrix operator*(const ComplexMatrix& a, const ComplexMatrix& b) {
    if (a.cols_ != b.rows_) throw ValidationError("matrix product shape mismatch");
    ComplexMatrix c(a.rows_, b.cols_);
    for (std::size_t i = 0; i < a.rows_; ++i) {
      auto ci = c.row(i);
      for (std::size_t k = 0; k < a.cols_; ++k) {
        const cplx aik = a(i, k);
        if (aik == cplx{}) continue;
        auto bk = b.row(k);
        for (std::size_t j = 0; j < b.cols_; ++j) ci[j] += aik * bk[j];
      }
    }
    return c;
  }

  ComplexField apply(std::span<const cplx> x) const {
    require_size(x.size(), cols_, "matrix-vector product");
    ComplexField y(rows_);
    for (std::size_t i = 0; i < rows_; ++i) {
      cplx s = 0.0;
      auto ri = row(i);
      for (std::size_t j = 0; j < cols_; ++j) s += ri[j] * x[j];
      y[i] = s;
    }
    return y;
  }

 private:
  void check_shape(const ComplexMatrix& o) const {
    if (o.rows_ != rows_ || o.cols_ != cols_) throw ValidationError("matrix shape mismatch");
  }

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<cplx> data_;
};

/// A ComplexMatrix that is expected to be Hermitian; `eigh` validates it.
using HermitianMatrix = ComplexMatrix;

inline ComplexMatrix commutator(const ComplexMatrix& a, const ComplexMatrix& b) { return a * b - b * a; }

/// Largest |A(i,j) - conj(A(j,i))|.
inline double hermiticity_error(const ComplexMatrix& a) {
  if (!a.square()) return std::numeric_limits<double>::infinity();
  double err = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = i; j < a.cols(); ++j) err = std::max(err, std::abs(a(i, j) - std::conj(a(j, i))));
  return err;
}

inline bool is_hermitian(const ComplexMatrix& a, double tol = 1e-12) { return hermiticity_error(a) <= tol; }

// ---------------------------------------------------------------------------
// Eigendecomposition

struct EigenDecomposition {
  std::vector<double> values;        // ascending
  std::vector<ComplexField> vectors;  // vectors[j] pairs with values[j]
};

namespace detail {

inline double conj_of(double x) { return x; }
inline cplx conj_of(const cplx& z) { return std::conj(z); }
inline double real_of(double x) { return x; }
inline double real_of(const cplx& z) { return z.real(); }
inline double norm_of(double x) { return x * x; }
inline double norm_of(const cplx& z) { return std::norm(z); }

/// Unitary reduction A = Q T Q^* to Hermitian tridiagonal T by Householder
/// reflections. On return `a` holds T and `q` holds Q (both n x n row-major).
template <class T>
void householder_tridiagonalize(std::vector<T>& a, std::vector<T>& q, std::size_t n) {
  q.assign(n * n, T{});
  for (std::size_t i = 0; i < n; ++i) q[i * n + i] = T{1};
  if (n < 3) return;

  std::vector<T> v(n), p(n), u(n), qv(n);
  for (std::size_t k = 0; k + 2 < n; ++k) {
    const std::size_t b = k + 1;  // first row/col of the trailing block
    double xnorm2 = 0.0;
    for (std::size_t i = b; i < n; ++i) xnorm2 += norm_of(a[i * n + k]);
    const double xnorm = std::sqrt(xnorm2);
    if (xnorm == 0.0) continue;

    const T x0 = a[b * n + k];
    T phase{1};
    if (std::abs(x0) != 0.0) phase = x0 / std::abs(x0);
    const T alpha = -phase * xnorm;

    double vnorm2 = 0.0;
    for (std::size_t i = b; i < n; ++i) {
      v[i] = a[i * n + k];
      if (i == b) v[i] -= alpha;
      vnorm2 += norm_of(v[i]);
    }
    if (vnorm2 == 0.0) continue;
    const double inv = 1.0 / std::sqrt(vnorm2);
    for (std::size_t i = b; i < n; ++i) v[i] *= inv;

    // A' = A - v u^* - u v^*, u = 2(Av) - 2(v^* A v) v
    double kappa = 0.0;
    for (std::size_t i = b; i < n; ++i) {
      T s{};
      const T* ai = &a[i * n];
      for (std::size_t j = b; j < n; ++j) s += ai[j] * v[j];
      p[i] = s;
      kappa += real_of(conj_of(v[i]) * s);
    }
    for (std::size_t i = b; i < n; ++i) u[i] = 2.0 * p[i] - 2.0 * kappa * v[i];
    for (std::size_t i = b; i < n; ++i) {
      T* ai = &a[i * n];
      const T vi = v[i];
      const T ui = u[i];
      for (std::size_t j = b; j < n; ++j) ai[j] -= vi * conj_of(u[j]) + ui * conj_of(v[j]);
    }
    a[b * n + k] = alpha;
    a[k * n + b] = conj_of(alpha);
    for (std::size_t i = b + 1; i < n; ++i) {
      a[i * n + k] = T{};
      a[k * n + i] = T{};
    }

    // Q <- Q (I - 2 v v^*)
    for (std::size_t r = 0; r < n; ++r) {
      T s{};
      const T* qr = &q[r * n];
      for (std::size_t j = b; j < n; ++j) s += qr[j] * v[j];
      qv[r] = 2.0 * s;
    }
    for (std::size_t r = 0; r < n; ++r) {
      T* qr = &q[r * n];
      const T c = qv[r];
      if (c == T{}) continue;
      for (std::size_t j = b; j < n; ++j) qr[j] -= c * conj_of(v[j]);
    }
  }
}

/// Implicit-shift QL on a real symmetric tridiagonal matrix (diagonal `d`,
/// `e[i]` couples i and i+1). `zt` receives the eigenvectors as rows.
inline void tridiagonal_ql(std::vector<double>& d, std::vector<double>& e, std::vector<double>& zt,
                           std::size_t n, int max_sweeps = 60) {
  zt.assign(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) zt[i * n + i] = 1.0;
  if (n == 0) return;
  e.resize(n);
  e[n - 1] = 0.0;
  const double eps = std::numeric_limits<double>::epsilon();

  for (std::size_t l = 0; l < n; ++l) {
    int iter = 0;
    std::size_t m = l;
    for (;;) {
      for (m = l; m + 1 < n; ++m) {
        const double dd = std::abs(d[m]) + std::abs(d[m + 1]);
        if (std::abs(e[m]) <= eps * dd) break;
      }
      if (m == l) break;
      if (iter++ == max_sweeps)
        throw ConvergenceError("tridiagonal QL: no convergence for eigenvalue " + std::to_string(l));

      double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
      double r = std::hypot(g, 1.0);
      g = d[m] - d[l] + e[l] / (g + std::copysign(r, g));
      double s = 1.0, c = 1.0, p = 0.0;
      bool underflow = false;
      for (std::size_t ii = m; ii-- > l;) {
        double f = s * e[ii];
        const double b = c * e[ii];
        r = std::hypot(f, g);
        e[ii + 1] = r;
        if (r == 0.0) {
          d[ii + 1] -= p;
          e[m] = 0.0;
          underflow = true;
          break;
        }
        s = f / r;
        c = g / r;
        g = d[ii + 1] - p;
        r = (d[ii] - g) * s + 2.0 * c * b;
        p = s * r;
        d[ii + 1] = g + p;
        g = c * r - b;
        double* z0 = &zt[ii * n];
        double* z1 = &zt[(ii + 1) * n];
        for (std::size_t k = 0; k < n; ++k) {
          f = z1[k];
          z1[k] = s * z0[k] + c * f;
          z0[k] = c * z0[k] - s * f;
        }
      }
      if (underflow) continue;
      d[l] -= p;
      e[l] = g;
      e[m] = 0.0;
    }
  }
}

inline bool is_tridiagonal(const ComplexMatrix& a) {
  const std::size_t n = a.rows();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if ((i > j + 1 || j > i + 1) && a(i, j) != cplx{}) return false;
  return true;
}

inline bool is_real(const ComplexMatrix& a) {
  return std::all_of(a.data().begin(), a.data().end(), [](const cplx& z) { return z.imag() == 0.0; });
}

template <class T>
EigenDecomposition eigh_impl(std::vector<T> a, std::size_t n, bool tridiagonal) {
  std::vector<T> q;
  if (tridiagonal) {
    q.assign(n * n, T{});
    for (std::size_t i = 0; i < n; ++i) q[i * n + i] = T{1};
  } else {
    householder_tridiagonalize(a, q, n);
  }

  // Diagonal unitary phase fix turns the Hermitian tridiagonal into a real one.
  std::vector<double> d(n), e(n, 0.0);
  std::vector<T> phase(n, T{1});
  for (std::size_t i = 0; i < n; ++i) d[i] = real_of(a[i * n + i]);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const T sub = a[(i + 1) * n + i];
    const double mag = std::abs(sub);
    e[i] = mag;
    phase[i + 1] = mag == 0.0 ? phase[i] : phase[i] * (sub / mag);
  }

  std::vector<double> zt;
  tridiagonal_ql(d, e, zt, n);

  // eigenvector j = Q diag(phase) z_j
  std::vector<T> qd(n * n);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t k = 0; k < n; ++k) qd[r * n + k] = q[r * n + k] * phase[k];

  struct Pair {
    double value;
    std::size_t dominant;
    ComplexField vec;
  };
  std::vector<Pair> pairs(n);
  for (std::size_t j = 0; j < n; ++j) {
    ComplexField vec(n);
    const double* zj = &zt[j * n];
    for (std::size_t r = 0; r < n; ++r) {
      T s{};
      const T* qr = &qd[r * n];
      for (std::size_t k = 0; k < n; ++k) s += qr[k] * zj[k];
      vec[r] = cplx(s);
    }
    std::size_t dom = 0;
    double best = -1.0;
    for (std::size_t r = 0; r < n; ++r) {
      const double m = std::abs(vec[r]);
      if (m > best) {
        best = m;
        dom = r;
      }
    }
    // Dominant component real and positive.
    if (best > 0.0) {
      const cplx ph = std::conj(vec[dom]) / best;
      for (auto& z : vec) z *= ph;
      vec[dom] = best;
    }
    pairs[j] = {d[j], dom, std::move(vec)};
  }

  std::sort(pairs.begin(), pairs.end(), [](const Pair& x, const Pair& y) { return x.value < y.value; });
  // Within numerically degenerate clusters order by dominant index.
  double scale = 0.0;
  for (const auto& p : pairs) scale = std::max(scale, std::abs(p.value));
  const double tie = 1e-12 * std::max(scale, 1.0);
  for (std::size_t lo = 0; lo < n;) {
    std::size_t hi = lo + 1;
    while (hi < n && pairs[hi].value - pairs[hi - 1].value <= tie) ++hi;
    if (hi - lo > 1)
      std::stable_sort(pairs.begin() + static_cast<std::ptrdiff_t>(lo), pairs.begin() + static_cast<std::ptrdiff_t>(hi),
                       [](const Pair& x, const Pair& y) { return x.dominant < y.dominant; });
    lo = hi;
  }

  EigenDecomposition out;
  out.values.reserve(n);
  out.vectors.reserve(n);
  for (auto& p : pairs) {
    out.values.push_back(p.value);
    out.vectors.push_back(std::move(p.vec));
  }
  return out;
}

}  // namespace detail

/// Full eigendecomposition of a Hermitian matrix: Householder reduction to
/// tridiagonal form, then implicit-shift QL. Values ascending; each vector
/// is phased so its largest-magnitude component is real and positive.
inline EigenDecomposition eigh(const HermitianMatrix& matrix) {
  if (!matrix.square()) throw ValidationError("eigh: matrix is not square");
  const double herr = hermiticity_error(matrix);
  if (!(herr <= 1e-12))
    throw ValidationError("eigh: matrix is not Hermitian (max |A_ij - conj(A_ji)| = " + std::to_string(herr) + ")");
  const std::size_t n = matrix.rows();
  for (const auto& z : matrix.data())
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) throw ValidationError("eigh: non-finite entry");

  const bool tri = detail::is_tridiagonal(matrix);
  if (detail::is_real(matrix)) {
    std::vector<double> a(n * n);
    for (std::size_t k = 0; k < n * n; ++k) a[k] = matrix.data()[k].real();
    return detail::eigh_impl<double>(std::move(a), n, tri);
  }
  // Symmetrize the imaginary rounding on the diagonal.
  std::vector<cplx> a = matrix.data();
  for (std::size_t i = 0; i < n; ++i) a[i * n + i] = a[i * n + i].real();
  return detail::eigh_impl<cplx>(std::move(a), n, tri);
}

// ---------------------------------------------------------------------------
// Numerov

struct NumerovParams {
  double mass = 1.0;
  double hbar = 1.0;
};

/// Integrates chi'' = (2M/hbar^2)(U - E) chi across the grid from two seed
/// values at nodes 0 and 1. Fourth-order accurate.
inline ComplexField numerov_solve(const Grid& grid, std::span<const double> potential, double energy,
                                  std::array<cplx, 2> seeds, NumerovParams params = {}) {
  require_size(potential.size(), grid.size(), "numerov potential");
  if (!(params.mass > 0.0) || !(params.hbar > 0.0)) throw ValidationError("numerov: mass and hbar must be positive");
  const std::size_t n = grid.size();
  const double h2 = grid.spacing() * grid.spacing();
  const double coef = 2.0 * params.mass / (params.hbar * params.hbar);

  RealField w(n);  // f_i h^2 / 12
  for (std::size_t i = 0; i < n; ++i) {
    const double fh2 = coef * (potential[i] - energy) * h2;
    if (!(std::abs(fh2) < 1.0)) throw StepSizeError(i, std::abs(fh2));
    w[i] = fh2 / 12.0;
  }

  ComplexField chi(n);
  chi[0] = seeds[0];
  chi[1] = seeds[1];
  for (std::size_t i = 1; i + 1 < n; ++i) {
    chi[i + 1] = (2.0 * chi[i] * (1.0 + 5.0 * w[i]) - chi[i - 1] * (1.0 - w[i - 1])) / (1.0 - w[i + 1]);
  }
  return chi;
}

// ---------------------------------------------------------------------------
// Quadrature

/// Trapezoid-rule integral of f * conj(g).
inline cplx inner_product(std::span<const cplx> f, std::span<const cplx> g, const Grid& grid) {
  require_size(f.size(), grid.size(), "inner_product f");
  require_size(g.size(), grid.size(), "inner_product g");
  const std::size_t n = grid.size();
  cplx s = 0.5 * (f[0] * std::conj(g[0]) + f[n - 1] * std::conj(g[n - 1]));
  for (std::size_t i = 1; i + 1 < n; ++i) s += f[i] * std::conj(g[i]);
  return s * grid.spacing();
}

/// Trapezoid-rule integral of |f|^2.
inline double norm_squared(std::span<const cplx> f, const Grid& grid) {
  require_size(f.size(), grid.size(), "norm_squared");
  const std::size_t n = grid.size();
  double s = 0.5 * (std::norm(f[0]) + std::norm(f[n - 1]));
  for (std::size_t i = 1; i + 1 < n; ++i) s += std::norm(f[i]);
  return s * grid.spacing();
}

/// Running trapezoid antiderivative, zero at q_min.
template <class T>
std::vector<T> cumulative_integral(std::span<const T> f, const Grid& grid) {
  require_size(f.size(), grid.size(), "cumulative_integral");
  std::vector<T> out(f.size());
  out[0] = T{};
  const double half_h = 0.5 * grid.spacing();
  for (std::size_t i = 1; i < f.size(); ++i) out[i] = out[i - 1] + half_h * (f[i - 1] + f[i]);
  return out;
}

// ---------------------------------------------------------------------------
// Finite differences

/// Derivative samples; the first and last `boundary_nodes` use one-sided
/// stencils and are excluded from residual norms.
struct DerivativeField {
  ComplexField values;
  std::size_t boundary_nodes = 1;

  bool is_boundary(std::size_t i) const { return i < boundary_nodes || i + boundary_nodes >= values.size(); }
};

/// Second-order central differences inside, second-order one-sided at the ends.
template <class T>
std::vector<T> derivative_values(std::span<const T> f, double h, int order) {
  const std::size_t n = f.size();
  if (n < 5) throw ValidationError("derivative needs at least 5 points");
  std::vector<T> d(n);
  if (order == 1) {
    const double s = 1.0 / (2.0 * h);
    for (std::size_t i = 1; i + 1 < n; ++i) d[i] = (f[i + 1] - f[i - 1]) * s;
    d[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) * s;
    d[n - 1] = (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) * s;
  } else if (order == 2) {
    const double s = 1.0 / (h * h);
    for (std::size_t i = 1; i + 1 < n; ++i) d[i] = (f[i + 1] - 2.0 * f[i] + f[i - 1]) * s;
    d[0] = (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) * s;
    d[n - 1] = (2.0 * f[n - 1] - 5.0 * f[n - 2] + 4.0 * f[n - 3] - f[n - 4]) * s;
  } else {
    throw ValidationError("derivative order must be 1 or 2");
  }
  return d;
}

inline DerivativeField derivative_field(std::span<const cplx> f, const Grid& grid, int order) {
  require_size(f.size(), grid.size(), "derivative_field");
  return {derivative_values<cplx>(f, grid.spacing(), order), 1};
}

// ---------------------------------------------------------------------------
// Small field helpers

inline ComplexField to_complex(std::span<const double> f) { return ComplexField(f.begin(), f.end()); }

inline double max_abs_diff(std::span<const cplx> a, std::span<const cplx> b) {
  require_size(b.size(), a.size(), "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace qclock

#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include "qclock/qclock.hpp"

namespace qclock::test {

inline constexpr double pi = std::numbers::pi;

/// V = shift on [0, length] with Dirichlet ends.
inline SystemSpec box_system(std::size_t n, double length = 1.0, double shift = 0.0, double mass = 1.0) {
  return make_system(Grid(0.0, length, n), [shift](double) { return shift; }, mass);
}

inline SystemSpec harmonic_system(double half_width, std::size_t n, double omega = 1.0, double mass = 1.0) {
  return make_system(Grid(-half_width, half_width, n),
                     [=](double q) { return 0.5 * mass * omega * omega * q * q; }, mass);
}

inline WaveFunction gaussian(const Grid& g, double center, double sigma, double k = 0.0) {
  return make_wave_function(g, [=](double q) {
    const double x = q - center;
    return std::exp(-x * x / (4.0 * sigma * sigma)) * std::complex<double>(std::cos(k * q), std::sin(k * q));
  });
}

inline WaveFunction normalized(WaveFunction w) {
  w *= 1.0 / w.norm();
  return w;
}

/// Projection of `w` onto the basis span, normalized.
inline WaveFunction in_span(const WaveFunction& w, const SpectralBasis& b) {
  return normalized(reconstruct(project(w, b), b));
}

inline ModeAmplitudes random_amplitudes(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  ModeAmplitudes a;
  for (std::size_t k = 0; k < n; ++k) a.coefficients.emplace_back(nd(rng), nd(rng));
  return a;
}

inline ComplexMatrix random_hermitian(std::size_t n, std::mt19937_64& rng, bool real = false) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  ComplexMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    m(i, i) = u(rng);
    for (std::size_t j = i + 1; j < n; ++j) {
      const std::complex<double> z(u(rng), real ? 0.0 : u(rng));
      m(i, j) = z;
      m(j, i) = std::conj(z);
    }
  }
  return m;
}

}  // namespace qclock::test

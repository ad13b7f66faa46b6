#include <catch2/catch_amalgamated.hpp>

#include "test_support.hpp"

using namespace qclock;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("box well spectrum matches k^2 pi^2 / 2", "[quantum_core][spectrum]") {
  const auto spec = test::box_system(400);
  const auto basis = spectral_basis(spec, 5);
  for (std::size_t k = 1; k <= 5; ++k) {
    const double exact = static_cast<double>(k * k) * test::pi * test::pi / 2.0;
    INFO("k = " << k);
    CHECK_THAT(basis.energies[k - 1], WithinRel(exact, 1e-3));
  }
}

TEST_CASE("harmonic spectrum matches k + 1/2", "[quantum_core][spectrum][slow]") {
  const auto spec = test::harmonic_system(10.0, 800);
  const auto basis = spectral_basis(spec, 11);
  for (std::size_t k = 0; k <= 10; ++k) {
    INFO("k = " << k);
    CHECK_THAT(basis.energies[k], WithinRel(static_cast<double>(k) + 0.5, 1e-3));
  }
}

TEST_CASE("spectral basis invariants", "[quantum_core][basis]") {
  const auto spec = make_system(Grid(-4.0, 6.0, 257), [](double q) { return 0.3 * q * q + std::sin(q); }, 1.7, 0.9);
  const auto basis = spectral_basis(spec, 24);
  const auto& g = spec.grid;

  CHECK(std::is_sorted(basis.energies.begin(), basis.energies.end()));
  for (std::size_t m = 0; m < basis.count(); ++m) {
    CHECK(basis.states[m].values.front() == cplx{});
    CHECK(basis.states[m].values.back() == cplx{});
    for (std::size_t n = 0; n < basis.count(); ++n) {
      const cplx s = overlap(basis.states[m], basis.states[n]);
      CHECK(std::abs(s - (m == n ? 1.0 : 0.0)) <= 1e-10);
    }
    const auto hpsi = apply_hamiltonian(spec, basis.states[m].values);
    ComplexField r(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) r[i] = hpsi[i] - basis.energies[m] * basis.states[m].values[i];
    CHECK(std::sqrt(norm_squared(r, g)) <= 1e-8 * std::max(1.0, std::abs(basis.energies[m])));
  }

  const auto h = dirichlet_hamiltonian(spec);
  CHECK(hermiticity_error(h) == 0.0);
  CHECK(std::all_of(h.data().begin(), h.data().end(), [](const cplx& z) { return z.imag() == 0.0; }));

  CHECK_THROWS_AS(spectral_basis(spec, 256), ValidationError);
  CHECK_THROWS_AS(spectral_basis(spec, 0), ValidationError);
  CHECK_NOTHROW(spectral_basis(test::box_system(12), 10));
}

TEST_CASE("constant potential shift moves every level by the shift", "[quantum_core][basis]") {
  const double c = 3.25;
  const auto plain = spectral_basis(test::box_system(200), 10);
  const auto shifted = spectral_basis(test::box_system(200, 1.0, c), 10);
  for (std::size_t k = 0; k < 10; ++k) CHECK_THAT(shifted.energies[k] - plain.energies[k], WithinAbs(c, 1e-10));
}

TEST_CASE("project and reconstruct", "[quantum_core][projection]") {
  const auto spec = test::box_system(200);
  const auto basis = spectral_basis(spec, 12);
  const auto& g = spec.grid;

  SECTION("basis state projects to a unit vector") {
    const auto c = project(basis.states[1], basis);
    REQUIRE(c.size() == 12);
    for (std::size_t k = 0; k < 12; ++k) CHECK(std::abs(c.coefficients[k] - (k == 1 ? 1.0 : 0.0)) <= 1e-10);
  }

  SECTION("superposition coefficients") {
    const cplx i(0.0, 1.0);
    const auto state = (1.0 / std::sqrt(2.0)) * (basis.states[0] + i * basis.states[2]);
    const auto c = project(state, basis);
    CHECK(std::abs(c.coefficients[0] - 1.0 / std::sqrt(2.0)) <= 1e-10);
    CHECK(std::abs(c.coefficients[2] - i / std::sqrt(2.0)) <= 1e-10);
    for (std::size_t k : {1u, 3u, 4u, 11u}) CHECK(std::abs(c.coefficients[k]) <= 1e-10);
  }

  SECTION("Parseval inside the retained span") {
    std::mt19937_64 rng(5);
    const auto amps = test::random_amplitudes(12, rng);
    const auto state = reconstruct(amps, basis);
    CHECK_THAT(project(state, basis).norm_squared(), WithinRel(state.norm_squared(), 1e-8));
    CHECK_THAT(amps.norm_squared(), WithinRel(state.norm_squared(), 1e-8));
  }

  SECTION("round trip of a basis state and of zero") {
    const auto back = reconstruct(project(basis.states[0], basis), basis);
    CHECK(max_abs_diff(back.values, basis.states[0].values) <= 1e-10);
    ModeAmplitudes zero;
    zero.coefficients.assign(12, cplx{});
    for (const auto& z : reconstruct(zero, basis).values) CHECK(z == cplx{});
  }

  SECTION("linearity") {
    const auto f = test::gaussian(g, 0.3, 0.05, 20.0);
    const auto h = test::gaussian(g, 0.7, 0.1);
    const cplx a(0.3, -1.2), b(2.0, 0.5);
    const auto lhs = project(a * f + b * h, basis);
    const auto pf = project(f, basis), ph = project(h, basis);
    for (std::size_t k = 0; k < 12; ++k)
      CHECK(std::abs(lhs.coefficients[k] - (a * pf.coefficients[k] + b * ph.coefficients[k])) <= 1e-10);
  }

  SECTION("errors") {
    const WaveFunction other(Grid(0.0, 1.0, 100));
    CHECK_THROWS_AS(project(other, basis), ValidationError);
    ModeAmplitudes short_amps;
    short_amps.coefficients.assign(3, cplx{});
    CHECK_THROWS_AS(reconstruct(short_amps, basis), ValidationError);
  }
}

TEST_CASE("band-limited Gaussian round trip leaves the direct-subtraction tail", "[quantum_core][projection]") {
  const auto spec = test::box_system(400);
  const auto basis = spectral_basis(spec, 32);
  const auto f = test::normalized(test::gaussian(spec.grid, 0.5, 0.04));
  const auto back = reconstruct(project(f, basis), basis);

  // Direct tail: subtract every retained component one at a time.
  WaveFunction tail = f;
  for (std::size_t k = 0; k < basis.count(); ++k) {
    cplx c = 0.0;
    const auto w = spec.grid.trapezoid_weights();
    for (std::size_t i = 0; i < w.size(); ++i) c += w[i] * f.values[i] * std::conj(basis.states[k].values[i]);
    tail -= c * basis.states[k];
  }
  const double residual = (f - back).norm();
  CHECK_THAT(residual, WithinRel(tail.norm(), 1e-8));
  CHECK_THAT(out_of_span_norm(f, basis), WithinRel(tail.norm(), 1e-8));
  CHECK(residual < 1e-3);
}

TEST_CASE("system spec validation", "[quantum_core]") {
  CHECK_THROWS_AS(make_system(Grid(0.0, 1.0, 10), [](double) { return 0.0; }, 0.0), ValidationError);
  CHECK_THROWS_AS(make_system(Grid(0.0, 1.0, 10), [](double) { return 0.0; }, 1.0, -1.0), ValidationError);
  CHECK_THROWS_AS(make_system(Grid(0.0, 1.0, 10), [](double q) { return 1.0 / (q - q); }, 1.0), ValidationError);
}

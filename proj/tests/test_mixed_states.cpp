#include <catch2/catch_amalgamated.hpp>

#include "test_support.hpp"

using namespace qclock;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

struct Ensemble {
  SystemSpec spec;
  SpectralBasis basis;
  FreeClock clock;
  Grid clock_grid;
  std::vector<ExtendedState> states;
};

/// Forward solutions from seeded random initial states, all at one E.
Ensemble forward_ensemble(std::size_t nq, std::size_t modes, std::size_t nc, double e_factor, double t_max,
                          std::size_t members, std::uint64_t seed) {
  auto spec = test::box_system(nq);
  auto basis = spectral_basis(spec, modes);
  FreeClock clock(1.0, e_factor * basis.energies.back());
  Grid cg(0.0, clock_position(clock, t_max), nc);
  std::mt19937_64 rng(seed);
  std::vector<ExtendedState> states;
  for (std::size_t k = 0; k < members; ++k) {
    const auto psi0 = test::normalized(reconstruct(test::random_amplitudes(modes, rng), basis));
    states.push_back(forward_solution(psi0, basis, clock, cg));
  }
  return {std::move(spec), std::move(basis), clock, cg, std::move(states)};
}

ComplexMatrix outer(std::span<const cplx> a) {
  ComplexMatrix m(a.size(), a.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t k = 0; k < a.size(); ++k) m(i, k) = a[i] * std::conj(a[k]);
  return m;
}

}  // namespace

TEST_CASE("ensemble density construction", "[mixed][ensemble]") {
  auto ens = forward_ensemble(12, 3, 10, 20.0, 0.05, 2, 1);

  SECTION("pure state") {
    const std::vector<double> w{1.0};
    const auto r = ensemble_density(std::span(ens.states).first(1), w);
    const auto& psi = ens.states[0];
    double slice_integrated = 0.0;
    const auto wc = ens.clock_grid.trapezoid_weights();
    const auto norms = psi.slice_norms();
    for (std::size_t j = 0; j < norms.size(); ++j) slice_integrated += wc[j] * norms[j];
    CHECK_THAT(r.trace(), WithinRel(slice_integrated, 1e-12));
    CHECK_THAT(r.purity(), WithinAbs(1.0, 1e-12));
    CHECK(r.hermiticity_error() <= 1e-12);
    CHECK(r.min_eigenvalue() >= -1e-8 * r.trace());
  }

  SECTION("two orthogonal equal-weight states") {
    std::vector<ExtendedState> two;
    two.push_back(forward_solution(ens.basis.states[0], ens.basis, ens.clock, ens.clock_grid));
    two.push_back(forward_solution(ens.basis.states[1], ens.basis, ens.clock, ens.clock_grid));
    const std::vector<double> w{0.5, 0.5};
    const auto r = ensemble_density(two, w);
    CHECK_THAT(r.purity(), WithinAbs(0.5, 1e-8));
    CHECK(r.hermiticity_error() <= 1e-12);
    CHECK(r.min_eigenvalue() >= -1e-8 * r.trace());
  }

  SECTION("errors") {
    const std::vector<double> bad{0.5, 0.4};
    CHECK_THROWS_AS(ensemble_density(ens.states, bad), ValidationError);
    const std::vector<double> neg{1.5, -0.5};
    CHECK_THROWS_AS(ensemble_density(ens.states, neg), ValidationError);

    std::vector<ExtendedState> mixed{ens.states[0],
                                     forward_solution(ens.basis.states[0], ens.basis,
                                                      FreeClock(1.0, 2.0 * ens.clock.energy), ens.clock_grid)};
    const std::vector<double> half{0.5, 0.5};
    CHECK_THROWS_AS(ensemble_density(mixed, half), ValidationError);

    const auto big = test::box_system(65);
    const auto bb = spectral_basis(big, 2);
    const FreeClock bc(1.0, 10.0 * bb.energies[1]);
    std::vector<ExtendedState> huge{forward_solution(bb.states[0], bb, bc, Grid(0.0, 1.0, 64))};
    const std::vector<double> one{1.0};
    CHECK_THROWS_AS(ensemble_density(huge, one), ResourceError);
  }
}

TEST_CASE("slow envelope and two-time residual", "[mixed][two-time]") {
  SECTION("stationary ground mode with a zero-energy spectrum") {
    const auto plain = spectral_basis(test::box_system(12), 1);
    const auto spec = test::box_system(12, 1.0, -plain.energies[0]);
    const auto basis = spectral_basis(spec, 1);
    const FreeClock clock(1.0, 5.0);
    const Grid cg(0.0, 2.0, 9);
    std::vector<ExtendedState> s{forward_solution(basis.states[0], basis, clock, cg)};
    const std::vector<double> w{1.0};
    const auto r = ensemble_density(s, w);
    const auto res = slow_envelope_residuals(r, clock);
    const std::size_t nq = 12;
    for (std::size_t j = 0; j < cg.size(); ++j)
      for (std::size_t j2 = 0; j2 < cg.size(); ++j2)
        for (std::size_t i = 0; i < nq; ++i)
          for (std::size_t i2 = 0; i2 < nq; ++i2)
            CHECK(std::abs(res.slow(r.composite(i, j), r.composite(i2, j2)) - res.slow(r.composite(i, 0), r.composite(i2, 0))) <= 1e-12);
    CHECK(res.residual_norm <= 1e-10);
    CHECK(hermiticity_error(res.slow) <= 1e-10);
  }

  SECTION("residual halves when E doubles") {
    std::vector<double> rel;
    for (double f : {50.0, 100.0, 200.0}) {
      auto ens = forward_ensemble(16, 3, 16, f, 0.01, 3, 7);
      const std::vector<double> w{0.5, 0.3, 0.2};
      const auto r = ensemble_density(ens.states, w);
      const auto res = slow_envelope_residuals(r, ens.clock);
      CHECK(hermiticity_error(res.slow) <= 1e-10);
      rel.push_back(res.relative_residual);
    }
    for (std::size_t k = 0; k + 1 < rel.size(); ++k) {
      const double ratio = rel[k + 1] / rel[k];
      INFO("ratio " << ratio);
      CHECK((ratio >= 0.375 && ratio <= 0.625));
    }
  }

  SECTION("resource cap") {
    auto ens = forward_ensemble(12, 2, 10, 20.0, 0.05, 1, 2);
    const std::vector<double> w{1.0};
    const auto r = ensemble_density(ens.states, w);
    CHECK_THROWS_AS(slow_envelope_residuals(r, FreeClock(1.0, 3.0 * ens.clock.energy)), ValidationError);
    CHECK_THROWS_AS(ExtendedDensityMatrix(ens.spec, Grid(0.0, 1.0, 400), r.clock(), ComplexMatrix(1, 1), w),
                    ResourceError);
  }
}

TEST_CASE("conditional density and collapse", "[mixed][conditional]") {
  auto ens = forward_ensemble(16, 4, 12, 30.0, 0.05, 3, 11);
  const std::vector<double> w{0.2, 0.5, 0.3};
  const auto r = ensemble_density(ens.states, w);

  SECTION("pure slice") {
    const std::vector<double> one{1.0};
    const auto pr = ensemble_density(std::span(ens.states).first(1), one);
    const auto& psi = ens.states[0];
    for (std::size_t j : {0u, 5u, 11u}) {
      const auto rho = conditional_density(pr, j);
      CHECK(rho.values.data() == outer(psi.slice(j)).data());
      CHECK_THAT(rho.trace(), WithinRel(psi.slice_norms()[j], 1e-12));
    }
  }

  SECTION("trace and Hermiticity across clock nodes") {
    const auto family = conditional_family(r);
    const double t0 = family[0].trace();
    for (const auto& rho : family) {
      CHECK(std::abs(rho.trace() - t0) <= 1e-10 * t0);
      CHECK(rho.hermiticity_error() <= 1e-10);
      CHECK(rho.normalized().min_eigenvalue() >= -1e-8);
    }
  }

  SECTION("collapse then condition is idempotent") {
    const std::size_t j = 4;
    const auto col = measurement_collapse(r, j);
    CHECK(col.clock_value == ens.clock_grid.point(j));
    CHECK_THAT(col.delta_weight, WithinRel(1.0 / ens.clock_grid.spacing(), 1e-14));
    const auto rm = col.to_extended(r);
    const auto again = conditional_density(rm, j).normalized();
    const auto direct = conditional_density(r, j).normalized();
    CHECK((again.values - direct.values).max_abs() <= 1e-12 * direct.values.max_abs());
    CHECK(conditional_density(rm, j + 1).values.max_abs() == 0.0);

    const auto by_value = measurement_collapse_at(r, ens.clock_grid.point(j));
    CHECK(by_value.clock_node == j);
    CHECK_THROWS_AS(measurement_collapse_at(r, 0.5 * (ens.clock_grid.point(1) + ens.clock_grid.point(2))), ValidationError);
    CHECK_THROWS_AS(conditional_density(r, 12), ValidationError);
  }
}

TEST_CASE("von Neumann residual", "[mixed][von-neumann]") {
  SECTION("stationary ensemble and cyclic trace") {
    auto spec = test::box_system(16);
    auto basis = spectral_basis(spec, 3);
    const FreeClock clock(1.0, 20.0 * basis.energies.back());
    const Grid cg(0.0, 1.0, 9);
    std::vector<ExtendedState> s{forward_solution(basis.states[0], basis, clock, cg),
                                 forward_solution(basis.states[2], basis, clock, cg)};
    const std::vector<double> w{0.6, 0.4};
    const auto r = ensemble_density(s, w);
    const auto family = conditional_family(r);
    const auto vn = von_neumann_residual(family, system_hamiltonian_matrix(spec), clock, cg);
    CHECK(vn.nodes.size() == cg.size() - 4);
    for (double a : vn.absolute) CHECK(a <= 1e-8);
    for (double t : vn.commutator_trace) CHECK(t <= 1e-12);
    CHECK_THROWS_AS(von_neumann_residual(std::span(family).first(4), system_hamiltonian_matrix(spec), clock, cg),
                    ValidationError);
  }

  SECTION("residual halves when E doubles") {
    std::vector<double> rms;
    for (double f : {50.0, 100.0, 200.0, 400.0}) {
      auto ens = forward_ensemble(32, 4, 32, f, 0.01, 3, 7);
      const std::vector<double> w{0.5, 0.3, 0.2};
      const auto r = ensemble_density(ens.states, w);
      const auto family = conditional_family(r);
      const auto vn = von_neumann_residual(family, system_hamiltonian_matrix(ens.spec), ens.clock, ens.clock_grid);
      for (double t : vn.commutator_trace) CHECK(t <= 1e-12);
      rms.push_back(vn.rms_relative());
    }
    for (std::size_t k = 0; k + 1 < rms.size(); ++k) {
      const double ratio = rms[k + 1] / rms[k];
      INFO("ratio " << ratio);
      CHECK((ratio >= 0.375 && ratio <= 0.625));
    }
  }

  SECTION("mixed track agrees with the pure-state envelope") {
    auto ens = forward_ensemble(16, 4, 16, 50.0, 0.01, 1, 5);
    const std::vector<double> one{1.0};
    const auto r = ensemble_density(ens.states, one);
    const auto h = system_hamiltonian_matrix(ens.spec);
    const auto mixed = von_neumann_residual(conditional_family(r), h, ens.clock, ens.clock_grid);

    const auto diag = envelope_and_residuals(ens.states[0], ens.clock);
    std::vector<ConditionalDensityMatrix> pure;
    for (std::size_t j = 0; j < ens.clock_grid.size(); ++j)
      pure.push_back({ens.spec.grid, j, ens.clock_grid.point(j), outer(diag.envelope.slice(j))});
    const auto from_pure = von_neumann_residual(pure, h, ens.clock, ens.clock_grid);
    for (std::size_t k = 0; k < mixed.relative.size(); ++k) {
      CHECK_THAT(mixed.absolute[k], WithinAbs(from_pure.absolute[k], 1e-10 * from_pure.absolute[k] + 1e-14));
      CHECK_THAT(mixed.relative[k], WithinAbs(from_pure.relative[k], 1e-10));
    }
  }

  SECTION("product-rule gap to the reduced residual is second order") {
    // With exact derivatives the von Neumann residual is r psi^+ - psi r^+,
    // r the reduced residual. Central differences break the product rule at
    // O(h^2), so the gap must shrink by ~4 per halving of the clock spacing.
    auto gap = [](std::size_t nc) {
      auto ens = forward_ensemble(16, 4, nc, 50.0, 0.01, 1, 5);
      const std::vector<double> one{1.0};
      const auto r = ensemble_density(ens.states, one);
      const auto vn = von_neumann_residual(conditional_family(r), system_hamiltonian_matrix(ens.spec), ens.clock,
                                           ens.clock_grid);
      const auto diag = envelope_and_residuals(ens.states[0], ens.clock);
      const std::size_t nq = ens.spec.grid.size();
      double worst = 0.0;
      for (std::size_t k = 0; k < vn.nodes.size(); ++k) {
        const std::size_t j = vn.nodes[k];
        ComplexMatrix implied(nq, nq);
        for (std::size_t a = 0; a < nq; ++a)
          for (std::size_t b = 0; b < nq; ++b) {
            const cplx ra = diag.reduced_residual[j * nq + a];
            const cplx rb = diag.reduced_residual[j * nq + b];
            implied(a, b) = ra * std::conj(diag.envelope(b, j)) - diag.envelope(a, j) * std::conj(rb);
          }
        worst = std::max(worst, std::abs(implied.frobenius_norm() - vn.absolute[k]) / vn.absolute[k]);
      }
      return worst;
    };
    const double g1 = gap(16), g2 = gap(31), g3 = gap(61);
    INFO("gaps " << g1 << " " << g2 << " " << g3);
    CHECK((g1 / g2 > 3.5 && g1 / g2 < 4.5));
    CHECK((g2 / g3 > 3.5 && g2 / g3 < 4.5));
  }
}

TEST_CASE("expectations", "[mixed][expectations]") {
  auto ens = forward_ensemble(16, 4, 10, 30.0, 0.05, 2, 3);
  const std::vector<double> w{0.7, 0.3};
  const auto r = ensemble_density(ens.states, w);
  const auto rho = conditional_density(r, 3).normalized();
  const std::size_t nq = ens.spec.grid.size();

  CHECK_THAT(operator_mean(ComplexMatrix::identity(nq), rho).real(), WithinAbs(1.0, 1e-10));
  CHECK_THAT(operator_mean(RealField(nq, 1.0), rho), WithinAbs(1.0, 1e-10));

  SECTION("point probability of a pure state") {
    const std::vector<double> one{1.0};
    const auto pr = ensemble_density(std::span(ens.states).first(1), one);
    for (std::size_t i : {3u, 8u})
      for (std::size_t j : {0u, 6u}) {
        const double direct = std::norm(ens.states[0](i, j));
        CHECK_THAT(probability(pr, i, j), WithinRel(direct, 1e-14));
        CHECK_THAT(probability(conditional_density(pr, j), i), WithinRel(direct, 1e-14));
        CHECK_THAT(general_kernel(point_probability_kernel(pr, i, j), pr).real(), WithinRel(direct, 1e-12));
        CHECK_THAT(probability_at(pr, ens.spec.grid.point(i), ens.clock_grid.point(j)), WithinRel(direct, 1e-14));
      }
    CHECK_THROWS_AS(probability_at(pr, 0.5 * (ens.spec.grid.point(1) + ens.spec.grid.point(2)), 0.0), ValidationError);
  }

  SECTION("mirror-symmetric state has zero mean position") {
    const auto spec = make_system(Grid(-1.0, 1.0, 17), [](double) { return 0.0; });
    const auto basis = spectral_basis(spec, 3);
    const FreeClock clock(1.0, 20.0 * basis.energies.back());
    std::vector<ExtendedState> s{forward_solution(basis.states[0], basis, clock, Grid(0.0, 1.0, 6))};
    const std::vector<double> one{1.0};
    const auto sym = conditional_density(ensemble_density(s, one), 2).normalized();
    CHECK_THAT(operator_mean(spec.grid.points(), sym), WithinAbs(0.0, 1e-10));
  }

  SECTION("linearity in rho and f") {
    const auto rho2 = conditional_density(r, 7).normalized();
    std::mt19937_64 rng(9);
    const auto f = test::random_hermitian(nq, rng);
    const auto g = test::random_hermitian(nq, rng);
    const cplx a(0.3, 0.1), b(-1.2, 0.0);
    ConditionalDensityMatrix mix = rho;
    mix.values = a * rho.values + b * rho2.values;
    CHECK(std::abs(operator_mean(f, mix) - (a * operator_mean(f, rho) + b * operator_mean(f, rho2))) <= 1e-12);
    CHECK(std::abs(operator_mean(a * f + b * g, rho) - (a * operator_mean(f, rho) + b * operator_mean(g, rho))) <= 1e-12);
  }
}

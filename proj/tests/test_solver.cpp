#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "qsym/errors.hpp"
#include "qsym/solver.hpp"

using namespace qsym;
using std::numbers::pi;

namespace {

ProblemSpec spec_of(int n, double p, Nonlinearity f = Nonlinearity::constant(1.0), Coefficient k = Coefficient::constant(1.0)) {
  ProblemSpec s;
  s.n = n;
  s.p = p;
  s.f = std::move(f);
  s.kappa = std::move(k);
  return s;
}

double max_error_vs_torsion(const ScalarField& u, int n, double p) {
  double err = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) err = std::max(err, std::abs(u[i] - torsion_profile(u.mesh().radius_of(i), n, p)));
  return err;
}

MeshPtr disk(std::size_t nr, std::size_t nt) { return std::make_shared<const Mesh>(Mesh::polar_disk(nr, nt)); }

}  // namespace

TEST_CASE("radial solver reproduces the torsion profile for p = 3") {
  auto rep = solve_radial(spec_of(2, 3.0), 1000);
  CHECK(rep.converged);
  CHECK(rep.positive);
  CHECK(rep.residual <= 1e-8);
  CHECK(rep.solution[0] == doctest::Approx(2.0 / 3.0 / std::sqrt(2.0)).epsilon(1e-4));
  CHECK(max_error_vs_torsion(rep.solution, 2, 3.0) <= 1e-4);
}

TEST_CASE("radial solver reproduces the torsion function for p = 2") {
  auto rep = solve_radial(spec_of(2, 2.0), 1000);
  CHECK(rep.converged);
  CHECK(rep.solution[0] == doctest::Approx(0.25).epsilon(1e-6));
  CHECK(max_error_vs_torsion(rep.solution, 2, 2.0) <= 1e-4);
}

TEST_CASE("radial solver in other dimensions") {
  for (auto [n, p] : {std::pair{3, 2.5}, std::pair{5, 4.0}}) {
    auto rep = solve_radial(spec_of(n, p), 800);
    CHECK(rep.converged);
    CHECK(max_error_vs_torsion(rep.solution, n, p) <= 1e-4);
  }
}

TEST_CASE("zero nonlinearity gives the zero solution") {
  auto rep = solve_radial(spec_of(2, 3.0, Nonlinearity::constant(0.0)), 100);
  CHECK(rep.converged);
  CHECK(lq_norm(rep.solution, INFINITY) == 0.0);
  auto rep2 = solve_dirichlet_2d(spec_of(2, 3.0, Nonlinearity::constant(0.0)), disk(8, 16));
  CHECK(rep2.converged);
  CHECK(lq_norm(rep2.solution, INFINITY) <= 1e-12);
}

TEST_CASE("hypothesis violations are rejected") {
  CHECK_THROWS_AS(solve_radial(spec_of(2, 3.0, Nonlinearity::constant(-1.0)), 100), InvalidInput);
  CHECK_THROWS_AS(solve_radial(spec_of(2, 3.0, Nonlinearity::constant(1.0), Coefficient::constant(0.0)), 100), InvalidInput);
  CHECK_THROWS_AS(solve_radial(spec_of(2, 3.0, Nonlinearity::constant(1.0), Coefficient::affine(1.0, 0.1)), 100), InvalidInput);
  CHECK_THROWS_AS(solve_dirichlet_2d(spec_of(2, 3.0, Nonlinearity::constant(1.0), Coefficient::affine(0.5, 1.0)), disk(8, 16)),
                  InvalidInput);
  auto s = spec_of(2, 3.0, Nonlinearity::constant(1.0));
  s.power_bound = 1.0;  // f = 1 is not bounded by u^2 near 0
  CHECK_THROWS_AS(solve_radial(s, 50), InvalidInput);
}

TEST_CASE("comparison: enlarging kappa does not decrease the solution") {
  auto a = solve_radial(spec_of(3, 2.5, Nonlinearity::constant(1.0), Coefficient::constant(1.0)), 200);
  auto b = solve_radial(spec_of(3, 2.5, Nonlinearity::constant(1.0), Coefficient::constant(1.3)), 200);
  for (std::size_t i = 0; i < a.solution.size(); ++i) CHECK(b.solution[i] >= a.solution[i]);
}

TEST_CASE("homogeneous power nonlinearity is solved as an eigenproblem") {
  auto rep = solve_radial(spec_of(2, 3.0, Nonlinearity::power(1.0, 2.0)), 400);
  CHECK(rep.converged);
  CHECK(rep.solution.max() == doctest::Approx(1.0));
  CHECK(rep.scale > 0.0);
  // rescaling by mu^{1/(p-1)} turns it into a solution with scale 1 of -Delta_3 u = u^2 mu^0 ... check scale invariance
  auto rep2 = solve_radial(spec_of(2, 3.0, Nonlinearity::power(2.0, 2.0)), 400);
  CHECK(rep2.scale == doctest::Approx(rep.scale / 2.0).epsilon(1e-8));
}

TEST_CASE("2-D solver matches the radial profile within 3h") {
  for (double p : {2.0, 3.0}) {
    auto m = disk(24, 48);
    auto rep = solve_dirichlet_2d(spec_of(2, p), m);
    CHECK(rep.converged);
    CHECK(rep.positive);
    CHECK(rep.energy_monotone);
    auto rad = solve_radial(spec_of(2, p), 24);
    double err = 0.0;
    for (std::size_t i = 0; i < m->size(); ++i) {
      const double r = m->radius_of(i);
      err = std::max(err, std::abs(rep.solution[i] - interpolate(rad.solution, std::span<const double>(&r, 1))));
    }
    CHECK(err <= 3.0 * m->spacing());
  }
}

TEST_CASE("2-D solver with zero perturbation coincides with the radial case") {
  auto m = disk(16, 32);
  auto a = solve_dirichlet_2d(spec_of(2, 3.0, Nonlinearity::constant(1.0), Coefficient::affine(1.0, 0.0)), m);
  auto b = solve_dirichlet_2d(spec_of(2, 3.0), m);
  double d = 0.0;
  for (std::size_t i = 0; i < m->size(); ++i) d = std::max(d, std::abs(a.solution[i] - b.solution[i]));
  CHECK(d == 0.0);
}

TEST_CASE("perturbed 2-D problem with f = u^2 converges to a positive solution") {
  auto m = disk(24, 48);
  auto rep = solve_dirichlet_2d(spec_of(2, 3.0, Nonlinearity::power(1.0, 2.0), Coefficient::affine(1.0, 0.1)), m);
  CHECK(rep.converged);
  CHECK(rep.positive);
  CHECK(rep.residual <= 1e-8);
  CHECK(rep.scale > 0.0);
}

TEST_CASE("energy examples") {
  auto m = disk(64, 128);
  CHECK(energy(ScalarField(m, 0.0), spec_of(2, 2.0)) == 0.0);
  auto u = ScalarField::sample(m, [](std::span<const double> x) { return (1 - x[0] * x[0] - x[1] * x[1]) / 4; });
  CHECK(energy(u, spec_of(2, 2.0)) == doctest::Approx(-pi / 16).epsilon(1e-4 / (pi / 16)));

  // J(t u) = a t^2 / 2 - b t with minimizer t* = b / a
  auto w = ScalarField::sample(m, [](std::span<const double> x) { return (1 - x[0] * x[0] - x[1] * x[1]) * (1 + 0.3 * x[0]); });
  const auto s = spec_of(2, 2.0);
  auto J = [&](double t) {
    std::vector<double> v(w.values().begin(), w.values().end());
    for (double& x : v) x *= t;
    return energy(ScalarField(m, v), s);
  };
  const double b = -(J(1.0) - J(-1.0)) / 2.0, a = J(1.0) + J(-1.0);
  const double tstar = b / a;
  CHECK(J(tstar) <= J(tstar * 1.01));
  CHECK(J(tstar) <= J(tstar * 0.99));
  CHECK(J(2.0) == doctest::Approx(a * 2.0 - 2.0 * b));
}

TEST_CASE("a-priori estimates on the p = 3 torsion profile") {
  auto rep = solve_radial(spec_of(2, 3.0), 1000);
  auto ap = verify_apriori(rep.solution, spec_of(2, 3.0));
  CHECK(ap.C2_boundary == doctest::Approx(std::sqrt(2.0)).epsilon(0.05));
  CHECK(ap.C2 == doctest::Approx(3.0 / std::sqrt(2.0)).epsilon(0.01));
  CHECK(std::isfinite(ap.C1));
  CHECK(std::isfinite(ap.C3));
  CHECK(ap.delta0 > 0.0);
  CHECK(ap.delta0 < 1.0);
  CHECK(ap.barrier_ok);
  CHECK(ap.gradient_positive);

  AprioriOptions half;
  half.delta1 = 0.5;
  auto ap2 = verify_apriori(rep.solution, spec_of(2, 3.0), half);
  CHECK(ap2.C3 == doctest::Approx(torsion_profile(0.0, 2, 3.0) / torsion_profile(0.5, 2, 3.0)).epsilon(1e-3));
}

TEST_CASE("barrier vanishes on the boundary") {
  for (double B : {0.1, 1.0, 7.0})
    for (double beta : {0.5, 2.0, 9.0}) CHECK(barrier(1.0, B, beta) == 0.0);
}

TEST_CASE("a-priori estimates on a 2-D solution") {
  auto m = disk(24, 48);
  auto s = spec_of(2, 3.0, Nonlinearity::power(1.0, 2.0), Coefficient::affine(1.0, 0.1));
  auto rep = solve_dirichlet_2d(s, m);
  auto ap = verify_apriori(rep.solution, s);
  CHECK(ap.delta0 > 0.0);
  CHECK(std::isfinite(ap.C1));
  CHECK(std::isfinite(ap.C2));
  CHECK(std::isfinite(ap.C3));
}

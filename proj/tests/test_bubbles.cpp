#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "qsym/bubbles.hpp"
#include "qsym/errors.hpp"
#include "qsym/problem.hpp"

using namespace qsym;
using std::numbers::pi;

namespace {

MeshPtr radial(int n, std::size_t N, double R) { return std::make_shared<const Mesh>(Mesh::radial(n, N, R)); }
MeshPtr box(int n, std::size_t N, double R) { return std::make_shared<const Mesh>(Mesh::box(n, N, R)); }

}  // namespace

TEST_CASE("bubble value at its center") {
  TalentiBubble b(4, 3.0, {}, 1.0);
  const double o[4] = {0, 0, 0, 0};
  CHECK(b(o) == doctest::Approx(1.0).epsilon(1e-15));

  // U[z, lam](z) = lam^{-(n-p)/p} U[0, 1](0)
  for (double lam : {0.5, 2.0, 3.7}) {
    TalentiBubble c(5, 2.5, {0.1, -0.2, 0.3, 0, 1}, lam);
    TalentiBubble c0(5, 2.5, {}, 1.0);
    const double z[5] = {0.1, -0.2, 0.3, 0, 1}, zero[5] = {};
    CHECK(c(z) == doctest::Approx(std::pow(lam, -(5 - 2.5) / 2.5) * c0(zero)).epsilon(1e-13));
  }
}

TEST_CASE("bubble depends on x - z only") {
  TalentiBubble a(3, 2.4, {0.3, -1.0, 2.0}, 1.7), b(3, 2.4, {}, 1.7);
  for (auto x : {std::array{0.0, 0.0, 0.0}, std::array{1.0, 2.0, -0.5}, std::array{-4.0, 0.1, 9.0}}) {
    const double y[3] = {x[0] - 0.3, x[1] + 1.0, x[2] - 2.0};
    CHECK(a(x) == doctest::Approx(b(y)).epsilon(1e-14));
  }
}

TEST_CASE("bubble far field") {
  TalentiBubble b(4, 3.0, {}, 1.3);
  const double beta = b.decay_exponent();
  double prev = INFINITY;
  for (double r : {1e2, 1e3, 1e4}) {
    const double x[4] = {r, 0, 0, 0};
    const double rel = std::abs(b(x) * std::pow(r, beta) / b.tail_amplitude() - 1.0);
    CHECK(rel < prev);
    prev = rel;
  }
  CHECK(prev < 1e-5);
}

TEST_CASE("bubble rejects exponents outside (2, n)") {
  CHECK_THROWS_AS(TalentiBubble(4, 2.0, {}, 1.0), InvalidInput);
  CHECK_THROWS_AS(TalentiBubble(3, 3.0, {}, 1.0), InvalidInput);
  CHECK_THROWS_AS(TalentiBubble(3, 2.5, {}, 0.0), InvalidInput);
}

TEST_CASE("bubble gradient matches centered differences at second order") {
  TalentiBubble b(3, 2.5, {0.2, 0.1, -0.3}, 0.8);
  const double x[3] = {0.9, -0.4, 0.35};
  double g[3];
  b.grad(x, g);
  double err[2];
  for (int s = 0; s < 2; ++s) {
    const double h = s == 0 ? 1e-2 : 5e-3;
    double e = 0.0;
    for (int k = 0; k < 3; ++k) {
      double xp[3] = {x[0], x[1], x[2]}, xm[3] = {x[0], x[1], x[2]};
      xp[k] += h;
      xm[k] -= h;
      e = std::max(e, std::abs((b(xp) - b(xm)) / (2 * h) - g[k]));
    }
    err[s] = e;
  }
  CHECK(std::log2(err[0] / err[1]) >= 1.9);
}

TEST_CASE("closed-form Sobolev constant matches quadrature of a bubble") {
  TalentiBubble b(4, 3.0, {}, 1.0);
  auto m = radial(4, 512, 20.0);
  const double q = sobolev_quotient(b.sample(m), b.sample_gradient(m), 3.0);
  CHECK(q == doctest::Approx(talenti_constant(4, 3.0)).epsilon(2e-4));
}

TEST_CASE("exterior integral of the cube") {
  // n = 2, m = 4: 4 * int_{-1}^{1} (1 + y^2)^{-2} dy / 2 = 1 + pi / 2
  CHECK(box_complement_integral(2, 4.0, 1.0) == doctest::Approx(1.0 + pi / 2).epsilon(1e-12));
  CHECK(box_complement_integral(2, 4.0, 3.0) == doctest::Approx((1.0 + pi / 2) / 9.0).epsilon(1e-12));
  // between the exteriors of the inscribed and circumscribed balls
  for (int n : {3, 4}) {
    const double m = n + 1.5;
    const double k = box_complement_integral(n, m, 1.0);
    CHECK(k < sphere_area(n) / (m - n));
    CHECK(k > sphere_area(n) * std::pow(std::sqrt(n), n - m) / (m - n));
  }
  CHECK_THROWS_AS(box_complement_integral(3, 3.0, 1.0), InvalidInput);
}

TEST_CASE("Sobolev quotient is 0-homogeneous and rejects zero") {
  auto m = box(3, 31, 6.0);
  TalentiBubble b(3, 2.5, {}, 1.0);
  auto u = b.sample(m);
  std::vector<double> v(u.values().begin(), u.values().end());
  for (double& x : v) x *= 3.5;
  CHECK(sobolev_quotient(ScalarField(m, v), 2.5) == doctest::Approx(sobolev_quotient(u, 2.5)).epsilon(1e-12));
  CHECK_THROWS_AS(sobolev_quotient(ScalarField(m, 0.0), 2.5), InvalidInput);
}

TEST_CASE("Sobolev quotient is invariant across bubble parameters") {
  auto m = box(3, 61, 10.0);
  TalentiBubble a(3, 2.5, {}, 1.0), b(3, 2.5, {0.3, 0, 0}, 2.0);
  const double qa = sobolev_quotient(a.sample(m), a.sample_gradient(m), 2.5);
  const double qb = sobolev_quotient(b.sample(m), b.sample_gradient(m), 2.5);
  CHECK(std::abs(qa - qb) <= 1e-3 * qa);
}

TEST_CASE("perturbing a bubble raises the quotient") {
  TalentiBubble b(3, 2.5, {}, 1.0);
  TestBump bump{{0.5, 0.0, 0.0}, 1.0};
  auto m = box(3, 41, 8.0);
  auto w = ScalarField::sample(m, [&](std::span<const double> x) { return b(x) + 0.1 * bump.value(x, false); });
  auto gw = VectorField::sample(m, [&](std::span<const double> x, std::span<double> g) {
    double a[3], c[3];
    b.grad(x, a);
    bump.grad(x, false, c);
    for (int k = 0; k < 3; ++k) g[k] = a[k] + 0.1 * c[k];
  });
  CHECK(sobolev_quotient(w, gw, 2.5) > sobolev_quotient(b.sample(m), b.sample_gradient(m), 2.5));

  // with differenced gradients the bump must be resolved
  auto f = box(3, 81, 8.0);
  auto wf = ScalarField::sample(f, [&](std::span<const double> x) { return b(x) + 0.1 * bump.value(x, false); });
  CHECK(sobolev_quotient(wf, 2.5) > sobolev_quotient(b.sample(f), 2.5));
}

TEST_CASE("critical residual of a bubble converges at second order") {
  TalentiBubble b(4, 3.0, {}, 1.0);
  double prev = 0.0;
  for (std::size_t N : {32, 64, 128}) {
    auto m = radial(4, N, 4.0);
    const double r = critical_residual(b.sample(m), ScalarField(m, 1.0), 3.0);
    if (prev > 0.0) CHECK(std::log2(prev / r) >= 1.9);
    prev = r;
  }
  CHECK(prev <= 1e-3);
}

TEST_CASE("critical residual on a box bubble and special cases") {
  auto m = box(3, 41, 5.0);
  TalentiBubble b(3, 2.5, {}, 1.0);
  auto u = b.sample(m);
  const double r = critical_residual(u, ScalarField(m, 1.0), 2.5);
  CHECK(r < 0.05);
  CHECK(critical_residual(ScalarField(m, 0.0), ScalarField(m, 1.0), 2.5) == 0.0);
  // the bubble does not solve the equation with kappa = 1.2
  double last = 0.0;
  for (std::size_t N : {64, 128}) {
    auto mr = radial(4, N, 4.0);
    TalentiBubble c(4, 3.0, {}, 1.0);
    last = critical_residual(c.sample(mr), ScalarField(mr, 1.2), 3.0);
    CHECK(last > 0.05);
  }
}

TEST_CASE("bump bank is fixed") {
  auto m = box(4, 5, 2.0);
  CHECK(bump_bank(*m).size() == 3 * 81);
  auto r = radial(3, 10, 2.0);
  CHECK(bump_bank(*r).size() == 2 + 4 + 8);
  CHECK_THROWS_AS(bump_bank(Mesh::polar_disk(4, 8)), InvalidInput);
}

TEST_CASE("kappa0 examples") {
  auto m = box(3, 41, 6.0);
  TalentiBubble b(3, 2.5, {}, 1.0);
  auto u = b.sample(m);
  CHECK(kappa0(u, ScalarField(m, 2.5), 2.5).kappa0 == doctest::Approx(2.5).epsilon(1e-14));
  auto k = Coefficient::affine(1.0, 0.3).sample(m);
  CHECK(kappa0(u, k, 2.5).kappa0 == doctest::Approx(1.0).epsilon(1e-10));

  auto mr = radial(4, 512, 20.0);
  TalentiBubble c(4, 3.0, {}, 1.0);
  auto rep = kappa0(c.sample(mr), ScalarField(mr, 1.0), 3.0);
  CHECK(rep.discrepancy <= 1e-3);
  CHECK_THROWS_AS(kappa0(ScalarField(m, 0.0), ScalarField(m, 1.0), 2.5), InvalidInput);
}

TEST_CASE("whole-space deficit") {
  auto m = box(3, 41, 6.0);
  TalentiBubble b(3, 2.5, {}, 1.0);
  auto u = b.sample(m);
  CHECK(deficit_whole_space(u, ScalarField(m, 1.7), 2.5) <= 1e-12);

  double ratio[3];
  int i = 0;
  for (double eps : {0.1, 0.05, 0.025}) ratio[i++] = deficit_whole_space(u, Coefficient::affine(1.0, eps).sample(m), 2.5) / eps;
  CHECK(ratio[0] > 0.0);
  CHECK(ratio[1] == doctest::Approx(ratio[0]).epsilon(1e-8));
  CHECK(ratio[2] == doctest::Approx(ratio[0]).epsilon(1e-8));

  auto k = Coefficient::affine(1.0, 0.1).sample(m);
  auto k2 = Coefficient::affine(3.0, 0.1).sample(m);
  CHECK(deficit_whole_space(u, k2, 2.5) == doctest::Approx(deficit_whole_space(u, k, 2.5)).epsilon(1e-10));
}

TEST_CASE("decay constants of a bubble") {
  auto m = radial(4, 512, 20.0);
  TalentiBubble b(4, 3.0, {}, 1.0);
  auto u = b.sample(m);
  auto d = decay_constants(u, 3.0);
  CHECK(std::isfinite(d.C0));
  CHECK(d.C0 >= 1.0);
  CHECK(d.c0 > 0.0);
  CHECK(d.c1 > 0.0);
  CHECK(d.mass_ok);
  // bubbles attain the Sobolev constant, so the mass sits on the floor
  CHECK(d.mass == doctest::Approx(d.mass_floor).epsilon(1e-3));

  auto cut = ScalarField::sample(m, [&](std::span<const double> r) { return r[0] <= 1.0 ? b.radial_value(r[0]) : 0.0; });
  CHECK(decay_constants(cut, 3.0).c0 == 0.0);
  CHECK_THROWS_AS(decay_constants(ScalarField(m, 0.0), 3.0), InvalidInput);
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>

#include "qsym/errors.hpp"
#include "qsym/inequalities.hpp"
#include "qsym/solver.hpp"

using namespace qsym;

namespace {

const double e2[2] = {0.0, 1.0};

MeshPtr disk(std::size_t nr) { return std::make_shared<const Mesh>(Mesh::polar_disk(nr, 2 * nr)); }

struct BallPair {
  ProblemSpec spec;
  SolveReport rep;
};

BallPair ball_solution(const MeshPtr& m, double eps) {
  BallPair b;
  b.spec.p = 3.0;
  b.spec.f = Nonlinearity::power(1.0, 2.0);
  b.spec.kappa = Coefficient::affine(1.0, eps);
  b.rep = solve_dirichlet_2d(b.spec, m);
  return b;
}

}  // namespace

TEST_CASE("fundamental inequalities: p = 2 is the identity") {
  auto r = fundamental_ineq_check(2.0, 20000, 1);
  CHECK(r.pass);
  CHECK(r.violations == 0);
  CHECK(r.c == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(r.C == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(r.c_hat == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("fundamental inequalities hold on 1e6 samples") {
  for (double p : {2.5, 3.0, 4.0}) {
    CAPTURE(p);
    auto r = fundamental_ineq_check(p, 1000000, 42);
    CHECK(r.pass);
    CHECK(r.violations == 0);
    CHECK(r.c >= r.c_ref * (1 - 1e-12));
    CHECK(r.C <= r.C_ref * (1 + 1e-12));
    CHECK(r.c_hat >= r.c_hat_ref * (1 - 1e-12));
  }
  auto low = fundamental_ineq_check(1.5, 100000, 3);
  CHECK(low.pass);
  CHECK(low.C_hat <= low.C_hat_ref * (1 + 1e-12));
  CHECK_THROWS_AS(fundamental_ineq_check(1.0, 10, 1), InvalidInput);
}

TEST_CASE("equal vectors give zero ratios and no violation") {
  auto a = fundamental_ineq_check(3.0, 1000, 9);
  auto b = fundamental_ineq_check(3.0, 1000, 9);
  CHECK(a.c == b.c);
  CHECK(a.C == b.C);
}

TEST_CASE("exponents") {
  CHECK(exponent_2M(4, 3.0) == 8.0 / 3.0);
  CHECK(exponent_2M(3, 2.0 + 1e-9) == doctest::Approx(6.0).epsilon(1e-6));
  CHECK(exponent_2M(2, 2.0 + 1e-9) > 1e6);
  for (int n : {2, 3, 4, 5})
    for (double p : {2.5, 3.0, 6.0}) CHECK(exponent_2M(n, p) > 2.0);
  CHECK_THROWS_AS(exponent_2M(3, 2.0), InvalidInput);
  CHECK(admissible_t(3.0, 0.75) == doctest::Approx(1.5));
  CHECK_THROWS_AS(admissible_t(3.0, 0.5), InvalidInput);
  CHECK(exponent_2star(2, 1.5, 0.0) == doctest::Approx(3.0));
  CHECK(exponent_2star(3, 1.5, 0.0) == doctest::Approx(1.0 / (0.5 - 1.0 / 3.0 + 1.0 / 3.0)));
}

TEST_CASE("weight condition: rho = 1, monotonicity, exact radial weight") {
  auto m = disk(32);
  ScalarField one(m, 1.0);
  auto wc = weight_condition_constant(one, 1.5, 0.0, Region::whole(*m));
  CHECK(wc.C_star == doctest::Approx(M_PI).epsilon(1e-12));
  CHECK_FALSE(wc.degraded);
  auto small = weight_condition_constant(one, 1.5, 0.0, Region::centered_ball(*m, 0.5));
  CHECK(small.C_star < wc.C_star);

  // rho = (r/2)^{1/2}: int rho^{-t} = 2 pi 2^{t/2} / (2 - t/2)
  const double t = 1.5, exact = 2 * M_PI * std::pow(2.0, t / 2) / (2 - t / 2);
  double prev = 0.0;
  for (std::size_t nr : {32, 64}) {
    auto mm = disk(nr);
    auto rho = ScalarField::sample(mm, [](std::span<const double> x) { return std::sqrt(std::hypot(x[0], x[1]) / 2); });
    auto w = weight_condition_constant(rho, t, 0.0, Region::whole(*mm));
    CHECK(std::isfinite(w.C_star));
    CHECK(w.C_star == doctest::Approx(exact).epsilon(0.05));
    if (prev > 0) CHECK(std::abs(w.C_star - exact) <= std::abs(prev - exact) + 1e-12);
    prev = w.C_star;
  }
}

TEST_CASE("weight condition with gamma on a box") {
  auto m = std::make_shared<const Mesh>(Mesh::box(3, 9, 1.0));
  ScalarField one(m, 1.0);
  auto a = weight_condition_constant(one, 1.5, 0.0, Region::whole(*m));
  auto b = weight_condition_constant(one, 1.5, 0.5, Region::whole(*m));
  CHECK(a.C_star == doctest::Approx(m->volume()));
  CHECK(std::isfinite(b.C_star));
  CHECK(b.C_star > 0.0);
  CHECK_THROWS_AS(weight_condition_constant(one, 1.5, 1.0, Region::whole(*m)), InvalidInput);
}

TEST_CASE("weight report composition") {
  auto w = weight_report(2, M_PI, 1.5, 0.0, 2.0, M_PI);
  const double tp = 3.0 / 2.0;  // (2t)'
  CHECK(w.mu == doctest::Approx(1 + (1 - 2.0) * tp / 2));
  CHECK(w.delta == doctest::Approx(0.0));
  CHECK(w.C_hat == doctest::Approx(1 / (2 * M_PI)));
  const double CM = std::pow((1 - w.delta) / (w.mu - w.delta), 1 - w.delta) * std::pow(M_PI, w.mu - w.delta) *
                    std::pow(M_PI, w.mu - w.delta);
  CHECK(w.C_M == doctest::Approx(CM));
  CHECK(w.C_S == doctest::Approx(w.C_hat * std::pow(M_PI, 1 / 3.0) * std::pow(w.C_M, 1 / tp)));
  CHECK_THROWS_AS(weight_report(2, M_PI, 1.0, 0.0, 2.0, M_PI), InvalidInput);
  auto z = weight_report_zero_mean(2, M_PI, 1.5, 0.0, 2.0, M_PI, 2.0, M_PI);
  CHECK(z.C_hat == doctest::Approx(4.0 / (2 * M_PI)));
}

TEST_CASE("weighted Sobolev: zero field, random bank, contradiction") {
  auto m = disk(32);
  ScalarField one(m, 1.0);
  auto all = Region::whole(*m);
  auto wc = weight_condition_constant(one, 1.5, 0.0, all);
  auto w = weight_report(2, wc.C_star, 1.5, 0.0, 2.0, m->volume());

  ScalarField zero(m, 0.0);
  CHECK(check_weighted_sobolev(one, zero, 2.0, all, w).pass);

  int fails = 0;
  double worst = 0.0;
  for (auto& f : random_test_fields(m, 100, 7)) {
    auto c = check_weighted_sobolev(one, f.v, f.grad, 2.0, all, w);
    fails += !c.pass;
    worst = std::max(worst, c.ratio);
  }
  CHECK(fails == 0);
  CHECK(worst < 1.0);

  auto f = random_test_fields(m, 1, 3).front();
  ScalarField zero_rho(m, 0.0);
  auto c = check_weighted_sobolev(zero_rho, f.v, f.grad, 2.0, all, w);
  CHECK(c.contradiction);
  CHECK_FALSE(c.pass);
}

TEST_CASE("Sobolev check rejects fields that do not vanish") {
  auto m = disk(16);
  ScalarField one(m, 1.0);
  auto all = Region::whole(*m);
  auto w = weight_report(2, M_PI, 1.5, 0.0, 2.0, M_PI);
  CHECK_THROWS_AS(check_weighted_sobolev(one, one, 2.0, all, w), InvalidInput);
}

TEST_CASE("weighted Poincare on three caps and with a vanishing set") {
  auto m = disk(32);
  ScalarField one(m, 1.0);
  for (double lam : {0.2, 0.5, 0.8}) {
    CAPTURE(lam);
    auto cap = Region::half_space(*m, e2, lam);
    auto wc = weight_condition_constant(one, 1.5, 0.0, cap);
    auto w = weight_report(2, wc.C_star, 1.5, 0.0, 2.0, cap.measure(*m));
    auto f = cap_test_field(m, e2, lam);
    auto c = check_weighted_poincare(one, f.v, f.grad, cap, 0.5, 3.0, w.C_S);
    CHECK(c.pass);
    CHECK(c.lhs > 0.0);
  }
  auto all = Region::whole(*m);
  auto lower = Region::whole(*m) - Region::half_space(*m, e2, 0.0);
  auto wc = weight_condition_constant(one, 1.5, 0.0, all);
  auto w = weight_report(2, wc.C_star, 1.5, 0.0, 2.0, m->volume());
  auto f = cap_test_field(m, e2, 0.0);
  auto c = check_weighted_poincare(one, f.v, f.grad, all, 0.5, 3.0, w.C_S, lower);
  CHECK(c.pass);
  CHECK(c.measure < m->volume());
  CHECK_THROWS_AS(check_weighted_poincare(one, f.v, f.grad, all, 1.5, 3.0, w.C_S), InvalidInput);
}

TEST_CASE("small-domain comparison: p = 2 closed form") {
  // -Lap u = 1 + eps x2 on the disk: u = (1 - r^2)/4 + eps x2 (1 - r^2)/8
  auto m = disk(32);
  const double eps = 0.2;
  auto u = ScalarField::sample(m, [eps](std::span<const double> x) {
    const double r2 = x[0] * x[0] + x[1] * x[1];
    return (1 - r2) / 4 + eps * x[1] * (1 - r2) / 8;
  });
  ProblemSpec s;
  s.p = 2.0;
  s.f = Nonlinearity::constant(1.0);
  s.kappa = Coefficient::affine(1.0, eps);
  for (double lam : {0.0, 0.02}) {
    auto pair = cap_pair(u, s, 1.0, e2, lam);
    auto c = small_domain_comparison(pair);
    CHECK(std::isfinite(c.K));
    CHECK(c.K <= (1 - lam) * (1 - lam) / 8 + 1e-3);
    if (lam == 0.0) CHECK(c.numerator > 0.0);
  }
  auto thin = small_domain_comparison(cap_pair(u, s, 1.0, e2, 0.6));
  CHECK(thin.numerator == 0.0);
  CHECK(thin.K == 0.0);
}

TEST_CASE("small-domain comparison on solver pairs") {
  auto m = disk(24);
  for (double eps : {0.1, 0.05}) {
    CAPTURE(eps);
    auto b = ball_solution(m, eps);
    REQUIRE(b.rep.converged);
    for (double lam : {0.5, 0.7}) {
      auto c = small_domain_comparison(cap_pair(b.rep.solution, b.spec, b.rep.scale, e2, lam));
      CHECK(std::isfinite(c.K));
      CHECK(c.numerator == 0.0);
      CHECK(c.denominator > 0.0);
    }
    auto half = small_domain_comparison(cap_pair(b.rep.solution, b.spec, b.rep.scale, e2, 0.0));
    CHECK(half.K > 0.03);
    CHECK(half.K < 0.1);
  }
}

TEST_CASE("comparison rejects unordered boundary data") {
  auto m = disk(16);
  ScalarField a(m, 1.0), b(m, 0.0), g(m, 1.0);
  auto all = Region::whole(*m);
  auto bdry = Region::whole(*m) - Region::interior(*m);
  CHECK_THROWS_AS(small_domain_comparison(a, b, g, all, bdry), InvalidInput);
  auto ok = small_domain_comparison(b, b, g, all, bdry);
  CHECK(ok.K == 0.0);
  CHECK(ok.pass);
}

TEST_CASE("Harnack M(R) and configuration") {
  HarnackConfig cfg;
  cfg.n = 2;
  cfg.s = 1.0;
  cfg.qq = 4.0;
  cfg.c_flat = 0.5;
  cfg.C_nat = 2.0;
  CHECK(harnack_M(1.0, cfg) == doctest::Approx(0.25));
  CHECK(harnack_M(0.1, cfg) < harnack_M(1.0, cfg));
  CHECK_THROWS_AS(harnack_M(1.5, cfg), InvalidInput);
  CHECK(harnack_M_explicit(1.0, 1.0, cfg) == doctest::Approx(0.25));

  auto d = HarnackConfig::defaults(2, 3.0);
  CHECK_NOTHROW(d.validate());
  CHECK(d.q > 2 * exponent_2M(2, 3.0) / (exponent_2M(2, 3.0) - 2));
  CHECK(d.q > 2 * d.qq / (d.qq - 2));
  CHECK(d.qq < exponent_2M(2, 3.0));
  CHECK(d.s < d.chi());
  auto d3 = HarnackConfig::defaults(3, 3.0);
  CHECK_NOTHROW(d3.validate());
  CHECK(d3.q > 4.0);
  CHECK(d3.qq < 4.0);
  d.s = 10.0;
  CHECK_THROWS_AS(d.validate(), InvalidInput);
}

TEST_CASE("Harnack check: identical pair, solver pair, positivity") {
  auto m = disk(24);
  auto b = ball_solution(m, 0.1);
  auto cfg = HarnackConfig::defaults(2, 3.0);
  auto pair = cap_pair(b.rep.solution, b.spec, b.rep.scale, e2, 0.0);
  const double x0[2] = {0.0, 0.5};

  ScalarField zero(m, 0.0);
  auto same = harnack_check(pair.u1, pair.u1, zero, x0, 0.08, cfg, pair.omega);
  CHECK(same.pass);
  CHECK(same.norm_s == 0.0);

  for (double R : {0.04, 0.08}) {
    auto h = harnack_check(pair.u2, pair.u1, pair.g_gap, x0, R, cfg, pair.omega);
    CHECK(h.pass);
    CHECK(h.ratio <= 1.0);
    CHECK(std::isfinite(h.frak_C_needed));
  }
  CHECK_THROWS_AS(harnack_check(pair.u2, pair.u1, pair.g_gap, x0, 0.2, cfg, pair.omega), InvalidInput);

  ScalarField big(m, 1.0);
  CHECK_THROWS_AS(harnack_check(big, zero, zero, x0, 0.08, cfg, pair.omega), InvalidInput);
}

TEST_CASE("local boundedness") {
  auto m = disk(24);
  auto b = ball_solution(m, 0.1);
  auto pair = cap_pair(b.rep.solution, b.spec, b.rep.scale, e2, 0.0);
  auto cfg = HarnackConfig::defaults(2, 3.0);

  LocalBoundInput same;
  same.u1 = &pair.u1;
  same.u2 = &pair.u1;
  same.g_gap = &pair.g_gap;
  same.x0 = {0.0, 0.5};
  same.R = 0.08;
  auto r0 = local_bound_check(same);
  CHECK(r0.sup == 0.0);
  CHECK(r0.constant == 0.0);

  const double e = (2.0 / 2.0) * (cfg.qq / (cfg.qq - 2.0));
  CHECK(local_bound_factor(0.5, 0.1, 2.0, cfg.qq) / local_bound_factor(0.5, 0.2, 2.0, cfg.qq) ==
        doctest::Approx(std::pow(2.0, e)));

  auto rho = gradient_weight(b.rep.solution, 3.0);
  for (double R : {0.1, 0.2, 0.4}) {
    CAPTURE(R);
    LocalBoundInput in;
    in.u1 = &pair.u1;
    in.u2 = &pair.u2;
    in.g_gap = &pair.g_gap;
    in.x0 = {0.0, 0.0};
    in.R = R;
    Region b5 = Region::ball(*m, in.x0, 5 * R) & pair.omega;
    const double t = admissible_t(3.0, 0.75);
    auto wc = weight_condition_constant(rho, t, 0.0, b5);
    in.C_S = weight_report(2, wc.C_star, t, 0.0, 2.0, b5.measure(*m)).C_S;
    in.q = cfg.q;
    in.qq = cfg.qq;
    in.boundary_variant = true;
    in.omega = pair.omega;
    in.boundary = pair.boundary;
    auto r = local_bound_check(in);
    CHECK(r.M == 0.0);
    CHECK(r.sup > 0.0);
    CHECK(std::isfinite(r.constant));
    CHECK(r.constant < 1.0);
  }
}

TEST_CASE("gradient summability") {
  auto m = disk(16);
  auto lin = ScalarField::sample(m, [](std::span<const double> x) { return x[0]; });
  auto all = Region::whole(*m);
  auto r = grad_integrability(lin, 3.0, 0.5, all);
  CHECK(r.value == doctest::Approx(m->volume()).epsilon(1e-9));
  CHECK_FALSE(r.degraded);

  const double oracle = 4 * M_PI * std::sqrt(2.0) / 3;
  auto mr = std::make_shared<const Mesh>(Mesh::radial(2, 4000));
  auto g = VectorField::sample(mr, [](std::span<const double> x, std::span<double> o) { o[0] = -std::sqrt(x[0] / 2); });
  CHECK(std::abs(grad_integrability(g, 3.0, 0.5, Region::whole(*mr)).value - oracle) <= 1e-3);
  auto u = ScalarField::sample(mr, [](std::span<const double> x) { return torsion_profile(x[0], 2, 3.0); });
  CHECK(std::abs(grad_integrability(u, 3.0, 0.5).value - oracle) <= 1e-3);

  auto plateau = ScalarField::sample(m, [](std::span<const double> x) {
    const double s = std::hypot(x[0], x[1]);
    return s < 0.5 ? 1.0 : 1.0 - (s - 0.5);
  });
  auto pr = grad_integrability(plateau, 3.0, 0.5);
  CHECK(pr.divergent);
  CHECK(std::isinf(pr.value));
  CHECK(pr.degraded);
  CHECK_THROWS_AS(grad_integrability(lin, 3.0, 1.0), InvalidInput);
}

TEST_CASE("gradient summability is refinement stable on solver output") {
  double v[2];
  int k = 0;
  for (std::size_t nr : {16, 32}) {
    auto b = ball_solution(disk(nr), 0.1);
    auto r = grad_integrability(b.rep.solution, 3.0, 0.5);
    CHECK_FALSE(r.divergent);
    v[k++] = r.value;
  }
  CHECK(std::abs(v[0] - v[1]) / v[1] < 0.05);
}

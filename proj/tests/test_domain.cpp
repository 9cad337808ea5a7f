#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>

#include "qsym/domain.hpp"
#include "qsym/errors.hpp"
#include "qsym/field_io.hpp"
#include "qsym/problem.hpp"

using namespace qsym;
using std::numbers::pi;

namespace {

MeshPtr disk(std::size_t nr, std::size_t nt) { return std::make_shared<const Mesh>(Mesh::polar_disk(nr, nt)); }
MeshPtr box(int n, std::size_t np, double R) { return std::make_shared<const Mesh>(Mesh::box(n, np, R)); }
MeshPtr radial(int n, std::size_t N) { return std::make_shared<const Mesh>(Mesh::radial(n, N)); }

// U[0,1] for n = 3, p = 2.5 and its radial derivative, used as an analytic oracle
constexpr double bn = 3.0, bp = 2.5;
double bubble(double r) {
  const double a = std::pow(bn, 1.0 / bp) * std::pow((bn - bp) / (bp - 1.0), (bp - 1.0) / bp);
  return std::pow(a / (1.0 + std::pow(r, bp / (bp - 1.0))), (bn - bp) / bp);
}
double bubble_dr(double r) {
  const double q = bp / (bp - 1.0), e = (bn - bp) / bp;
  return -e * bubble(r) * q * std::pow(r, q - 1.0) / (1.0 + std::pow(r, q));
}

}  // namespace

TEST_CASE("quadrature weights sum to the region volume") {
  CHECK(disk(16, 32)->volume() == doctest::Approx(pi));
  for (auto m : {disk(16, 32), disk(7, 10), radial(2, 50), radial(3, 17), radial(5, 40), box(2, 11, 1.5), box(3, 9, 2.0)}) {
    double s = 0.0;
    for (double w : m->weights()) {
      CHECK(w > 0.0);
      s += w;
    }
    CHECK(std::abs(s / m->volume() - 1.0) < 1e-12);
    CHECK(std::abs(std::pow(lq_norm(ScalarField(m, 1.0), 3.0), 3.0) / m->volume() - 1.0) < 1e-6);
  }
}

TEST_CASE("nodes lie in the closed region and spacing shrinks under refinement") {
  auto a = disk(8, 16), b = disk(16, 32);
  for (std::size_t i = 0; i < b->size(); ++i) CHECK(b->contains(b->node(i)));
  CHECK(b->spacing() < a->spacing());
  CHECK(b->spacing() == doctest::Approx(a->spacing() / 2).epsilon(0.05));
  CHECK(box(3, 17, 1.0)->spacing() == doctest::Approx(box(3, 9, 1.0)->spacing() / 2));
}

TEST_CASE("gradient of x1 on the disk is e1") {
  auto m = disk(12, 24);
  auto u = ScalarField::sample(m, [](std::span<const double> x) { return x[0]; });
  auto g = gradient(u);
  double err = 0.0;
  for (std::size_t i = 0; i < m->size(); ++i) err = std::max({err, std::abs(g.at(i)[0] - 1.0), std::abs(g.at(i)[1])});
  CHECK(err < 1e-12);
}

TEST_CASE("gradient of |x|^2 converges at second order") {
  auto run = [](std::size_t nr) {
    auto m = disk(nr, 2 * nr);
    auto u = ScalarField::sample(m, [](std::span<const double> x) { return x[0] * x[0] + x[1] * x[1]; });
    auto g = gradient(u);
    double err = 0.0;
    for (std::size_t i = 0; i < m->size(); ++i) {
      auto x = m->node(i);
      err = std::max({err, std::abs(g.at(i)[0] - 2 * x[0]), std::abs(g.at(i)[1] - 2 * x[1])});
    }
    return std::pair{err, m->spacing()};
  };
  auto [e1, h1] = run(8);
  CHECK(e1 <= 4.0 * h1 * h1);
  CHECK(e1 < 1e-12);  // quadratic in r, constant in theta: differences are exact

  // a genuinely angular field
  auto run2 = [](std::size_t np) {
    auto m = std::make_shared<const Mesh>(Mesh::box(2, np, 1.0));
    auto u = ScalarField::sample(m, [](std::span<const double> x) { return std::sin(x[0]) * std::cos(2 * x[1]); });
    auto g = gradient(u);
    double err = 0.0;
    for (std::size_t i = 0; i < m->size(); ++i) {
      auto x = m->node(i);
      err = std::max(err, std::abs(g.at(i)[0] - std::cos(x[0]) * std::cos(2 * x[1])));
      err = std::max(err, std::abs(g.at(i)[1] + 2 * std::sin(x[0]) * std::sin(2 * x[1])));
    }
    return err;
  };
  const double order = std::log2(run2(17) / run2(33));
  CHECK(order >= 1.9);
}

TEST_CASE("gradient of a sampled bubble matches the closed form at second order") {
  auto run = [](std::size_t np) {
    auto m = box(3, np, 2.0);
    auto u = ScalarField::sample(m, [](std::span<const double> x) { return bubble(std::hypot(x[0], x[1], x[2])); });
    auto g = gradient(u);
    double err = 0.0;
    for (std::size_t i = 0; i < m->size(); ++i) {
      auto x = m->node(i);
      const double r = std::hypot(x[0], x[1], x[2]);
      if (r < 1.0) continue;  // the profile is only C^1 at its center
      for (int k = 0; k < 3; ++k) err = std::max(err, std::abs(g.at(i)[k] - bubble_dr(r) * x[k] / r));
    }
    return err;
  };
  const double e1 = run(33), e2 = run(65);
  CHECK(std::log2(e1 / e2) >= 1.9);
}

TEST_CASE("degenerate meshes are rejected") {
  CHECK_THROWS_AS(Mesh::box(2, 2, 1.0), InvalidInput);
  CHECK_THROWS_AS(Mesh::radial(2, 1), InvalidInput);
  CHECK_THROWS_AS(Mesh::polar_disk(1, 8), InvalidInput);
  CHECK_THROWS_AS(Mesh::polar_disk(4, 7), InvalidInput);
}

TEST_CASE("lq norms on the unit disk") {
  auto m = disk(64, 128);
  CHECK(lq_norm(ScalarField(m, 1.0), 2.0) == doctest::Approx(std::sqrt(pi)).epsilon(1e-6));
  CHECK(lq_norm(ScalarField(m, 0.0), 2.0) == 0.0);
  CHECK(lq_norm(ScalarField(m, 0.0), INFINITY) == 0.0);
  auto r = ScalarField::sample(m, [](std::span<const double> x) { return std::hypot(x[0], x[1]); });
  CHECK(lq_norm(r, 1.0) == doctest::Approx(2 * pi / 3).epsilon(1e-10));
  CHECK(lq_norm(r, INFINITY) == doctest::Approx(1.0));
}

TEST_CASE("empty regions are reported") {
  auto m = disk(8, 16);
  const double far[2] = {5.0, 5.0};
  Region empty = Region::ball(*m, far, 0.1);
  CHECK(empty.empty());
  CHECK_THROWS_AS(lq_norm(ScalarField(m, 1.0), 2.0, empty), EmptyRegion);
  CHECK_THROWS_AS(oscillation(ScalarField(m, 1.0), empty), EmptyRegion);
}

TEST_CASE("oscillation examples and invariances") {
  auto m = disk(32, 64);
  CHECK(oscillation(ScalarField(m, 3.0)) == 0.0);
  auto k = Coefficient::affine(1.0, 0.1).sample(m);
  CHECK(std::abs(oscillation(k) - 0.2) <= m->spacing());
  auto r = ScalarField::sample(m, [](std::span<const double> x) { return std::hypot(x[0], x[1]); });
  CHECK(std::abs(oscillation(r) - 1.0) <= m->spacing());

  std::vector<double> shifted(k.values().begin(), k.values().end()), scaled(shifted);
  for (double& v : shifted) v += 7.0;
  for (double& v : scaled) v *= 2.5;
  CHECK(oscillation(ScalarField(m, shifted)) == doctest::Approx(oscillation(k)));
  CHECK(oscillation(ScalarField(m, scaled)) == doctest::Approx(2.5 * oscillation(k)));
}

TEST_CASE("region set operations act on masks") {
  auto m = disk(8, 16);
  const double up[2] = {0.0, 1.0};
  Region top = Region::half_space(*m, up, 0.0);
  Region inner = Region::centered_ball(*m, 0.5);
  CHECK((top & inner).count() + (top - inner).count() == top.count());
  CHECK((top | inner).count() == top.count() + inner.count() - (top & inner).count());
  CHECK(Region::whole(*m).measure(*m) == doctest::Approx(pi));
}

TEST_CASE("interpolation reproduces nodes and affine fields") {
  auto affine = [](std::span<const double> x) {
    double s = 0.3;
    for (std::size_t k = 0; k < x.size(); ++k) s += (k + 1.5) * x[k];
    return s;
  };
  for (auto m : {disk(9, 14), box(2, 9, 1.0), box(3, 7, 2.0), box(4, 5, 1.0)}) {
    auto u = ScalarField::sample(m, affine);
    for (std::size_t i = 0; i < m->size(); i += 3) CHECK(interpolate(u, m->node(i)) == u[i]);
    std::uint64_t state = 12345;
    auto rnd = [&] {
      state = state * 6364136223846793005ULL + 1442695040888963407ULL;
      return static_cast<double>(state >> 11) / 9007199254740992.0;
    };
    for (int t = 0; t < 200; ++t) {
      std::vector<double> x(static_cast<std::size_t>(m->dim()));
      do {
        for (double& v : x) v = (2 * rnd() - 1) * m->extent();
      } while (!m->contains(x));
      CHECK(interpolate(u, x) == doctest::Approx(affine(x)).epsilon(1e-12));
    }
  }
  auto rm = radial(3, 20);
  auto ur = ScalarField::sample(rm, [](std::span<const double> r) { return 2.0 - 3.0 * r[0]; });
  const double r0 = 0.37;
  CHECK(interpolate(ur, std::span<const double>(&r0, 1)) == doctest::Approx(2.0 - 3.0 * r0));
}

TEST_CASE("interpolation of a bubble off the grid converges at second order") {
  auto run = [](std::size_t np) {
    auto m = box(3, np, 2.0);
    auto u = ScalarField::sample(m, [](std::span<const double> x) { return bubble(std::hypot(x[0], x[1], x[2])); });
    double err = 0.0;
    for (int t = 0; t < 50; ++t) {
      const double x[3] = {0.6 + 0.013 * t, -0.7 + 0.021 * t, 0.55 - 0.017 * t};
      err = std::max(err, std::abs(interpolate(u, x) - bubble(std::hypot(x[0], x[1], x[2]))));
    }
    return err;
  };
  CHECK(std::log2(run(17) / run(33)) >= 1.8);
}

TEST_CASE("points outside the region carry their coordinates") {
  auto m = disk(8, 16);
  ScalarField u(m, 1.0);
  const double x[2] = {1.5, 0.2};
  try {
    interpolate(u, x);
    FAIL("expected OutOfRegion");
  } catch (const OutOfRegion& e) {
    REQUIRE(e.point().size() == 2);
    CHECK(e.point()[0] == 1.5);
    CHECK(e.point()[1] == 0.2);
  }
}

TEST_CASE("quadrature converges at second order on smooth fields") {
  auto run = [](std::size_t np) {
    auto m = box(2, np, 1.0);
    auto u = ScalarField::sample(m, [](std::span<const double> x) { return std::exp(x[0]) * std::cos(x[1]); });
    const double exact = (std::exp(1.0) - std::exp(-1.0)) * 2 * std::sin(1.0);
    return std::abs(integrate(u) - exact);
  };
  CHECK(std::log2(run(9) / run(17)) >= 1.9);
}

TEST_CASE("field dump and load round-trip bit-exactly") {
  auto dir = std::filesystem::temp_directory_path() / "qsym_io_test";
  for (auto m : {disk(5, 8), box(3, 5, 1.7), radial(4, 9)}) {
    auto u = ScalarField::sample(m, [](std::span<const double> x) { return std::sin(1.0 + x[0]) / 3.0; });
    save_field(u, dir / "f");
    auto v = load_field(dir / "f");
    CHECK(v.mesh().params() == m->params());
    REQUIRE(v.size() == u.size());
    bool same = true;
    for (std::size_t i = 0; i < u.size(); ++i) same = same && (u[i] == v[i]);
    CHECK(same);
  }
  std::filesystem::remove_all(dir);
}

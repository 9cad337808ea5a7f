#include "qsym/inequalities.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include "qsym/errors.hpp"
#include "qsym/moving_planes.hpp"

namespace qsym {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// uniform / normal draws from raw 64-bit output, independent of the
// standard library's distribution implementations
struct Rng {
  std::mt19937_64 gen;
  explicit Rng(std::uint64_t seed) : gen(seed) {}
  double uniform() { return static_cast<double>(gen() >> 11) * 0x1.0p-53; }
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * uniform());
  }
};

double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

void check_region(const Region& r, const Mesh& m) {
  if (r.size() != m.size()) throw InvalidInput("region does not match mesh");
}

void check_same_mesh(const ScalarField& a, const ScalarField& b) {
  if (a.mesh_ptr() != b.mesh_ptr()) throw InvalidInput("fields live on different meshes");
}

std::string point_text(std::span<const double> x) {
  std::ostringstream os;
  os << '(';
  for (std::size_t k = 0; k < x.size(); ++k) os << (k ? ", " : "") << x[k];
  os << ')';
  return os.str();
}

// B_r(x0) lies inside the continuous region of the mesh
bool ball_inside_mesh(const Mesh& m, std::span<const double> x0, double r) {
  if (m.kind() == MeshKind::polar_disk) return norm2(x0) + r <= 1.0 + 1e-12;
  if (m.kind() == MeshKind::box) {
    for (double c : x0)
      if (std::abs(c) + r > m.extent() + 1e-12) return false;
    return true;
  }
  return false;
}

ScalarField difference(const ScalarField& a, const ScalarField& b) {
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  return ScalarField(a.mesh_ptr(), std::move(d));
}

}  // namespace

// ---------------------------------------------------------------------------

FundamentalReport fundamental_ineq_check(double p, std::size_t samples, std::uint64_t seed, int dim) {
  if (!(p > 1.0)) throw InvalidInput("fundamental inequalities need p > 1");
  if (dim < 1) throw InvalidInput("vector dimension must be positive");
  FundamentalReport r;
  r.p = p;
  const bool high = p >= 2.0;
  if (high) {
    r.c_ref = std::pow(2.0, 2.0 - p);
    r.C_ref = p - 1.0;
    r.c_hat_ref = std::pow(2.0, 2.0 - p);
  } else {
    r.c_ref = p - 1.0;
    r.C_ref = std::pow(2.0, 2.0 - p) / (p - 1.0);
    r.C_hat_ref = std::pow(2.0, 2.0 - p);
  }
  r.c = kInf;
  r.c_hat = high ? kInf : 0.0;
  r.C = 0.0;
  r.C_hat = 0.0;

  Rng rng(seed);
  const auto d = static_cast<std::size_t>(dim);
  std::vector<double> e(d), f(d);
  std::vector<double> diff(d), sumv(d), da(d);
  // a(e) - a(f) = |e|^{p-2} (e - f) + (|e|^{p-2} - |f|^{p-2}) f, without the
  // cancellation of the direct difference when e is close to f
  auto a_diff = [&]() {
    const double ne = norm2(e), nf = norm2(f);
    double ip = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      diff[k] = e[k] - f[k];
      sumv[k] = e[k] + f[k];
      ip += diff[k] * sumv[k];
    }
    double se = ne > 0.0 ? std::pow(ne, p - 2.0) : 0.0, gap;
    if (ne > 0.0 && nf > 0.0) {
      const double rel = ip / ((ne + nf) * nf);  // (|e| - |f|) / |f|
      gap = std::pow(nf, p - 2.0) * std::expm1((p - 2.0) * std::log1p(rel));
    } else {
      gap = se - (nf > 0.0 ? std::pow(nf, p - 2.0) : 0.0);
    }
    if (ne == 0.0) se = 0.0;
    for (std::size_t k = 0; k < d; ++k) da[k] = se * diff[k] + gap * f[k];
  };
  constexpr double slack = 1e-12;
  for (std::size_t i = 0; i < samples; ++i) {
    const double scale = std::pow(10.0, 6.0 * rng.uniform() - 3.0);
    for (auto& x : e) x = scale * rng.normal();
    switch (i % 4) {
      case 0: {
        const double s2 = std::pow(10.0, 6.0 * rng.uniform() - 3.0);
        for (auto& x : f) x = s2 * rng.normal();
        break;
      }
      case 1: {  // nearly collinear
        const double t = 2.0 * rng.uniform() - 1.0;
        for (std::size_t k = 0; k < d; ++k) f[k] = t * e[k] + 1e-3 * scale * rng.normal();
        break;
      }
      case 2: {  // nearly antipodal
        const double t = 1.0 + 1e-2 * rng.normal();
        for (std::size_t k = 0; k < d; ++k) f[k] = -t * e[k];
        break;
      }
      default: {  // nearly equal
        const double rel = std::pow(10.0, -6.0 + 4.0 * rng.uniform());
        for (std::size_t k = 0; k < d; ++k) f[k] = e[k] + rel * scale * rng.normal();
      }
    }
    a_diff();
    double dot = 0.0, diff2 = 0.0, adiff2 = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      dot += da[k] * diff[k];
      diff2 += diff[k] * diff[k];
      adiff2 += da[k] * da[k];
    }
    const double sum = norm2(e) + norm2(f);
    if (diff2 == 0.0 || sum == 0.0) continue;
    const double dn = std::sqrt(diff2), an = std::sqrt(adiff2);
    const double w = std::pow(sum, p - 2.0);
    const double lower = dot / (w * diff2);
    const double upper = an / (w * dn);
    r.c = std::min(r.c, lower);
    r.C = std::max(r.C, upper);
    bool bad = lower < r.c_ref * (1.0 - slack) || upper > r.C_ref * (1.0 + slack);
    if (high) {
      const double h = dot / std::pow(dn, p);
      r.c_hat = std::min(r.c_hat, h);
      bad = bad || h < r.c_hat_ref * (1.0 - slack);
    } else {
      const double h = an / std::pow(dn, p - 1.0);
      r.C_hat = std::max(r.C_hat, h);
      bad = bad || h > r.C_hat_ref * (1.0 + slack);
    }
    ++r.samples;
    if (bad) ++r.violations;
  }
  r.pass = r.violations == 0;
  return r;
}

double exponent_2M(int n, double p) {
  if (n < 2 || !(p > 2.0)) throw InvalidInput("2_M needs n >= 2 and p > 2");
  const double inv = 0.5 - 1.0 / n + ((p - 2.0) / (p - 1.0)) / n;
  return 1.0 / inv;
}

double exponent_2star(int n, double t, double gamma) {
  if (n < 2 || !(t > 0.0)) throw InvalidInput("2*(t) needs n >= 2 and t > 0");
  const double inv = 0.5 - 1.0 / n + (1.0 / t) * (0.5 - gamma / (2.0 * n));
  return inv > 0.0 ? 1.0 / inv : kInf;
}

double admissible_t(double p, double r) {
  if (!(p > 2.0)) throw InvalidInput("the weight exponent t needs p > 2");
  const double lo = (p - 2.0) / (p - 1.0);
  if (!(r > lo && r < 1.0)) throw InvalidInput("r must lie in ((p-2)/(p-1), 1)");
  return (p - 1.0) / (p - 2.0) * r;
}

// ---------------------------------------------------------------------------

WeightCondition weight_condition_constant(const ScalarField& rho, double t, double gamma, const Region& omega) {
  const Mesh& m = rho.mesh();
  check_region(omega, m);
  if (omega.empty()) throw EmptyRegion("weight condition over an empty region");
  if (!(t > 0.0)) throw InvalidInput("weight exponent t must be positive");
  const int n = m.dim();
  if (!(gamma >= 0.0)) throw InvalidInput("gamma must be nonnegative");
  if (n == 2 && gamma != 0.0) throw InvalidInput("gamma must be 0 when n = 2");
  if (n > 2 && gamma != 0.0 && !(gamma < n - 2)) throw InvalidInput("gamma must be below n - 2");
  if (gamma != 0.0 && m.coord_dim() != n) throw InvalidInput("gamma > 0 needs a polar disk or box mesh");

  WeightCondition w;
  w.region_measure = omega.measure(m);
  std::vector<std::size_t> idx;
  std::vector<double> inv;  // rho^{-t} on admitted nodes
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (!omega.contains(i)) continue;
    if (!(rho[i] > 0.0) || !std::isfinite(rho[i])) {
      w.excluded_measure += m.weight(i);
      continue;
    }
    idx.push_back(i);
    inv.push_back(std::pow(rho[i], -t));
  }
  w.degraded = w.excluded_measure > 0.01 * w.region_measure;
  w.sample_points = idx.size();
  if (gamma == 0.0) {
    double s = 0.0;
    for (std::size_t a = 0; a < idx.size(); ++a) s += m.weight(idx[a]) * inv[a];
    w.C_star = s;
    return w;
  }
  const double vol1 = unit_ball_volume(n), area = sphere_area(n);
  for (std::size_t a = 0; a < idx.size(); ++a) {
    const auto x = m.node(idx[a]);
    // self cell: rho^{-t} times the integral of |y|^{-gamma} over a ball of the cell's volume
    const double rad = std::pow(m.weight(idx[a]) / vol1, 1.0 / n);
    double s = inv[a] * area * std::pow(rad, n - gamma) / (n - gamma);
    for (std::size_t b = 0; b < idx.size(); ++b) {
      if (b == a) continue;
      const auto y = m.node(idx[b]);
      double d2 = 0.0;
      for (int k = 0; k < n; ++k) d2 += (x[k] - y[k]) * (x[k] - y[k]);
      s += m.weight(idx[b]) * inv[b] * std::pow(d2, -0.5 * gamma);
    }
    w.C_star = std::max(w.C_star, s);
  }
  return w;
}

ScalarField gradient_weight(const VectorField& grad, double p) {
  if (!(p >= 2.0)) throw InvalidInput("gradient weights need p >= 2");
  std::vector<double> v(grad.mesh().size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double g = grad.norm_at(i);
    v[i] = g <= kGradientFloor ? 0.0 : std::pow(g, p - 2.0);
  }
  return ScalarField(grad.mesh_ptr(), std::move(v));
}

ScalarField gradient_weight(const ScalarField& u, double p) { return gradient_weight(gradient(u), p); }

namespace {

WeightReport weight_report_impl(int n, double C_star, double t, double gamma, double q, double volume, double C_hat) {
  if (n < 2) throw InvalidInput("dimension must be at least 2");
  if (!(t > 1.0)) throw InvalidInput("weight exponent t must exceed 1");
  if (!(C_star > 0.0) || !(volume > 0.0)) throw InvalidInput("C* and |Omega| must be positive");
  if (!(q >= 1.0)) throw InvalidInput("Sobolev exponent q must be at least 1");
  if (!(q < exponent_2star(n, t, gamma))) throw InvalidInput("Sobolev exponent q must stay below 2*(t)");
  WeightReport w;
  w.n = n;
  w.C_star = C_star;
  w.t = t;
  w.gamma = gamma;
  w.q = q;
  w.volume = volume;
  const double tt = 2.0 * t, tc = tt / (tt - 1.0);
  w.mu = 1.0 + (1.0 - n + gamma / tt) * tc / n;
  w.delta = tc * (0.5 - 1.0 / q);
  if (!(w.delta < w.mu) || !(w.delta < 1.0)) throw InvalidInput("exponents give delta >= mu; lower q");
  const double b1 = unit_ball_volume(n);
  const double ex = w.mu - w.delta;
  w.C_M = std::pow((1.0 - w.delta) / ex, 1.0 - w.delta) * std::pow(b1, ex) * std::pow(volume, ex);
  w.C_hat = C_hat;
  w.C_S = C_hat * std::pow(C_star, 1.0 / tt) * std::pow(w.C_M, 1.0 / tc);
  return w;
}

}  // namespace

WeightReport weight_report(int n, double C_star, double t, double gamma, double q, double volume) {
  return weight_report_impl(n, C_star, t, gamma, q, volume, 1.0 / (n * unit_ball_volume(n)));
}

WeightReport weight_report_zero_mean(int n, double C_star, double t, double gamma, double q, double volume, double diameter,
                                     double s_measure) {
  if (!(diameter > 0.0) || !(s_measure > 0.0)) throw InvalidInput("zero-mean variant needs diam > 0 and |S| > 0");
  return weight_report_impl(n, C_star, t, gamma, q, volume, std::pow(diameter, n) / (n * s_measure));
}

SobolevCheck check_weighted_sobolev(const ScalarField& rho, const ScalarField& v, const VectorField& grad_v, double q,
                                    const Region& omega, const WeightReport& w) {
  const Mesh& m = v.mesh();
  check_same_mesh(rho, v);
  check_region(omega, m);
  if (omega.empty()) throw EmptyRegion("Sobolev check over an empty region");
  if (!(q >= 1.0)) throw InvalidInput("Sobolev exponent q must be at least 1");
  double vmax = 0.0;
  for (double x : v.values()) vmax = std::max(vmax, std::abs(x));
  SobolevCheck c;
  c.bound = w.C_S;
  if (vmax == 0.0) {
    c.pass = true;
    return c;
  }
  for (std::size_t i = 0; i < m.size(); ++i)
    if ((!omega.contains(i) || m.on_boundary(i)) && std::abs(v[i]) > 1e-12 * vmax)
      throw InvalidInput("test field does not vanish outside Omega at node " + point_text(m.node(i)));
  c.norm_q = lq_norm(v, q, omega);
  double s = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i)
    if (omega.contains(i)) {
      const double g = grad_v.norm_at(i);
      s += m.weight(i) * rho[i] * g * g;
    }
  c.grad_rho = std::sqrt(s);
  if (c.grad_rho == 0.0) {
    c.contradiction = true;
    c.ratio = kInf;
    return c;
  }
  c.ratio = c.norm_q / c.grad_rho;
  c.pass = c.ratio <= c.bound;
  return c;
}

SobolevCheck check_weighted_sobolev(const ScalarField& rho, const ScalarField& v, double q, const Region& omega,
                                    const WeightReport& w) {
  return check_weighted_sobolev(rho, v, gradient(v), q, omega, w);
}

std::vector<TestField> random_test_fields(const MeshPtr& mesh, std::size_t count, std::uint64_t seed) {
  if (mesh->coord_dim() != mesh->dim()) throw InvalidInput("test fields need a polar disk or box mesh");
  const int n = mesh->dim();
  const double L = mesh->extent();
  // exponent tuples of total degree <= 3
  std::vector<std::array<int, 4>> mono;
  std::array<int, 4> e{};
  for (e[0] = 0; e[0] <= 3; ++e[0])
    for (e[1] = 0; e[1] <= (n > 1 ? 3 : 0); ++e[1])
      for (e[2] = 0; e[2] <= (n > 2 ? 3 : 0); ++e[2])
        for (e[3] = 0; e[3] <= (n > 3 ? 3 : 0); ++e[3])
          if (e[0] + e[1] + e[2] + e[3] <= 3) mono.push_back(e);
  Rng rng(seed);
  std::vector<TestField> out;
  out.reserve(count);
  for (std::size_t c = 0; c < count; ++c) {
    std::vector<double> coef(mono.size());
    for (auto& a : coef) a = rng.normal();
    auto poly = [&](std::span<const double> x, std::span<double> g) {
      double val = 0.0;
      for (int k = 0; k < n; ++k) g[k] = 0.0;
      for (std::size_t j = 0; j < mono.size(); ++j) {
        double term = coef[j];
        for (int k = 0; k < n; ++k) term *= std::pow(x[k], mono[j][k]);
        val += term;
        for (int k = 0; k < n; ++k) {
          if (mono[j][k] == 0) continue;
          double d = coef[j] * mono[j][k] * std::pow(x[k], mono[j][k] - 1);
          for (int l = 0; l < n; ++l)
            if (l != k) d *= std::pow(x[l], mono[j][l]);
          g[k] += d;
        }
      }
      return val;
    };
    auto eval = [&](std::span<const double> x, double* grad) {
      double r2 = 0.0;
      for (int k = 0; k < n; ++k) r2 += x[k] * x[k];
      const double s = 1.0 - r2 / (L * L);
      std::array<double, 4> gp{};
      const double P = poly(x, gp);
      if (s <= 0.0) {
        if (grad)
          for (int k = 0; k < n; ++k) grad[k] = 0.0;
        return 0.0;
      }
      if (grad)
        for (int k = 0; k < n; ++k) grad[k] = gp[k] * s * s + P * 2.0 * s * (-2.0 * x[k] / (L * L));
      return P * s * s;
    };
    auto v = ScalarField::sample(mesh, [&](std::span<const double> x) { return eval(x, nullptr); });
    // exact zeros on the mesh boundary
    auto& vals = v.mutable_values();
    for (std::size_t i = 0; i < mesh->size(); ++i)
      if (mesh->on_boundary(i)) vals[i] = 0.0;
    auto g = VectorField::sample(mesh, [&](std::span<const double> x, std::span<double> out) { eval(x, out.data()); });
    out.push_back({std::move(v), std::move(g)});
  }
  return out;
}

TestField cap_test_field(const MeshPtr& mesh, std::span<const double> omega, double lambda) {
  const int n = mesh->dim();
  if (mesh->coord_dim() != n || static_cast<int>(omega.size()) != n)
    throw InvalidInput("cap test field needs a polar disk or box mesh and a matching direction");
  const double L = mesh->extent();
  const Point w(omega.begin(), omega.end());
  auto eval = [&](std::span<const double> x, double* grad) {
    double r2 = 0.0, h = -lambda;
    for (int k = 0; k < n; ++k) {
      r2 += x[k] * x[k];
      h += w[k] * x[k];
    }
    const double s = 1.0 - r2 / (L * L);
    if (h <= 0.0 || s <= 0.0) {
      if (grad)
        for (int k = 0; k < n; ++k) grad[k] = 0.0;
      return 0.0;
    }
    if (grad)
      for (int k = 0; k < n; ++k) grad[k] = w[k] * s * s + h * 2.0 * s * (-2.0 * x[k] / (L * L));
    return h * s * s;
  };
  auto v = ScalarField::sample(mesh, [&](std::span<const double> x) { return eval(x, nullptr); });
  auto& vals = v.mutable_values();
  for (std::size_t i = 0; i < mesh->size(); ++i)
    if (mesh->on_boundary(i)) vals[i] = 0.0;
  auto g = VectorField::sample(mesh, [&](std::span<const double> x, std::span<double> out) { eval(x, out.data()); });
  return {std::move(v), std::move(g)};
}

PoincareCheck check_weighted_poincare(const ScalarField& rho, const ScalarField& v, const VectorField& grad_v,
                                      const Region& omega, double theta, double p, double C_S,
                                      const std::optional<Region>& vanishing) {
  const Mesh& m = v.mesh();
  check_same_mesh(rho, v);
  check_region(omega, m);
  if (omega.empty()) throw EmptyRegion("Poincare check over an empty region");
  if (!(theta > 0.0 && theta < 1.0)) throw InvalidInput("theta must lie in (0, 1)");
  if (!(p > 1.0)) throw InvalidInput("p must exceed 1");
  if (!(C_S > 0.0)) throw InvalidInput("C_S must be positive");
  double vmax = 0.0;
  for (double x : v.values()) vmax = std::max(vmax, std::abs(x));
  PoincareCheck c;
  Region eff = omega;
  if (vanishing) {
    check_region(*vanishing, m);
    if ((*vanishing & omega).empty()) throw InvalidInput("the vanishing set has no nodes in Omega");
    eff = omega - *vanishing;
  }
  for (std::size_t i = 0; i < m.size(); ++i) {
    const bool must_vanish = vanishing ? (!omega.contains(i) || vanishing->contains(i)) : (!omega.contains(i) || m.on_boundary(i));
    if (must_vanish && std::abs(v[i]) > 1e-12 * vmax)
      throw InvalidInput("test field does not vanish where required at node " + point_text(m.node(i)));
  }
  c.measure = eff.empty() ? 0.0 : eff.measure(m);
  c.C_P = std::pow(c.measure, 2.0 * theta / ((p - 1.0) * m.dim()));
  if (vmax == 0.0) {
    c.pass = true;
    return c;
  }
  double a = 0.0, b = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i)
    if (omega.contains(i)) {
      const double g = grad_v.norm_at(i);
      a += m.weight(i) * v[i] * v[i];
      b += m.weight(i) * rho[i] * g * g;
    }
  c.lhs = a;
  c.rhs = c.C_P * C_S * C_S * b;
  c.pass = c.lhs <= c.rhs;
  return c;
}

// ---------------------------------------------------------------------------

CapPair cap_pair(const ScalarField& u, const ProblemSpec& spec, double scale, std::span<const double> omega, double lambda) {
  const MeshPtr& mp = u.mesh_ptr();
  const Mesh& m = *mp;
  if (m.coord_dim() != m.dim()) throw InvalidInput("cap pairs need a polar disk or box mesh");
  HalfSpace h(Point(omega.begin(), omega.end()), lambda);
  FieldEvaluator ev(u, m.kind() == MeshKind::box ? spec.p : 0.0);
  const int n = m.dim();
  std::vector<double> u2(m.size()), gap(m.size());
  std::vector<char> cap(m.size()), bd(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) {
    const auto x = m.node(i);
    const auto xr = reflect_point(x, h);
    u2[i] = ev(xr);
    gap[i] = scale * (spec.kappa(x, n) - spec.kappa(xr, n)) * spec.f(u[i]);
    double s = 0.0;
    for (int k = 0; k < n; ++k) s += omega[k] * x[k];
    cap[i] = s > lambda ? 1 : 0;
    bd[i] = (s >= lambda && m.on_boundary(i)) ? 1 : 0;
  }
  CapPair out{u, ScalarField(mp, std::move(u2)), ScalarField(mp, std::move(gap)), Region(std::move(cap)), Region(std::move(bd)),
              lambda};
  return out;
}

ComparisonReport small_domain_comparison(const ScalarField& u1, const ScalarField& u2, const ScalarField& g_gap,
                                         const Region& omega, const Region& boundary) {
  check_same_mesh(u1, u2);
  check_same_mesh(u1, g_gap);
  const Mesh& m = u1.mesh();
  check_region(omega, m);
  check_region(boundary, m);
  if (omega.empty()) throw EmptyRegion("comparison over an empty region");
  double scale = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) scale = std::max({scale, std::abs(u1[i]), std::abs(u2[i])});
  for (std::size_t i = 0; i < m.size(); ++i)
    if (boundary.contains(i) && u1[i] > u2[i] + 1e-12 * scale)
      throw InvalidInput("boundary ordering u1 <= u2 fails at node " + point_text(m.node(i)));
  ComparisonReport r;
  r.measure = omega.measure(m);
  for (std::size_t i = 0; i < m.size(); ++i)
    if (omega.contains(i)) {
      r.numerator = std::max(r.numerator, u1[i] - u2[i]);
      r.denominator = std::max(r.denominator, std::abs(g_gap[i]));
    }
  if (r.denominator > 0.0)
    r.K = r.numerator / r.denominator;
  else
    r.K = r.numerator > 0.0 ? kInf : 0.0;
  r.pass = std::isfinite(r.K);
  return r;
}

ComparisonReport small_domain_comparison(const CapPair& pair) {
  return small_domain_comparison(pair.u1, pair.u2, pair.g_gap, pair.omega, pair.boundary);
}

// ---------------------------------------------------------------------------

HarnackConfig HarnackConfig::defaults(int n, double p) {
  HarnackConfig c;
  c.n = n;
  c.p = p;
  const double m2 = exponent_2M(n, p);
  c.q = std::max(4.0 * n, 4.0 * m2 / (m2 - 2.0));
  const double lo = 2.0 * c.q / (c.q - 2.0);
  const double hi = n == 3 ? std::min(m2, 4.0) : m2;
  c.qq = 0.5 * (lo + hi);
  c.s = 0.5 * std::min(1.0, c.chi());
  return c;
}

void HarnackConfig::validate() const {
  std::vector<std::string> bad;
  if (n < 2) bad.push_back("n >= 2");
  if (!(p > 2.0)) bad.push_back("p > 2");
  if (bad.empty()) {
    const double m2 = exponent_2M(n, p);
    if (!(q > 2.0)) bad.push_back("q > 2");
    if (!(q > 2.0 * m2 / (m2 - 2.0))) bad.push_back("q > 2 2_M / (2_M - 2)");
    if (!(qq > 2.0 && qq < m2)) bad.push_back("2 < qq < 2_M");
    if (!(q > 2.0 * qq / (qq - 2.0))) bad.push_back("q > 2 qq / (qq - 2)");
    if (!(s > 0.0 && s < chi())) bad.push_back("0 < s < qq / 2");
    if (n == 3 && !(q > 4.0 && qq < 4.0)) bad.push_back("n = 3 needs q > 4 and qq < 4");
  }
  if (!(c_flat > 0.0 && c_flat < 1.0)) bad.push_back("c_flat in (0, 1)");
  if (!(C_nat >= 1.0)) bad.push_back("C_nat >= 1");
  if (!(c_sup >= 0.0)) bad.push_back("||c||_inf >= 0");
  if (!(frak_c >= 1.0)) bad.push_back("frak_c >= 1");
  if (!(frak_C > 0.0)) bad.push_back("frak_C > 0");
  if (bad.empty()) return;
  std::string msg = "Harnack configuration violates:";
  for (const auto& b : bad) msg += " [" + b + "]";
  throw InvalidInput(msg);
}

double harnack_M(double R, const HarnackConfig& cfg) {
  if (!(R > 0.0 && R <= 1.0)) throw InvalidInput("M(R) needs 0 < R <= 1");
  if (!(cfg.s > 0.0) || !(cfg.qq > 2.0) || !(cfg.c_flat > 0.0 && cfg.c_flat < 1.0) || !(cfg.C_nat > 0.0))
    throw InvalidInput("M(R) needs s > 0, qq > 2, c_flat in (0, 1), C_nat > 0");
  const double e = cfg.C_nat / std::pow(R, 2.0 / (cfg.qq - 2.0));
  return std::exp(-cfg.n / cfg.s * std::log(R) + e * std::log(cfg.c_flat * R));
}

double harnack_M_explicit(double R, double C_S, const HarnackConfig& cfg) {
  if (!(C_S >= 1.0)) throw InvalidInput("the explicit M(R) assumes C_S >= 1");
  harnack_M(R, cfg);  // argument checks
  const double e = cfg.C_nat * C_S * std::pow(C_S * C_S / R, 2.0 / (cfg.qq - 2.0));
  return std::exp(-cfg.n / cfg.s * std::log(R) + e * std::log(cfg.c_flat * R / C_S));
}

HarnackReport harnack_check(const ScalarField& u1, const ScalarField& u2, const ScalarField& g_gap,
                            std::span<const double> x0, double R, const HarnackConfig& cfg, const Region& region,
                            std::optional<double> C_S) {
  cfg.validate();
  check_same_mesh(u1, u2);
  check_same_mesh(u1, g_gap);
  const Mesh& m = u1.mesh();
  check_region(region, m);
  if (m.coord_dim() != m.dim() || static_cast<int>(x0.size()) != m.dim())
    throw InvalidInput("Harnack check needs a polar disk or box mesh and a matching center");
  if (!(R > 0.0 && R <= 1.0)) throw InvalidInput("Harnack check needs 0 < R <= 1");
  if (!ball_inside_mesh(m, x0, 5.0 * R)) throw InvalidInput("B_5R(x0) leaves the mesh region");
  const Region b5 = Region::ball(m, x0, 5.0 * R), b2 = Region::ball(m, x0, 2.0 * R), b1 = Region::ball(m, x0, R);
  if (!(b5 - region).empty()) throw InvalidInput("B_5R(x0) leaves the region");
  if (b1.empty()) throw EmptyRegion("B_R(x0) contains no nodes");

  HarnackReport h;
  h.k = lq_norm(g_gap, cfg.q, b5);
  double scale = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) scale = std::max({scale, std::abs(u1[i]), std::abs(u2[i])});
  for (std::size_t i = 0; i < m.size(); ++i)
    if (b5.contains(i) && u1[i] - u2[i] > cfg.frak_c * h.k + 1e-12 * scale)
      throw InvalidInput("u1 - u2 exceeds frak_c k at node " + point_text(m.node(i)));
  const ScalarField d = difference(u2, u1);
  h.norm_s = lq_norm(d, cfg.s, b2);
  h.inf = kInf;
  for (std::size_t i = 0; i < m.size(); ++i)
    if (b1.contains(i)) h.inf = std::min(h.inf, d[i]);
  h.M = C_S ? harnack_M_explicit(R, *C_S, cfg) : harnack_M(R, cfg);
  h.lhs = h.M * h.norm_s;
  const double base = h.inf + 2.0 * cfg.frak_c * h.k;
  h.rhs = cfg.frak_C * base;
  if (h.lhs == 0.0) {
    h.ratio = 0.0;
    h.frak_C_needed = 0.0;
  } else if (base <= 0.0) {
    h.ratio = kInf;
    h.frak_C_needed = kInf;
  } else {
    h.ratio = h.lhs / h.rhs;
    h.frak_C_needed = h.lhs / base;
  }
  h.pass = h.ratio <= 1.0;
  return h;
}

double local_bound_factor(double C_S, double R, double p_sharp, double qq) {
  if (!(C_S > 0.0) || !(R > 0.0) || !(p_sharp > 1.0) || !(qq > 2.0))
    throw InvalidInput("local bound factor needs C_S > 0, R > 0, p# > 1, qq > 2");
  return std::pow(C_S * C_S / R, (2.0 / p_sharp) * (qq / (qq - 2.0)));
}

LocalBoundReport local_bound_check(const LocalBoundInput& in) {
  if (!in.u1 || !in.u2 || !in.g_gap) throw InvalidInput("local bound check needs u1, u2 and g1 - g2");
  const ScalarField &u1 = *in.u1, &u2 = *in.u2, &g = *in.g_gap;
  check_same_mesh(u1, u2);
  check_same_mesh(u1, g);
  const Mesh& m = u1.mesh();
  if (m.coord_dim() != m.dim() || static_cast<int>(in.x0.size()) != m.dim())
    throw InvalidInput("local bound check needs a polar disk or box mesh and a matching center");
  if (!(in.q > 2.0)) throw InvalidInput("k exponent q must exceed 2");
  LocalBoundReport r;
  r.factor = local_bound_factor(in.C_S, in.R, in.p_sharp, in.qq);
  const Region b5 = Region::ball(m, in.x0, 5.0 * in.R), b2 = Region::ball(m, in.x0, 2.0 * in.R),
               b1 = Region::ball(m, in.x0, in.R);
  if (b1.empty()) throw EmptyRegion("B_R(x0) contains no nodes");
  const ScalarField d = difference(u1, u2);

  if (!in.boundary_variant) {
    if (!ball_inside_mesh(m, in.x0, 5.0 * in.R)) throw InvalidInput("B_5R(x0) leaves the mesh region");
    r.sup = -kInf;
    for (std::size_t i = 0; i < m.size(); ++i)
      if (b1.contains(i)) r.sup = std::max(r.sup, d[i]);
    std::vector<double> pos(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) pos[i] = std::max(d[i], 0.0);
    r.norm = lq_norm(ScalarField(u1.mesh_ptr(), pos), in.p_sharp, b2);
    std::vector<char> supp(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) supp[i] = b5.contains(i) && d[i] > 0.0;
    const Region ks(std::move(supp));
    r.k = ks.empty() ? 0.0 : lq_norm(g, in.q, ks);
  } else {
    if (!in.omega || !in.boundary) throw InvalidInput("the boundary variant needs Omega and its boundary nodes");
    check_region(*in.omega, m);
    check_region(*in.boundary, m);
    r.M = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i)
      if (in.boundary->contains(i) && b2.contains(i)) r.M = std::max(r.M, std::max(d[i], 0.0));
    std::vector<double> dm(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) dm[i] = in.omega->contains(i) ? std::max(d[i], r.M) : r.M;
    const ScalarField fm(u1.mesh_ptr(), dm);
    r.sup = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i)
      if (b1.contains(i)) r.sup = std::max(r.sup, dm[i]);
    // part of B_2R outside the mesh carries the value M
    const double outside = std::max(0.0, unit_ball_volume(m.dim()) * std::pow(2.0 * in.R, m.dim()) - b2.measure(m));
    double s = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i)
      if (b2.contains(i)) s += m.weight(i) * std::pow(dm[i], in.p_sharp);
    s += outside * std::pow(r.M, in.p_sharp);
    r.norm = std::pow(s, 1.0 / in.p_sharp);
    std::vector<char> supp(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) supp[i] = b5.contains(i) && in.omega->contains(i) && d[i] > r.M;
    const Region ks(std::move(supp));
    r.k = ks.empty() ? 0.0 : lq_norm(g, in.q, ks);
  }
  const double den = r.factor * (r.norm + r.k);
  const double top = std::max(r.sup, 0.0);
  if (top == 0.0)
    r.constant = 0.0;
  else
    r.constant = den > 0.0 ? top / den : kInf;
  return r;
}

// ---------------------------------------------------------------------------

IntegrabilityReport grad_integrability(const VectorField& grad, double p, double r, const Region& region) {
  const Mesh& m = grad.mesh();
  check_region(region, m);
  if (region.empty()) throw EmptyRegion("integrability over an empty region");
  if (!(p > 1.0)) throw InvalidInput("p must exceed 1");
  if (!(r > 0.0 && r < 1.0)) throw InvalidInput("r must lie in (0, 1)");
  IntegrabilityReport rep;
  const double e = -(p - 1.0) * r;
  std::size_t total = 0, floored = 0;
  double s = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (!region.contains(i)) continue;
    ++total;
    const double g = grad.norm_at(i);
    if (g <= kGradientFloor) {
      ++floored;
      rep.excluded_measure += m.weight(i);
      continue;
    }
    s += m.weight(i) * std::pow(g, e);
  }
  rep.floor_fraction = static_cast<double>(floored) / static_cast<double>(total);
  rep.degraded = rep.floor_fraction > 0.01;
  rep.divergent = rep.excluded_measure > 0.01 * region.measure(m);
  rep.value = rep.divergent ? kInf : s;
  return rep;
}

IntegrabilityReport grad_integrability(const ScalarField& u, double p, double r, const Region& region) {
  return grad_integrability(gradient(u), p, r, region);
}

IntegrabilityReport grad_integrability(const ScalarField& u, double p, double r) {
  return grad_integrability(u, p, r, Region::whole(u.mesh()));
}

}  // namespace qsym

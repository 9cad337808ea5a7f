#include "qsym/bubbles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/quadrature/gauss.hpp>

#include "qsym/errors.hpp"

namespace qsym {

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();

double critical_of(int n, double p) { return n * p / (n - p); }

void require_exponents(int n, double p) {
  if (!(p > 2.0 && p < n)) throw InvalidInput("bubbles need 2 < p < n");
}

double dist(std::span<const double> x, const Point& c) {
  double s = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double d = x[k] - (k < c.size() ? c[k] : 0.0);
    s += d * d;
  }
  return std::sqrt(s);
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

// (1 - t^2)^4 on |t| < 1
double bump1(double t) {
  if (std::abs(t) >= 1.0) return 0.0;
  const double s = 1.0 - t * t;
  return s * s * s * s;
}
double bump1_d(double t) {
  if (std::abs(t) >= 1.0) return 0.0;
  const double s = 1.0 - t * t;
  return -8.0 * t * s * s * s;
}

void check_same_mesh(const ScalarField& u, const ScalarField& k) {
  if (u.mesh_ptr() != k.mesh_ptr() && !(u.mesh().params() == k.mesh().params()))
    throw InvalidInput("fields live on different meshes");
}

struct Tails {
  double grad_p = 0.0, mass = 0.0;
};

// Integral of |x|^{-m} beyond the mesh region.
double exterior_integral(const Mesh& m, double power) {
  if (m.kind() == MeshKind::box) return box_complement_integral(m.dim(), power, m.extent());
  return sphere_area(m.dim()) * std::pow(m.extent(), m.dim() - power) / (power - m.dim());
}

Tails tail_terms(const ScalarField& u, double p) {
  const Mesh& m = u.mesh();
  const int n = m.dim();
  const double ps = critical_of(n, p);
  const DecayTail t = fit_decay_tail(u, p);
  const double beta = t.exponent, q = t.subexponent, A = t.amplitude, B = t.correction;
  Tails out;
  if (A <= 0.0) return out;
  // first order in B
  out.mass = std::pow(A, ps) * exterior_integral(m, beta * ps) +
             ps * std::pow(A, ps - 1.0) * B * exterior_integral(m, beta * ps + q);
  out.grad_p = std::pow(A * beta, p) * exterior_integral(m, (beta + 1.0) * p) +
               p * std::pow(A * beta, p - 1.0) * (beta + q) * B * exterior_integral(m, (beta + 1.0) * p + q);
  return out;
}

QuotientReport quotient_from(const ScalarField& u, const VectorField& g, double p, bool tail) {
  const Mesh& m = u.mesh();
  const int n = m.dim();
  require_exponents(n, p);
  const double ps = critical_of(n, p);
  QuotientReport rep;
  const auto w = m.weights();
  for (std::size_t i = 0; i < m.size(); ++i) {
    rep.grad_p += w[i] * std::pow(g.norm_at(i), p);
    rep.mass += w[i] * std::pow(std::abs(u[i]), ps);
  }
  if (rep.mass <= 0.0) throw InvalidInput("sobolev quotient of the zero field");
  if (tail) {
    const Tails t = tail_terms(u, p);
    rep.tail_grad_p = t.grad_p;
    rep.tail_mass = t.mass;
    rep.grad_p += t.grad_p;
    rep.mass += t.mass;
  }
  rep.quotient = std::pow(rep.grad_p, 1.0 / p) / std::pow(rep.mass, 1.0 / ps);
  return rep;
}

}  // namespace

// ---------------------------------------------------------------------------

TalentiBubble::TalentiBubble(int n, double p, Point center, double lambda)
    : n_(n), p_(p), z_(std::move(center)), lambda_(lambda) {
  require_exponents(n, p);
  if (!(lambda > 0.0)) throw InvalidInput("bubble scale must be positive");
  if (z_.empty()) z_.assign(static_cast<std::size_t>(n), 0.0);
  if (z_.size() != static_cast<std::size_t>(n)) throw InvalidInput("bubble center has the wrong dimension");
  a_ = std::pow(n, 1.0 / p) * std::pow((n - p) / (p - 1.0), (p - 1.0) / p);
}

double TalentiBubble::decay_exponent() const { return (n_ - p_) / (p_ - 1.0); }

double TalentiBubble::tail_amplitude() const {
  return std::pow(std::pow(lambda_, 1.0 / (p_ - 1.0)) * a_, (n_ - p_) / p_);
}

double TalentiBubble::radial_value(double rho) const {
  const double q = p_ / (p_ - 1.0);
  const double num = std::pow(lambda_, 1.0 / (p_ - 1.0)) * a_;
  return std::pow(num / (std::pow(lambda_, q) + std::pow(rho, q)), (n_ - p_) / p_);
}

double TalentiBubble::radial_derivative(double rho) const {
  if (rho == 0.0) return 0.0;
  const double q = p_ / (p_ - 1.0);
  const double den = std::pow(lambda_, q) + std::pow(rho, q);
  // d/drho of (c / den)^e = -e U q rho^{q-1} / den
  return -((n_ - p_) / p_) * radial_value(rho) * q * std::pow(rho, q - 1.0) / den;
}

double TalentiBubble::operator()(std::span<const double> x) const { return radial_value(dist(x, z_)); }

void TalentiBubble::grad(std::span<const double> x, std::span<double> out) const {
  const double rho = dist(x, z_);
  const double d = rho > 0.0 ? radial_derivative(rho) / rho : 0.0;
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = d * (x[k] - z_[k]);
}

ScalarField TalentiBubble::sample(const MeshPtr& mesh) const {
  if (mesh->dim() != n_) throw InvalidInput("mesh dimension differs from the bubble dimension");
  if (mesh->kind() == MeshKind::radial) {
    for (double c : z_)
      if (c != 0.0) throw InvalidInput("radial meshes only carry centered bubbles");
    return ScalarField::sample(mesh, [&](std::span<const double> r) { return radial_value(r[0]); });
  }
  return ScalarField::sample(mesh, [&](std::span<const double> x) { return (*this)(x); });
}

VectorField TalentiBubble::sample_gradient(const MeshPtr& mesh) const {
  if (mesh->dim() != n_) throw InvalidInput("mesh dimension differs from the bubble dimension");
  if (mesh->kind() == MeshKind::radial)
    return VectorField::sample(mesh, [&](std::span<const double> r, std::span<double> g) { g[0] = radial_derivative(r[0]); });
  return VectorField::sample(mesh, [&](std::span<const double> x, std::span<double> g) { grad(x, g); });
}

double talenti_constant(int n, double p) {
  if (!(p > 1.0 && p < n)) throw InvalidInput("Sobolev constant needs 1 < p < n");
  const double g = std::tgamma(1.0 + n / 2.0) * std::tgamma(n) / (std::tgamma(n / p) * std::tgamma(1.0 + n - n / p));
  const double c = std::pow(std::numbers::pi, -0.5) * std::pow(n, -1.0 / p) * std::pow((p - 1.0) / (n - p), 1.0 - 1.0 / p) *
                   std::pow(g, 1.0 / n);
  return 1.0 / c;
}

double DecayTail::operator()(std::span<const double> x) const {
  const double rho = x.size() == 1 ? std::abs(x[0]) : dist(x, center);
  const double r = std::max(rho, 1e-300);
  return std::max(std::pow(r, -exponent) * (amplitude + correction * std::pow(r, -subexponent)), 0.0);
}

DecayTail fit_decay_tail(const ScalarField& u, double p) {
  const Mesh& m = u.mesh();
  const int n = m.dim();
  if (!(p > 1.0 && p < n)) throw InvalidInput("decay tail needs 1 < p < n");
  DecayTail t;
  t.exponent = (n - p) / (p - 1.0);
  const int d = m.coord_dim();
  t.center.assign(static_cast<std::size_t>(d == 1 ? n : d), 0.0);
  if (m.kind() == MeshKind::box) {
    const double ps = critical_of(n, p);
    double mass = 0.0;
    std::vector<double> c(static_cast<std::size_t>(d), 0.0);
    for (std::size_t i = 0; i < m.size(); ++i) {
      const double w = m.weight(i) * std::pow(std::abs(u[i]), ps);
      mass += w;
      auto x = m.node(i);
      for (int k = 0; k < d; ++k) c[static_cast<std::size_t>(k)] += w * x[static_cast<std::size_t>(k)];
    }
    if (mass > 0.0)
      for (int k = 0; k < d; ++k) t.center[static_cast<std::size_t>(k)] = c[static_cast<std::size_t>(k)] / mass;
  }
  t.subexponent = p / (p - 1.0);
  // u rho^beta = A + B rho^{-q} on the outer nodes
  double s00 = 0.0, s01 = 0.0, s11 = 0.0, r0 = 0.0, r1 = 0.0;
  double rmax = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) rmax = std::max(rmax, m.radius_of(i));
  const double rcut = m.kind() == MeshKind::radial ? rmax - 4.5 * m.dr() : 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (m.kind() == MeshKind::radial ? m.radius_of(i) < rcut : !m.on_boundary(i)) continue;
    auto x = m.node(i);
    const double rho = d == 1 ? x[0] : dist(x, t.center);
    const double y = std::max(u[i], 0.0) * std::pow(rho, t.exponent);
    const double z = std::pow(rho, -t.subexponent);
    s00 += 1.0;
    s01 += z;
    s11 += z * z;
    r0 += y;
    r1 += y * z;
  }
  const double det = s00 * s11 - s01 * s01;
  if (s00 == 0.0) return t;
  if (std::abs(det) > 1e-12 * s00 * s11) {
    t.amplitude = (r0 * s11 - r1 * s01) / det;
    t.correction = (s00 * r1 - s01 * r0) / det;
  } else {
    t.amplitude = r0 / s00;
  }
  if (t.amplitude <= 0.0) {
    t.amplitude = std::max(r0 / s00, 0.0);
    t.correction = 0.0;
  }
  return t;
}

double box_complement_integral(int n, double m, double R) {
  if (!(m > n)) throw InvalidInput("exterior integral diverges for m <= n");
  // 2n pyramids {x_1 > R, |x_j| < x_1}: each is int_R^inf t^{n-1-m} dt times
  // the integral of (1 + |y|^2)^{-m/2} over [-1, 1]^{n-1}.
  using Q = boost::math::quadrature::gauss<double, 20>;
  const auto& a = Q::abscissa();
  const auto& w = Q::weights();
  // symmetric rule on [-1, 1] mapped to [0, 1]
  std::vector<double> xs, ws;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double sgn[2] = {1.0, -1.0};
    for (int s = 0; s < (a[k] == 0.0 ? 1 : 2); ++s) {
      xs.push_back(0.5 * (1.0 + sgn[s] * a[k]));
      ws.push_back(0.5 * w[k]);
    }
  }
  const int dims = n - 1;
  double face = 0.0;
  std::vector<std::size_t> idx(static_cast<std::size_t>(dims), 0);
  while (true) {
    double r2 = 0.0, wt = 1.0;
    for (int k = 0; k < dims; ++k) {
      r2 += xs[idx[static_cast<std::size_t>(k)]] * xs[idx[static_cast<std::size_t>(k)]];
      wt *= ws[idx[static_cast<std::size_t>(k)]];
    }
    face += wt * std::pow(1.0 + r2, -m / 2.0);
    int k = 0;
    while (k < dims && ++idx[static_cast<std::size_t>(k)] == xs.size()) idx[static_cast<std::size_t>(k++)] = 0;
    if (k == dims) break;
  }
  face *= std::pow(2.0, dims);
  return 2.0 * n * face * std::pow(R, n - m) / (m - n);
}

QuotientReport sobolev_quotient_report(const ScalarField& u, double p, bool tail) {
  return quotient_from(u, gradient(u), p, tail);
}

QuotientReport sobolev_quotient_report(const ScalarField& u, const VectorField& grad, double p, bool tail) {
  if (grad.mesh_ptr() != u.mesh_ptr() && !(grad.mesh().params() == u.mesh().params()))
    throw InvalidInput("gradient lives on a different mesh");
  return quotient_from(u, grad, p, tail);
}

double sobolev_quotient(const ScalarField& u, double p) { return sobolev_quotient_report(u, p).quotient; }

double sobolev_quotient(const ScalarField& u, const VectorField& grad, double p) {
  return sobolev_quotient_report(u, grad, p).quotient;
}

// ---------------------------------------------------------------------------

double TestBump::value(std::span<const double> x, bool radial) const {
  if (radial) return bump1((x[0] - center[0]) / scale);
  double v = 1.0;
  for (std::size_t k = 0; k < x.size() && v != 0.0; ++k) v *= bump1((x[k] - center[k]) / scale);
  return v;
}

void TestBump::grad(std::span<const double> x, bool radial, std::span<double> out) const {
  if (radial) {
    out[0] = bump1_d((x[0] - center[0]) / scale) / scale;
    return;
  }
  const std::size_t d = x.size();
  std::vector<double> b(d), db(d);
  for (std::size_t k = 0; k < d; ++k) {
    const double t = (x[k] - center[k]) / scale;
    b[k] = bump1(t);
    db[k] = bump1_d(t) / scale;
  }
  for (std::size_t k = 0; k < d; ++k) {
    double g = db[k];
    for (std::size_t j = 0; j < d; ++j)
      if (j != k) g *= b[j];
    out[k] = g;
  }
}

std::vector<TestBump> bump_bank(const Mesh& mesh) {
  const double L = 0.9 * mesh.extent();
  std::vector<TestBump> bank;
  const double scales[3] = {L / 2.0, L / 4.0, L / 8.0};
  if (mesh.kind() == MeshKind::radial) {
    for (double s : scales)
      for (int k = 0; (k + 1) * s <= L + 1e-12; ++k) bank.push_back({Point{k * s}, s});
    return bank;
  }
  if (mesh.kind() != MeshKind::box) throw InvalidInput("bump bank needs a box or radial mesh");
  const int n = mesh.dim();
  std::size_t total = 1;
  for (int k = 0; k < n; ++k) total *= 3;
  for (double s : scales)
    for (std::size_t c = 0; c < total; ++c) {
      Point z(static_cast<std::size_t>(n));
      std::size_t r = c;
      for (int k = 0; k < n; ++k, r /= 3) z[static_cast<std::size_t>(k)] = (static_cast<double>(r % 3) - 1.0) * L / 2.0;
      bank.push_back({z, s});
    }
  return bank;
}

ResidualReport critical_residual_report(const ScalarField& u, const ScalarField& kappa, double p) {
  check_same_mesh(u, kappa);
  const Mesh& m = u.mesh();
  const int n = m.dim();
  require_exponents(n, p);
  const double ps = critical_of(n, p);
  const bool radial = m.kind() == MeshKind::radial;
  const auto g = gradient(u);
  const auto bank = bump_bank(m);
  const int d = m.coord_dim();

  // flux and source at each node, computed once
  std::vector<double> flux(m.size() * static_cast<std::size_t>(d)), src(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) {
    const double gn = g.norm_at(i);
    const double c = gn > 0.0 ? std::pow(gn, p - 2.0) : 0.0;
    auto gi = g.at(i);
    for (int k = 0; k < d; ++k) flux[i * static_cast<std::size_t>(d) + static_cast<std::size_t>(k)] = c * gi[static_cast<std::size_t>(k)];
    src[i] = kappa[i] * std::pow(std::max(u[i], 0.0), ps - 1.0);
  }

  ResidualReport rep;
  rep.bank_size = bank.size();
  std::vector<double> gphi(static_cast<std::size_t>(d));
  for (std::size_t b = 0; b < bank.size(); ++b) {
    const TestBump& phi = bank[b];
    double form = 0.0, dn = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) {
      auto x = m.node(i);
      bool inside = true;
      if (radial) {
        inside = std::abs(x[0] - phi.center[0]) < phi.scale;
      } else {
        for (int k = 0; k < d && inside; ++k)
          inside = std::abs(x[static_cast<std::size_t>(k)] - phi.center[static_cast<std::size_t>(k)]) < phi.scale;
      }
      if (!inside) continue;
      const double w = m.weight(i);
      phi.grad(x, radial, gphi);
      const double v = phi.value(x, radial);
      double fl = 0.0;
      for (int k = 0; k < d; ++k) fl += flux[i * static_cast<std::size_t>(d) + static_cast<std::size_t>(k)] * gphi[static_cast<std::size_t>(k)];
      form += w * (fl - src[i] * v);
      dn += w * std::pow(norm(gphi), p);
    }
    if (dn <= 0.0) continue;
    const double r = std::abs(form) / std::pow(dn, 1.0 / p);
    if (r > rep.residual) {
      rep.residual = r;
      rep.worst = b;
    }
  }
  return rep;
}

double critical_residual(const ScalarField& u, const ScalarField& kappa, double p) {
  return critical_residual_report(u, kappa, p).residual;
}

Kappa0Report kappa0(const ScalarField& u, const ScalarField& kappa, double p) {
  check_same_mesh(u, kappa);
  const Mesh& m = u.mesh();
  const int n = m.dim();
  require_exponents(n, p);
  const double ps = critical_of(n, p);
  const auto g = gradient(u);
  double num = 0.0, mass = 0.0, gp = 0.0, kfar = 0.0;
  std::size_t nfar = 0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    const double up = std::pow(std::max(u[i], 0.0), ps);
    num += m.weight(i) * kappa[i] * up;
    mass += m.weight(i) * up;
    gp += m.weight(i) * std::pow(g.norm_at(i), p);
    if (m.on_boundary(i)) {
      kfar += kappa[i];
      ++nfar;
    }
  }
  if (mass <= 0.0) throw InvalidInput("kappa0 of a field with zero mass");
  const Tails t = tail_terms(u, p);
  kfar = nfar ? kfar / static_cast<double>(nfar) : 0.0;
  Kappa0Report rep;
  rep.kappa0 = (num + kfar * t.mass) / (mass + t.mass);
  rep.alternate = (gp + t.grad_p) / (mass + t.mass);
  rep.discrepancy = std::abs(rep.kappa0 - rep.alternate);
  return rep;
}

double deficit_whole_space(const ScalarField& u, const ScalarField& kappa, double p) {
  const double k0 = kappa0(u, kappa, p).kappa0;
  const Mesh& m = u.mesh();
  const double ps = critical_of(m.dim(), p);
  const double q = ps / (ps - 1.0);
  double s = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i)
    s += m.weight(i) * std::pow(std::abs((kappa[i] - k0) * std::pow(std::max(u[i], 0.0), ps - 1.0)), q);
  return std::pow(s, 1.0 / q);
}

DecayReport decay_constants(const ScalarField& u, double p, double kappa_sup) {
  const Mesh& m = u.mesh();
  const int n = m.dim();
  if (!(p > 1.0 && p < n)) throw InvalidInput("decay constants need 1 < p < n");
  if (!(kappa_sup > 0.0)) throw InvalidInput("kappa sup must be positive");
  if (u.max() <= 0.0 && u.min() >= 0.0) throw InvalidInput("decay constants of the zero field");
  const double beta = (n - p) / (p - 1.0);
  const double gpow = (n - 1.0) / (p - 1.0);
  const double ps = critical_of(n, p);
  const auto g = gradient(u);
  DecayReport rep;
  rep.c0 = inf;
  double gmax = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) gmax = std::max(gmax, g.norm_at(i));
  const double gfloor = 1e-12 * std::max(gmax, 1e-300);
  double last_flat = -1.0;  // outermost radius >= 1 where the gradient vanishes
  for (std::size_t i = 0; i < m.size(); ++i) {
    const double r = m.radius_of(i);
    const double wgt = 1.0 + std::pow(r, beta);
    rep.C0 = std::max(rep.C0, u[i] * wgt);
    rep.c0 = std::min(rep.c0, u[i] * wgt);
    if (r >= 1.0 && g.norm_at(i) <= gfloor) last_flat = std::max(last_flat, r);
  }
  rep.c0 = std::max(rep.c0, 0.0);
  double rmax = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) rmax = std::max(rmax, m.radius_of(i));
  rep.R0 = last_flat < 0.0 ? 1.0 : (last_flat >= rmax ? inf : std::nextafter(last_flat, inf));
  rep.c1 = inf;
  for (std::size_t i = 0; i < m.size(); ++i) {
    const double r = m.radius_of(i);
    if (r < rep.R0) continue;
    rep.c1 = std::min(rep.c1, g.norm_at(i) * std::pow(r, gpow));
  }
  if (!std::isfinite(rep.c1)) rep.c1 = 0.0;

  const auto q = sobolev_quotient_report(u, g, p);
  rep.mass = std::pow(q.mass, 1.0 / ps);
  const double S = talenti_constant(n, p);
  rep.mass_floor = std::pow(std::pow(S, p) / kappa_sup, 1.0 / (ps - p));
  rep.mass_ok = rep.mass >= rep.mass_floor * (1.0 - 1e-3);
  return rep;
}

}  // namespace qsym

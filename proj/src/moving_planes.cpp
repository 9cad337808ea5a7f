#include "qsym/moving_planes.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>

#include <gsl/gsl_multimin.h>

#include "qsym/bubbles.hpp"
#include "qsym/errors.hpp"
#include "qsym/solver.hpp"

namespace qsym {

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

void require_cartesian(const Mesh& m) {
  if (m.coord_dim() != m.dim()) throw InvalidInput("moving planes need a polar disk or box mesh");
}

Point axis(int d, int k, double sign) {
  Point e(static_cast<std::size_t>(d), 0.0);
  e[static_cast<std::size_t>(k)] = sign;
  return e;
}

}  // namespace

HalfSpace::HalfSpace(Point w, double lvl) : omega(std::move(w)), level(lvl) {
  double s = 0.0;
  for (double v : omega) s += v * v;
  if (omega.empty() || std::abs(std::sqrt(s) - 1.0) > 1e-12) throw InvalidInput("half-space direction must be a unit vector");
}

Point reflect_point(std::span<const double> x, const HalfSpace& h) {
  if (x.size() != h.omega.size()) throw InvalidInput("point and direction dimensions differ");
  const double t = 2.0 * (h.level - dot(h.omega, x));
  Point y(x.begin(), x.end());
  for (std::size_t k = 0; k < y.size(); ++k) y[k] += t * h.omega[k];
  return y;
}

// ---------------------------------------------------------------------------

FieldEvaluator::FieldEvaluator(const ScalarField& u, double p) : u_(&u) {
  const Mesh& m = u.mesh();
  if (m.kind() == MeshKind::box) {
    if (!(p > 1.0 && p < m.dim())) throw InvalidInput("box fields need 1 < p < n for the decay tail");
    const DecayTail t = fit_decay_tail(u, p);
    tail_ = true;
    tail_center_ = t.center;
    tail_a_ = t.amplitude;
    tail_b_ = t.correction;
    tail_beta_ = t.exponent;
    tail_q_ = t.subexponent;
  }
}

double FieldEvaluator::operator()(std::span<const double> x) const {
  const Mesh& m = u_->mesh();
  if (m.contains(x)) return interpolate(*u_, x);
  if (!tail_) return 0.0;
  double s = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) s += (x[k] - tail_center_[k]) * (x[k] - tail_center_[k]);
  const double r = std::sqrt(s);
  return std::max(std::pow(r, -tail_beta_) * (tail_a_ + tail_b_ * std::pow(r, -tail_q_)), 0.0);
}

// ---------------------------------------------------------------------------

namespace {

// stop_above: sup norm only, return as soon as the excess exceeds it
ExcessReport excess_impl(const FieldEvaluator& ev, const HalfSpace& h, ExcessNorm norm, const ExcessDiagnostics& diag,
                         double stop_above) {
  const ScalarField& u = ev.field();
  const Mesh& m = u.mesh();
  require_cartesian(m);
  if (h.omega.size() != static_cast<std::size_t>(m.dim())) throw InvalidInput("direction dimension differs from the mesh");
  if (!norm.sup && !(norm.q >= 1.0)) throw InvalidInput("excess norm needs q >= 1");
  ExcessReport rep;
  const bool diagnose = diag.f != nullptr;
  double umax = 0.0;
  if (diagnose) {
    umax = std::max(u.max(), 0.0);
    rep.diagnosed = true;
    rep.lip_f = diag.scale * diag.f->lipschitz(umax);
  }
  // omega = +-e_k on a box: the reflection stays on grid lines along e_k
  int ax = -1;
  double sgn = 0.0;
  if (m.kind() == MeshKind::box) {
    int nz = 0;
    for (std::size_t k = 0; k < h.omega.size(); ++k)
      if (h.omega[k] != 0.0) {
        ++nz;
        ax = static_cast<int>(k);
        sgn = h.omega[k];
      }
    if (nz != 1 || std::abs(sgn) != 1.0) ax = -1;
  }
  const std::size_t np = m.kind() == MeshKind::box ? m.points_per_axis() : 0;
  const double step = m.kind() == MeshKind::box ? m.box_step() : 0.0;
  const std::size_t d = h.omega.size();
  std::array<double, 4> ybuf{};
  double acc = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    auto x = m.node(i);
    const double wx = ax >= 0 ? sgn * x[static_cast<std::size_t>(ax)] : dot(h.omega, x);
    if (wx <= h.level) continue;
    ++rep.cap_nodes;
    const double shift = 2.0 * (h.level - wx);
    for (std::size_t k = 0; k < d; ++k) ybuf[k] = x[k] + shift * h.omega[k];
    const std::span<const double> y(ybuf.data(), d);
    double ul;
    if (ax >= 0) {
      const double t = (y[static_cast<std::size_t>(ax)] + m.extent()) / step;
      if (t < -1e-11 || t > static_cast<double>(np - 1) + 1e-11) {
        ul = ev(y);
      } else {
        const std::size_t str = m.stride(ax);
        const auto idx = static_cast<std::ptrdiff_t>((i / str) % np);
        auto j = static_cast<std::ptrdiff_t>(std::floor(t));
        j = std::clamp<std::ptrdiff_t>(j, 0, static_cast<std::ptrdiff_t>(np) - 2);
        double f = t - static_cast<double>(j);
        if (f < 1e-11) f = 0.0;
        if (f > 1.0 - 1e-11) f = 1.0;
        const auto base = static_cast<std::ptrdiff_t>(i) + (j - idx) * static_cast<std::ptrdiff_t>(str);
        ul = (1.0 - f) * u[static_cast<std::size_t>(base)] + f * u[static_cast<std::size_t>(base + static_cast<std::ptrdiff_t>(str))];
      }
    } else {
      ul = ev(y);
    }
    const double e = std::max(u[i] - ul, 0.0);
    if (norm.sup) {
      acc = std::max(acc, e);
      if (acc > stop_above && !diagnose) break;
    } else {
      acc += m.weight(i) * std::pow(e, norm.q);
    }
    if (diagnose) {
      const double a = std::max(u[i], 0.0), b = std::max(ul, 0.0);
      if (std::abs(a - b) > 1e-12) {
        const double c = diag.scale * ((*diag.f)(a) - (*diag.f)(b)) / (a - b);
        rep.c_lambda_sup = std::max(rep.c_lambda_sup, std::abs(c));
      }
      if (diag.kappa) {
        const double kx = (*diag.kappa)(x, m.dim()), ky = (*diag.kappa)(y, m.dim());
        rep.g_gap_sup = std::max(rep.g_gap_sup, std::abs(kx - ky) * diag.scale * (*diag.f)(a));
      }
    }
  }
  rep.vacuous = rep.cap_nodes == 0;
  rep.value = norm.sup ? acc : std::pow(acc, 1.0 / norm.q);
  if (diagnose) rep.c_lambda_ok = rep.c_lambda_sup <= rep.lip_f * (1.0 + 1e-9) + 1e-12;
  return rep;
}

}  // namespace

ExcessReport excess(const FieldEvaluator& ev, const HalfSpace& h, ExcessNorm norm, const ExcessDiagnostics& diag) {
  return excess_impl(ev, h, norm, diag, inf);
}

double excess(const ScalarField& u, const HalfSpace& h, ExcessNorm norm) { return excess(FieldEvaluator(u), h, norm).value; }

LambdaResult critical_lambda(const FieldEvaluator& ev, std::span<const double> omega, const LambdaOptions& opts) {
  const Mesh& m = ev.field().mesh();
  require_cartesian(m);
  if (!(opts.tau >= 0.0)) throw InvalidInput("threshold must be non-negative");
  if (opts.levels < 2) throw InvalidInput("scan needs at least two levels");
  if (!(opts.tol > 0.0)) throw InvalidInput("bisection tolerance must be positive");
  const double ext = m.extent();
  const double lo = std::isnan(opts.lo) ? -ext : opts.lo;
  const double hi = std::isnan(opts.hi) ? ext : opts.hi;
  if (!(lo < hi) || lo < -ext * std::sqrt(m.dim()) - 1e-12 || hi > ext * std::sqrt(m.dim()) + 1e-12)
    throw InvalidInput("scan interval must lie within the region");
  const Point w(omega.begin(), omega.end());
  LambdaResult res;
  auto fails = [&](double mu) {
    ++res.evaluations;
    return excess_impl(ev, HalfSpace(w, mu), opts.norm, {}, opts.tau).value > opts.tau;
  };
  const int L = opts.levels;
  auto level = [&](int j) { return lo + (hi - lo) * static_cast<double>(j) / (L - 1); };
  int bad = -1;
  for (int j = L - 1; j >= 0; --j)
    if (fails(level(j))) {
      bad = j;
      break;
    }
  if (bad < 0) {
    res.lambda = lo;
    return res;
  }
  if (bad == L - 1) {
    res.lambda = hi;
    res.boundary = true;
    return res;
  }
  double a = level(bad), b = level(bad + 1);
  while (b - a > opts.tol) {
    const double mid = 0.5 * (a + b);
    if (fails(mid))
      a = mid;
    else
      b = mid;
  }
  res.lambda = b;
  return res;
}

double lipschitz_estimate(const ScalarField& u) {
  const auto g = gradient(u);
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s = std::max(s, g.norm_at(i));
  return s;
}

CenterReport approximate_center(const FieldEvaluator& ev, const LambdaOptions& opts) {
  const Mesh& m = ev.field().mesh();
  require_cartesian(m);
  const int d = m.dim();
  CenterReport rep;
  rep.center.assign(static_cast<std::size_t>(d), 0.0);
  for (int k = 0; k < d; ++k) {
    const auto plus = critical_lambda(ev, axis(d, k, 1.0), opts);
    const auto minus = critical_lambda(ev, axis(d, k, -1.0), opts);
    rep.lambda_plus.push_back(plus.lambda);
    rep.lambda_minus.push_back(minus.lambda);
    if (plus.boundary || minus.boundary) {
      rep.degraded = true;
      rep.center[static_cast<std::size_t>(k)] = plus.lambda;
    } else {
      rep.center[static_cast<std::size_t>(k)] = 0.5 * (plus.lambda - minus.lambda);
    }
  }
  if (m.kind() == MeshKind::polar_disk) {
    double s = 0.0;
    for (double c : rep.center) s += c * c;
    if (std::sqrt(s) > 1.0) rep.degraded = true;
  }
  return rep;
}

// ---------------------------------------------------------------------------

std::vector<Point> shell_directions(int dim, std::uint64_t seed) {
  std::vector<Point> dirs;
  if (dim == 2) {
    for (int k = 0; k < 256; ++k) {
      const double t = 2.0 * std::numbers::pi * k / 256.0;
      dirs.push_back({std::cos(t), std::sin(t)});
    }
    return dirs;
  }
  // splitmix64 stream and Box-Muller, so the set is the same on every platform
  std::uint64_t state = seed;
  auto next = [&]() {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    z ^= z >> 31;
    return (static_cast<double>(z >> 11) + 0.5) * 0x1.0p-53;
  };
  while (dirs.size() < 1024) {
    Point v(static_cast<std::size_t>(dim));
    double s = 0.0;
    for (int k = 0; k < dim; ++k) {
      const double r = std::sqrt(-2.0 * std::log(next())), t = 2.0 * std::numbers::pi * next();
      v[static_cast<std::size_t>(k)] = r * std::cos(t);
      s += v[static_cast<std::size_t>(k)] * v[static_cast<std::size_t>(k)];
    }
    s = std::sqrt(s);
    if (s < 1e-12) continue;
    for (double& c : v) c /= s;
    dirs.push_back(std::move(v));
  }
  return dirs;
}

AngularReport angular_oscillation(const FieldEvaluator& ev, std::span<const double> center, std::vector<double> radii,
                                  std::uint64_t seed) {
  const Mesh& m = ev.field().mesh();
  require_cartesian(m);
  const int d = m.dim();
  if (center.size() != static_cast<std::size_t>(d)) throw InvalidInput("center dimension differs from the mesh");
  if (radii.empty()) {
    double rin = 0.0;
    if (m.kind() == MeshKind::polar_disk) {
      rin = 1.0 - std::sqrt(dot(center, center));
    } else {
      rin = m.extent();
      for (double c : center) rin = std::min(rin, m.extent() - std::abs(c));
    }
    for (int j = 1; j <= 8 && rin > 0.0; ++j) radii.push_back(rin * j / 8.0);
  }
  const auto dirs = shell_directions(d, seed);
  AngularReport rep;
  Point x(static_cast<std::size_t>(d));
  for (double r : radii) {
    double lo = inf, hi = -inf;
    bool ok = true;
    for (const auto& dir : dirs) {
      for (int k = 0; k < d; ++k) x[static_cast<std::size_t>(k)] = center[static_cast<std::size_t>(k)] + r * dir[static_cast<std::size_t>(k)];
      if (!m.contains(x, 1e-12)) {
        ok = false;
        break;
      }
      const double v = interpolate(ev.field(), x);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (!ok) {
      rep.skipped.push_back(r);
      continue;
    }
    rep.radii.push_back(r);
    rep.per_shell.push_back(hi - lo);
    rep.oscillation = std::max(rep.oscillation, hi - lo);
  }
  return rep;
}

std::vector<Rotation> rotation_family(int dim) {
  std::vector<Rotation> out;
  auto plane = [&](int i, int j, double t) {
    Rotation r(static_cast<std::size_t>(dim * dim), 0.0);
    for (int k = 0; k < dim; ++k) r[static_cast<std::size_t>(k * dim + k)] = 1.0;
    const double c = std::cos(t), s = std::sin(t);
    r[static_cast<std::size_t>(i * dim + i)] = c;
    r[static_cast<std::size_t>(i * dim + j)] = -s;
    r[static_cast<std::size_t>(j * dim + i)] = s;
    r[static_cast<std::size_t>(j * dim + j)] = c;
    return r;
  };
  if (dim == 2) {
    for (int k = 1; k <= 7; ++k) out.push_back(plane(0, 1, k * std::numbers::pi / 4.0));
    return out;
  }
  for (int i = 0; i < dim; ++i)
    for (int j = i + 1; j < dim; ++j)
      for (double t : {std::numbers::pi / 4.0, std::numbers::pi / 2.0, std::numbers::pi}) out.push_back(plane(i, j, t));
  return out;
}

RotationDeficit rotation_deficit(const FieldEvaluator& ev, std::span<const double> center, const Rotation& theta, double p) {
  const ScalarField& u = ev.field();
  const Mesh& m = u.mesh();
  require_cartesian(m);
  const int d = m.dim();
  if (theta.size() != static_cast<std::size_t>(d * d)) throw InvalidInput("rotation has the wrong size");
  if (center.size() != static_cast<std::size_t>(d)) throw InvalidInput("center dimension differs from the mesh");
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      double s = 0.0;
      for (int k = 0; k < d; ++k) s += theta[static_cast<std::size_t>(k * d + i)] * theta[static_cast<std::size_t>(k * d + j)];
      if (std::abs(s - (i == j ? 1.0 : 0.0)) > 1e-10) throw InvalidInput("rotation is not orthogonal");
    }
  std::vector<double> v(m.size());
  Point y(static_cast<std::size_t>(d));
  RotationDeficit rep;
  for (std::size_t i = 0; i < m.size(); ++i) {
    auto x = m.node(i);
    for (int a = 0; a < d; ++a) {
      double s = center[static_cast<std::size_t>(a)];
      for (int b = 0; b < d; ++b)
        s += theta[static_cast<std::size_t>(a * d + b)] * (x[static_cast<std::size_t>(b)] - center[static_cast<std::size_t>(b)]);
      y[static_cast<std::size_t>(a)] = s;
    }
    v[i] = u[i] - ev(y);
    rep.sup = std::max(rep.sup, std::abs(v[i]));
  }
  const double q = p > 1.0 ? p : 2.0;
  const auto g = gradient(ScalarField(u.mesh_ptr(), std::move(v)));
  double s = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) s += m.weight(i) * std::pow(g.norm_at(i), q);
  rep.grad_lp = std::pow(s, 1.0 / q);
  return rep;
}

RotationDeficit max_rotation_deficit(const FieldEvaluator& ev, std::span<const double> center, double p) {
  RotationDeficit best;
  for (const auto& r : rotation_family(ev.field().mesh().dim())) {
    const auto d = rotation_deficit(ev, center, r, p);
    best.sup = std::max(best.sup, d.sup);
    best.grad_lp = std::max(best.grad_lp, d.grad_lp);
  }
  return best;
}

// ---------------------------------------------------------------------------

namespace {

double log_law_ssr(const gsl_vector* v, void* params) {
  const auto& s = *static_cast<const std::vector<LogLawSample>*>(params);
  const double c = gsl_vector_get(v, 0), alpha = gsl_vector_get(v, 1);
  const double C = 1.0 + c * c;
  double ssr = 0.0;
  for (const auto& x : s) {
    const double L = std::abs(std::log(C * x.deficit));
    if (!(L > 1e-300)) return 1e300;
    const double r = std::log(x.deviation) - (std::log(C) + (-alpha) * std::log(L));
    ssr += r * r;
  }
  return ssr;
}

std::pair<std::array<double, 2>, double> simplex(std::vector<LogLawSample>& s, std::array<double, 2> x0, double step) {
  gsl_multimin_function fn{&log_law_ssr, 2, &s};
  gsl_vector* x = gsl_vector_alloc(2);
  gsl_vector* ss = gsl_vector_alloc(2);
  gsl_vector_set(x, 0, x0[0]);
  gsl_vector_set(x, 1, x0[1]);
  gsl_vector_set_all(ss, step);
  gsl_multimin_fminimizer* m = gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, 2);
  gsl_multimin_fminimizer_set(m, &fn, x, ss);
  for (int it = 0; it < 20000; ++it) {
    if (gsl_multimin_fminimizer_iterate(m)) break;
    if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(m), 1e-15) == GSL_SUCCESS) break;
  }
  std::array<double, 2> best{gsl_vector_get(m->x, 0), gsl_vector_get(m->x, 1)};
  const double f = m->fval;
  gsl_multimin_fminimizer_free(m);
  gsl_vector_free(x);
  gsl_vector_free(ss);
  return {best, f};
}

}  // namespace

LogLawFit fit_log_law(const std::vector<LogLawSample>& samples) {
  if (samples.size() < 3) throw InvalidInput("log-law fit needs at least 3 samples");
  for (const auto& s : samples) {
    if (!(s.deficit > 0.0 && s.deficit < 1.0)) throw InvalidInput("log-law deficits must lie in (0, 1)");
    if (!(s.deviation > 0.0)) throw InvalidInput("log-law deviations must be positive");
  }
  std::vector<LogLawSample> data = samples;
  std::array<double, 2> best{};
  double fbest = inf;
  for (auto start : {std::array{0.0, 0.5}, std::array{1.0, 1.0}, std::array{0.5, 0.0}, std::array{2.0, 2.0}}) {
    auto [x, f] = simplex(data, start, 0.25);
    if (f < fbest) {
      fbest = f;
      best = x;
    }
  }
  for (double step : {1e-2, 1e-4, 1e-6}) {
    auto [x, f] = simplex(data, best, step);
    if (f <= fbest) {
      fbest = f;
      best = x;
    }
  }
  LogLawFit fit;
  fit.C = 1.0 + best[0] * best[0];
  fit.alpha = best[1];
  fit.residual = std::sqrt(fbest / static_cast<double>(data.size()));
  fit.degenerate = std::abs(fit.alpha) < 1e-3;
  fit.samples = data.size();
  return fit;
}

// ---------------------------------------------------------------------------

MovingPlanesReport analyze(const ScalarField& u, double deficit, const std::string& deficit_kind, const MovingPlanesOptions& opts) {
  const Mesh& m = u.mesh();
  require_cartesian(m);
  FieldEvaluator ev(u, opts.p);
  MovingPlanesReport rep;
  rep.deficit_kind = deficit_kind;
  rep.deficit = deficit;
  rep.lip = lipschitz_estimate(u);
  rep.h = m.spacing();
  rep.tau_discrete = 3.0 * rep.h * rep.lip;
  rep.tau_deficit = opts.tau_deficit_factor * deficit;
  rep.tau = opts.use_deficit_threshold ? std::max(rep.tau_deficit, rep.tau_discrete) : rep.tau_discrete;
  LambdaOptions lo;
  lo.tau = rep.tau;
  lo.levels = opts.levels;
  lo.tol = opts.tol;
  rep.center = approximate_center(ev, lo);
  for (int k = 0; k < m.dim(); ++k)
    rep.plane_distance.push_back(std::abs(rep.center.center[static_cast<std::size_t>(k)] - rep.center.lambda_plus[static_cast<std::size_t>(k)]));
  rep.angular = angular_oscillation(ev, rep.center.center, {}, opts.seed);
  rep.rotation = max_rotation_deficit(ev, rep.center.center, opts.p);
  return rep;
}

// ---------------------------------------------------------------------------

namespace {

// Hessian-based -Delta_p of u = U (1 + eps psi) at x.
struct Manufactured {
  TalentiBubble U;
  TestBump psi;
  double eps;
  double p;

  static double b(double t) { return std::abs(t) < 1 ? std::pow(1 - t * t, 4) : 0.0; }
  static double b1(double t) { return std::abs(t) < 1 ? -8 * t * std::pow(1 - t * t, 3) : 0.0; }
  static double b2(double t) {
    if (std::abs(t) >= 1) return 0.0;
    const double s = 1 - t * t;
    return -8 * s * s * s + 48 * t * t * s * s;
  }

  double U2(double rho) const {
    // U' = -e q U rho^{q-1} / D
    const int n = U.n();
    const double e = (n - p) / p, q = p / (p - 1.0);
    const double D = std::pow(U.lambda(), q) + std::pow(rho, q);
    const double u = U.radial_value(rho), u1 = U.radial_derivative(rho);
    return -e * q *
           (u1 * std::pow(rho, q - 1) / D + u * (q - 1) * std::pow(rho, q - 2) / D - u * q * std::pow(rho, 2 * q - 2) / (D * D));
  }

  double value(std::span<const double> x) const { return U(x) * (1.0 + eps * psi.value(x, false)); }

  bool in_support(std::span<const double> x) const {
    for (std::size_t k = 0; k < x.size(); ++k)
      if (std::abs(x[k] - psi.center[k]) >= psi.scale) return false;
    return true;
  }

  double kappa(std::span<const double> x) const {
    const std::size_t d = x.size();
    if (eps == 0.0 || !in_support(x)) return 1.0;
    const int n = U.n();
    const double ps = n * p / (n - p);
    std::vector<double> gU(d), gp(d), g(d), H(d * d, 0.0);
    U.grad(x, gU);
    psi.grad(x, false, gp);
    const double uu = U(x), pv = psi.value(x, false);
    double rho = 0.0;
    for (std::size_t k = 0; k < d; ++k) rho += x[k] * x[k];
    rho = std::sqrt(rho);
    const double s = psi.scale;
    const double u1 = U.radial_derivative(rho), u2 = U2(rho);
    std::vector<double> t(d), bb(d), bd(d), bdd(d);
    for (std::size_t k = 0; k < d; ++k) {
      t[k] = (x[k] - psi.center[k]) / s;
      bb[k] = b(t[k]);
      bd[k] = b1(t[k]) / s;
      bdd[k] = b2(t[k]) / (s * s);
    }
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) {
        const double ei = x[i] / rho, ej = x[j] / rho;
        const double hu = u2 * ei * ej + (u1 / rho) * ((i == j ? 1.0 : 0.0) - ei * ej);
        double ph = 1.0;
        for (std::size_t k = 0; k < d; ++k) {
          if (k == i && k == j)
            ph *= bdd[k];
          else if (k == i || k == j)
            ph *= bd[k];
          else
            ph *= bb[k];
        }
        H[i * d + j] = hu * (1.0 + eps * pv) + eps * (gU[i] * gp[j] + gp[i] * gU[j] + uu * ph);
      }
    double gn2 = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      g[k] = gU[k] * (1.0 + eps * pv) + eps * uu * gp[k];
      gn2 += g[k] * g[k];
    }
    if (gn2 == 0.0) return 0.0;
    double tr = 0.0, gHg = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      tr += H[i * d + i];
      for (std::size_t j = 0; j < d; ++j) gHg += g[i] * H[i * d + j] * g[j];
    }
    const double lap = std::pow(gn2, (p - 2) / 2) * (tr + (p - 2) * gHg / gn2);
    return -lap / std::pow(value(x), ps - 1.0);
  }
};

Manufactured manufactured(int n, double p, double eps) {
  Point c(static_cast<std::size_t>(n), 0.0);
  c.back() = 1.25;
  // support stays off the origin, where U is not C^2
  return {TalentiBubble(n, p, {}, 1.0), TestBump{c, 1.0}, eps, p};
}

}  // namespace

ManufacturedPair manufactured_space_pair(const MeshPtr& mesh, double p, double eps) {
  if (mesh->kind() != MeshKind::box) throw InvalidInput("the space family lives on a box mesh");
  const auto mf = manufactured(mesh->dim(), p, eps);
  return {ScalarField::sample(mesh, [&](std::span<const double> x) { return mf.value(x); }),
          ScalarField::sample(mesh, [&](std::span<const double> x) { return mf.kappa(x); })};
}

SweepResult sweep_experiment(const SweepConfig& cfg) {
  if (cfg.eps.empty()) throw InvalidInput("sweep needs at least one epsilon");
  for (double e : cfg.eps)
    if (!(e > 0.0)) throw InvalidInput("sweep epsilons must be positive");
  const bool ball = cfg.mode == "ball";
  if (!ball && cfg.mode != "space") throw InvalidInput("sweep mode must be ball or space");
  auto mesh = std::make_shared<const Mesh>(Mesh::from_params(cfg.mesh));
  if (ball && mesh->kind() != MeshKind::polar_disk) throw InvalidInput("ball sweeps run on a polar disk mesh");
  if (!ball && mesh->kind() != MeshKind::box) throw InvalidInput("space sweeps run on a box mesh");
  const double p = cfg.base.p;

  SweepResult out;
  auto run_one = [&](double eps) {
    SweepSample s;
    s.epsilon = eps;
    try {
      MovingPlanesOptions mp = cfg.mp;
      mp.p = p;
      if (ball) {
        ProblemSpec spec = cfg.base;
        spec.n = 2;
        spec.kappa = Coefficient::affine(1.0, eps);
        auto rep = solve_dirichlet_2d(spec, mesh);
        s.residual = rep.residual;
        s.scale = rep.scale;
        if (!rep.converged) {
          s.dropped = true;
          s.reason = "solver did not converge";
          return s;
        }
        s.deficit = oscillation(spec.kappa.sample(mesh));
        mp.use_deficit_threshold = cfg.deficit_threshold;
        if (cfg.deficit_threshold) mp.tau_deficit_factor = verify_apriori(rep.solution, spec).C3;
        s.report = analyze(rep.solution, s.deficit, "osc(kappa)", mp);
        s.solution = rep.solution;
      } else {
        auto pair = manufactured_space_pair(mesh, p, eps);
        if (pair.kappa.min() <= 0.0) {
          s.dropped = true;
          s.reason = "manufactured kappa is not positive";
          return s;
        }
        s.deficit = deficit_whole_space(pair.u, pair.kappa, p);
        s.residual = critical_residual(pair.u, pair.kappa, p);
        mp.use_deficit_threshold = cfg.deficit_threshold;
        s.report = analyze(pair.u, s.deficit, "def(u,kappa)", mp);
        s.solution = pair.u;
      }
    } catch (const NumericalFailure& e) {
      s.dropped = true;
      s.reason = e.what();
    }
    return s;
  };

  const auto base = run_one(0.0);
  if (!base.dropped) out.baseline = base.report.angular.oscillation;
  std::vector<LogLawSample> pts;
  for (double e : cfg.eps) {
    out.samples.push_back(run_one(e));
    const auto& s = out.samples.back();
    if (s.dropped) continue;
    if (s.deficit > 0.0 && s.deficit < 1.0 && s.report.angular.oscillation > 0.0)
      pts.push_back({s.deficit, s.report.angular.oscillation});
  }
  out.fit_samples = pts;
  if (pts.size() < 3) {
    out.fit_error = "log-law fit needs at least 3 retained samples";
  } else {
    out.fit = fit_log_law(pts);
  }
  return out;
}

}  // namespace qsym

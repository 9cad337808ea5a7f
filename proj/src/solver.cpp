#include "qsym/solver.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <limits>

#include "qsym/errors.hpp"

namespace qsym {

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();

double phi_inv(double t, double p) { return t >= 0.0 ? std::pow(t, 1.0 / (p - 1.0)) : -std::pow(-t, 1.0 / (p - 1.0)); }
double phi(double s, double p) { return s >= 0.0 ? std::pow(s, p - 1.0) : -std::pow(-s, p - 1.0); }

// int_a^c s^{n-1} g(s) ds for g linear on [a, a + h] with end values ga, gb
double partial_source(double a, double h, double c, double ga, double gb, int n) {
  const double cn = std::pow(c, n) - std::pow(a, n);
  const double cn1 = std::pow(c, n + 1) - std::pow(a, n + 1);
  return ga * cn / n + (gb - ga) / h * (cn1 / (n + 1) - a * cn / n);
}

struct RadialSystem {
  int n;
  double p;
  std::size_t N;
  double h;
  std::vector<double> r, mid, kappa;

  RadialSystem(const ProblemSpec& spec, const Mesh& m) : n(spec.n), p(spec.p), N(m.radial_intervals()), h(m.dr()) {
    r.resize(N + 1);
    mid.resize(N);
    kappa.resize(N + 1);
    for (std::size_t k = 0; k <= N; ++k) {
      r[k] = m.node(k)[0];
      kappa[k] = spec.kappa.at_radius(r[k]);
    }
    for (std::size_t k = 0; k < N; ++k) mid[k] = 0.5 * (r[k] + r[k + 1]);
  }

  // int_0^{mid_k} s^{n-1} kappa f(u) ds for every cell
  std::vector<double> sources(const std::vector<double>& u, const Nonlinearity& f) const {
    std::vector<double> S(N);
    double acc = 0.0;
    for (std::size_t k = 0; k < N; ++k) {
      const double ga = kappa[k] * f(u[k]), gb = kappa[k + 1] * f(u[k + 1]);
      S[k] = acc + partial_source(r[k], h, mid[k], ga, gb, n);
      acc += partial_source(r[k], h, r[k + 1], ga, gb, n);
    }
    return S;
  }

  // integrated form: u(r) = int_r^1 phi^{-1}(s^{1-n} S(s)) ds, midpoint rule per cell
  std::vector<double> apply(const std::vector<double>& S, double scale) const {
    std::vector<double> v(N + 1, 0.0);
    for (std::size_t k = N; k-- > 0;) v[k] = v[k + 1] + h * phi_inv(scale * S[k] * std::pow(mid[k], 1 - n), p);
    return v;
  }

  // flux balance against the control volume [0, mid_k]
  double residual(const std::vector<double>& u, const std::vector<double>& S, double scale) const {
    double res = 0.0;
    for (std::size_t k = 0; k < N; ++k) {
      const double flux = std::pow(mid[k], n - 1) * phi((u[k + 1] - u[k]) / h, p);
      res = std::max(res, std::abs(flux + scale * S[k]));
    }
    return res;
  }
};

// ---------------------------------------------------------------------------
// P1 elements on triangles of the (r, theta) rectangle grid

struct PolarTri {
  std::size_t rp, rm, tp, tm;
  double Ir, Iinv;  // int r dr dtheta, int r^{-1} dr dtheta
};

struct PolarFE {
  const Mesh& m;
  double dr, dt;
  std::size_t n_int;
  std::vector<PolarTri> tris;

  explicit PolarFE(const Mesh& mesh) : m(mesh), dr(mesh.dr()), dt(mesh.dtheta()) {
    const std::size_t nr = m.radial_intervals(), nt = m.angular_count();
    n_int = 1 + (nr - 1) * nt;
    auto node = [&](std::size_t i, std::size_t j) { return m.polar_index(i, static_cast<std::ptrdiff_t>(j)); };
    for (std::size_t i = 0; i < nr; ++i) {
      const double a = dr * static_cast<double>(i), b = (i + 1 == nr) ? 1.0 : dr * static_cast<double>(i + 1);
      const double c = dt / dr;
      const double IrL = c * ((b * b * b - a * a * a) / 3.0 - a * (b * b - a * a) / 2.0);
      const double IrU = c * (b * (b * b - a * a) / 2.0 - (b * b * b - a * a * a) / 3.0);
      const double lg = (i == 0) ? 0.0 : std::log1p(dr / a);
      const double IinvL = (i == 0) ? dt : c * (dr - a * lg);
      const double IinvU = (i == 0) ? 0.0 : c * (b * lg - dr);
      for (std::size_t j = 0; j < nt; ++j) {
        tris.push_back({node(i + 1, j), node(i, j), node(i + 1, j + 1), node(i + 1, j), IrL, IinvL});
        tris.push_back({node(i + 1, j + 1), node(i, j + 1), node(i, j + 1), node(i, j), IrU, IinvU});
      }
    }
  }

  double s_of(const PolarTri& t, const std::vector<double>& u, double& ur, double& ut) const {
    ur = (u[t.rp] - u[t.rm]) / dr;
    ut = (u[t.tp] - u[t.tm]) / dt;
    return ur * ur + (t.Ir > 0.0 ? ut * ut * t.Iinv / t.Ir : 0.0);
  }

  double energy(const std::vector<double>& u, double eps, double p, const std::vector<double>& kap,
                const Nonlinearity& f, double scale) const {
    double e = 0.0, ur, ut;
    const double e2 = eps * eps;
    for (const auto& t : tris) {
      const double s = s_of(t, u, ur, ut);
      e += t.Ir * (std::pow(e2 + s, 0.5 * p) - std::pow(e2, 0.5 * p)) / p;
    }
    for (std::size_t i = 0; i < u.size(); ++i) e -= scale * m.weight(i) * kap[i] * f.primitive(u[i]);
    return e;
  }

  Eigen::SparseMatrix<double> stiffness(const std::vector<double>& u, double eps, double p) const {
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(tris.size() * 8);
    const double e2 = eps * eps;
    auto add_pair = [&](std::size_t a, std::size_t b, double c) {
      if (a < n_int) trip.emplace_back(static_cast<int>(a), static_cast<int>(a), c);
      if (b < n_int) trip.emplace_back(static_cast<int>(b), static_cast<int>(b), c);
      if (a < n_int && b < n_int) {
        trip.emplace_back(static_cast<int>(a), static_cast<int>(b), -c);
        trip.emplace_back(static_cast<int>(b), static_cast<int>(a), -c);
      }
    };
    double ur, ut;
    for (const auto& t : tris) {
      const double s = s_of(t, u, ur, ut);
      const double a = std::pow(e2 + s, 0.5 * (p - 2.0));
      add_pair(t.rp, t.rm, a * t.Ir / (dr * dr));
      if (t.tp != t.tm && t.Iinv > 0.0) add_pair(t.tp, t.tm, a * t.Iinv / (dt * dt));
    }
    Eigen::SparseMatrix<double> K(static_cast<int>(n_int), static_cast<int>(n_int));
    K.setFromTriplets(trip.begin(), trip.end());
    return K;
  }
};

std::vector<double> load_vector(const Mesh& m, std::size_t n_int, const std::vector<double>& u,
                                const std::vector<double>& kap, const Nonlinearity& f) {
  std::vector<double> b(n_int);
  for (std::size_t i = 0; i < n_int; ++i) b[i] = m.weight(i) * kap[i] * f(u[i]);
  return b;
}

}  // namespace

double torsion_profile(double r, int n, double p) {
  return (p - 1.0) / p * std::pow(static_cast<double>(n), -1.0 / (p - 1.0)) * (1.0 - std::pow(r, p / (p - 1.0)));
}

double barrier(double r, double B, double beta) { return B * (std::exp(beta * (1.0 - r)) - 1.0); }

// ---------------------------------------------------------------------------

SolveReport solve_radial(const ProblemSpec& spec, std::size_t resolution) {
  if (!spec.kappa.radial()) throw InvalidInput("radial solver needs a radial coefficient");
  auto mesh = std::make_shared<const Mesh>(Mesh::radial(spec.n, resolution, 1.0));
  spec.validate(*mesh);
  RadialSystem sys(spec, *mesh);
  const bool homog = spec.f.homogeneous(spec.p);
  const std::size_t N = sys.N;

  std::vector<double> u(N + 1, 0.0);
  if (homog)
    for (std::size_t k = 0; k <= N; ++k) u[k] = 1.0 - std::pow(sys.r[k], spec.p / (spec.p - 1.0));

  SolveReport rep;
  double theta = 0.5, scale = 1.0, prev = inf;
  int decreases = 0;
  auto S = sys.sources(u, spec.f);
  for (int it = 0; it < spec.max_iter; ++it) {
    std::vector<double> target = sys.apply(S, 1.0);
    if (homog) {
      const double top = *std::max_element(target.begin(), target.end());
      if (!(top > 0.0)) throw NumericalFailure("radial eigen-iteration collapsed to zero");
      scale = std::pow(top, 1.0 - spec.p);
      for (double& v : target) v /= top;
    }
    for (std::size_t k = 0; k <= N; ++k) u[k] += theta * (target[k] - u[k]);
    if (homog) {
      const double top = *std::max_element(u.begin(), u.end());
      for (double& v : u) v /= top;
    }
    u[N] = 0.0;
    S = sys.sources(u, spec.f);
    const double res = sys.residual(u, S, scale);
    rep.residual_history.push_back(res);
    rep.iterations = it + 1;
    rep.residual = res;
    if (!std::isfinite(res)) break;
    if (res <= spec.tol) {
      rep.converged = true;
      break;
    }
    if (res < prev) {
      if (++decreases >= 3) {
        theta = std::min(1.0, 2.0 * theta);
        decreases = 0;
      }
    } else {
      theta *= 0.5;
      decreases = 0;
    }
    prev = res;
  }
  rep.solution = ScalarField(mesh, u);
  rep.scale = scale;
  rep.positive = *std::min_element(u.begin(), u.end()) >= -1e-10;
  rep.energy = energy(rep.solution, spec, scale);
  rep.energy_history.push_back(rep.energy);
  rep.eps_final = 0.0;
  return rep;
}

namespace {

// Picard iteration at fixed regularization. The source is either the
// nonlinear load kappa f(u) or, for the inverse power method, a frozen vector.
struct PicardState {
  double theta = 0.5;
  double cap = 1.0;
  int decreases = 0;
};

struct InnerResult {
  double residual = 0.0;
  int iterations = 0;
  bool monotone = true;
};

class PolarPicard {
 public:
  PolarPicard(const PolarFE& fe, const ProblemSpec& spec, const std::vector<double>& kap)
      : fe_(fe), spec_(spec), kap_(kap) {}

  // weighted l2 norm of K(u) u - scale * b
  double residual(const std::vector<double>& u, const std::vector<double>& b, double eps, double scale) const {
    const auto K = fe_.stiffness(u, eps, spec_.p);
    Eigen::Map<const Eigen::VectorXd> ub(u.data(), static_cast<Eigen::Index>(fe_.n_int));
    const Eigen::VectorXd Ku = K * ub;
    double r2 = 0.0;
    for (std::size_t i = 0; i < fe_.n_int; ++i) {
      const double R = Ku[static_cast<Eigen::Index>(i)] - scale * b[i];
      r2 += R * R / fe_.m.weight(i);
    }
    return std::sqrt(r2);
  }

  double rayleigh(const std::vector<double>& u, const std::vector<double>& b, double eps) const {
    const auto K = fe_.stiffness(u, eps, spec_.p);
    Eigen::Map<const Eigen::VectorXd> ub(u.data(), static_cast<Eigen::Index>(fe_.n_int)),
        bb(b.data(), static_cast<Eigen::Index>(fe_.n_int));
    return ub.dot(K * ub) / ub.dot(bb);
  }

  std::vector<double> load(const std::vector<double>& u) const { return load_vector(fe_.m, fe_.n_int, u, kap_, spec_.f); }

  // frozen == nullptr: source kappa f(u) with potential kappa F(u)
  double energy(const std::vector<double>& u, double eps, const std::vector<double>* frozen) const {
    if (!frozen) return fe_.energy(u, eps, spec_.p, kap_, spec_.f, 1.0);
    const Nonlinearity zero = Nonlinearity::constant(0.0);
    double e = fe_.energy(u, eps, spec_.p, kap_, zero, 1.0);
    for (std::size_t i = 0; i < fe_.n_int; ++i) e -= (*frozen)[i] * u[i];
    return e;
  }

  InnerResult run(std::vector<double>& u, double eps, const std::vector<double>* frozen, double tol, int max_iter,
                  PicardState& st, std::vector<double>* energies) {
    InnerResult out;
    double prev = inf;
    const std::size_t ni = fe_.n_int;
    for (int it = 0; it < max_iter; ++it) {
      const auto b = frozen ? *frozen : load(u);
      const auto K = fe_.stiffness(u, eps, spec_.p);
      Eigen::Map<const Eigen::VectorXd> ub(u.data(), static_cast<Eigen::Index>(ni)), bb(b.data(), static_cast<Eigen::Index>(ni));
      const Eigen::VectorXd Ku = K * ub;
      double r2 = 0.0;
      for (std::size_t i = 0; i < ni; ++i) {
        const double R = Ku[static_cast<Eigen::Index>(i)] - b[i];
        r2 += R * R / fe_.m.weight(i);
      }
      out.residual = std::sqrt(r2);
      if (!std::isfinite(out.residual)) throw NumericalFailure("2-D solver produced a non-finite residual");
      if (out.residual <= tol) break;
      ++out.iterations;

      if (!pattern_) {
        ldlt_.analyzePattern(K);
        pattern_ = true;
      }
      ldlt_.factorize(K);
      if (ldlt_.info() != Eigen::Success) throw NumericalFailure("stiffness factorization failed");
      const Eigen::VectorXd v = ldlt_.solve(bb);

      std::vector<double> trial(u);
      const double e0 = energy(u, eps, frozen);
      double t = st.theta, e1 = inf;
      for (int k = 0; k < 40; ++k) {
        for (std::size_t i = 0; i < ni; ++i) trial[i] = u[i] + t * (v[static_cast<Eigen::Index>(i)] - u[i]);
        e1 = energy(trial, eps, frozen);
        if (e1 <= e0 + 1e-14 * std::abs(e0)) break;
        t *= 0.5;
      }
      if (e1 > e0 + 1e-14 * std::abs(e0)) out.monotone = false;
      if (t < st.theta) {
        st.theta = t;
        st.decreases = 0;
      }
      if (energies) energies->push_back(e1);
      u.swap(trial);
      if (out.residual < prev) {
        if (++st.decreases >= 3) {
          st.theta = std::min(st.cap, 2.0 * st.theta);
          st.decreases = 0;
        }
      } else {
        st.decreases = 0;
      }
      prev = out.residual;
    }
    return out;
  }

 private:
  const PolarFE& fe_;
  const ProblemSpec& spec_;
  const std::vector<double>& kap_;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt_;
  bool pattern_ = false;
};

}  // namespace

SolveReport solve_dirichlet_2d(const ProblemSpec& spec, const MeshPtr& mesh) {
  if (mesh->kind() != MeshKind::polar_disk) throw InvalidInput("2-D solver needs a polar disk mesh");
  if (spec.n != 2) throw InvalidInput("2-D solver needs n = 2");
  if (spec.p < 2.0) throw InvalidInput("2-D solver needs p >= 2");
  spec.validate(*mesh);
  const PolarFE fe(*mesh);
  const bool homog = spec.f.homogeneous(spec.p);
  const std::size_t nn = mesh->size(), ni = fe.n_int;
  const double p = spec.p;

  std::vector<double> kap(nn);
  for (std::size_t i = 0; i < nn; ++i) kap[i] = spec.kappa(mesh->node(i), 2);
  std::vector<double> u(nn, 0.0);
  const bool trivial = spec.f.kind == Nonlinearity::Kind::constant && spec.f.scale == 0.0;
  for (std::size_t i = 0; i < ni && !trivial; ++i) {
    const double r = mesh->radius_of(i);
    u[i] = homog ? 1.0 - std::pow(r, p / (p - 1.0)) : torsion_profile(r, 2, p);
  }

  SolveReport rep;
  PolarPicard picard(fe, spec, kap);
  PicardState st;
  // the frozen-coefficient map has Jacobian eigenvalues 1 - theta c with
  // c in [1, p - 1]; steps above 2/p stop contracting along the gradient
  st.cap = std::min(1.0, 2.0 / p);
  st.theta = std::min(st.theta, st.cap);
  double eps = spec.eps_reg, scale = 1.0;
  int used = 0;
  auto level_target = [&](double e) { return std::max(spec.tol, 10.0 * spec.tol * e / spec.eps_floor); };

  if (!homog) {
    while (true) {
      const bool at_floor = eps <= spec.eps_floor * (1.0 + 1e-12);
      const double target = at_floor ? spec.tol : level_target(eps);
      auto res = picard.run(u, eps, nullptr, target, spec.max_iter - used, st, &rep.energy_history);
      used += res.iterations;
      rep.energy_monotone = rep.energy_monotone && res.monotone;
      rep.residual = res.residual;
      rep.residual_history.push_back(res.residual);
      if (at_floor) {
        rep.converged = res.residual <= spec.tol;
        break;
      }
      if (used >= spec.max_iter) break;
      eps = std::max(eps / 10.0, spec.eps_floor);
    }
  } else {
    // inverse power method: -Delta_p v = kappa f(u), u <- v / max v
    auto b = picard.load(u);
    scale = picard.rayleigh(u, b, eps);
    double res = picard.residual(u, b, eps, scale);
    int stalled = 0;
    while (used < spec.max_iter) {
      const bool at_floor = eps <= spec.eps_floor * (1.0 + 1e-12);
      if (at_floor && res <= spec.tol) {
        rep.converged = true;
        break;
      }
      // regularization breaks homogeneity, so the residual plateaus at a level set by eps
      if (!at_floor && (res <= level_target(eps) || stalled >= 3)) {
        eps = std::max(eps / 10.0, spec.eps_floor);
        res = picard.residual(u, b, eps, scale);
        stalled = 0;
        continue;
      }
      // warm start at the expected amplitude mu^{-1/(p-1)}
      std::vector<double> v(u);
      const double amp = std::pow(scale, -1.0 / (p - 1.0));
      for (double& x : v) x *= amp;
      const double inner_tol = std::max(0.1 * spec.tol, 1e-2 * res) / scale;
      auto inner = picard.run(v, eps, &b, inner_tol, std::max(1, spec.max_iter - used), st, nullptr);
      used += std::max(1, inner.iterations);
      const double top = *std::max_element(v.begin(), v.end());
      if (!(top > 0.0)) throw NumericalFailure("2-D eigen-iteration collapsed to zero");
      for (std::size_t i = 0; i < nn; ++i) u[i] = v[i] / top;
      b = picard.load(u);
      scale = picard.rayleigh(u, b, eps);
      const double before = res;
      res = picard.residual(u, b, eps, scale);
      stalled = res > 0.9 * before ? stalled + 1 : 0;
      rep.residual_history.push_back(res);
    }
    rep.residual = res;
  }
  rep.iterations = used;
  rep.eps_final = eps;
  rep.scale = scale;
  rep.solution = ScalarField(mesh, u);
  rep.positive = *std::min_element(u.begin(), u.end()) >= -1e-10;
  rep.energy = energy(rep.solution, spec, scale);
  return rep;
}

double energy(const ScalarField& u, const ProblemSpec& spec, double scale) {
  const Mesh& m = u.mesh();
  const double p = spec.p;
  if (m.kind() == MeshKind::radial) {
    const int n = m.dim();
    const double area = sphere_area(n), h = m.dr();
    double e = 0.0;
    for (std::size_t k = 0; k + 1 < m.size(); ++k) {
      const double a = m.node(k)[0], b = m.node(k + 1)[0];
      const double g = std::abs(u[k + 1] - u[k]) / h;
      e += std::pow(g, p) / p * area * (std::pow(b, n) - std::pow(a, n)) / n;
    }
    for (std::size_t k = 0; k < m.size(); ++k) e -= scale * m.weight(k) * spec.kappa.at_radius(m.node(k)[0]) * spec.f.primitive(u[k]);
    return e;
  }
  if (m.kind() == MeshKind::polar_disk) {
    const PolarFE fe(m);
    std::vector<double> kap(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) kap[i] = spec.kappa(m.node(i), 2);
    std::vector<double> v(u.values().begin(), u.values().end());
    return fe.energy(v, 0.0, p, kap, spec.f, scale);
  }
  throw InvalidInput("energy needs a radial or polar mesh");
}

// ---------------------------------------------------------------------------

namespace {

template <class Fn>
void for_each_neighbour_pair(const Mesh& m, Fn&& fn) {
  switch (m.kind()) {
    case MeshKind::radial:
      for (std::size_t k = 0; k + 1 < m.size(); ++k) fn(k, k + 1);
      break;
    case MeshKind::polar_disk: {
      const std::size_t nr = m.radial_intervals(), nt = m.angular_count();
      for (std::size_t j = 0; j < nt; ++j) fn(0, m.polar_index(1, static_cast<std::ptrdiff_t>(j)));
      for (std::size_t i = 1; i <= nr; ++i)
        for (std::size_t j = 0; j < nt; ++j) {
          const auto jj = static_cast<std::ptrdiff_t>(j);
          fn(m.polar_index(i, jj), m.polar_index(i, jj + 1));
          if (i < nr) fn(m.polar_index(i, jj), m.polar_index(i + 1, jj));
        }
      break;
    }
    case MeshKind::box: {
      const std::size_t np = m.points_per_axis();
      for (std::size_t idx = 0; idx < m.size(); ++idx) {
        std::size_t rem = idx;
        for (int a = 0; a < m.dim(); ++a) {
          if (rem % np + 1 < np) fn(idx, idx + m.stride(a));
          rem /= np;
        }
      }
      break;
    }
  }
}

double distance(const Mesh& m, std::size_t a, std::size_t b) {
  auto x = m.node(a), y = m.node(b);
  double s = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) s += (x[k] - y[k]) * (x[k] - y[k]);
  return std::sqrt(s);
}

}  // namespace

AprioriReport verify_apriori(const ScalarField& u, const ProblemSpec& spec, const AprioriOptions& opts) {
  const Mesh& m = u.mesh();
  if (m.kind() == MeshKind::box) throw InvalidInput("a-priori estimates need a ball mesh");
  const double umax = lq_norm(u, inf);
  if (!(umax > 0.0)) throw InvalidInput("a-priori estimates need a non-trivial solution");
  AprioriReport rep;
  const auto g = gradient(u);
  const int d = m.coord_dim();

  rep.C0 = std::max({1.0, umax, 1.0 / umax});
  for (std::size_t i = 0; i < m.size(); ++i) rep.grad_sup = std::max(rep.grad_sup, g.norm_at(i));
  for_each_neighbour_pair(m, [&](std::size_t a, std::size_t b) {
    const double dist = distance(m, a, b);
    if (dist <= 0.0) return;
    double s = 0.0;
    for (int k = 0; k < d; ++k) {
      const double diff = g.at(a)[static_cast<std::size_t>(k)] - g.at(b)[static_cast<std::size_t>(k)];
      s += diff * diff;
    }
    rep.holder_proxy = std::max(rep.holder_proxy, std::sqrt(s) / std::pow(dist, opts.alpha_star));
  });
  rep.C1 = std::max(1.0, rep.grad_sup + rep.holder_proxy);

  double inner_min = inf;
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (m.on_boundary(i)) {
      // inner normal derivative is -u_r
      double ur = 0.0;
      if (d == 1) {
        ur = g.at(i)[0];
      } else {
        auto x = m.node(i);
        for (int k = 0; k < d; ++k) ur += g.at(i)[static_cast<std::size_t>(k)] * x[static_cast<std::size_t>(k)];
        ur /= m.radius_of(i);
      }
      inner_min = std::min(inner_min, -ur);
      continue;
    }
    const double dist = 1.0 - m.radius_of(i);
    rep.C2 = (u[i] > 0.0) ? std::max(rep.C2, dist / u[i]) : inf;
  }
  rep.C2_boundary = inner_min > 0.0 ? 1.0 / inner_min : inf;

  rep.delta1 = opts.delta1 > 0.0 ? opts.delta1 : 0.9 / (rep.C0 * rep.C1);
  // snap to the outermost node sphere inside B_{1 - delta1}
  double r_in = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    const double r = m.radius_of(i);
    if (r <= 1.0 - rep.delta1 + 1e-12) r_in = std::max(r_in, r);
  }
  rep.delta1 = 1.0 - r_in;
  double sup = 0.0, low = inf;
  for (std::size_t i = 0; i < m.size(); ++i)
    if (m.radius_of(i) <= 1.0 - rep.delta1 + 1e-12) {
      sup = std::max(sup, u[i]);
      low = std::min(low, u[i]);
    }
  rep.C3 = low > 0.0 ? sup / low : inf;

  rep.c_flat = 1.0 / (rep.C0 * rep.C3);
  rep.barrier_beta = (spec.n - 1.0) / ((spec.p - 1.0) * (1.0 - rep.delta1));
  rep.barrier_B = rep.c_flat / std::expm1(rep.barrier_beta * rep.delta1);
  for (std::size_t i = 0; i < m.size(); ++i) {
    const double r = m.radius_of(i);
    if (r < 1.0 - rep.delta1 - 1e-12) continue;
    if (barrier(r, rep.barrier_B, rep.barrier_beta) > u[i] + 1e-9 * umax) ++rep.barrier_violations;
  }
  rep.barrier_ok = rep.barrier_violations == 0;

  rep.delta0 = std::pow(rep.barrier_beta * rep.barrier_B / rep.C1, 1.0 / opts.alpha_star);
  rep.delta0 = std::min(rep.delta0, 1.0 - 1e-12);
  rep.gradient_positive = true;
  for (std::size_t i = 0; i < m.size(); ++i)
    if (m.radius_of(i) > 1.0 - rep.delta0 && !(g.norm_at(i) > 0.0)) rep.gradient_positive = false;
  return rep;
}

}  // namespace qsym

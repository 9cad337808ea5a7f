#include "qsym/domain.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "qsym/errors.hpp"

namespace qsym {

namespace {

constexpr double pi = std::numbers::pi;

// integral over [a, b] of the rising / falling hat times r^{n-1}
double rising_moment(double a, double b, int n) {
  const double h = b - a;
  return ((std::pow(b, n + 1) - std::pow(a, n + 1)) / (n + 1) - a * (std::pow(b, n) - std::pow(a, n)) / n) / h;
}
double falling_moment(double a, double b, int n) {
  const double h = b - a;
  return (b * (std::pow(b, n) - std::pow(a, n)) / n - (std::pow(b, n + 1) - std::pow(a, n + 1)) / (n + 1)) / h;
}

double norm(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s);
}

[[noreturn]] void throw_outside(std::span<const double> x) {
  std::ostringstream os;
  os << "point (";
  for (std::size_t k = 0; k < x.size(); ++k) os << (k ? ", " : "") << x[k];
  os << ") lies outside the mesh region";
  throw OutOfRegion(os.str(), Point(x.begin(), x.end()));
}

}  // namespace

std::string to_string(MeshKind kind) {
  switch (kind) {
    case MeshKind::radial: return "radial";
    case MeshKind::polar_disk: return "polar_disk";
    case MeshKind::box: return "box";
  }
  return "unknown";
}

MeshKind mesh_kind_from_string(std::string_view name) {
  if (name == "radial") return MeshKind::radial;
  if (name == "polar_disk" || name == "disk") return MeshKind::polar_disk;
  if (name == "box") return MeshKind::box;
  throw InvalidInput("unknown mesh kind '" + std::string(name) + "'");
}

double sphere_area(int n) { return 2.0 * std::pow(pi, 0.5 * n) / std::tgamma(0.5 * n); }
double unit_ball_volume(int n) { return sphere_area(n) / n; }

Mesh Mesh::radial(int dim, std::size_t intervals, double radius) {
  if (dim < 1) throw InvalidInput("radial mesh needs dimension >= 1");
  if (intervals < 2) throw InvalidInput("radial mesh needs at least 3 nodes");
  if (!(radius > 0.0)) throw InvalidInput("radial mesh radius must be positive");
  Mesh m;
  m.params_ = {MeshKind::radial, dim, intervals, 0, radius};
  m.coord_dim_ = 1;
  m.dr_ = radius / static_cast<double>(intervals);
  m.spacing_ = m.dr_;
  const std::size_t nn = intervals + 1;
  m.coords_.resize(nn);
  m.weights_.assign(nn, 0.0);
  const double area = sphere_area(dim);
  for (std::size_t i = 0; i < nn; ++i) m.coords_[i] = (i == intervals) ? radius : m.dr_ * static_cast<double>(i);
  for (std::size_t i = 0; i < intervals; ++i) {
    const double a = m.coords_[i], b = m.coords_[i + 1];
    m.weights_[i] += area * falling_moment(a, b, dim);
    m.weights_[i + 1] += area * rising_moment(a, b, dim);
  }
  return m;
}

Mesh Mesh::polar_disk(std::size_t radial_intervals, std::size_t angular_count) {
  if (radial_intervals < 2) throw InvalidInput("polar mesh needs at least 2 rings");
  if (angular_count < 4 || angular_count % 2 != 0) throw InvalidInput("polar mesh needs an even angular count >= 4");
  Mesh m;
  m.params_ = {MeshKind::polar_disk, 2, radial_intervals, angular_count, 1.0};
  m.coord_dim_ = 2;
  const std::size_t nr = radial_intervals, nt = angular_count;
  m.dr_ = 1.0 / static_cast<double>(nr);
  m.dtheta_ = 2.0 * pi / static_cast<double>(nt);
  const std::size_t nn = 1 + nr * nt;
  m.coords_.assign(2 * nn, 0.0);
  m.weights_.assign(nn, 0.0);
  const double dr = m.dr_, dt = m.dtheta_;
  m.weights_[0] = pi * dr * dr / 3.0;
  for (std::size_t i = 1; i <= nr; ++i) {
    const double r = (i == nr) ? 1.0 : dr * static_cast<double>(i);
    const double w = (i == nr) ? dt * (dr / 2.0 - dr * dr / 6.0) : dt * r * dr;
    for (std::size_t j = 0; j < nt; ++j) {
      const std::size_t k = 1 + (i - 1) * nt + j;
      const double th = dt * static_cast<double>(j);
      m.coords_[2 * k] = r * std::cos(th);
      m.coords_[2 * k + 1] = r * std::sin(th);
      m.weights_[k] = w;
    }
  }
  // longest cell edge: outer arc chord or radial edge, or diagonal of the outer quad
  const double chord = 2.0 * std::sin(dt / 2.0);
  const double inner = 1.0 - dr;
  const double diag = std::sqrt(1.0 + inner * inner - 2.0 * inner * std::cos(dt));
  m.spacing_ = std::max({chord, dr, diag});
  m.finish_polar_diff();
  return m;
}

void Mesh::finish_polar_diff() {
  const std::size_t nt = params_.angular;
  const double h = dtheta_;
  angular_diff_.assign(nt * nt, 0.0);
  for (std::size_t j = 0; j < nt; ++j)
    for (std::size_t k = 0; k < nt; ++k) {
      if (j == k) continue;
      const auto d = static_cast<long>(j) - static_cast<long>(k);
      const double sign = (std::abs(d) % 2 == 0) ? 1.0 : -1.0;
      angular_diff_[j * nt + k] = 0.5 * sign / std::tan(0.5 * h * static_cast<double>(d));
    }
}

Mesh Mesh::box(int dim, std::size_t points_per_axis, double half_width) {
  if (dim < 2 || dim > 4) throw InvalidInput("box mesh supports dimension 2..4");
  if (points_per_axis < 3) throw InvalidInput("box mesh needs at least 3 points per axis");
  if (!(half_width > 0.0)) throw InvalidInput("box half-width must be positive");
  Mesh m;
  m.params_ = {MeshKind::box, dim, points_per_axis, 0, half_width};
  m.coord_dim_ = dim;
  const std::size_t np = points_per_axis;
  m.dr_ = 2.0 * half_width / static_cast<double>(np - 1);
  m.spacing_ = m.dr_ * std::sqrt(static_cast<double>(dim));
  std::size_t nn = 1;
  for (int a = 0; a < dim; ++a) {
    m.strides_[static_cast<std::size_t>(a)] = nn;
    nn *= np;
  }
  m.coords_.resize(nn * static_cast<std::size_t>(dim));
  m.weights_.resize(nn);
  for (std::size_t idx = 0; idx < nn; ++idx) {
    std::size_t rem = idx;
    double w = 1.0;
    for (int a = 0; a < dim; ++a) {
      const std::size_t k = rem % np;
      rem /= np;
      m.coords_[idx * static_cast<std::size_t>(dim) + static_cast<std::size_t>(a)] =
          (k == np - 1) ? half_width : m.axis_coord(k);
      w *= (k == 0 || k == np - 1) ? 0.5 * m.dr_ : m.dr_;
    }
    m.weights_[idx] = w;
  }
  return m;
}

Mesh Mesh::from_params(const MeshParams& p) {
  switch (p.kind) {
    case MeshKind::radial: return radial(p.dim, p.resolution, p.extent);
    case MeshKind::polar_disk: return polar_disk(p.resolution, p.angular);
    case MeshKind::box: return box(p.dim, p.resolution, p.extent);
  }
  throw InvalidInput("unknown mesh kind");
}

double Mesh::radius_of(std::size_t i) const {
  if (coord_dim_ == 1) return coords_[i];
  return norm(node(i));
}

double Mesh::volume() const {
  switch (params_.kind) {
    case MeshKind::radial: return unit_ball_volume(params_.dim) * std::pow(params_.extent, params_.dim);
    case MeshKind::polar_disk: return pi;
    case MeshKind::box: return std::pow(2.0 * params_.extent, params_.dim);
  }
  return 0.0;
}

bool Mesh::on_boundary(std::size_t i) const {
  switch (params_.kind) {
    case MeshKind::radial: return i == params_.resolution;
    case MeshKind::polar_disk: return i > 0 && (i - 1) / params_.angular == params_.resolution - 1;
    case MeshKind::box: {
      std::size_t rem = i;
      for (int a = 0; a < params_.dim; ++a) {
        const std::size_t k = rem % params_.resolution;
        rem /= params_.resolution;
        if (k == 0 || k == params_.resolution - 1) return true;
      }
      return false;
    }
  }
  return false;
}

bool Mesh::contains(std::span<const double> x, double slack) const {
  switch (params_.kind) {
    case MeshKind::radial: return norm(x) <= params_.extent + slack;
    case MeshKind::polar_disk: return x.size() == 2 && norm(x) <= 1.0 + slack;
    case MeshKind::box:
      if (x.size() != static_cast<std::size_t>(params_.dim)) return false;
      for (double v : x)
        if (std::abs(v) > params_.extent + slack) return false;
      return true;
  }
  return false;
}

std::size_t Mesh::polar_index(std::size_t ring, std::ptrdiff_t j) const {
  if (ring == 0) return 0;
  const auto nt = static_cast<std::ptrdiff_t>(params_.angular);
  const std::ptrdiff_t jj = ((j % nt) + nt) % nt;
  return 1 + (ring - 1) * params_.angular + static_cast<std::size_t>(jj);
}

// ---------------------------------------------------------------------------

ScalarField::ScalarField(MeshPtr mesh, std::vector<double> values) : mesh_(std::move(mesh)), values_(std::move(values)) {
  if (!mesh_) throw InvalidInput("field without mesh");
  if (values_.size() != mesh_->size()) throw InvalidInput("field value count does not match node count");
}

ScalarField::ScalarField(MeshPtr mesh, double constant) : mesh_(std::move(mesh)) {
  if (!mesh_) throw InvalidInput("field without mesh");
  values_.assign(mesh_->size(), constant);
}

ScalarField ScalarField::sample(MeshPtr mesh, const std::function<double(std::span<const double>)>& fn) {
  std::vector<double> v(mesh->size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = fn(mesh->node(i));
  return ScalarField(std::move(mesh), std::move(v));
}

double ScalarField::max() const { return *std::max_element(values_.begin(), values_.end()); }
double ScalarField::min() const { return *std::min_element(values_.begin(), values_.end()); }

VectorField::VectorField(MeshPtr mesh, std::vector<double> components) : mesh_(std::move(mesh)), data_(std::move(components)) {
  if (data_.size() != mesh_->size() * static_cast<std::size_t>(mesh_->coord_dim()))
    throw InvalidInput("vector field size does not match mesh");
}

VectorField VectorField::sample(MeshPtr mesh, const std::function<void(std::span<const double>, std::span<double>)>& fn) {
  const auto d = static_cast<std::size_t>(mesh->coord_dim());
  std::vector<double> data(mesh->size() * d);
  for (std::size_t i = 0; i < mesh->size(); ++i) fn(mesh->node(i), std::span<double>(data.data() + i * d, d));
  return VectorField(std::move(mesh), std::move(data));
}

double VectorField::norm_at(std::size_t i) const { return norm(at(i)); }

ScalarField VectorField::magnitude() const {
  std::vector<double> v(mesh_->size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = norm_at(i);
  return ScalarField(mesh_, std::move(v));
}

// ---------------------------------------------------------------------------

Region Region::whole(const Mesh& mesh) { return Region(std::vector<char>(mesh.size(), 1)); }

Region Region::ball(const Mesh& mesh, std::span<const double> center, double radius) {
  std::vector<char> mask(mesh.size(), 0);
  if (mesh.coord_dim() == 1) {
    // radial mesh: only balls about the origin are representable
    if (norm(center) > 0.0) throw InvalidInput("radial mesh supports balls about the origin only");
    return centered_ball(mesh, radius);
  }
  for (std::size_t i = 0; i < mesh.size(); ++i) {
    auto x = mesh.node(i);
    double s = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) s += (x[k] - center[k]) * (x[k] - center[k]);
    mask[i] = std::sqrt(s) <= radius * (1.0 + 1e-12) ? 1 : 0;
  }
  return Region(std::move(mask));
}

Region Region::centered_ball(const Mesh& mesh, double radius) {
  std::vector<char> mask(mesh.size(), 0);
  for (std::size_t i = 0; i < mesh.size(); ++i) mask[i] = mesh.radius_of(i) <= radius * (1.0 + 1e-12) ? 1 : 0;
  return Region(std::move(mask));
}

Region Region::half_space(const Mesh& mesh, std::span<const double> omega, double level) {
  if (mesh.coord_dim() == 1) throw InvalidInput("half-spaces need a mesh with full coordinates");
  std::vector<char> mask(mesh.size(), 0);
  for (std::size_t i = 0; i < mesh.size(); ++i) {
    auto x = mesh.node(i);
    double s = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) s += omega[k] * x[k];
    mask[i] = s > level ? 1 : 0;
  }
  return Region(std::move(mask));
}

Region Region::interior(const Mesh& mesh) {
  std::vector<char> mask(mesh.size(), 0);
  for (std::size_t i = 0; i < mesh.size(); ++i) mask[i] = mesh.on_boundary(i) ? 0 : 1;
  return Region(std::move(mask));
}

std::size_t Region::count() const { return static_cast<std::size_t>(std::count(mask_.begin(), mask_.end(), 1)); }

double Region::measure(const Mesh& mesh) const {
  double s = 0.0;
  for (std::size_t i = 0; i < mask_.size(); ++i)
    if (mask_[i]) s += mesh.weight(i);
  return s;
}

Region Region::operator&(const Region& o) const {
  std::vector<char> m(mask_.size());
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = (mask_[i] && o.mask_[i]) ? 1 : 0;
  return Region(std::move(m));
}
Region Region::operator|(const Region& o) const {
  std::vector<char> m(mask_.size());
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = (mask_[i] || o.mask_[i]) ? 1 : 0;
  return Region(std::move(m));
}
Region Region::operator-(const Region& o) const {
  std::vector<char> m(mask_.size());
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = (mask_[i] && !o.mask_[i]) ? 1 : 0;
  return Region(std::move(m));
}

// ---------------------------------------------------------------------------

namespace {

VectorField radial_gradient(const ScalarField& u) {
  const Mesh& m = u.mesh();
  const std::size_t n = m.radial_intervals();
  const double h = m.dr();
  std::vector<double> g(n + 1);
  g[0] = 0.0;  // smooth radial functions have u'(0) = 0
  for (std::size_t i = 1; i < n; ++i) g[i] = (u[i + 1] - u[i - 1]) / (2.0 * h);
  g[n] = (3.0 * u[n] - 4.0 * u[n - 1] + u[n - 2]) / (2.0 * h);
  return VectorField(u.mesh_ptr(), std::move(g));
}

VectorField polar_gradient(const ScalarField& u) {
  const Mesh& m = u.mesh();
  const std::size_t nr = m.radial_intervals(), nt = m.angular_count();
  const double dr = m.dr(), dt = m.dtheta();
  const auto& D = m.angular_derivative_matrix();
  std::vector<double> g(2 * m.size(), 0.0);
  auto val = [&](std::size_t ring, std::size_t j) { return u[m.polar_index(ring, static_cast<std::ptrdiff_t>(j))]; };
  std::vector<double> ring(nt), dth(nt);
  for (std::size_t i = 1; i <= nr; ++i) {
    const double r = (i == nr) ? 1.0 : dr * static_cast<double>(i);
    for (std::size_t j = 0; j < nt; ++j) ring[j] = val(i, j);
    for (std::size_t j = 0; j < nt; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < nt; ++k) s += D[j * nt + k] * ring[k];
      dth[j] = s;
    }
    for (std::size_t j = 0; j < nt; ++j) {
      double ur;
      if (i < nr)
        ur = (val(i + 1, j) - val(i - 1, j)) / (2.0 * dr);
      else
        ur = (3.0 * val(i, j) - 4.0 * val(i - 1, j) + val(i - 2, j)) / (2.0 * dr);
      const double th = dt * static_cast<double>(j);
      const double c = std::cos(th), s = std::sin(th);
      const double ut = dth[j] / r;
      const std::size_t k = m.polar_index(i, static_cast<std::ptrdiff_t>(j));
      g[2 * k] = ur * c - ut * s;
      g[2 * k + 1] = ur * s + ut * c;
    }
  }
  // pole: first Fourier mode of the innermost ring
  double gx = 0.0, gy = 0.0;
  for (std::size_t j = 0; j < nt; ++j) {
    const double th = dt * static_cast<double>(j);
    const double q = (val(1, j) - u[0]) / dr;
    gx += q * std::cos(th);
    gy += q * std::sin(th);
  }
  g[0] = 2.0 * gx / static_cast<double>(nt);
  g[1] = 2.0 * gy / static_cast<double>(nt);
  return VectorField(u.mesh_ptr(), std::move(g));
}

VectorField box_gradient(const ScalarField& u) {
  const Mesh& m = u.mesh();
  const int d = m.dim();
  const std::size_t np = m.points_per_axis();
  const double h = m.box_step();
  const auto du = static_cast<std::size_t>(d);
  std::vector<double> g(m.size() * du);
  for (std::size_t idx = 0; idx < m.size(); ++idx) {
    std::size_t rem = idx;
    for (int a = 0; a < d; ++a) {
      const std::size_t k = rem % np;
      rem /= np;
      const std::size_t s = m.stride(a);
      double v;
      if (k == 0)
        v = (-3.0 * u[idx] + 4.0 * u[idx + s] - u[idx + 2 * s]) / (2.0 * h);
      else if (k == np - 1)
        v = (3.0 * u[idx] - 4.0 * u[idx - s] + u[idx - 2 * s]) / (2.0 * h);
      else
        v = (u[idx + s] - u[idx - s]) / (2.0 * h);
      g[idx * du + static_cast<std::size_t>(a)] = v;
    }
  }
  return VectorField(u.mesh_ptr(), std::move(g));
}

}  // namespace

VectorField gradient(const ScalarField& u) {
  switch (u.mesh().kind()) {
    case MeshKind::radial: return radial_gradient(u);
    case MeshKind::polar_disk: return polar_gradient(u);
    case MeshKind::box: return box_gradient(u);
  }
  throw InvalidInput("unknown mesh kind");
}

double integrate(const Mesh& mesh, std::span<const double> values, const Region& region) {
  if (region.size() != mesh.size() || values.size() != mesh.size()) throw InvalidInput("region or values do not match mesh");
  if (region.empty()) throw EmptyRegion("integration over an empty region");
  double s = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i)
    if (region.contains(i)) s += mesh.weight(i) * values[i];
  return s;
}

double integrate(const ScalarField& u) { return integrate(u.mesh(), u.values(), Region::whole(u.mesh())); }

double lq_norm(const ScalarField& u, double q, const Region& region) {
  if (region.size() != u.size()) throw InvalidInput("region does not match mesh");
  if (region.empty()) throw EmptyRegion("norm over an empty region is vacuous");
  if (std::isinf(q)) {
    double m = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i)
      if (region.contains(i)) m = std::max(m, std::abs(u[i]));
    return m;
  }
  if (!(q >= 1.0) && !(q > 0.0)) throw InvalidInput("norm exponent must be positive");
  double s = 0.0;
  const auto& m = u.mesh();
  for (std::size_t i = 0; i < u.size(); ++i)
    if (region.contains(i)) s += m.weight(i) * std::pow(std::abs(u[i]), q);
  return std::pow(s, 1.0 / q);
}

double lq_norm(const ScalarField& u, double q) { return lq_norm(u, q, Region::whole(u.mesh())); }

double oscillation(const ScalarField& kappa, const Region& region) {
  if (region.size() != kappa.size()) throw InvalidInput("region does not match mesh");
  if (region.empty()) throw EmptyRegion("oscillation over an empty region");
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (std::size_t i = 0; i < kappa.size(); ++i)
    if (region.contains(i)) {
      lo = std::min(lo, kappa[i]);
      hi = std::max(hi, kappa[i]);
    }
  return hi - lo;
}

double oscillation(const ScalarField& kappa) { return oscillation(kappa, Region::whole(kappa.mesh())); }

// ---------------------------------------------------------------------------

namespace {

Stencil locate_radial(const Mesh& m, double r) {
  if (r > m.extent() * (1.0 + 1e-12)) throw_outside(std::span<const double>(&r, 1));
  const std::size_t n = m.radial_intervals();
  const double t = std::min(r, m.extent()) / m.dr();
  auto i = static_cast<std::size_t>(std::floor(t));
  if (i >= n) i = n - 1;
  const double a = t - static_cast<double>(i);
  Stencil s;
  s.count = 2;
  s.nodes[0] = i;
  s.weights[0] = 1.0 - a;
  s.nodes[1] = i + 1;
  s.weights[1] = a;
  return s;
}

// barycentric coordinates of x in triangle (a, b, c)
std::array<double, 3> barycentric(const double* a, const double* b, const double* c, const double* x) {
  const double det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
  const double l1 = ((x[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (x[1] - a[1])) / det;
  const double l2 = ((b[0] - a[0]) * (x[1] - a[1]) - (x[0] - a[0]) * (b[1] - a[1])) / det;
  return {1.0 - l1 - l2, l1, l2};
}

Stencil locate_polar(const Mesh& m, std::span<const double> x) {
  const double r = std::hypot(x[0], x[1]);
  if (r > 1.0 + 1e-12) throw_outside(x);
  const std::size_t nr = m.radial_intervals(), nt = m.angular_count();
  const double dt = m.dtheta();
  double th = std::atan2(x[1], x[0]);
  if (th < 0.0) th += 2.0 * std::numbers::pi;
  auto j = static_cast<std::ptrdiff_t>(std::floor(th / dt));
  if (j >= static_cast<std::ptrdiff_t>(nt)) j = static_cast<std::ptrdiff_t>(nt) - 1;
  const auto ring = static_cast<std::ptrdiff_t>(std::floor(r / m.dr()));

  Stencil best;
  double best_min = -std::numeric_limits<double>::infinity();
  for (std::ptrdiff_t i = ring - 1; i <= ring + 1; ++i) {
    if (i < 0 || i >= static_cast<std::ptrdiff_t>(nr)) continue;
    const auto ii = static_cast<std::size_t>(i);
    const std::size_t a = m.polar_index(ii, j), b = m.polar_index(ii + 1, j), c = m.polar_index(ii + 1, j + 1),
                      d = m.polar_index(ii, j + 1);
    std::array<std::array<std::size_t, 3>, 2> tris{{{a, b, c}, {a, c, d}}};
    const int ntri = (ii == 0) ? 1 : 2;
    for (int t = 0; t < ntri; ++t) {
      const auto& tri = tris[static_cast<std::size_t>(t)];
      auto lam = barycentric(m.node(tri[0]).data(), m.node(tri[1]).data(), m.node(tri[2]).data(), x.data());
      const double mn = std::min({lam[0], lam[1], lam[2]});
      if (mn > best_min) {
        best_min = mn;
        best.count = 3;
        for (std::size_t k = 0; k < 3; ++k) {
          best.nodes[k] = tri[k];
          best.weights[k] = lam[k];
        }
      }
      if (mn >= 0.0) return best;
    }
  }
  return best;
}

Stencil locate_box(const Mesh& m, std::span<const double> x) {
  const int d = m.dim();
  if (x.size() != static_cast<std::size_t>(d) || !m.contains(x, 1e-12 * m.extent())) throw_outside(x);
  const std::size_t np = m.points_per_axis();
  const double h = m.box_step();
  std::array<std::size_t, 4> base{};
  std::array<double, 4> frac{};
  for (int a = 0; a < d; ++a) {
    const double t = (std::clamp(x[static_cast<std::size_t>(a)], -m.extent(), m.extent()) + m.extent()) / h;
    auto k = static_cast<std::size_t>(std::floor(t));
    if (k >= np - 1) k = np - 2;
    base[static_cast<std::size_t>(a)] = k;
    frac[static_cast<std::size_t>(a)] = t - static_cast<double>(k);
  }
  Stencil s;
  s.count = std::size_t{1} << d;
  for (std::size_t c = 0; c < s.count; ++c) {
    std::size_t idx = 0;
    double w = 1.0;
    for (int a = 0; a < d; ++a) {
      const auto ua = static_cast<std::size_t>(a);
      const bool up = (c >> ua) & 1U;
      idx += (base[ua] + (up ? 1 : 0)) * m.stride(a);
      w *= up ? frac[ua] : 1.0 - frac[ua];
    }
    s.nodes[c] = idx;
    s.weights[c] = w;
  }
  return s;
}

// a point sitting on a node reproduces the nodal value exactly
void snap(Stencil& s) {
  for (std::size_t k = 0; k < s.count; ++k)
    if (std::abs(s.weights[k] - 1.0) < 1e-11) {
      s.nodes[0] = s.nodes[k];
      s.weights[0] = 1.0;
      s.count = 1;
      return;
    }
}

}  // namespace

Stencil locate(const Mesh& mesh, std::span<const double> x) {
  Stencil s;
  switch (mesh.kind()) {
    case MeshKind::radial: s = locate_radial(mesh, norm(x)); break;
    case MeshKind::polar_disk:
      if (x.size() != 2) throw InvalidInput("polar mesh expects 2-D points");
      s = locate_polar(mesh, x);
      break;
    case MeshKind::box: s = locate_box(mesh, x); break;
  }
  snap(s);
  return s;
}

double interpolate(const ScalarField& u, std::span<const double> x) { return locate(u.mesh(), x).apply(u.values()); }

}  // namespace qsym

#pragma once

// Meshes, nodal fields, regions, quadrature and interpolation.
//
// Three mesh kinds are supported:
//   radial      nodes r_i = i*R/N on [0, R]; weights carry the r^{n-1} measure
//               of the n-dimensional ball, so integrals are over B_R in R^n.
//   polar_disk  pole plus N_r rings of N_theta nodes on the unit disk; the
//               boundary r = 1 is the outermost ring.
//   box         uniform tensor grid on [-R, R]^n, n in {2, 3, 4}.
//
// Quadrature weights integrate the piecewise-linear (radial, polar) or
// multilinear (box) interpolant exactly, so their sum is the region volume.

#include <array>
#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace qsym {

using Point = std::vector<double>;

enum class MeshKind { radial, polar_disk, box };

std::string to_string(MeshKind kind);
MeshKind mesh_kind_from_string(std::string_view name);

/// Everything needed to rebuild a mesh bit-for-bit.
struct MeshParams {
  MeshKind kind = MeshKind::polar_disk;
  int dim = 2;                  // ambient dimension n
  std::size_t resolution = 32;  // radial intervals or points per box axis
  std::size_t angular = 64;     // polar only
  double extent = 1.0;          // ball radius or box half-width

  bool operator==(const MeshParams&) const = default;
};

/// Surface measure of the unit sphere S^{n-1}.
double sphere_area(int n);
/// Volume of the unit ball B_1 in R^n.
double unit_ball_volume(int n);

class Mesh {
 public:
  static Mesh radial(int dim, std::size_t intervals, double radius = 1.0);
  static Mesh polar_disk(std::size_t radial_intervals, std::size_t angular_count);
  static Mesh box(int dim, std::size_t points_per_axis, double half_width);
  static Mesh from_params(const MeshParams& params);

  const MeshParams& params() const { return params_; }
  MeshKind kind() const { return params_.kind; }
  int dim() const { return params_.dim; }
  /// Coordinates stored per node: 1 for radial, n otherwise.
  int coord_dim() const { return coord_dim_; }
  std::size_t size() const { return weights_.size(); }
  double extent() const { return params_.extent; }

  std::span<const double> node(std::size_t i) const {
    return {coords_.data() + i * coord_dim_, static_cast<std::size_t>(coord_dim_)};
  }
  /// Distance of node i from the origin in R^n.
  double radius_of(std::size_t i) const;
  std::span<const double> weights() const { return weights_; }
  double weight(std::size_t i) const { return weights_[i]; }

  /// Maximum cell diameter.
  double spacing() const { return spacing_; }
  /// Exact measure of the region.
  double volume() const;
  /// True for nodes on the outer boundary of the region.
  bool on_boundary(std::size_t i) const;
  /// Closed-region membership with a small absolute slack.
  bool contains(std::span<const double> x, double slack = 1e-12) const;

  // Structured access -------------------------------------------------------
  std::size_t radial_intervals() const { return params_.resolution; }
  std::size_t angular_count() const { return params_.angular; }
  double dr() const { return dr_; }
  double dtheta() const { return dtheta_; }
  /// Polar node index for ring i >= 1, angle j (wrapped); ring 0 is the pole.
  std::size_t polar_index(std::size_t ring, std::ptrdiff_t j) const;
  /// Dense periodic spectral differentiation matrix on one ring (row-major).
  const std::vector<double>& angular_derivative_matrix() const { return angular_diff_; }

  std::size_t points_per_axis() const { return params_.resolution; }
  double box_step() const { return dr_; }
  double axis_coord(std::size_t k) const { return -params_.extent + dr_ * static_cast<double>(k); }
  std::size_t stride(int axis) const { return strides_[static_cast<std::size_t>(axis)]; }

 private:
  Mesh() = default;
  void finish_polar_diff();

  MeshParams params_;
  int coord_dim_ = 1;
  std::vector<double> coords_;
  std::vector<double> weights_;
  double spacing_ = 0.0;
  double dr_ = 0.0;
  double dtheta_ = 0.0;
  std::array<std::size_t, 4> strides_{};
  std::vector<double> angular_diff_;
};

using MeshPtr = std::shared_ptr<const Mesh>;

/// One value per mesh node.
class ScalarField {
 public:
  ScalarField() = default;
  ScalarField(MeshPtr mesh, std::vector<double> values);
  ScalarField(MeshPtr mesh, double constant);

  /// Samples fn at every node. For radial meshes fn receives (r).
  static ScalarField sample(MeshPtr mesh, const std::function<double(std::span<const double>)>& fn);

  const Mesh& mesh() const { return *mesh_; }
  const MeshPtr& mesh_ptr() const { return mesh_; }
  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  std::span<const double> values() const { return values_; }
  std::vector<double>& mutable_values() { return values_; }

  double max() const;
  double min() const;

 private:
  MeshPtr mesh_;
  std::vector<double> values_;
};

/// coord_dim() components per node; for radial meshes the single component
/// is the radial derivative.
class VectorField {
 public:
  VectorField(MeshPtr mesh, std::vector<double> components);
  static VectorField sample(MeshPtr mesh, const std::function<void(std::span<const double>, std::span<double>)>& fn);

  const Mesh& mesh() const { return *mesh_; }
  const MeshPtr& mesh_ptr() const { return mesh_; }
  int components() const { return mesh_->coord_dim(); }
  std::span<const double> at(std::size_t i) const {
    const auto d = static_cast<std::size_t>(components());
    return {data_.data() + i * d, d};
  }
  double norm_at(std::size_t i) const;
  ScalarField magnitude() const;
  std::span<const double> data() const { return data_; }

 private:
  MeshPtr mesh_;
  std::vector<double> data_;
};

/// Node mask over a mesh; set operations act element-wise.
class Region {
 public:
  explicit Region(std::vector<char> mask) : mask_(std::move(mask)) {}

  static Region whole(const Mesh& mesh);
  static Region ball(const Mesh& mesh, std::span<const double> center, double radius);
  /// Nodes with |x| <= radius measured from the origin (works on radial meshes).
  static Region centered_ball(const Mesh& mesh, double radius);
  /// Nodes with <omega, x> > level.
  static Region half_space(const Mesh& mesh, std::span<const double> omega, double level);
  static Region interior(const Mesh& mesh);

  bool contains(std::size_t i) const { return mask_[i] != 0; }
  std::size_t size() const { return mask_.size(); }
  std::size_t count() const;
  bool empty() const { return count() == 0; }
  double measure(const Mesh& mesh) const;

  Region operator&(const Region& other) const;
  Region operator|(const Region& other) const;
  Region operator-(const Region& other) const;

 private:
  std::vector<char> mask_;
};

/// Second-order differences in the interior, one-sided at the outer boundary.
/// Polar meshes use spectral angular derivatives and a ring average at the pole.
VectorField gradient(const ScalarField& u);

/// (sum w_i |u_i|^q)^{1/q} over region nodes; q = infinity gives the max.
double lq_norm(const ScalarField& u, double q, const Region& region);
double lq_norm(const ScalarField& u, double q);

/// Quadrature of nodal values over a region.
double integrate(const Mesh& mesh, std::span<const double> values, const Region& region);
double integrate(const ScalarField& u);

/// sup - inf of nodal values over region.
double oscillation(const ScalarField& kappa, const Region& region);
double oscillation(const ScalarField& kappa);

/// Linear (radial), piecewise-linear on the polar triangulation, or
/// multilinear (box). Exact on affine functions. Radial meshes accept either
/// a radius or a point in R^n.
double interpolate(const ScalarField& u, std::span<const double> x);

/// Location of x inside the mesh as (node, weight) pairs, reusable across
/// fields that share the mesh.
struct Stencil {
  std::array<std::size_t, 16> nodes{};
  std::array<double, 16> weights{};
  std::size_t count = 0;
  double apply(std::span<const double> values) const {
    double s = 0.0;
    for (std::size_t k = 0; k < count; ++k) s += weights[k] * values[nodes[k]];
    return s;
  }
};
Stencil locate(const Mesh& mesh, std::span<const double> x);

}  // namespace qsym

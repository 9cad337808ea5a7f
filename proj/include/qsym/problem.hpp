#pragma once

// PDE instance -Delta_p u = kappa f(u) on the unit ball with zero Dirichlet data.

#include <span>
#include <string>
#include <vector>

#include "qsym/domain.hpp"

namespace qsym {

/// f(u) as a tagged family so the hypotheses on f stay decidable.
struct Nonlinearity {
  enum class Kind { constant, power, tabulated };
  Kind kind = Kind::constant;
  double scale = 1.0;       // constant value, or F in F u^{p-1}
  double exponent = 1.0;    // power family only: p - 1
  std::vector<double> u_table, f_table;  // tabulated, piecewise linear, constant beyond ends

  static Nonlinearity constant(double c);
  static Nonlinearity power(double F, double exponent);
  static Nonlinearity tabulated(std::vector<double> u, std::vector<double> f);
  /// "const:c", "power:F" (exponent p-1), "table:u0,f0;u1,f1;..."
  static Nonlinearity parse(const std::string& text, double p);
  std::string describe() const;

  double operator()(double u) const;
  /// Antiderivative with F(0) = 0.
  double primitive(double u) const;
  /// Lipschitz bound on [0, umax].
  double lipschitz(double umax) const;
  /// f(u) = F u^{p-1}: the problem is then an eigenvalue problem.
  bool homogeneous(double p) const;
};

/// kappa(x) as a tagged family.
struct Coefficient {
  enum class Kind { constant, affine, radial_table };
  Kind kind = Kind::constant;
  double base = 1.0;         // constant value or kappa-bar
  double epsilon = 0.0;      // affine: kappa-bar + epsilon <direction, x>
  std::vector<double> direction;  // empty means e_n
  std::vector<double> r_table, k_table;

  static Coefficient constant(double c);
  static Coefficient affine(double base, double epsilon, std::vector<double> direction = {});
  static Coefficient radial_table(std::vector<double> r, std::vector<double> k);
  /// "const:c", "affine:base,eps[,axis]" (axis 1-based, default n), "radial:r0,k0;r1,k1;..."
  static Coefficient parse(const std::string& text);
  std::string describe() const;

  bool radial() const;
  /// Evaluates at a point of R^n; radial meshes pass a single radius.
  double operator()(std::span<const double> x, int n) const;
  double at_radius(double r) const;
  ScalarField sample(const MeshPtr& mesh) const;
};

struct ProblemSpec {
  int n = 2;
  double p = 2.0;
  Nonlinearity f;
  Coefficient kappa;
  double eps_reg = 1e-2;       // starting regularization, divided by 10 on stall
  double eps_floor = 1e-6;
  double tol = 1e-8;
  int max_iter = 2000;
  double power_bound = 0.0;    // F with f(u) <= F u^{p-1}; 0 means undeclared

  /// np/(n-p) when p < n, infinity otherwise.
  double critical_exponent() const;
  /// Throws InvalidInput when the hypotheses on (n, p, f, kappa) fail on the
  /// sampled range [0, umax] and on the given mesh.
  void validate(const Mesh& mesh, double umax = 10.0) const;
};

}  // namespace qsym

#pragma once

// Talenti bubbles and whole-space quantities for
//   Delta_p u + kappa(x) u^{p*-1} = 0 in R^n, 2 < p < n,
// evaluated on truncated boxes (or radial meshes) with a power-law tail.

#include <functional>
#include <span>
#include <vector>

#include "qsym/domain.hpp"

namespace qsym {

class TalentiBubble {
 public:
  /// Throws InvalidInput unless 2 < p < n and lambda > 0.
  TalentiBubble(int n, double p, Point center, double lambda);

  int n() const { return n_; }
  double p() const { return p_; }
  const Point& center() const { return z_; }
  double lambda() const { return lambda_; }

  double operator()(std::span<const double> x) const;
  void grad(std::span<const double> x, std::span<double> out) const;
  /// Value and d/dr as functions of rho = |x - z|.
  double radial_value(double rho) const;
  double radial_derivative(double rho) const;

  /// (n - p) / (p - 1).
  double decay_exponent() const;
  /// lim |x|^{(n-p)/(p-1)} U(x).
  double tail_amplitude() const;

  /// Samples on a box mesh (n coordinates) or a radial mesh (center must be 0).
  ScalarField sample(const MeshPtr& mesh) const;
  VectorField sample_gradient(const MeshPtr& mesh) const;

 private:
  int n_;
  double p_;
  Point z_;
  double lambda_;
  double a_;  // n^{1/p} ((n-p)/(p-1))^{(p-1)/p}
};

/// Best constant S = min ||grad u||_p / ||u||_{p*} (Talenti).
double talenti_constant(int n, double p);

/// Far-field model u ~ A rho^{-beta} + B rho^{-beta-q}, rho = |x - c|,
/// q = p/(p-1), used outside the box.
struct DecayTail {
  Point center;
  double amplitude = 0.0;
  double correction = 0.0;
  double exponent = 0.0;
  double subexponent = 0.0;
  double operator()(std::span<const double> x) const;
};
/// Center from the u^{p*} centroid, (A, B) by least squares on the outer nodes.
/// Radial meshes get center 0.
DecayTail fit_decay_tail(const ScalarField& u, double p);

/// Integral of |x|^{-m} over the complement of [-R, R]^n (m > n).
double box_complement_integral(int n, double m, double R);

struct QuotientReport {
  double quotient = 0.0;
  double grad_p = 0.0;      // integral of |grad u|^p including tail
  double mass = 0.0;        // integral of u^{p*} including tail
  double tail_grad_p = 0.0;
  double tail_mass = 0.0;
};

/// ||grad u||_p / ||u||_{p*} with the tail beyond the mesh added analytically.
/// Throws InvalidInput for the zero field.
QuotientReport sobolev_quotient_report(const ScalarField& u, double p, bool tail = true);
/// Same with a supplied gradient field.
QuotientReport sobolev_quotient_report(const ScalarField& u, const VectorField& grad, double p, bool tail = true);
double sobolev_quotient(const ScalarField& u, double p);
double sobolev_quotient(const ScalarField& u, const VectorField& grad, double p);

/// Compactly supported test function with closed-form gradient.
struct TestBump {
  Point center;  // radial meshes: center[0] is the shell radius
  double scale = 1.0;
  double value(std::span<const double> x, bool radial) const;
  void grad(std::span<const double> x, bool radial, std::span<double> out) const;
};

/// Fixed bank: tensor bumps (1 - t^2)^4 at scales L/2, L/4, L/8 centered on
/// {-L/2, 0, L/2}^n with L = 0.9 R; radial meshes use shells centered at
/// multiples of the scale.
std::vector<TestBump> bump_bank(const Mesh& mesh);

struct ResidualReport {
  double residual = 0.0;
  std::size_t worst = 0;  // index into the bank
  std::size_t bank_size = 0;
};

/// max over the bank of |int |grad u|^{p-2} grad u . grad phi - kappa u^{p*-1} phi| / ||grad phi||_p.
ResidualReport critical_residual_report(const ScalarField& u, const ScalarField& kappa, double p);
double critical_residual(const ScalarField& u, const ScalarField& kappa, double p);

struct Kappa0Report {
  double kappa0 = 0.0;     // int kappa u^{p*} / int u^{p*}
  double alternate = 0.0;  // int |grad u|^p / int u^{p*}
  double discrepancy = 0.0;
};
Kappa0Report kappa0(const ScalarField& u, const ScalarField& kappa, double p);

/// ||(kappa - kappa0) u^{p*-1}||_{L^{(p*)'}} over the mesh.
double deficit_whole_space(const ScalarField& u, const ScalarField& kappa, double p);

struct DecayReport {
  double C0 = 0.0;  // sup u (1 + |x|^beta)
  double c0 = 0.0;  // inf u (1 + |x|^beta)
  double c1 = 0.0;  // inf |grad u| |x|^{(n-1)/(p-1)} on |x| >= R0
  double R0 = 1.0;
  double mass = 0.0;        // ||u||_{p*}
  double mass_floor = 0.0;  // (S^p / ||kappa||_inf)^{1/(p*-p)}
  bool mass_ok = false;
};
/// Shells are the node radii; kappa_sup is ||kappa||_inf.
DecayReport decay_constants(const ScalarField& u, double p, double kappa_sup = 1.0);

}  // namespace qsym

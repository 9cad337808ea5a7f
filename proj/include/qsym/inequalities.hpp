#pragma once

// Vector inequalities for |eta|^{p-2} eta, the weight condition
//   int_Omega rho^{-t} |x - y|^{-gamma} dy <= C*,
// weighted Sobolev / Poincare constants, small-domain comparison, weak
// Harnack and local boundedness comparisons, and summability of 1/|grad u|.
// Every verdict concerns the discrete fields.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qsym/domain.hpp"
#include "qsym/problem.hpp"

namespace qsym {

inline constexpr double kGradientFloor = 1e-12;

// ---------------------------------------------------------------------------

struct FundamentalReport {
  double p = 2.0;
  std::size_t samples = 0;
  // smallest / largest observed ratios
  double c = 0.0;      // min <a(e) - a(e'), e - e'> / ((|e| + |e'|)^{p-2} |e - e'|^2)
  double C = 0.0;      // max |a(e) - a(e')| / ((|e| + |e'|)^{p-2} |e - e'|)
  double c_hat = 0.0;  // p >= 2: min <a(e) - a(e'), e - e'> / |e - e'|^p
  double C_hat = 0.0;  // p < 2: max |a(e) - a(e')| / |e - e'|^{p-1}
  // classical constants the ratios are checked against
  double c_ref = 0.0, C_ref = 0.0, c_hat_ref = 0.0, C_hat_ref = 0.0;
  std::size_t violations = 0;
  bool pass = false;
};

/// a(e) = |e|^{p-2} e on random pairs in R^dim (mixed scales, near-collinear
/// and antipodal pairs included). Throws InvalidInput unless p > 1.
FundamentalReport fundamental_ineq_check(double p, std::size_t samples, std::uint64_t seed, int dim = 3);

/// 1/2_M = 1/2 - 1/n + ((p-2)/(p-1)) / n. Requires n >= 2, p > 2.
double exponent_2M(int n, double p);
/// 1/2*(t) = 1/2 - 1/n + (1/t)(1/2 - gamma/(2n)); infinity when nonpositive.
double exponent_2star(int n, double t, double gamma);
/// t = ((p-1)/(p-2)) r, r in ((p-2)/(p-1), 1).
double admissible_t(double p, double r);

// ---------------------------------------------------------------------------

struct WeightCondition {
  double C_star = 0.0;
  double excluded_measure = 0.0;  // nodes with rho <= floor
  double region_measure = 0.0;
  bool degraded = false;          // excluded measure above 1% of |Omega|
  std::size_t sample_points = 0;
};

/// max over x in Omega of int_Omega rho^{-t} |x - y|^{-gamma} dy. The
/// singular self-cell is integrated in closed form on an equal-volume ball.
WeightCondition weight_condition_constant(const ScalarField& rho, double t, double gamma, const Region& omega);

/// |grad u|^{p-2}, set to 0 where |grad u| <= kGradientFloor so the weight
/// condition reports those nodes as excluded.
ScalarField gradient_weight(const ScalarField& u, double p);
ScalarField gradient_weight(const VectorField& grad, double p);

struct WeightReport {
  int n = 2;
  double C_star = 0.0;
  double t = 0.0, gamma = 0.0, q = 2.0;
  double volume = 0.0;  // |Omega|
  double mu = 0.0, delta = 0.0;
  double C_M = 0.0;
  double C_hat = 0.0;
  double C_S = 0.0;
};

/// C_S = C_hat (C*)^{1/(2t)} C_M^{1/(2t)'} with C_hat = 1 / (n |B_1|),
///   mu = 1 + (1 - n + gamma/(2t)) (2t)'/n, delta = (2t)' (1/2 - 1/q),
///   C_M = ((1-delta)/(mu-delta))^{1-delta} |B_1|^{mu-delta} |Omega|^{mu-delta}.
/// Requires t > 1, 1 <= q < 2*(t) and 0 <= delta < mu.
WeightReport weight_report(int n, double C_star, double t, double gamma, double q, double volume);
/// Zero-mean variant on a convex Omega: C_hat = diam^n / (n |S|).
WeightReport weight_report_zero_mean(int n, double C_star, double t, double gamma, double q, double volume, double diameter,
                                     double s_measure);

struct SobolevCheck {
  double norm_q = 0.0;     // ||v||_{L^q(Omega)}
  double grad_rho = 0.0;   // (int rho |grad v|^2)^{1/2}
  double ratio = 0.0;
  double bound = 0.0;      // C_S
  bool contradiction = false;  // grad v = 0 with v != 0
  bool pass = false;
};

/// Requires v = 0 off Omega and on mesh-boundary nodes (nodal check).
SobolevCheck check_weighted_sobolev(const ScalarField& rho, const ScalarField& v, const VectorField& grad_v, double q,
                                    const Region& omega, const WeightReport& w);
SobolevCheck check_weighted_sobolev(const ScalarField& rho, const ScalarField& v, double q, const Region& omega,
                                    const WeightReport& w);

/// v = P(x) (1 - |x|^2/L^2)^2 on the ball of radius L = extent, P a random
/// cubic; analytic gradients. Polar disks and boxes only.
struct TestField {
  ScalarField v;
  VectorField grad;
};
std::vector<TestField> random_test_fields(const MeshPtr& mesh, std::size_t count, std::uint64_t seed);
/// v = (<omega, x> - lambda)_+ (1 - |x|^2/L^2)^2, zero on T_lambda and off the cap.
TestField cap_test_field(const MeshPtr& mesh, std::span<const double> omega, double lambda);

struct PoincareCheck {
  double lhs = 0.0;  // int v^2
  double rhs = 0.0;  // C_P C_S^2 int rho |grad v|^2
  double C_P = 0.0;  // |Omega|^{2 theta / ((p-1) n)}
  double measure = 0.0;
  bool pass = false;
};

/// With `vanishing` set, v must vanish there and Omega \ S replaces Omega in C_P.
PoincareCheck check_weighted_poincare(const ScalarField& rho, const ScalarField& v, const VectorField& grad_v,
                                      const Region& omega, double theta, double p, double C_S,
                                      const std::optional<Region>& vanishing = std::nullopt);

// ---------------------------------------------------------------------------

/// u1 = u, u2 = u_lambda on the cap {<omega, x> > lambda} of a ball solution,
/// with g1(., u1) - g2(., u1) = scale (kappa - kappa_lambda) f(u).
struct CapPair {
  ScalarField u1, u2, g_gap;
  Region omega{{}};
  Region boundary{{}};
  double lambda = 0.0;
};
CapPair cap_pair(const ScalarField& u, const ProblemSpec& spec, double scale, std::span<const double> omega, double lambda);

struct ComparisonReport {
  double numerator = 0.0;    // ||(u1 - u2)_+||_inf
  double denominator = 0.0;  // ||g1 - g2||_inf
  double K = 0.0;            // ratio; infinity for x / 0 with x > 0
  double measure = 0.0;
  bool pass = false;
};

/// Throws InvalidInput when u1 > u2 at a boundary node (beyond 1e-12 max|u|).
ComparisonReport small_domain_comparison(const ScalarField& u1, const ScalarField& u2, const ScalarField& g_gap,
                                         const Region& omega, const Region& boundary);
ComparisonReport small_domain_comparison(const CapPair& pair);

// ---------------------------------------------------------------------------

struct HarnackConfig {
  int n = 2;
  double p = 3.0;
  double s = 0.5;
  double q = 8.0;
  double qq = 3.0;       // fraktur q
  double c_flat = 0.5;
  double C_nat = 2.0;
  double c_sup = 0.0;    // ||c||_inf
  double frak_c = 1.0;   // fraktur c >= 1
  double frak_C = 1.0;   // fraktur C used for the pass verdict

  double chi() const { return qq / 2.0; }
  /// q = max(4n, 4 * 2_M/(2_M - 2)), qq the midpoint of (2q/(q-2), 2_M)
  /// (capped at 4 when n = 3), s = min(1, chi)/2.
  static HarnackConfig defaults(int n, double p);
  /// Throws InvalidInput listing the violated condition.
  void validate() const;
};

/// R^{-n/s} (c_flat R)^{C_nat / R^{2/(qq-2)}}.
double harnack_M(double R, const HarnackConfig& cfg);
/// R^{-n/s} (c_flat R / C_S)^{C_nat C_S (C_S^2/R)^{2/(qq-2)}}, C_S >= 1.
double harnack_M_explicit(double R, double C_S, const HarnackConfig& cfg);

struct HarnackReport {
  double M = 0.0;
  double k = 0.0;        // ||g1 - g2||_{L^q(B_5R)}
  double norm_s = 0.0;   // ||u2 - u1||_{L^s(B_2R)}
  double inf = 0.0;      // inf_{B_R} (u2 - u1)
  double lhs = 0.0, rhs = 0.0, ratio = 0.0;
  double frak_C_needed = 0.0;  // smallest fraktur C with lhs <= rhs
  bool pass = false;
};

/// Throws InvalidInput if B_5R(x0) leaves `region` or u1 - u2 > frak_c k at a
/// node of B_5R (the node is named). C_S >= 1 selects the explicit M variant.
HarnackReport harnack_check(const ScalarField& u1, const ScalarField& u2, const ScalarField& g_gap,
                            std::span<const double> x0, double R, const HarnackConfig& cfg, const Region& region,
                            std::optional<double> C_S = std::nullopt);

/// (C_S^2 / R)^{(2/p#)(qq/(qq-2))}.
double local_bound_factor(double C_S, double R, double p_sharp, double qq);

struct LocalBoundReport {
  double sup = 0.0;      // sup_{B_R} (u1 - u2) or (u1 - u2)_M^+
  double norm = 0.0;     // L^{p#}(B_2R) norm
  double k = 0.0;
  double M = 0.0;        // boundary variant
  double factor = 0.0;
  double constant = 0.0; // sup / (factor (norm + k))
};

struct LocalBoundInput {
  const ScalarField* u1 = nullptr;
  const ScalarField* u2 = nullptr;
  const ScalarField* g_gap = nullptr;
  Point x0;
  double R = 0.1;
  double p_sharp = 2.0;
  double C_S = 1.0;
  double q = 8.0;   // exponent of k
  double qq = 3.0;  // fraktur q
  bool boundary_variant = false;
  std::optional<Region> omega;     // required for the boundary variant
  std::optional<Region> boundary;  // nodes of the boundary of Omega
};
LocalBoundReport local_bound_check(const LocalBoundInput& in);

// ---------------------------------------------------------------------------

struct IntegrabilityReport {
  double value = 0.0;
  double excluded_measure = 0.0;  // nodes with |grad u| <= floor
  double floor_fraction = 0.0;    // fraction of region nodes at the floor
  bool degraded = false;          // more than 1% of nodes at the floor
  bool divergent = false;         // floored set carries more than 1% of |region|
};

/// int_region |grad u|^{-(p-1) r}, r in (0, 1).
IntegrabilityReport grad_integrability(const VectorField& grad, double p, double r, const Region& region);
IntegrabilityReport grad_integrability(const ScalarField& u, double p, double r, const Region& region);
IntegrabilityReport grad_integrability(const ScalarField& u, double p, double r);

}  // namespace qsym

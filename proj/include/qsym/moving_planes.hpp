#pragma once

// Discrete moving planes: reflections across T_{omega,lambda}, excess of u
// over its reflection on the cap Sigma_{omega,lambda} = {<omega, x> > lambda},
// critical levels, approximate center, symmetry deviations and the
// logarithmic stability law s <= C |log(C d)|^{-alpha}.

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qsym/domain.hpp"
#include "qsym/problem.hpp"

namespace qsym {

struct HalfSpace {
  Point omega;
  double level = 0.0;
  /// Throws InvalidInput unless |omega| = 1 within 1e-12.
  HalfSpace(Point omega, double level);
};

/// x + 2 (lambda - <omega, x>) omega
Point reflect_point(std::span<const double> x, const HalfSpace& h);

/// u at arbitrary points: interpolation inside the mesh, 0 outside the unit
/// ball, a fitted decay tail outside a box (p is needed for the tail).
class FieldEvaluator {
 public:
  explicit FieldEvaluator(const ScalarField& u, double p = 0.0);
  double operator()(std::span<const double> x) const;
  const ScalarField& field() const { return *u_; }

 private:
  const ScalarField* u_;
  bool tail_ = false;
  Point tail_center_;
  double tail_a_ = 0.0, tail_b_ = 0.0, tail_beta_ = 0.0, tail_q_ = 0.0;
};

struct ExcessNorm {
  bool sup = true;
  double q = 2.0;
  static ExcessNorm supremum() { return {}; }
  static ExcessNorm lq(double q) { return {false, q}; }
};

/// Optional inputs for the c_lambda / g_{i,lambda} diagnostics on the ball.
struct ExcessDiagnostics {
  const Nonlinearity* f = nullptr;
  const Coefficient* kappa = nullptr;
  double scale = 1.0;  // eigenvalue factor mu multiplying kappa f
};

struct ExcessReport {
  double value = 0.0;
  bool vacuous = false;  // empty cap
  std::size_t cap_nodes = 0;
  // diagnostics, filled when requested
  bool diagnosed = false;
  double c_lambda_sup = 0.0;   // sup |(f(u) - f(u_lambda)) / (u - u_lambda)|
  double lip_f = 0.0;          // Lip(f) on [0, max u]
  bool c_lambda_ok = true;
  double g_gap_sup = 0.0;      // sup |g_1 - g_2| = sup |kappa - kappa_lambda| f(u)
};

/// ||(u - u_{omega,lambda})_+|| over the cap.
ExcessReport excess(const FieldEvaluator& u, const HalfSpace& h, ExcessNorm norm = {}, const ExcessDiagnostics& diag = {});
double excess(const ScalarField& u, const HalfSpace& h, ExcessNorm norm = {});

struct LambdaOptions {
  double tau = 0.0;
  ExcessNorm norm;
  double lo = NAN, hi = NAN;  // NaN: [-extent, extent]
  int levels = 200;
  double tol = 1e-4;
};

struct LambdaResult {
  double lambda = 0.0;
  bool boundary = false;  // the excess exceeds tau already at the top of the scan
  int evaluations = 0;
};

/// Smallest scanned lambda with excess <= tau at every sampled mu >= lambda,
/// refined by bisection.
LambdaResult critical_lambda(const FieldEvaluator& u, std::span<const double> omega, const LambdaOptions& opts);

/// max |grad u| over the nodes.
double lipschitz_estimate(const ScalarField& u);

struct CenterReport {
  Point center;
  std::vector<double> lambda_plus, lambda_minus;  // lambda*(e_k), lambda*(-e_k)
  bool degraded = false;
};

/// O_k = (lambda*(e_k) - lambda*(-e_k)) / 2 when both are interior,
/// lambda*(e_k) otherwise (degraded).
CenterReport approximate_center(const FieldEvaluator& u, const LambdaOptions& opts);

struct AngularReport {
  double oscillation = 0.0;
  std::vector<double> radii, per_shell;
  std::vector<double> skipped;  // shells leaving the region
};

/// Shell sample set: 256 angles in 2-D, 1024 points from a seeded
/// Box-Muller stream otherwise.
std::vector<Point> shell_directions(int dim, std::uint64_t seed = 0x5eed);

/// Empty radii: 8 equispaced shells out to the largest inscribed radius.
AngularReport angular_oscillation(const FieldEvaluator& u, std::span<const double> center, std::vector<double> radii = {},
                                  std::uint64_t seed = 0x5eed);

/// Row-major d x d orthogonal matrix.
using Rotation = std::vector<double>;
/// 2-D: angles k pi / 4, k = 1..7. Higher d: pi/4, pi/2, pi in every coordinate plane.
std::vector<Rotation> rotation_family(int dim);

struct RotationDeficit {
  double sup = 0.0;
  double grad_lp = 0.0;
};
/// u - u_Theta with u_Theta(x) = u(O + Theta (x - O)).
RotationDeficit rotation_deficit(const FieldEvaluator& u, std::span<const double> center, const Rotation& theta, double p);
/// Max of both parts over rotation_family.
RotationDeficit max_rotation_deficit(const FieldEvaluator& u, std::span<const double> center, double p);

struct LogLawSample {
  double deficit = 0.0;
  double deviation = 0.0;
};

struct LogLawFit {
  double C = 1.0;
  double alpha = 0.0;
  double residual = 0.0;  // root mean square of log-residuals
  bool degenerate = false;
  std::size_t samples = 0;
};

/// Least squares of log s = log C - alpha log|log(C d)| over C >= 1, alpha.
/// Requires >= 3 samples with d in (0, 1) and s > 0.
LogLawFit fit_log_law(const std::vector<LogLawSample>& samples);

struct MovingPlanesOptions {
  double p = 0.0;                 // decay tail on boxes; gradient exponent of the rotation deficit
  double tau_deficit_factor = 0;  // C3; tau = max(factor * deficit, 3 h Lip)
  bool use_deficit_threshold = true;
  int levels = 200;
  double tol = 1e-4;
  std::uint64_t seed = 0x5eed;
};

struct MovingPlanesReport {
  std::string deficit_kind;  // "osc(kappa)" or "def(u,kappa)"
  double deficit = 0.0;
  double tau = 0.0, tau_deficit = 0.0, tau_discrete = 0.0;
  double lip = 0.0, h = 0.0;
  CenterReport center;
  std::vector<double> plane_distance;  // |<e_k, O> - lambda*(e_k)|
  AngularReport angular;
  RotationDeficit rotation;
};

MovingPlanesReport analyze(const ScalarField& u, double deficit, const std::string& deficit_kind, const MovingPlanesOptions& opts);

struct SweepConfig {
  std::string mode = "ball";  // ball: polar solve with kappa = 1 + eps x_n; space: manufactured bubble family
  ProblemSpec base;           // ball: n = 2, p, f; space: n, p
  MeshParams mesh;
  std::vector<double> eps;
  MovingPlanesOptions mp;
  bool deficit_threshold = false;  // include C3 * deficit in tau
};

struct SweepSample {
  double epsilon = 0.0;
  double deficit = 0.0;
  bool dropped = false;
  std::string reason;
  double residual = 0.0;
  double scale = 1.0;
  MovingPlanesReport report;
  ScalarField solution;
};

struct SweepResult {
  std::vector<SweepSample> samples;
  double baseline = 0.0;  // angular oscillation of the symmetric run (eps = 0)
  std::vector<LogLawSample> fit_samples;  // retained samples with d in (0, 1), s > 0
  std::optional<LogLawFit> fit;
  std::string fit_error;
};

/// Space family: u = U[0,1] (1 + eps bump) and kappa = -Delta_p u / u^{p*-1}
/// in closed form, so u solves the critical equation exactly.
SweepResult sweep_experiment(const SweepConfig& cfg);

/// The manufactured pair for the space sweep, sampled on a box mesh.
struct ManufacturedPair {
  ScalarField u, kappa;
};
ManufacturedPair manufactured_space_pair(const MeshPtr& mesh, double p, double eps);

}  // namespace qsym

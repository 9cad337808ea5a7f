#pragma once

// Discrete weak solutions of -Delta_p u = kappa f(u) in B_1, u = 0 on the
// boundary, and a-priori estimates measured on them.

#include <string>
#include <vector>

#include "qsym/domain.hpp"
#include "qsym/problem.hpp"

namespace qsym {

struct SolveReport {
  ScalarField solution;
  double residual = 0.0;
  int iterations = 0;
  double energy = 0.0;
  bool converged = false;
  bool positive = false;
  /// Eigenvalue mu for homogeneous f = F u^{p-1}: u solves
  /// -Delta_p u = mu kappa f(u) with max u = 1. Equal to 1 otherwise.
  double scale = 1.0;
  double eps_final = 0.0;
  bool energy_monotone = true;
  std::vector<double> energy_history;
  std::vector<double> residual_history;
};

/// Radial profile on Mesh::radial(n, resolution). kappa must be radial.
SolveReport solve_radial(const ProblemSpec& spec, std::size_t resolution);

/// P1 elements in polar coordinates with regularized Picard iteration.
SolveReport solve_dirichlet_2d(const ProblemSpec& spec, const MeshPtr& mesh);

/// J(u) = int |grad u|^p / p - scale * kappa F(u) on a radial or polar mesh.
double energy(const ScalarField& u, const ProblemSpec& spec, double scale = 1.0);

struct AprioriOptions {
  double alpha_star = 0.5;
  double delta1 = -1.0;  // negative: 0.9 / (C0 C1)
};

struct AprioriReport {
  double C0 = 0.0;
  double grad_sup = 0.0;
  double holder_proxy = 0.0;
  double C1 = 0.0;
  double C2 = 0.0;           // sup (1 - |x|) / u over interior nodes
  double C2_boundary = 0.0;  // 1 / inf of the inner normal derivative on the boundary
  double C3 = 0.0;           // sup / inf of u on B_{1 - delta1}
  double delta1 = 0.0;
  double c_flat = 0.0;
  double barrier_B = 0.0;
  double barrier_beta = 0.0;
  double delta0 = 0.0;
  std::size_t barrier_violations = 0;
  bool barrier_ok = false;
  bool gradient_positive = false;  // |grad u| > 0 on {|x| > 1 - delta0}
};

/// Psi(r) = B (e^{beta (1 - r)} - 1).
double barrier(double r, double B, double beta);

AprioriReport verify_apriori(const ScalarField& u, const ProblemSpec& spec, const AprioriOptions& opts = {});

/// Closed-form radial solution for f = 1, kappa = 1.
double torsion_profile(double r, int n, double p);

}  // namespace qsym

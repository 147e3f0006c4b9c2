// Stationary solvers: linear Dirichlet problems, the semilinear Yamabe
// Dirichlet problem
//   (4(n-1)/(n-2)) Lap w - R w - n(n-1) w^{(n+2)/(n-2)} = 0,  w|bdry = bc > 0,
// the first Dirichlet eigenpair of L_g, the largest solution of the
// homogeneous problem (boundary data 1/j, j -> inf), and interior
// Loewner-Nirenberg reference solutions via boundary data doubling with
// Richardson extrapolation in K^{-2/(n-2)}.

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "lnflow/operators.hpp"

namespace lnflow {

struct EllipticSolveReport {
  Field solution;
  int newton_iterations = 0;
  double residual_sup = 0.0;   // row-relative sup residual
  double positivity_min = 0.0;
  std::vector<double> continuation_path;
  bool converged = false;
  std::string message;
};

// Direct tridiagonal solve of op u = rhs with Dirichlet rows set to bc
// (one value per boundary component, in boundary_nodes order).
Field solve_linear_dirichlet(const DiscreteOperator& op, const Field& rhs,
                             const std::vector<double>& bc);

struct YamabeSolveOptions {
  double tol = 1e-11;
  int max_iter = 60;
  bool pseudo_transient_fallback = true;
};

EllipticSolveReport solve_yamabe_dirichlet(const Background& bg, const std::vector<double>& bc,
                                           const std::optional<Field>& init = std::nullopt,
                                           const YamabeSolveOptions& opt = {});
inline EllipticSolveReport solve_yamabe_dirichlet(const Background& bg, double bc,
                                                  const std::optional<Field>& init = std::nullopt,
                                                  const YamabeSolveOptions& opt = {}) {
  return solve_yamabe_dirichlet(
      bg, std::vector<double>(bg.mesh->boundary_nodes.size(), bc), init, opt);
}

struct Eigenpair {
  double lambda1 = 0.0;
  Field phi1;             // sup-normalized, positive in the interior
  double residual = 0.0;  // ||L phi - lambda phi||_sup / (|lambda| ||phi||_sup)
  int iterations = 0;
};

// Smallest Dirichlet eigenvalue of L_g via Sturm bisection bracketing plus
// shifted inverse power iteration on the measure-symmetrized form.
Eigenpair first_dirichlet_eigenpair(const Background& bg);

struct HomogeneousLimitReport {
  EllipticSolveReport limit;              // v0 candidate
  std::vector<double> j_path;             // boundary data 1/j used
  std::vector<Field> iterates;            // u_j in order
  bool monotone = true;                   // u_{j+1} <= u_j + 1e-10 nodewise
  double final_change = 0.0;              // interior sup change of last step
};

HomogeneousLimitReport largest_homogeneous_solution(const Background& bg, std::size_t j_max,
                                                    double tol, double interior_margin = 0.0);

struct LnReferenceOptions {
  double K0 = 1.0;
  int doublings = 12;
  // stop enlarging K once the barrier offset K^{2/(2-n)} drops below
  // offset_floor_frac * h_min (further K values are unresolvable)
  double offset_floor_frac = 1e-3;
};

struct LnReferenceReport {
  EllipticSolveReport extrapolated;       // Richardson limit
  Field last_iterate;                     // largest-K solve
  std::vector<double> K_path;
  bool monotone = true;                   // increasing in K
  double margin = 0.0;
};

LnReferenceReport loewner_nirenberg_reference(const Background& bg,
                                              const LnReferenceOptions& opt, double margin);

// Poincare-ball conformal factor: r -> (2R/(R^2-r^2))^{(n-2)/2}.
struct ExactBallLn {
  int n = 3;
  double R_ball = 1.0;
  double operator()(double r) const;
};

// Throws unless geom is a euclidean warped ball.
ExactBallLn exact_ball_ln(const Geometry& geom);
ExactBallLn exact_ball_ln(int n, double R_ball);

// Conformal normalization: w = Yamabe Dirichlet solution with bc = 1, so the
// background w^{4/(n-2)} g has scalar curvature -n(n-1).
Background normalize_to_hyperbolic(std::shared_ptr<const Geometry> geom, MeshPtr mesh);

}  // namespace lnflow

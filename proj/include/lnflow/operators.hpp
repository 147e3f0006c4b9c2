// Tridiagonal operators and linear algebra, conservative (flux-form)
// Laplace-Beltrami stencils, conformal backgrounds, and the damped Newton
// driver shared by the elliptic solvers and the implicit flow steppers.
//
// Interior stencil (self-adjoint w.r.t. the node masses):
//   (Lap u)_i = [ w_{i+1/2}(u_{i+1}-u_i)/h_{i+1/2}
//               - w_{i-1/2}(u_i-u_{i-1})/h_{i-1/2} ] / node_mass_i
// A warped-ball center carries zero flux on its inner face (w(0) = 0), which
// is the conservative form of the u'(0) = 0 ghost-node reflection.
//
// A conformal background gbar = w^{4/(n-2)} g is represented by the factor w
// and a constant curvature Rbar; its Laplacian is the conjugation
//   Lapbar psi = w^{-(n+2)/(n-2)} ( Lap(w psi) - psi Lap w ),
// which annihilates constants exactly and keeps the M-matrix sign structure.

#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "lnflow/mesh.hpp"

namespace lnflow {

struct Tridiag {
  std::vector<double> sub, diag, sup;  // sub[0] and sup[n-1] unused

  explicit Tridiag(std::size_t n = 0) : sub(n, 0.0), diag(n, 0.0), sup(n, 0.0) {}
  std::size_t size() const { return diag.size(); }
  void apply(const std::vector<double>& x, std::vector<double>& y) const;
};

// LU with partial pivoting for tridiagonal systems (one fill-in band).
class TriLU {
 public:
  explicit TriLU(const Tridiag& A);
  bool singular() const { return singular_; }
  // solves A x = b in place; throws std::runtime_error on singular systems
  void solve(std::vector<double>& b) const;

 private:
  std::vector<double> dl_, d_, du_, du2_;
  std::vector<int> piv_;
  bool singular_ = false;
};

struct DiscreteOperator {
  Tridiag A;
  MeshPtr mesh;
  std::vector<std::size_t> dirichlet_rows;  // identity rows

  Field apply(const Field& u) const;  // boundary rows produce u itself
};

// Background metric for all solvers: a geometry plus an optional conformal
// factor with constant scalar curvature.
struct Background {
  std::shared_ptr<const Geometry> geom;
  MeshPtr mesh;
  std::optional<Field> factor;  // conformal factor w; nullopt = raw metric
  double R_const = 0.0;         // curvature of the conformal metric

  static Background raw(std::shared_ptr<const Geometry> g, MeshPtr m);
  static Background conformal(MeshPtr m, Field w, double R_const);

  bool is_conformal() const { return factor.has_value(); }
  int n() const { return geom->n; }
  double R_at(std::size_t i) const;
  Field curvature_field() const;
  // node masses, cell masses and boundary measures under this metric
  const std::vector<double>& measure() const { return measure_; }
  const std::vector<double>& cell_measure() const { return cell_measure_; }
  double boundary_measure(std::size_t component) const;
  double factor_at_boundary(std::size_t component) const;

  void init_cache();  // called by factories

 private:
  std::vector<double> measure_, cell_measure_;
  CurvatureData curv_{};
};

// dV-weighted integral and gradient energy under the background metric.
double integrate(const Background& bg, const Field& f);
double integrate2(const Background& bg, const Field& f, const Field& g);
double grad_energy(const Background& bg, const Field& f);

// Discrete Laplace-Beltrami of the background (identity rows at the boundary).
DiscreteOperator laplace_beltrami(const Background& bg);
inline DiscreteOperator laplace_beltrami(std::shared_ptr<const Geometry> g, MeshPtr m) {
  return laplace_beltrami(Background::raw(std::move(g), std::move(m)));
}

// L = -(4(n-1)/(n-2)) Lap + R, identity rows at the boundary.
DiscreteOperator conformal_laplacian(const Background& bg);
inline DiscreteOperator conformal_laplacian(std::shared_ptr<const Geometry> g, MeshPtr m) {
  return conformal_laplacian(Background::raw(std::move(g), std::move(m)));
}

// ---------------------------------------------------------------------------
// Damped Newton for semilinear systems
//   F_i(u) = d(u_i,i) * (A u)_i + r(u_i,i)   at interior rows,
//   u_i    = bc_i                            at Dirichlet rows.

struct SemilinearSystem {
  const Tridiag* A = nullptr;
  const std::vector<std::size_t>* dirichlet_rows = nullptr;
  std::vector<double> dirichlet_values;
  std::function<double(double, std::size_t)> d, dd;  // dd = partial d / partial u
  std::function<double(double, std::size_t)> r, dr;
};

struct NewtonOptions {
  double tol = 1e-11;          // row-relative residual target
  int max_iter = 60;
  bool enforce_positivity = true;
  double positivity_frac = 0.5;  // iterates stay >= frac * (current min)
  int max_halvings = 12;
};

struct NewtonResult {
  bool converged = false;
  int iterations = 0;
  double residual = 0.0;  // row-relative sup residual
  std::string message;
};

NewtonResult semilinear_newton(const SemilinearSystem& sys, std::vector<double>& u,
                               const NewtonOptions& opt = {});

// row-relative sup residual of the system at u (diagnostic)
double semilinear_residual(const SemilinearSystem& sys, const std::vector<double>& u);

}  // namespace lnflow

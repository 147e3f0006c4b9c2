#include "lnflow/elliptic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace lnflow {

namespace {

struct YamabeProblem {
  const Background* bg;
  Tridiag A;                 // beta * Lapbar, identity rows on the boundary
  std::vector<double> Rfield;
  double cpow;               // n(n-1)
  double p;                  // (n+2)/(n-2)

  explicit YamabeProblem(const Background& b) : bg(&b) {
    const int n = b.n();
    DiscreteOperator lap = laplace_beltrami(b);
    const double beta = conformal_coeff(n);
    std::vector<bool> is_bdry(b.mesh->size(), false);
    for (std::size_t k : b.mesh->boundary_nodes) is_bdry[k] = true;
    for (std::size_t i = 0; i < lap.A.size(); ++i) {
      if (is_bdry[i]) continue;
      lap.A.sub[i] *= beta;
      lap.A.sup[i] *= beta;
      lap.A.diag[i] *= beta;
    }
    A = std::move(lap.A);
    Rfield = b.curvature_field().v;
    cpow = double(n) * (n - 1);
    p = double(n + 2) / double(n - 2);
  }

  SemilinearSystem stationary(const std::vector<double>& bc_values) const {
    SemilinearSystem sys;
    sys.A = &A;
    sys.dirichlet_rows = &bg->mesh->boundary_nodes;
    sys.dirichlet_values = bc_values;
    sys.d = [](double, std::size_t) { return 1.0; };
    sys.dd = [](double, std::size_t) { return 0.0; };
    const auto* R = &Rfield;
    const double c = cpow, pp = p;
    sys.r = [R, c, pp](double u, std::size_t i) {
      return -(*R)[i] * u - c * std::pow(u, pp);
    };
    sys.dr = [R, c, pp](double u, std::size_t i) {
      return -(*R)[i] - c * pp * std::pow(u, pp - 1.0);
    };
    return sys;
  }

  // backward-Euler system: u - uold - dt * (A u - R u - c u^p) = 0
  SemilinearSystem backward_euler(const std::vector<double>& bc_values,
                                  const std::vector<double>& uold, double dt) const {
    SemilinearSystem sys;
    sys.A = &A;
    sys.dirichlet_rows = &bg->mesh->boundary_nodes;
    sys.dirichlet_values = bc_values;
    sys.d = [dt](double, std::size_t) { return -dt; };
    sys.dd = [](double, std::size_t) { return 0.0; };
    const auto* R = &Rfield;
    const double c = cpow, pp = p;
    sys.r = [R, c, pp, dt, &uold](double u, std::size_t i) {
      return u - uold[i] + dt * ((*R)[i] * u + c * std::pow(u, pp));
    };
    sys.dr = [R, c, pp, dt](double u, std::size_t i) {
      return 1.0 + dt * ((*R)[i] + c * pp * std::pow(u, pp - 1.0));
    };
    return sys;
  }
};

}  // namespace

Field solve_linear_dirichlet(const DiscreteOperator& op, const Field& rhs,
                             const std::vector<double>& bc) {
  if (bc.size() != op.dirichlet_rows.size())
    throw std::invalid_argument("solve_linear_dirichlet: one bc value per boundary component");
  std::vector<double> b = rhs.v;
  for (std::size_t k = 0; k < bc.size(); ++k) b[op.dirichlet_rows[k]] = bc[k];
  TriLU lu(op.A);
  if (lu.singular()) throw std::runtime_error("solve_linear_dirichlet: singular system");
  std::vector<double> target = b;
  lu.solve(b);
  Field out(op.mesh, std::move(b));
  // row-scaled residual check; never silently regularized
  const auto& A = op.A;
  double resid = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    double s = 0.0, mag = 1.0 + std::abs(target[i]);
    if (i > 0) { const double t = A.sub[i] * out.v[i - 1]; s += t; mag += std::abs(t); }
    if (i + 1 < out.size()) { const double t = A.sup[i] * out.v[i + 1]; s += t; mag += std::abs(t); }
    const double t0 = A.diag[i] * out.v[i];
    s += t0;
    mag += std::abs(t0);
    resid = std::max(resid, std::abs(s - target[i]) / mag);
  }
  if (!(resid <= 1e-10))
    throw std::runtime_error("solve_linear_dirichlet: residual too large (near-singular system)");
  return out;
}

EllipticSolveReport solve_yamabe_dirichlet(const Background& bg, const std::vector<double>& bc,
                                           const std::optional<Field>& init,
                                           const YamabeSolveOptions& opt) {
  if (bc.size() != bg.mesh->boundary_nodes.size())
    throw std::invalid_argument("solve_yamabe_dirichlet: one bc value per boundary component");
  for (double b : bc)
    if (!(b > 0)) throw std::invalid_argument("solve_yamabe_dirichlet: bc must be positive");

  YamabeProblem prob(bg);
  EllipticSolveReport rep;
  Field u = init ? *init : Field(bg.mesh, *std::min_element(bc.begin(), bc.end()));
  for (double& x : u.v) x = std::max(x, 1e-14);
  for (std::size_t k = 0; k < bc.size(); ++k) u.v[bg.mesh->boundary_nodes[k]] = bc[k];

  NewtonOptions nopt;
  nopt.tol = opt.tol;
  nopt.max_iter = opt.max_iter;
  SemilinearSystem sys = prob.stationary(bc);
  NewtonResult nr = semilinear_newton(sys, u.v, nopt);
  rep.newton_iterations = nr.iterations;

  if (!nr.converged && opt.pseudo_transient_fallback) {
    // pseudo-transient continuation: backward-Euler steps to steady state
    double dt = 1e-3;
    for (int step = 0; step < 400; ++step) {
      std::vector<double> uold = u.v;
      SemilinearSystem be = prob.backward_euler(bc, uold, dt);
      NewtonResult bs = semilinear_newton(be, u.v, nopt);
      if (!bs.converged) {
        u.v = uold;
        dt *= 0.5;
        if (dt < 1e-12) break;
        continue;
      }
      dt = std::min(dt * 2.0, 1e6);
      if (semilinear_residual(sys, u.v) <= opt.tol) break;
    }
    nr = semilinear_newton(sys, u.v, nopt);
    rep.newton_iterations += nr.iterations;
    if (nr.converged) rep.message = "converged after pseudo-transient continuation";
    else rep.message = nr.message;
  } else {
    rep.message = nr.message;
  }

  rep.converged = nr.converged;
  rep.residual_sup = semilinear_residual(sys, u.v);
  rep.positivity_min = inf_value(u);
  rep.solution = std::move(u);
  return rep;
}

// ---------------------------------------------------------------------------
// Eigenpair

namespace {

// Sturm count: eigenvalues of the symmetric tridiagonal (d, e) strictly below x.
int sturm_count(const std::vector<double>& d, const std::vector<double>& e, double x) {
  int count = 0;
  double q = d[0] - x;
  if (q < 0) ++count;
  for (std::size_t i = 1; i < d.size(); ++i) {
    double den = q;
    if (den == 0.0) den = 1e-300;
    q = d[i] - x - e[i - 1] * e[i - 1] / den;
    if (q < 0) ++count;
  }
  return count;
}

}  // namespace

Eigenpair first_dirichlet_eigenpair(const Background& bg) {
  const Mesh& m = *bg.mesh;
  DiscreteOperator L = conformal_laplacian(bg);
  std::vector<bool> is_bdry(m.size(), false);
  for (std::size_t b : m.boundary_nodes) is_bdry[b] = true;

  std::vector<std::size_t> rows;
  rows.reserve(m.size());
  for (std::size_t i = 0; i < m.size(); ++i)
    if (!is_bdry[i]) rows.push_back(i);
  const std::size_t N = rows.size();
  if (N < 2) throw std::runtime_error("eigenpair: mesh too small");

  // symmetrized interior operator T = D^{1/2} L D^{-1/2}, D = diag(measure)
  const auto& mass = bg.measure();
  std::vector<double> d(N), e(N - 1);
  for (std::size_t k = 0; k < N; ++k) d[k] = L.A.diag[rows[k]];
  for (std::size_t k = 0; k + 1 < N; ++k) {
    if (rows[k + 1] != rows[k] + 1) { e[k] = 0.0; continue; }
    e[k] = L.A.sup[rows[k]] * std::sqrt(mass[rows[k]] / mass[rows[k + 1]]);
  }

  // Gershgorin bracket, then Sturm bisection to localize lambda_1
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (std::size_t k = 0; k < N; ++k) {
    double r = 0.0;
    if (k > 0) r += std::abs(e[k - 1]);
    if (k + 1 < N) r += std::abs(e[k]);
    lo = std::min(lo, d[k] - r);
    hi = std::max(hi, d[k] + r);
  }
  double a = lo, b = hi;
  for (int it = 0; it < 200 && (b - a) > 1e-13 * std::max(1.0, std::abs(a) + std::abs(b)); ++it) {
    const double mid = 0.5 * (a + b);
    if (sturm_count(d, e, mid) >= 1) b = mid; else a = mid;
  }
  const double lam_est = 0.5 * (a + b);

  // shifted inverse power iteration just below the localized eigenvalue
  const double span = std::max(1.0, hi - lo);
  const double shift = lam_est - 1e-8 * span;
  Tridiag T(N);
  for (std::size_t k = 0; k < N; ++k) T.diag[k] = d[k] - shift;
  for (std::size_t k = 0; k + 1 < N; ++k) { T.sup[k] = e[k]; T.sub[k + 1] = e[k]; }
  TriLU lu(T);
  std::vector<double> y(N, 1.0);
  double lambda = lam_est;
  int iters = 0;
  double best = std::numeric_limits<double>::infinity();
  int stall = 0;
  for (; iters < 100; ++iters) {
    lu.solve(y);
    double norm = 0.0;
    for (double x : y) norm += x * x;
    norm = std::sqrt(norm);
    for (double& x : y) x /= norm;
    std::vector<double> Ty(N);
    double ray = 0.0;
    for (std::size_t k = 0; k < N; ++k) {
      double s = d[k] * y[k];
      if (k > 0) s += e[k - 1] * y[k - 1];
      if (k + 1 < N) s += e[k] * y[k + 1];
      Ty[k] = s;
      ray += y[k] * s;
    }
    double rnorm = 0.0;
    for (std::size_t k = 0; k < N; ++k) rnorm = std::max(rnorm, std::abs(Ty[k] - ray * y[k]));
    lambda = ray;
    if (rnorm <= 1e-14 * span) { ++iters; break; }
    if (rnorm >= 0.9 * best) { if (++stall >= 4) { ++iters; break; } }
    else stall = 0;
    best = std::min(best, rnorm);
  }

  Eigenpair out;
  out.lambda1 = lambda;
  out.iterations = iters;
  out.phi1 = Field(bg.mesh, 0.0);
  for (std::size_t k = 0; k < N; ++k) out.phi1.v[rows[k]] = y[k] / std::sqrt(mass[rows[k]]);
  double amax = 0.0, signed_max = 0.0;
  for (double x : out.phi1.v)
    if (std::abs(x) > amax) { amax = std::abs(x); signed_max = x; }
  const double scale = (signed_max < 0 ? -1.0 : 1.0) * amax;
  for (double& x : out.phi1.v) x /= scale;
  Field Lphi = L.apply(out.phi1);
  double resid = 0.0;
  for (std::size_t k = 0; k < N; ++k)
    resid = std::max(resid, std::abs(Lphi.v[rows[k]] - lambda * out.phi1.v[rows[k]]));
  out.residual = resid / std::max(std::abs(lambda), 1e-300);
  return out;
}

// ---------------------------------------------------------------------------
// Homogeneous limit (v0) and the Loewner-Nirenberg reference

HomogeneousLimitReport largest_homogeneous_solution(const Background& bg, std::size_t j_max,
                                                    double tol, double interior_margin) {
  HomogeneousLimitReport rep;
  std::optional<Field> warm;
  Field prev;
  for (std::size_t j = 1; j <= j_max; j *= 2) {
    EllipticSolveReport r = solve_yamabe_dirichlet(bg, 1.0 / double(j), warm);
    if (!r.converged) {
      rep.limit = std::move(r);
      rep.limit.message = "homogeneous limit: solve failed at j=" + std::to_string(j);
      return rep;
    }
    rep.j_path.push_back(1.0 / double(j));
    if (!prev.v.empty()) {
      double worst = 0.0;
      Field diff(bg.mesh);
      for (std::size_t i = 0; i < prev.size(); ++i) {
        worst = std::max(worst, r.solution.v[i] - prev.v[i]);
        diff.v[i] = std::abs(r.solution.v[i] - prev.v[i]);
      }
      if (worst > 1e-10) rep.monotone = false;
      rep.final_change = interior_sup(diff, interior_margin);
    }
    prev = r.solution;
    rep.iterates.push_back(r.solution);
    warm = r.solution;
    rep.limit = std::move(r);
    if (rep.iterates.size() > 1 && rep.final_change < tol) break;
  }
  return rep;
}

LnReferenceReport loewner_nirenberg_reference(const Background& bg,
                                              const LnReferenceOptions& opt, double margin) {
  if (!(margin > 0)) throw std::invalid_argument("loewner_nirenberg_reference: margin > 0");
  LnReferenceReport rep;
  rep.margin = margin;
  const int n = bg.n();
  const double gamma = 2.0 / double(n - 2);
  const double hmin = bg.mesh->h_min();

  std::optional<Field> warm;
  Field prev, last;
  double K = opt.K0;
  for (int k = 0; k <= opt.doublings; ++k, K *= 2.0) {
    if (k > 1 && std::pow(K, -gamma) < opt.offset_floor_frac * hmin) break;
    EllipticSolveReport r = solve_yamabe_dirichlet(bg, K, warm);
    if (!r.converged) {
      rep.extrapolated = std::move(r);
      rep.extrapolated.message = "LN reference: solve failed at K=" + std::to_string(K);
      return rep;
    }
    rep.K_path.push_back(K);
    if (!last.v.empty()) {
      for (std::size_t i = 0; i < last.size(); ++i)
        if (r.solution.v[i] < last.v[i] - 1e-10) { rep.monotone = false; break; }
    }
    prev = last;
    last = r.solution;
    warm = r.solution;
    rep.extrapolated = std::move(r);
  }
  if (!rep.monotone) {
    rep.extrapolated.converged = false;
    rep.extrapolated.message =
        "LN reference: K-sequence not pointwise increasing (discretization fault)";
    return rep;
  }

  rep.last_iterate = last;
  // u_K = u_inf - C K^{-gamma}:  u_inf = u_{2K} + (u_{2K} - u_K) q/(1-q), q = 2^{-gamma}
  if (!prev.v.empty()) {
    const double q = std::pow(2.0, -gamma);
    Field extr(bg.mesh);
    for (std::size_t i = 0; i < extr.size(); ++i)
      extr.v[i] = last.v[i] + (last.v[i] - prev.v[i]) * q / (1.0 - q);
    rep.extrapolated.solution = std::move(extr);
  }
  rep.extrapolated.message = "LN reference via boundary-data doubling";
  return rep;
}

double ExactBallLn::operator()(double r) const {
  return std::pow(2.0 * R_ball / (R_ball * R_ball - r * r), 0.5 * (n - 2));
}

ExactBallLn exact_ball_ln(const Geometry& geom) {
  if (geom.kind != GeomKind::warped_ball || geom.warp.kind != WarpKind::euclidean)
    throw std::invalid_argument("exact_ball_ln: requires a euclidean warped ball");
  return ExactBallLn{geom.n, geom.x_hi};
}

ExactBallLn exact_ball_ln(int n, double R_ball) { return ExactBallLn{n, R_ball}; }

Background normalize_to_hyperbolic(std::shared_ptr<const Geometry> geom, MeshPtr mesh) {
  Background raw = Background::raw(geom, mesh);
  EllipticSolveReport w = solve_yamabe_dirichlet(raw, 1.0);
  if (!w.converged)
    throw std::runtime_error("normalize_to_hyperbolic: unit-boundary Yamabe solve failed");
  const int n = geom->n;
  return Background::conformal(mesh, std::move(w.solution), -double(n) * (n - 1));
}

}  // namespace lnflow

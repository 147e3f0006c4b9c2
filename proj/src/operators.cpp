#include "lnflow/operators.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace lnflow {

void Tridiag::apply(const std::vector<double>& x, std::vector<double>& y) const {
  const std::size_t n = size();
  y.resize(n);
  // off-diagonals first so that rows with diag = -(sub+sup) annihilate
  // constant vectors exactly
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    if (i > 0) s += sub[i] * x[i - 1];
    if (i + 1 < n) s += sup[i] * x[i + 1];
    y[i] = s + diag[i] * x[i];
  }
}

TriLU::TriLU(const Tridiag& A) {
  const std::size_t n = A.size();
  dl_ = A.sub;
  d_ = A.diag;
  du_ = A.sup;
  du2_.assign(n, 0.0);
  piv_.assign(n, 0);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    if (std::abs(d_[i]) >= std::abs(dl_[i + 1])) {
      piv_[i] = 0;
      if (d_[i] == 0.0) { singular_ = true; return; }
      const double m = dl_[i + 1] / d_[i];
      dl_[i + 1] = m;
      d_[i + 1] -= m * du_[i];
      du2_[i] = 0.0;
    } else {
      piv_[i] = 1;
      const double m = d_[i] / dl_[i + 1];
      std::swap(d_[i], dl_[i + 1]);
      const double tmp = du_[i];
      du_[i] = d_[i + 1];
      d_[i + 1] = tmp - m * d_[i + 1];
      if (i + 2 < n) {
        du2_[i] = du_[i + 1];
        du_[i + 1] = -m * du_[i + 1];
      }
      dl_[i + 1] = m;
    }
  }
  if (n > 0 && d_[n - 1] == 0.0) singular_ = true;
}

void TriLU::solve(std::vector<double>& b) const {
  if (singular_) throw std::runtime_error("tridiagonal solve: singular system");
  const std::size_t n = d_.size();
  for (std::size_t i = 0; i + 1 < n; ++i) {
    if (piv_[i]) std::swap(b[i], b[i + 1]);
    b[i + 1] -= dl_[i + 1] * b[i];
  }
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    if (i + 1 < n) s -= du_[i] * b[i + 1];
    if (i + 2 < n) s -= du2_[i] * b[i + 2];
    b[i] = s / d_[i];
  }
}

Field DiscreteOperator::apply(const Field& u) const {
  Field out(mesh);
  A.apply(u.v, out.v);
  return out;
}

// ---------------------------------------------------------------------------
// Background

Background Background::raw(std::shared_ptr<const Geometry> g, MeshPtr m) {
  Background bg;
  bg.geom = std::move(g);
  bg.mesh = std::move(m);
  bg.init_cache();
  return bg;
}

Background Background::conformal(MeshPtr m, Field w, double R_const) {
  Background bg;
  bg.geom = m->geom;
  bg.mesh = std::move(m);
  for (double x : w.v)
    if (!(x > 0)) throw std::invalid_argument("conformal background: factor must be positive");
  bg.factor = std::move(w);
  bg.R_const = R_const;
  bg.init_cache();
  return bg;
}

void Background::init_cache() {
  curv_ = scalar_curvature(*geom);
  const std::size_t N = mesh->size();
  measure_.resize(N);
  cell_measure_.resize(N - 1);
  const double vol_exp = 2.0 * geom->n / double(geom->n - 2);
  for (std::size_t i = 0; i < N; ++i) {
    double s = mesh->node_mass[i];
    if (factor) s *= std::pow(factor->v[i], vol_exp);
    measure_[i] = s;
  }
  for (std::size_t i = 0; i + 1 < N; ++i) {
    double s = mesh->cell_mass[i];
    if (factor) s *= std::pow(0.5 * (factor->v[i] + factor->v[i + 1]), vol_exp);
    cell_measure_[i] = s;
  }
}

double Background::R_at(std::size_t i) const {
  if (factor) return R_const;
  return curv_.R(mesh->nodes[i]);
}

Field Background::curvature_field() const {
  Field out(mesh);
  for (std::size_t i = 0; i < out.size(); ++i) out.v[i] = R_at(i);
  return out;
}

double Background::boundary_measure(std::size_t component) const {
  double s = mesh->boundary_measure(component);
  if (factor) {
    const double wb = factor->v[mesh->boundary_nodes.at(component)];
    s *= std::pow(wb, 2.0 * (geom->n - 1) / double(geom->n - 2));
  }
  return s;
}

double Background::factor_at_boundary(std::size_t component) const {
  if (!factor) return 1.0;
  return factor->v[mesh->boundary_nodes.at(component)];
}

double integrate(const Background& bg, const Field& f) {
  double s = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) s += bg.measure()[i] * f.v[i];
  return s;
}

double integrate2(const Background& bg, const Field& f, const Field& g) {
  double s = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) s += bg.measure()[i] * f.v[i] * g.v[i];
  return s;
}

double grad_energy(const Background& bg, const Field& f) {
  const auto& m = *bg.mesh;
  // |grad f|^2_gbar dV_gbar = |grad f|^2_g w^2 dV_g
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < f.size(); ++i) {
    const double h = m.nodes[i + 1] - m.nodes[i];
    const double du = (f.v[i + 1] - f.v[i]) / h;
    double cm = m.cell_mass[i];
    if (bg.factor) {
      const double wm = 0.5 * (bg.factor->v[i] + bg.factor->v[i + 1]);
      cm *= wm * wm;
    }
    s += cm * du * du;
  }
  return s;
}

// ---------------------------------------------------------------------------
// Operators

namespace {

Tridiag raw_laplacian(const Mesh& m) {
  const std::size_t N = m.size();
  Tridiag A(N);
  std::vector<bool> is_bdry(N, false);
  for (std::size_t b : m.boundary_nodes) is_bdry[b] = true;
  for (std::size_t i = 0; i < N; ++i) {
    if (is_bdry[i]) { A.diag[i] = 1.0; continue; }
    const double qw = m.node_mass[i];
    if (i > 0) {
      const double h = m.nodes[i] - m.nodes[i - 1];
      const double c = m.face_weight[i - 1] / (h * qw);
      A.sub[i] = c;
      A.diag[i] -= c;
    }
    if (i + 1 < N) {
      const double h = m.nodes[i + 1] - m.nodes[i];
      const double c = m.face_weight[i] / (h * qw);
      A.sup[i] = c;
      A.diag[i] -= c;
    }
  }
  return A;
}

}  // namespace

DiscreteOperator laplace_beltrami(const Background& bg) {
  const Mesh& m = *bg.mesh;
  Tridiag A = raw_laplacian(m);
  if (bg.is_conformal()) {
    // Lapbar = diag(w^-p) (Lap diag(w) - diag(Lap w)),  p = (n+2)/(n-2)
    const auto& w = bg.factor->v;
    const double p = double(bg.n() + 2) / double(bg.n() - 2);
    std::vector<double> Lw;
    A.apply(w, Lw);
    std::vector<bool> is_bdry(m.size(), false);
    for (std::size_t b : m.boundary_nodes) is_bdry[b] = true;
    for (std::size_t i = 0; i < m.size(); ++i) {
      if (is_bdry[i]) continue;
      const double s = std::pow(w[i], -p);
      if (i > 0) A.sub[i] *= s * w[i - 1];
      if (i + 1 < m.size()) A.sup[i] *= s * w[i + 1];
      A.diag[i] = s * (A.diag[i] * w[i] - Lw[i]);
    }
  }
  return DiscreteOperator{std::move(A), bg.mesh, m.boundary_nodes};
}

DiscreteOperator conformal_laplacian(const Background& bg) {
  DiscreteOperator lap = laplace_beltrami(bg);
  const double beta = conformal_coeff(bg.n());
  std::vector<bool> is_bdry(bg.mesh->size(), false);
  for (std::size_t b : bg.mesh->boundary_nodes) is_bdry[b] = true;
  for (std::size_t i = 0; i < lap.A.size(); ++i) {
    if (is_bdry[i]) continue;
    lap.A.sub[i] *= -beta;
    lap.A.sup[i] *= -beta;
    lap.A.diag[i] = -beta * lap.A.diag[i] + bg.R_at(i);
  }
  return lap;
}

// ---------------------------------------------------------------------------
// Damped Newton

namespace {

void assemble_residual(const SemilinearSystem& sys, const std::vector<double>& u,
                       std::vector<double>& Au, std::vector<double>& F,
                       std::vector<double>& scale) {
  const std::size_t N = u.size();
  Au.resize(N);
  F.resize(N);
  scale.resize(N);
  const auto& A = *sys.A;
  for (std::size_t i = 0; i < N; ++i) {
    // assemble (Au)_i together with the pre-cancellation magnitude of its
    // terms; the flux differences cancel to O(1) out of O(1/h^2) parts, so
    // the convergence scale must use the parts
    double s = 0.0, mag = 0.0;
    if (i > 0) { const double t = A.sub[i] * u[i - 1]; s += t; mag += std::abs(t); }
    if (i + 1 < N) { const double t = A.sup[i] * u[i + 1]; s += t; mag += std::abs(t); }
    const double t0 = A.diag[i] * u[i];
    s += t0;
    mag += std::abs(t0);
    Au[i] = s;
    const double di = sys.d(u[i], i);
    const double rterm = sys.r(u[i], i);
    F[i] = di * s + rterm;
    scale[i] = 1.0 + std::abs(di) * mag + std::abs(rterm);
  }
  std::size_t k = 0;
  for (std::size_t row : *sys.dirichlet_rows) {
    F[row] = u[row] - sys.dirichlet_values[k];
    scale[row] = 1.0 + std::abs(sys.dirichlet_values[k]);
    ++k;
  }
}

double rel_sup(const std::vector<double>& F, const std::vector<double>& scale) {
  double s = 0.0;
  for (std::size_t i = 0; i < F.size(); ++i) s = std::max(s, std::abs(F[i]) / scale[i]);
  return s;
}

}  // namespace

double semilinear_residual(const SemilinearSystem& sys, const std::vector<double>& u) {
  std::vector<double> Au, F, scale;
  assemble_residual(sys, u, Au, F, scale);
  return rel_sup(F, scale);
}

NewtonResult semilinear_newton(const SemilinearSystem& sys, std::vector<double>& u,
                               const NewtonOptions& opt) {
  NewtonResult res;
  const std::size_t N = u.size();
  std::vector<bool> is_dir(N, false);
  for (std::size_t row : *sys.dirichlet_rows) is_dir[row] = true;

  std::vector<double> Au, F, scale, delta, trial, Au2, F2, scale2;
  assemble_residual(sys, u, Au, F, scale);
  double resid = rel_sup(F, scale);

  for (res.iterations = 0; res.iterations < opt.max_iter; ++res.iterations) {
    if (resid <= opt.tol) {
      res.converged = true;
      res.residual = resid;
      return res;
    }
    // Jacobian: diag(d) A + diag(dd * Au + dr); identity at Dirichlet rows
    Tridiag J(N);
    for (std::size_t i = 0; i < N; ++i) {
      if (is_dir[i]) { J.diag[i] = 1.0; continue; }
      const double di = sys.d(u[i], i);
      if (i > 0) J.sub[i] = di * sys.A->sub[i];
      if (i + 1 < N) J.sup[i] = di * sys.A->sup[i];
      J.diag[i] = di * sys.A->diag[i] + sys.dd(u[i], i) * Au[i] + sys.dr(u[i], i);
    }
    TriLU lu(J);
    if (lu.singular()) {
      res.message = "singular Jacobian";
      res.residual = resid;
      return res;
    }
    delta = F;
    lu.solve(delta);  // J delta = F, step is u - delta

    double step = 1.0;
    if (opt.enforce_positivity) {
      double umin = std::numeric_limits<double>::infinity();
      for (double x : u) umin = std::min(umin, x);
      const double floor = opt.positivity_frac * umin;
      for (std::size_t i = 0; i < N; ++i) {
        if (delta[i] <= 0.0) continue;  // step increases u_i
        const double smax = (u[i] - floor) / delta[i];
        if (smax < step) step = std::max(smax, 0.0);
      }
      if (step <= 0.0) step = 1e-3;
    }

    bool accepted = false;
    for (int h = 0; h <= opt.max_halvings; ++h) {
      trial = u;
      for (std::size_t i = 0; i < N; ++i) trial[i] -= step * delta[i];
      bool finite = true;
      assemble_residual(sys, trial, Au2, F2, scale2);
      for (double x : F2)
        if (!std::isfinite(x)) { finite = false; break; }
      const double resid2 = finite ? rel_sup(F2, scale2) : std::numeric_limits<double>::infinity();
      if (finite && (resid2 < resid || resid2 <= opt.tol)) {
        u = trial;
        Au.swap(Au2);
        F.swap(F2);
        scale.swap(scale2);
        resid = resid2;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      res.message = "line search stagnated";
      res.residual = resid;
      return res;
    }
  }
  res.residual = resid;
  res.converged = resid <= opt.tol;
  if (!res.converged && res.message.empty()) res.message = "max iterations reached";
  return res;
}

}  // namespace lnflow

#include "lnflow/schedules.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "lnflow/elliptic.hpp"

namespace lnflow {

const char* to_string(ScheduleFamily f) {
  switch (f) {
    case ScheduleFamily::exp_growth: return "exp";
    case ScheduleFamily::linear: return "linear";
    case ScheduleFamily::log_growth: return "log";
    case ScheduleFamily::power: return "power";
    case ScheduleFamily::spliced: return "spliced";
  }
  return "?";
}

double AnalyticSchedule::value(double t) const {
  switch (family) {
    case ScheduleFamily::exp_growth: return c * std::exp(t);
    case ScheduleFamily::linear: return c * (t + 1.0);
    case ScheduleFamily::log_growth: return c * std::log(t + std::numbers::e);
    case ScheduleFamily::power: return c * std::pow(t + 1.0, p);
    case ScheduleFamily::spliced: break;
  }
  throw std::logic_error("AnalyticSchedule: spliced family has no closed form");
}

double AnalyticSchedule::deriv(double t) const {
  switch (family) {
    case ScheduleFamily::exp_growth: return c * std::exp(t);
    case ScheduleFamily::linear: return c;
    case ScheduleFamily::log_growth: return c / (t + std::numbers::e);
    case ScheduleFamily::power: return c * p * std::pow(t + 1.0, p - 1.0);
    case ScheduleFamily::spliced: break;
  }
  throw std::logic_error("AnalyticSchedule: spliced family has no closed form");
}

double AnalyticSchedule::deriv2(double t) const {
  switch (family) {
    case ScheduleFamily::exp_growth: return c * std::exp(t);
    case ScheduleFamily::linear: return 0.0;
    case ScheduleFamily::log_growth: {
      const double s = t + std::numbers::e;
      return -c / (s * s);
    }
    case ScheduleFamily::power: return c * p * (p - 1.0) * std::pow(t + 1.0, p - 2.0);
    case ScheduleFamily::spliced: break;
  }
  throw std::logic_error("AnalyticSchedule: spliced family has no closed form");
}

// ---------------------------------------------------------------------------
// TimeTrace: cubic Hermite with stored exact derivatives

namespace {

std::size_t trace_cell(const std::vector<double>& ts, double t) {
  if (t <= ts.front()) return 0;
  if (t >= ts.back()) return ts.size() - 2;
  auto it = std::upper_bound(ts.begin(), ts.end(), t);
  return std::size_t(it - ts.begin()) - 1;
}

}  // namespace

double TimeTrace::eval(double tt) const {
  const std::size_t i = trace_cell(t, tt);
  const double h = t[i + 1] - t[i];
  const double s = std::clamp((tt - t[i]) / h, 0.0, 1.0);
  const double s2 = s * s, s3 = s2 * s;
  return (2 * s3 - 3 * s2 + 1) * value[i] + (s3 - 2 * s2 + s) * h * deriv[i] +
         (-2 * s3 + 3 * s2) * value[i + 1] + (s3 - s2) * h * deriv[i + 1];
}

double TimeTrace::eval_deriv(double tt) const {
  const std::size_t i = trace_cell(t, tt);
  const double h = t[i + 1] - t[i];
  const double s = std::clamp((tt - t[i]) / h, 0.0, 1.0);
  const double s2 = s * s;
  return ((6 * s2 - 6 * s) * value[i] + (3 * s2 - 4 * s + 1) * h * deriv[i] +
          (-6 * s2 + 6 * s) * value[i + 1] + (3 * s2 - 2 * s) * h * deriv[i + 1]) / h;
}

// ---------------------------------------------------------------------------
// ComponentSchedule

namespace {

// C^2 smoothstep: 0 on tau<=0, 1 on tau>=1, nondecreasing
double smoothstep(double tau) {
  if (tau <= 0.0) return 0.0;
  if (tau >= 1.0) return 1.0;
  return ((6.0 * tau - 15.0) * tau + 10.0) * tau * tau * tau;
}

double smoothstep_deriv(double tau) {
  if (tau <= 0.0 || tau >= 1.0) return 0.0;
  const double w = tau * (1.0 - tau);
  return 30.0 * w * w;
}

}  // namespace

double ComponentSchedule::value(double t) const {
  if (!spliced) return tail.value(t);
  if (t >= t_full) return tail.value(t);
  const double base = trace.eval(t) + (pos_coeff != 0.0 && t > 0.0
                                           ? pos_coeff * std::pow(t, pos_power)
                                           : 0.0);
  if (t <= t_half) return base;
  const double eta = smoothstep((t - t_half) / (t_full - t_half));
  return (1.0 - eta) * base + eta * tail.value(t);
}

double ComponentSchedule::deriv(double t) const {
  if (!spliced) return tail.deriv(t);
  if (t >= t_full) return tail.deriv(t);
  const double dbase = trace.eval_deriv(t) + (pos_coeff != 0.0 && t > 0.0
                                                  ? pos_coeff * pos_power *
                                                        std::pow(t, pos_power - 1.0)
                                                  : 0.0);
  if (t <= t_half) return dbase;
  const double w = t_full - t_half;
  const double eta = smoothstep((t - t_half) / w);
  const double deta = smoothstep_deriv((t - t_half) / w) / w;
  const double base = trace.eval(t) + (pos_coeff != 0.0 && t > 0.0
                                           ? pos_coeff * std::pow(t, pos_power)
                                           : 0.0);
  return (1.0 - eta) * dbase + eta * tail.deriv(t) + deta * (tail.value(t) - base);
}

double Schedule::min_value(double t) const {
  double s = std::numeric_limits<double>::infinity();
  for (const auto& c : comps) s = std::min(s, c.value(t));
  return s;
}

double Schedule::max_value(double t) const {
  double s = -std::numeric_limits<double>::infinity();
  for (const auto& c : comps) s = std::max(s, c.value(t));
  return s;
}

Schedule Schedule::uniform(std::size_t components, AnalyticSchedule f) {
  Schedule s;
  ComponentSchedule c;
  c.tail = f;
  c.jet0 = {f.value(0.0), f.deriv(0.0), f.deriv2(0.0)};
  s.comps.assign(components, c);
  return s;
}

Schedule Schedule::constant(std::size_t components, double value) {
  AnalyticSchedule f;
  f.family = ScheduleFamily::power;
  f.c = value;
  f.p = 0.0;
  return uniform(components, f);
}

// ---------------------------------------------------------------------------
// jets

namespace {

// fill boundary rows of a derived field by one-sided quadratic extrapolation
void extrapolate_to_boundary(Field& f) {
  const auto& m = *f.mesh;
  const std::size_t N = m.size();
  for (std::size_t b : m.boundary_nodes) {
    std::array<std::size_t, 3> idx{};
    if (b == 0) idx = {1, 2, 3};
    else idx = {N - 2, N - 3, N - 4};
    const double xb = m.nodes[b];
    double num = 0.0;
    for (int j = 0; j < 3; ++j) {
      double lj = f.v[idx[j]];
      for (int k = 0; k < 3; ++k) {
        if (k == j) continue;
        lj *= (xb - m.nodes[idx[k]]) / (m.nodes[idx[j]] - m.nodes[idx[k]]);
      }
      num += lj;
    }
    f.v[b] = num;
  }
}

}  // namespace

JetSpec direct_flow_jet(const Background& bg, const Field& u0, bool second_order) {
  for (double x : u0.v)
    if (!(x > 0)) throw std::invalid_argument("direct_flow_jet: u0 must be positive");
  const int n = bg.n();
  const double beta = conformal_coeff(n);
  const double c = double(n) * (n - 1);
  const double p = double(n + 2) / double(n - 2);
  DiscreteOperator lap = laplace_beltrami(bg);
  std::vector<bool> is_bdry(bg.mesh->size(), false);
  for (std::size_t b : bg.mesh->boundary_nodes) is_bdry[b] = true;

  Field lap_u0 = lap.apply(u0);
  Field f1(bg.mesh);
  for (std::size_t i = 0; i < f1.size(); ++i) {
    if (is_bdry[i]) continue;
    f1.v[i] = beta * lap_u0.v[i] - bg.R_at(i) * u0.v[i] - c * std::pow(u0.v[i], p);
  }
  extrapolate_to_boundary(f1);

  JetSpec jet;
  jet.f0 = u0;
  jet.f1 = f1;
  if (second_order) {
    Field lap_f1 = lap.apply(f1);
    Field f2(bg.mesh);
    for (std::size_t i = 0; i < f2.size(); ++i) {
      if (is_bdry[i]) continue;
      f2.v[i] = beta * lap_f1.v[i] - bg.R_at(i) * f1.v[i] -
                c * p * std::pow(u0.v[i], p - 1.0) * f1.v[i];
    }
    extrapolate_to_boundary(f2);
    jet.f2 = std::move(f2);
  }
  return jet;
}

YamabeJet yamabe_flow_jet(const Background& bg, const Field& u0) {
  const int n = bg.n();
  for (double x : u0.v)
    if (!(x > 0)) throw std::invalid_argument("yamabe_flow_jet: u0 must be positive");
  // the Yamabe flow operates on a background normalized to R = -n(n-1)
  {
    const double want = -double(n) * (n - 1);
    double worst = 0.0;
    for (std::size_t i = 0; i < bg.mesh->size(); i += std::max<std::size_t>(1, bg.mesh->size() / 16))
      worst = std::max(worst, std::abs(bg.R_at(i) - want));
    if (worst > 1e-6)
      throw std::invalid_argument("yamabe_flow_jet: background must satisfy R = -n(n-1)");
  }
  const double q = 4.0 / double(n - 2);
  const double p = double(n + 2) / double(n - 2);
  const double k4 = double(n) * (n - 2) / 4.0;
  DiscreteOperator lap = laplace_beltrami(bg);
  std::vector<bool> is_bdry(bg.mesh->size(), false);
  for (std::size_t b : bg.mesh->boundary_nodes) is_bdry[b] = true;

  Field lap_u0 = lap.apply(u0);
  Field mu(bg.mesh);
  for (std::size_t i = 0; i < mu.size(); ++i) {
    if (is_bdry[i]) continue;
    mu.v[i] = (n - 1) * std::pow(u0.v[i], -q) *
              (lap_u0.v[i] + k4 * (u0.v[i] - std::pow(u0.v[i], p)));
  }
  extrapolate_to_boundary(mu);

  Field lap_mu = lap.apply(mu);
  Field Lmu(bg.mesh);
  for (std::size_t i = 0; i < Lmu.size(); ++i) {
    if (is_bdry[i]) continue;
    Lmu.v[i] = lap_mu.v[i] + k4 * (1.0 - p * std::pow(u0.v[i], q)) * mu.v[i];
  }
  extrapolate_to_boundary(Lmu);

  YamabeJet out;
  out.mu = mu;
  out.Lmu = Lmu;
  out.jet.f0 = u0;
  out.jet.f1 = mu;  // phi_t(0) = mu on the boundary
  Field f2(bg.mesh);
  for (std::size_t i = 0; i < f2.size(); ++i) {
    f2.v[i] = std::pow(u0.v[i], -q) *
              ((n - 1) * Lmu.v[i] -
               q * std::pow(u0.v[i], (6.0 - n) / double(n - 2)) * mu.v[i] * mu.v[i]);
  }
  out.jet.f2 = std::move(f2);

  const double mu_scale = 1.0 + sup_norm(mu), Lmu_scale = 1.0 + sup_norm(Lmu);
  for (std::size_t b : bg.mesh->boundary_nodes) {
    out.mu_boundary.push_back(mu.v[b]);
    out.Lmu_boundary.push_back(Lmu.v[b]);
    if (std::abs(mu.v[b]) <= 1e-6 * mu_scale && Lmu.v[b] < -1e-6 * Lmu_scale)
      out.hypothesis_ok = false;
  }
  return out;
}

// ---------------------------------------------------------------------------
// growth certificate

GrowthCertificate growth_certificate(const Schedule& sched, int n, FlowKind flow, double horizon,
                                     double beta) {
  if (!(horizon > 0)) throw std::invalid_argument("growth_certificate: horizon > 0");
  GrowthCertificate cert;
  cert.flow = flow;
  cert.horizon = horizon;
  cert.beta = beta;

  const double g1exp = double(n) / double(2 - n);
  const int S = 600;
  std::vector<double> ts;
  ts.reserve(S + 1);
  for (int i = 0; i <= S; ++i)
    ts.push_back(horizon * std::pow(10.0, -4.0 * (1.0 - double(i) / S)));
  ts.back() = horizon;

  double g1_first = 0.0, prev_g1 = 0.0, phi0 = 0.0, phiH = 0.0;
  bool monotone_phi_tail = true;
  cert.gamma1_decreasing_tail = true;
  double prev_phi = 0.0;
  for (int i = 0; i <= S; ++i) {
    const double t = ts[i];
    double phi = std::numeric_limits<double>::infinity();
    double g1 = 0.0, g2 = 0.0;
    for (const auto& comp : sched.comps) {
      const double v = comp.value(t), dv = comp.deriv(t);
      phi = std::min(phi, v);
      g1 = std::max(g1, std::pow(v, g1exp) * dv);
      g2 = std::max(g2, dv / v);
    }
    if (i == 0) { g1_first = g1; phi0 = sched.max_value(0.0); }
    const bool tail = t >= 0.1 * horizon;
    if (tail) {
      cert.gamma1_tail_sup = std::max(cert.gamma1_tail_sup, g1);
      cert.gamma2_tail_sup = std::max(cert.gamma2_tail_sup, g2);
      if (i > 0 && g1 > prev_g1 + 1e-14 * (1.0 + std::abs(prev_g1)))
        cert.gamma1_decreasing_tail = false;
      if (i > 0 && phi < prev_phi * (1.0 - 1e-12)) monotone_phi_tail = false;
    }
    prev_g1 = g1;
    prev_phi = phi;
    phiH = phi;
    if (i == S) cert.gamma1_horizon = g1;
  }
  (void)g1_first;

  cert.blowing_up = monotone_phi_tail && phiH > 10.0 * std::max(phi0, 1e-300);
  if (flow == FlowKind::direct) {
    cert.pass = cert.gamma1_decreasing_tail && cert.gamma1_horizon < 1e-8 && cert.blowing_up;
    if (!cert.blowing_up) cert.message = "schedule not eventually increasing/blowing up";
    else if (!cert.pass) cert.message = "gamma1 = phi^{n/(2-n)} phi_t too large at the horizon";
  } else {
    cert.pass = cert.gamma2_tail_sup <= beta && cert.blowing_up;
    if (!cert.blowing_up) cert.message = "schedule not eventually increasing/blowing up";
    else if (!cert.pass) cert.message = "gamma2 = phi_t/phi exceeds beta on the tail";
  }
  return cert;
}

// ---------------------------------------------------------------------------
// compatible schedule construction

namespace {

double warp_d3a(const Warp& w, double x) {
  switch (w.kind) {
    case WarpKind::euclidean: return 0.0;
    case WarpKind::spherical: return -std::cos(x);
    case WarpKind::hyperbolic: return std::cosh(x);
    case WarpKind::constant: return 0.0;
    case WarpKind::custom: {
      // second derivative of a natural cubic spline is piecewise linear
      const double h = 1e-6;
      return (w.table->deriv2(x + h) - w.table->deriv2(x - h)) / (2 * h);
    }
  }
  return 0.0;
}

struct DriftJet {
  double b = 0.0, db = 0.0, ddb = 0.0;
};

DriftJet drift_jet(const Geometry& g, double x) {
  DriftJet out;
  if (g.kind == GeomKind::product_slab) return out;
  const double m = g.n - 1;
  const double a = g.warp.a(x), a1 = g.warp.da(x), a2 = g.warp.d2a(x), a3 = warp_d3a(g.warp, x);
  out.b = m * a1 / a;
  out.db = m * (a2 * a - a1 * a1) / (a * a);
  out.ddb = m * ((a3 * a - a1 * a2) * a * a - (a2 * a - a1 * a1) * 2.0 * a * a1) /
            (a * a * a * a);
  return out;
}

Geometry extend_geometry(const Geometry& g, double& delta_lo, double& delta_hi) {
  Geometry ext = g;
  for (int attempt = 0; attempt < 6; ++attempt) {
    ext.x_lo = g.x_lo - delta_lo;
    ext.x_hi = g.x_hi + delta_hi;
    if (g.kind == GeomKind::warped_ball) ext.x_lo = 0.0;
    if (g.warp.kind == WarpKind::spherical)
      ext.x_hi = std::min(ext.x_hi, 0.5 * (g.x_hi + std::numbers::pi));
    try {
      ext.validate();
      return ext;
    } catch (const std::invalid_argument&) {
      delta_lo *= 0.5;
      delta_hi *= 0.5;
    }
  }
  throw std::runtime_error("build_compatible_schedule: could not extend the geometry");
}

}  // namespace

Schedule build_compatible_schedule(const Background& bg, const Field& u0, const JetSpec& jet,
                                   const CompatibleScheduleOptions& opt) {
  const auto geom = bg.geom;
  const MeshPtr mesh = bg.mesh;
  const int k = opt.k;
  if (k != 1 && k != 2) throw std::invalid_argument("build_compatible_schedule: k must be 1 or 2");
  if (k == 2 && !jet.f2)
    throw std::invalid_argument("build_compatible_schedule: k = 2 requires a second-order jet");

  // jet consistency: f0 must equal u0 on the boundary
  for (std::size_t b : mesh->boundary_nodes)
    if (std::abs(jet.f0.v[b] - u0.v[b]) > 1e-9 * (1.0 + std::abs(u0.v[b])))
      throw std::invalid_argument("build_compatible_schedule: jet inconsistent with u0 trace");

  Background raw = Background::raw(geom, mesh);
  DiscreteOperator lap = laplace_beltrami(raw);

  // iterated Poisson solves: Lap u_{m-1} = u_m with boundary data f_{m-1}
  auto bc_of = [&](const Field& f) {
    std::vector<double> bc;
    for (std::size_t b : mesh->boundary_nodes) bc.push_back(f.v[b]);
    return bc;
  };
  Field u1_field(mesh), u0_field(mesh);
  if (k == 2) {
    u1_field = solve_linear_dirichlet(lap, *jet.f2, bc_of(jet.f1));
  } else {
    u1_field = jet.f1;
  }
  u0_field = solve_linear_dirichlet(lap, u1_field, bc_of(jet.f0));

  // geometry extension
  const double L = geom->length();
  double delta_lo = (geom->kind == GeomKind::warped_ball) ? 0.0 : opt.extension_margin * L;
  double delta_hi = opt.extension_margin * L;
  if (geom->kind == GeomKind::warped_annulus && geom->warp.kind != WarpKind::constant)
    delta_lo = std::min(delta_lo, 0.5 * geom->x_lo);
  auto ext_geom = std::make_shared<Geometry>(extend_geometry(*geom, delta_lo, delta_hi));

  // Extended node set: original nodes plus pads whose spacings mirror the
  // grading ratio through the boundary.  A spacing-ratio break at x_b would
  // put a node-scale wiggle into the discrete Laplacian truncation there,
  // and the bi-Laplacian amplifies that into a t^{-1/2} trace transient.
  std::vector<double> nodes;
  auto pad = [&](double from, double to, double h0, double g) {
    std::vector<double> out;
    double x = from, h = h0;
    const int dir = (to > from) ? 1 : -1;
    while ((to - x) * dir > 1.25 * h) {
      x += dir * h;
      out.push_back(x);
      h = std::min(h * g, std::abs(to - from) / 4.0);
    }
    out.push_back(to);
    return out;
  };
  const std::size_t N0 = mesh->size();
  if (ext_geom->x_lo < mesh->nodes.front() - 1e-15 * L) {
    const double h0 = mesh->nodes[1] - mesh->nodes[0];
    const double g = std::clamp((mesh->nodes[2] - mesh->nodes[1]) / h0, 1.0, 1.25);
    auto lo_pad = pad(mesh->nodes.front(), ext_geom->x_lo, h0, g);
    std::reverse(lo_pad.begin(), lo_pad.end());
    nodes.insert(nodes.end(), lo_pad.begin(), lo_pad.end());
  }
  nodes.insert(nodes.end(), mesh->nodes.begin(), mesh->nodes.end());
  {
    const double h0 = mesh->nodes[N0 - 1] - mesh->nodes[N0 - 2];
    const double g = std::clamp((mesh->nodes[N0 - 2] - mesh->nodes[N0 - 3]) / h0, 1.0, 1.25);
    auto hi_pad = pad(mesh->nodes.back(), ext_geom->x_hi, h0, g);
    nodes.insert(nodes.end(), hi_pad.begin(), hi_pad.end());
  }
  MeshPtr ext_mesh = mesh_from_nodes(ext_geom, std::move(nodes));

  // locate the original boundary positions inside the extended mesh
  std::vector<std::size_t> trace_nodes;
  for (std::size_t b : mesh->boundary_nodes) {
    const double xb = mesh->nodes[b];
    const auto it = std::lower_bound(ext_mesh->nodes.begin(), ext_mesh->nodes.end(), xb - 1e-14);
    trace_nodes.push_back(std::size_t(it - ext_mesh->nodes.begin()));
  }

  // Initial data on the extension.  Near each boundary component the data is
  // a single analytic jet polynomial (Lap^m q = f_m at x_b, with the free
  // first derivatives set to zero); away from the boundary it crossfades
  // into the solved interior field.  Using one analytic function across x_b
  // matters: any value-level O(h^2) mismatch between pad data and the solved
  // field creates a mesh-independent dipole in the discrete bi-Laplacian at
  // x_b that pollutes the trace's second time derivative like t^{-1/2}.
  const double delta_ref = std::max(delta_lo, delta_hi);
  const double w_lo = 0.4 * delta_ref, w_hi = 0.8 * delta_ref;
  Field tilde(ext_mesh, 0.0);
  {
    struct CompJet {
      double xb = 0;
      double c0 = 0, c1 = 0, c2 = 0, c3 = 0, c4 = 0;
    };
    std::vector<CompJet> jets;
    for (std::size_t ci = 0; ci < mesh->boundary_nodes.size(); ++ci) {
      const std::size_t b = mesh->boundary_nodes[ci];
      CompJet cj;
      cj.xb = mesh->nodes[b];
      DriftJet dj = drift_jet(*geom, cj.xb);
      const double f1b = jet.f1.v[b];
      // u(x_b) = f0, u'(x_b) = 0, (Lap u)(x_b) = f1, (Lap u)'(x_b) = 0,
      // (Lap^2 u)(x_b) = f2  =>  with Lap = d^2/dx^2 + b d/dx:
      cj.c0 = jet.f0.v[b];
      cj.c1 = 0.0;
      cj.c2 = f1b;
      cj.c3 = -dj.b * cj.c2;
      if (k == 2) {
        const double f2b = (*jet.f2).v[b];
        // u1 = Lap u has u1(x_b) = f1, u1'(x_b) = 0, u1'' = Lap u1 - b u1' = f2
        cj.c4 = f2b - dj.ddb * cj.c1 - 2.0 * dj.db * cj.c2 - dj.b * cj.c3;
      }
      jets.push_back(cj);
    }
    std::size_t j = 0;
    for (std::size_t i = 0; i < ext_mesh->size(); ++i) {
      const double x = ext_mesh->nodes[i];
      double inside = 0.0;
      if (j < mesh->size() && std::abs(x - mesh->nodes[j]) <= 1e-13 * (1.0 + std::abs(x))) {
        inside = u0_field.v[j];
        ++j;
      }
      double acc = 0.0, chi_sum = 0.0;
      for (const auto& cj : jets) {
        const double tau = x - cj.xb;
        const double rho = std::abs(tau);
        const double chi = 1.0 - smoothstep((rho - w_lo) / (w_hi - w_lo));
        if (chi <= 0.0) continue;
        const double q = cj.c0 + tau * (cj.c1 + tau * (cj.c2 / 2.0 +
                                                        tau * (cj.c3 / 6.0 + tau * cj.c4 / 24.0)));
        acc += chi * q;
        chi_sum += chi;
      }
      tilde.v[i] = acc + (1.0 - std::min(chi_sum, 1.0)) * inside;
    }
  }

  // heat flow xi_t = Lap xi with zero data on the extended ends.  The trace
  // only stays put while the cold front from the crossfade region is far
  // away, so eps is tied to the square of that distance.
  double eps = opt.eps > 0 ? opt.eps : std::min(0.02, w_lo * w_lo / 64.0);
  Background ext_bg = Background::raw(ext_geom, ext_mesh);
  DiscreteOperator ext_lap = laplace_beltrami(ext_bg);
  const double heat_dt = opt.heat_dt > 0 ? opt.heat_dt : eps / 4000.0;
  const std::size_t steps = std::max<std::size_t>(8, std::size_t(eps / heat_dt + 0.5));
  const double dt = eps / double(steps);
  Tridiag BE(ext_mesh->size());
  {
    std::vector<bool> is_bdry(ext_mesh->size(), false);
    for (std::size_t b : ext_mesh->boundary_nodes) is_bdry[b] = true;
    for (std::size_t i = 0; i < BE.size(); ++i) {
      if (is_bdry[i]) { BE.diag[i] = 1.0; continue; }
      BE.diag[i] = 1.0 - dt * ext_lap.A.diag[i];
      if (i > 0) BE.sub[i] = -dt * ext_lap.A.sub[i];
      if (i + 1 < BE.size()) BE.sup[i] = -dt * ext_lap.A.sup[i];
    }
  }
  TriLU lu(BE);
  std::vector<TimeTrace> traces(trace_nodes.size());
  auto record = [&](double t, const Field& xi) {
    Field lap_xi = ext_lap.apply(xi);
    for (std::size_t c = 0; c < trace_nodes.size(); ++c) {
      traces[c].t.push_back(t);
      traces[c].value.push_back(xi.v[trace_nodes[c]]);
      traces[c].deriv.push_back(lap_xi.v[trace_nodes[c]]);
    }
  };
  Field xi = tilde;
  for (std::size_t b : ext_mesh->boundary_nodes) xi.v[b] = 0.0;
  record(0.0, xi);
  const std::size_t stride = std::max<std::size_t>(1, steps / 400);
  for (std::size_t s = 1; s <= steps; ++s) {
    std::vector<double> rhs = xi.v;
    for (std::size_t b : ext_mesh->boundary_nodes) rhs[b] = 0.0;
    lu.solve(rhs);
    for (double x : rhs)
      if (!std::isfinite(x))
        throw std::runtime_error("build_compatible_schedule: heat solve became non-finite");
    xi.v = std::move(rhs);
    if (s % stride == 0 || s == steps) record(double(s) * dt, xi);
  }

  // per-component splice onto the tail
  Schedule sched;
  for (std::size_t c = 0; c < trace_nodes.size(); ++c) {
    ComponentSchedule comp;
    comp.spliced = true;
    comp.trace = std::move(traces[c]);
    comp.pos_power = k + 0.25;
    comp.t_half = 0.45 * eps;
    comp.t_full = 0.90 * eps;
    const std::size_t b = mesh->boundary_nodes[c];
    const double f1b = jet.f1.v[b];
    const double f2b = jet.f2 ? (*jet.f2).v[b] : 0.0;
    comp.jet0 = {jet.f0.v[b], f1b, k == 2 ? f2b : 0.0};

    const double jet_scale = 1.0 + std::abs(comp.jet0[0]);
    const bool flat_jet = std::abs(f1b) <= 1e-9 * jet_scale && std::abs(f2b) <= 1e-9 * jet_scale;
    if (opt.request_positive_derivatives || flat_jet) {
      // fight the (tiny) trace decay on (0, 0.6 eps]; the splice takes over
      // past t_half
      double C = 0.02 * jet_scale;
      for (std::size_t s = 1; s < comp.trace.t.size(); ++s) {
        const double t = comp.trace.t[s];
        if (t > 0.6 * eps) break;
        const double need = -comp.trace.deriv[s] / (comp.pos_power * std::pow(t, comp.pos_power - 1.0));
        C = std::max(C, 1.5 * need);
      }
      comp.pos_coeff = C;
    }

    // tail constant: start with tail >= base on the splice window, then grow
    // until the spliced schedule is nondecreasing past t_half
    AnalyticSchedule tail = opt.tail;
    double ratio = 0.0;
    for (double t = comp.t_half; t <= comp.t_full + 1e-15; t += (comp.t_full - comp.t_half) / 32.0) {
      ComponentSchedule probe = comp;
      probe.tail = AnalyticSchedule{tail.family, 1.0, tail.p};
      const double base = probe.trace.eval(t) +
                          (probe.pos_coeff != 0.0 ? probe.pos_coeff * std::pow(t, probe.pos_power) : 0.0);
      ratio = std::max(ratio, base / probe.tail.value(t));
    }
    tail.c = 1.05 * std::max(ratio, 1e-12);
    for (int attempt = 0; attempt < 14; ++attempt) {
      comp.tail = tail;
      bool ok = true;
      const double scale = 1.0 + std::abs(comp.jet0[0]);
      for (double t = comp.t_half; t <= 1.5 * comp.t_full; t += comp.t_full / 160.0)
        if (comp.deriv(t) < -1e-10 * scale) { ok = false; break; }
      if (ok) break;
      tail.c *= 2.0;
    }
    comp.tail = tail;

    // the schedule must stay positive
    for (double t = 0.0; t <= 1.5 * comp.t_full; t += comp.t_full / 200.0)
      if (!(comp.value(t) > 0))
        throw std::runtime_error("build_compatible_schedule: constructed schedule not positive");
    sched.comps.push_back(std::move(comp));
  }
  return sched;
}

// ---------------------------------------------------------------------------
// barriers

double LowerBarrier::operator()(double dist, double t) const {
  const double phi = schedule->min_value(t);
  const double s = std::pow(phi, 2.0 / double(2 - n));
  const double e = 0.5 * double(2 - n);
  return c * (std::pow(dist + s, e) - std::pow(x1 + s, e));
}

LowerBarrier lower_barrier(const Geometry& geom, const Schedule& sched, double c, double x1) {
  if (!(c > 0)) throw std::invalid_argument("lower_barrier: c > 0 required");
  if (!(x1 > 0 && x1 <= std::max(1.0, geom.length())))
    throw std::invalid_argument("lower_barrier: x1 must lie in (0, collar width]");
  return LowerBarrier{geom.n, c, x1, &sched};
}

double UpperSupersolution::operator()(double rho) const {
  if (!(rho >= 0 && rho < R_loc))
    throw std::invalid_argument("upper_supersolution: rho must lie in [0, R_loc)");
  const double s = R_loc * R_loc - rho * rho;
  return std::pow(2.0 * R_loc / s, 0.5 * (n - 2)) *
         std::exp(0.5 * (n - 2) * (std::sqrt(s + eps * eps) - eps));
}

UpperSupersolution upper_supersolution(int n, double R_loc, double eps) {
  if (!(R_loc > 0) || !(eps > 0))
    throw std::invalid_argument("upper_supersolution: R_loc > 0 and eps > 0 required");
  return UpperSupersolution{n, R_loc, eps};
}

}  // namespace lnflow

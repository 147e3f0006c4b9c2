// Boundary-data schedules phi(t), growth-condition certificates, the
// compatibility jets of both flows at t = 0, the heat-equation construction
// of compatible short-time data spliced onto a long-time tail, and the
// explicit space-time barrier / local super-solution.
//
// Direct-flow jet:  phi_t(0)  = f1 = (4(n-1)/(n-2)) Lap u0 - R u0 - n(n-1) u0^p
//                   phi_tt(0) = f2 = L(f1),
//                   L(v) = (4(n-1)/(n-2)) Lap v - R v - (n(n-1)(n+2)/(n-2)) u0^{4/(n-2)} v
// Yamabe-flow jet (R = -n(n-1)):
//   mu = (n-1) u0^{-4/(n-2)} [ Lap u0 + (n(n-2)/4)(u0 - u0^p) ],   phi_t(0) = mu
//   L(mu) = Lap mu + (n(n-2)/4)(1 - ((n+2)/(n-2)) u0^{4/(n-2)}) mu
//   phi_tt(0) = u0^{-4/(n-2)} [ (n-1) L(mu) - (4/(n-2)) u0^{(6-n)/(n-2)} mu^2 ]
//
// Growth certificates: gamma1 = phi^{n/(2-n)} phi_t -> 0 (direct flow),
// gamma2 = phi_t / phi <= beta (Yamabe flow).  Boundary data is constant per
// component here, so the gradient terms of the growth condition vanish
// identically; the certificate records that.

#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "lnflow/operators.hpp"

namespace lnflow {

enum class ScheduleFamily { exp_growth, linear, log_growth, power, spliced };

const char* to_string(ScheduleFamily f);

struct AnalyticSchedule {
  ScheduleFamily family = ScheduleFamily::exp_growth;
  double c = 1.0;  // scale
  double p = 2.0;  // exponent for the power family

  double value(double t) const;
  double deriv(double t) const;
  double deriv2(double t) const;
};

// dense time samples with exact time derivatives; cubic Hermite evaluation
struct TimeTrace {
  std::vector<double> t, value, deriv;
  double eval(double tt) const;
  double eval_deriv(double tt) const;
};

struct ComponentSchedule {
  bool spliced = false;
  AnalyticSchedule tail;          // the analytic family (the whole schedule if !spliced)
  TimeTrace trace;                // heat-trace part (spliced only)
  double pos_coeff = 0.0;         // C in C t^{k+alpha/2}
  double pos_power = 1.25;        // k + alpha/2 with alpha = 1/2
  double t_half = 0.0, t_full = 0.0;  // cutoff eta ramps over [t_half, t_full]
  std::array<double, 3> jet0{1.0, 0.0, 0.0};

  double value(double t) const;
  double deriv(double t) const;   // analytic except for the trace part (Hermite)
};

struct Schedule {
  std::vector<ComponentSchedule> comps;

  std::size_t components() const { return comps.size(); }
  double value(std::size_t comp, double t) const { return comps.at(comp).value(t); }
  double deriv(std::size_t comp, double t) const { return comps.at(comp).deriv(t); }
  double min_value(double t) const;
  double max_value(double t) const;

  // same analytic schedule on every boundary component
  static Schedule uniform(std::size_t components, AnalyticSchedule f);
  static Schedule constant(std::size_t components, double value);
};

struct JetSpec {
  Field f0;                  // = u0
  Field f1;                  // first time derivative field
  std::optional<Field> f2;   // second time derivative field (C^4 setting)
};

// Jets; boundary values of the derived fields are filled by one-sided
// quadratic extrapolation from the interior.
JetSpec direct_flow_jet(const Background& bg, const Field& u0, bool second_order = true);

struct YamabeJet {
  JetSpec jet;
  Field mu, Lmu;
  // per boundary component: mu trace, L(mu) trace, and whether the
  // "L(mu) >= 0 where mu = 0" hypothesis holds there
  std::vector<double> mu_boundary, Lmu_boundary;
  bool hypothesis_ok = true;
};

// Requires a background normalized to R = -n(n-1).
YamabeJet yamabe_flow_jet(const Background& bg, const Field& u0);

enum class FlowKind { direct, yamabe };

struct GrowthCertificate {
  FlowKind flow = FlowKind::direct;
  double horizon = 50.0;
  double beta = 1.01;
  double gamma1_horizon = 0.0;   // phi^{n/(2-n)} phi_t at the horizon
  double gamma1_tail_sup = 0.0;  // sup over the last decade
  double gamma2_tail_sup = 0.0;  // sup of phi_t/phi over the last decade
  bool gamma1_decreasing_tail = false;
  bool gradient_terms_zero = true;  // constant-per-component boundary data
  bool blowing_up = false;          // phi increasing and large at the horizon
  bool pass = false;
  std::string message;
};

GrowthCertificate growth_certificate(const Schedule& sched, int n, FlowKind flow,
                                     double horizon = 50.0, double beta = 1.01);

struct CompatibleScheduleOptions {
  // heat-extension time interval [0, eps]; <= 0 picks eps automatically so
  // the splice happens before the cutoff's cold front diffuses back to the
  // boundary (diffusion length sqrt(4 eps) << cutoff distance)
  double eps = 0.0;
  double heat_dt = 0.0;            // <= 0: eps / 4000
  double extension_margin = 0.2;   // fraction of the interval length
  AnalyticSchedule tail{ScheduleFamily::exp_growth, 1.0, 2.0};
  int k = 2;                       // jet order to honor (1 or 2)
  bool request_positive_derivatives = false;  // add C t^{k+alpha/2}
};

// Appendix-style construction: iterated Poisson solves to match the jet,
// extension of the initial data past the boundary, a short heat flow with
// zero data on the extended ends, and a cutoff splice onto the long tail.
Schedule build_compatible_schedule(const Background& bg, const Field& u0, const JetSpec& jet,
                                   const CompatibleScheduleOptions& opt = {});

// psi(x,t) = c [ (x + phi^{2/(2-n)})^{(2-n)/2} - (x1 + phi^{2/(2-n)})^{(2-n)/2} ],
// x = distance to the boundary, phi = min over components.
struct LowerBarrier {
  int n = 3;
  double c = 1.0;
  double x1 = 0.5;
  const Schedule* schedule = nullptr;

  double operator()(double dist, double t) const;
};

LowerBarrier lower_barrier(const Geometry& geom, const Schedule& sched, double c, double x1);

// ubar(rho) = (2R/(R^2-rho^2))^{(n-2)/2} exp( (n-2)/2 ( sqrt(R^2-rho^2+eps^2) - eps ) )
struct UpperSupersolution {
  int n = 3;
  double R_loc = 0.5;
  double eps = 0.05;

  double operator()(double rho) const;  // throws for rho >= R_loc
};

UpperSupersolution upper_supersolution(int n, double R_loc, double eps);

}  // namespace lnflow

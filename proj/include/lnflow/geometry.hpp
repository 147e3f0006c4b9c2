// Radially reducible geometries: warped balls/annuli over round spheres and
// product slabs over a constant-curvature cross-section.  Every differential
// operator in this project reduces to one radial/axial coordinate x:
//
//   warped:  g = dx^2 + a(x)^2 g_{S^{n-1}},   dV = omega_{n-1} a(x)^{n-1} dx
//   slab:    g = dx^2 + g_N (R_N = kappa),    dV = V_N dx
//
//   R(x) = -2(n-1) a''/a + (n-1)(n-2)(1-a'^2)/a^2     (warped)
//   drift b(x) = (n-1) a'/a    (first-order coefficient of the radial Laplacian)
//   H = (n-1) * d/dnu log a    (boundary mean curvature, trace convention)

#pragma once

#include <cmath>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace lnflow {

enum class GeomKind { warped_ball, warped_annulus, product_slab };
enum class WarpKind { euclidean, spherical, hyperbolic, constant, custom };

const char* to_string(GeomKind k);
const char* to_string(WarpKind k);

// Natural cubic spline, C^2; used for custom tabulated warp profiles.
class CubicSpline {
 public:
  CubicSpline() = default;
  CubicSpline(std::vector<double> xs, std::vector<double> ys);
  double value(double x) const;
  double deriv(double x) const;
  double deriv2(double x) const;
  bool empty() const { return xs_.empty(); }

 private:
  std::size_t locate(double x) const;
  std::vector<double> xs_, ys_, m_;  // m_ = second derivatives at knots
};

struct Warp {
  WarpKind kind = WarpKind::euclidean;
  double a0 = 1.0;  // profile value for WarpKind::constant
  std::shared_ptr<const CubicSpline> table;

  double a(double x) const;
  double da(double x) const;
  double d2a(double x) const;
};

struct BoundaryComponent {
  double position = 0.0;
  int outward_sign = +1;  // +1 at x_hi, -1 at x_lo
};

struct Geometry {
  GeomKind kind = GeomKind::product_slab;
  int n = 3;
  double x_lo = 0.0, x_hi = 1.0;
  Warp warp;
  double kappa = 0.0;        // cross-section scalar curvature (slab)
  double cross_volume = 1.0; // V_N (slab); warped kinds use omega_{n-1}

  double length() const { return x_hi - x_lo; }
  bool is_warped() const { return kind != GeomKind::product_slab; }
  std::vector<BoundaryComponent> boundary_components() const;
  void validate() const;  // throws std::invalid_argument on violation

  static Geometry ball(int n, double radius, WarpKind warp = WarpKind::euclidean);
  static Geometry custom_ball(int n, double radius, std::shared_ptr<const CubicSpline> a);
  static Geometry annulus(int n, double x_lo, double x_hi, WarpKind warp = WarpKind::euclidean,
                          double a0 = 1.0);
  static Geometry custom_annulus(int n, double x_lo, double x_hi,
                                 std::shared_ptr<const CubicSpline> a);
  static Geometry slab(int n, double L, double kappa, double cross_volume = 1.0);
};

// Surface area of the unit (n-1)-sphere, 2 pi^{n/2} / Gamma(n/2).
double unit_sphere_area(int n);

// Scalar curvature, Laplacian drift, boundary mean curvature and the distance
// to the boundary.  Immutable; cheap to copy.
struct CurvatureData {
  Geometry geom;

  double R(double x) const;
  double drift(double x) const;  // b(x); +inf at a warped-ball center
  double H(const BoundaryComponent& c) const;
  double dist_to_boundary(double x) const;
};

CurvatureData scalar_curvature(const Geometry& geom);
double mean_curvature(const Geometry& geom, const BoundaryComponent& c);

// w(x) with  integral f dV = integral f(x) w(x) dx ; boundary measure w(x_b).
struct VolumeWeight {
  Geometry geom;
  double operator()(double x) const;
  double boundary(const BoundaryComponent& c) const;
};

VolumeWeight volume_weight(const Geometry& geom);

// First Dirichlet eigenvalue of L_g = -(4(n-1)/(n-2)) Lap + R on a product
// slab: (4(n-1)/(n-2)) (pi/L)^2 + kappa.  Unavailable for warped kinds.
std::optional<double> lambda1_closed_form(const Geometry& geom);

// 4(n-1)/(n-2), the conformal Laplacian coefficient.
inline double conformal_coeff(int n) { return 4.0 * (n - 1) / double(n - 2); }

}  // namespace lnflow

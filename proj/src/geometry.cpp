#include "lnflow/geometry.hpp"

#include <algorithm>
#include <limits>
#include <numbers>

namespace lnflow {

const char* to_string(GeomKind k) {
  switch (k) {
    case GeomKind::warped_ball: return "warped_ball";
    case GeomKind::warped_annulus: return "warped_annulus";
    case GeomKind::product_slab: return "product_slab";
  }
  return "?";
}

const char* to_string(WarpKind k) {
  switch (k) {
    case WarpKind::euclidean: return "euclidean";
    case WarpKind::spherical: return "spherical";
    case WarpKind::hyperbolic: return "hyperbolic";
    case WarpKind::constant: return "constant";
    case WarpKind::custom: return "custom";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// CubicSpline

CubicSpline::CubicSpline(std::vector<double> xs, std::vector<double> ys)
    : xs_(std::move(xs)), ys_(std::move(ys)) {
  const std::size_t n = xs_.size();
  if (n < 3 || ys_.size() != n)
    throw std::invalid_argument("CubicSpline needs >= 3 knots");
  for (std::size_t i = 1; i < n; ++i)
    if (!(xs_[i] > xs_[i - 1]))
      throw std::invalid_argument("CubicSpline knots must be strictly increasing");

  // natural spline: tridiagonal solve for second derivatives
  std::vector<double> a(n, 0.0), b(n, 0.0), c(n, 0.0), d(n, 0.0);
  m_.assign(n, 0.0);
  b[0] = b[n - 1] = 1.0;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double hl = xs_[i] - xs_[i - 1], hr = xs_[i + 1] - xs_[i];
    a[i] = hl / 6.0;
    b[i] = (hl + hr) / 3.0;
    c[i] = hr / 6.0;
    d[i] = (ys_[i + 1] - ys_[i]) / hr - (ys_[i] - ys_[i - 1]) / hl;
  }
  for (std::size_t i = 1; i < n; ++i) {
    const double w = a[i] / b[i - 1];
    b[i] -= w * c[i - 1];
    d[i] -= w * d[i - 1];
  }
  m_[n - 1] = d[n - 1] / b[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) m_[i] = (d[i] - c[i] * m_[i + 1]) / b[i];
}

std::size_t CubicSpline::locate(double x) const {
  if (x <= xs_.front()) return 0;
  if (x >= xs_.back()) return xs_.size() - 2;
  auto it = std::upper_bound(xs_.begin(), xs_.end(), x);
  return std::size_t(it - xs_.begin()) - 1;
}

double CubicSpline::value(double x) const {
  const std::size_t i = locate(x);
  const double h = xs_[i + 1] - xs_[i];
  const double A = (xs_[i + 1] - x) / h, B = (x - xs_[i]) / h;
  return A * ys_[i] + B * ys_[i + 1] +
         ((A * A * A - A) * m_[i] + (B * B * B - B) * m_[i + 1]) * h * h / 6.0;
}

double CubicSpline::deriv(double x) const {
  const std::size_t i = locate(x);
  const double h = xs_[i + 1] - xs_[i];
  const double A = (xs_[i + 1] - x) / h, B = (x - xs_[i]) / h;
  return (ys_[i + 1] - ys_[i]) / h +
         ((3 * B * B - 1) * m_[i + 1] - (3 * A * A - 1) * m_[i]) * h / 6.0;
}

double CubicSpline::deriv2(double x) const {
  const std::size_t i = locate(x);
  const double h = xs_[i + 1] - xs_[i];
  const double A = (xs_[i + 1] - x) / h, B = (x - xs_[i]) / h;
  return A * m_[i] + B * m_[i + 1];
}

// ---------------------------------------------------------------------------
// Warp profiles

double Warp::a(double x) const {
  switch (kind) {
    case WarpKind::euclidean: return x;
    case WarpKind::spherical: return std::sin(x);
    case WarpKind::hyperbolic: return std::sinh(x);
    case WarpKind::constant: return a0;
    case WarpKind::custom: return table->value(x);
  }
  return 0.0;
}

double Warp::da(double x) const {
  switch (kind) {
    case WarpKind::euclidean: return 1.0;
    case WarpKind::spherical: return std::cos(x);
    case WarpKind::hyperbolic: return std::cosh(x);
    case WarpKind::constant: return 0.0;
    case WarpKind::custom: return table->deriv(x);
  }
  return 0.0;
}

double Warp::d2a(double x) const {
  switch (kind) {
    case WarpKind::euclidean: return 0.0;
    case WarpKind::spherical: return -std::sin(x);
    case WarpKind::hyperbolic: return std::sinh(x);
    case WarpKind::constant: return 0.0;
    case WarpKind::custom: return table->deriv2(x);
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// Geometry

std::vector<BoundaryComponent> Geometry::boundary_components() const {
  if (kind == GeomKind::warped_ball) return {{x_hi, +1}};
  return {{x_lo, -1}, {x_hi, +1}};
}

void Geometry::validate() const {
  if (n < 3) throw std::invalid_argument("geometry: n >= 3 required");
  if (!(x_hi > x_lo)) throw std::invalid_argument("geometry: empty interval");
  if (kind == GeomKind::product_slab) {
    if (!std::isfinite(kappa)) throw std::invalid_argument("geometry: kappa must be finite");
    if (!(cross_volume > 0)) throw std::invalid_argument("geometry: cross_volume must be > 0");
    return;
  }
  if (kind == GeomKind::warped_ball) {
    if (std::abs(x_lo) > 1e-14 * std::max(1.0, x_hi))
      throw std::invalid_argument("geometry: warped_ball requires x_lo = 0");
    if (std::abs(warp.a(0.0)) > 1e-10)
      throw std::invalid_argument("geometry: warped_ball requires a(0) = 0");
    if (std::abs(warp.da(0.0) - 1.0) > 1e-6)
      throw std::invalid_argument("geometry: warped_ball requires a'(0) = 1");
    if (warp.kind == WarpKind::spherical && x_hi >= std::numbers::pi)
      throw std::invalid_argument("geometry: spherical warp requires x_hi < pi");
  }
  // profile positivity on the closed interval (away from a ball center)
  const double lo = (kind == GeomKind::warped_ball) ? x_lo + 1e-9 * length() : x_lo;
  for (int i = 0; i <= 256; ++i) {
    const double x = lo + (x_hi - lo) * i / 256.0;
    if (!(warp.a(x) > 0))
      throw std::invalid_argument("geometry: warp profile a(x) must be positive on the interval");
  }
}

Geometry Geometry::ball(int n, double radius, WarpKind warp) {
  Geometry g;
  g.kind = GeomKind::warped_ball;
  g.n = n;
  g.x_lo = 0.0;
  g.x_hi = radius;
  g.warp.kind = warp;
  g.validate();
  return g;
}

Geometry Geometry::custom_ball(int n, double radius, std::shared_ptr<const CubicSpline> a) {
  Geometry g;
  g.kind = GeomKind::warped_ball;
  g.n = n;
  g.x_lo = 0.0;
  g.x_hi = radius;
  g.warp.kind = WarpKind::custom;
  g.warp.table = std::move(a);
  g.validate();
  return g;
}

Geometry Geometry::annulus(int n, double x_lo, double x_hi, WarpKind warp, double a0) {
  Geometry g;
  g.kind = GeomKind::warped_annulus;
  g.n = n;
  g.x_lo = x_lo;
  g.x_hi = x_hi;
  g.warp.kind = warp;
  g.warp.a0 = a0;
  g.validate();
  return g;
}

Geometry Geometry::custom_annulus(int n, double x_lo, double x_hi,
                                  std::shared_ptr<const CubicSpline> a) {
  Geometry g;
  g.kind = GeomKind::warped_annulus;
  g.n = n;
  g.x_lo = x_lo;
  g.x_hi = x_hi;
  g.warp.kind = WarpKind::custom;
  g.warp.table = std::move(a);
  g.validate();
  return g;
}

Geometry Geometry::slab(int n, double L, double kappa, double cross_volume) {
  Geometry g;
  g.kind = GeomKind::product_slab;
  g.n = n;
  g.x_lo = 0.0;
  g.x_hi = L;
  g.kappa = kappa;
  g.cross_volume = cross_volume;
  g.validate();
  return g;
}

double unit_sphere_area(int n) {
  return 2.0 * std::pow(std::numbers::pi, n / 2.0) / std::tgamma(n / 2.0);
}

// ---------------------------------------------------------------------------
// Curvature data

double CurvatureData::R(double x) const {
  const int n = geom.n;
  switch (geom.kind == GeomKind::product_slab ? WarpKind::constant : geom.warp.kind) {
    case WarpKind::euclidean: return 0.0;
    case WarpKind::spherical: return double(n) * (n - 1);
    case WarpKind::hyperbolic: return -double(n) * (n - 1);
    default: break;
  }
  if (geom.kind == GeomKind::product_slab) return geom.kappa;
  if (geom.warp.kind == WarpKind::constant)
    return double(n - 1) * (n - 2) / (geom.warp.a0 * geom.warp.a0);
  // custom profile: guard the removable 0/0 at a ball center
  if (geom.kind == GeomKind::warped_ball) x = std::max(x, 1e-6 * geom.length());
  const double a = geom.warp.a(x), ap = geom.warp.da(x), app = geom.warp.d2a(x);
  return -2.0 * (n - 1) * app / a + double(n - 1) * (n - 2) * (1.0 - ap * ap) / (a * a);
}

double CurvatureData::drift(double x) const {
  const int n = geom.n;
  if (geom.kind == GeomKind::product_slab) return 0.0;
  switch (geom.warp.kind) {
    case WarpKind::euclidean:
      return x == 0.0 ? std::numeric_limits<double>::infinity() : (n - 1) / x;
    case WarpKind::spherical:
      return x == 0.0 ? std::numeric_limits<double>::infinity()
                      : (n - 1) * std::cos(x) / std::sin(x);
    case WarpKind::hyperbolic:
      return x == 0.0 ? std::numeric_limits<double>::infinity()
                      : (n - 1) * std::cosh(x) / std::sinh(x);
    case WarpKind::constant: return 0.0;
    case WarpKind::custom: {
      const double a = geom.warp.a(x);
      if (a == 0.0) return std::numeric_limits<double>::infinity();
      return (n - 1) * geom.warp.da(x) / a;
    }
  }
  return 0.0;
}

double CurvatureData::H(const BoundaryComponent& c) const {
  return mean_curvature(geom, c);
}

double CurvatureData::dist_to_boundary(double x) const {
  double d = std::numeric_limits<double>::infinity();
  for (const auto& c : geom.boundary_components()) d = std::min(d, std::abs(x - c.position));
  return d;
}

CurvatureData scalar_curvature(const Geometry& geom) {
  geom.validate();
  return CurvatureData{geom};
}

double mean_curvature(const Geometry& geom, const BoundaryComponent& c) {
  if (geom.kind == GeomKind::product_slab) return 0.0;
  const double x = c.position;
  return (geom.n - 1) * c.outward_sign * geom.warp.da(x) / geom.warp.a(x);
}

double VolumeWeight::operator()(double x) const {
  if (geom.kind == GeomKind::product_slab) return geom.cross_volume;
  return unit_sphere_area(geom.n) * std::pow(geom.warp.a(x), geom.n - 1);
}

double VolumeWeight::boundary(const BoundaryComponent& c) const { return (*this)(c.position); }

VolumeWeight volume_weight(const Geometry& geom) { return VolumeWeight{geom}; }

std::optional<double> lambda1_closed_form(const Geometry& geom) {
  if (geom.kind != GeomKind::product_slab) return std::nullopt;
  const double L = geom.length();
  const double k = std::numbers::pi / L;
  return conformal_coeff(geom.n) * k * k + geom.kappa;
}

}  // namespace lnflow

#include "lnflow/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>

namespace lnflow {

namespace {

// 3-point Gauss-Legendre on [a,b]
double gauss3(const VolumeWeight& w, double a, double b) {
  static const double q = std::sqrt(3.0 / 5.0);
  const double c = 0.5 * (a + b), h = 0.5 * (b - a);
  return h * ((5.0 / 9.0) * w(c - q * h) + (8.0 / 9.0) * w(c) + (5.0 / 9.0) * w(c + q * h));
}

// nodes of one graded side: from the boundary (xi = 0) inward to xi = ell
std::vector<double> graded_side(double ell, std::size_t m, double strength) {
  const double delta = ell / std::expm1(strength);
  std::vector<double> xi(m + 1);
  for (std::size_t j = 0; j <= m; ++j)
    xi[j] = delta * std::expm1(strength * double(j) / double(m));
  xi[m] = ell;
  return xi;
}

void finalize(Mesh& mesh) {
  const auto& g = *mesh.geom;
  const VolumeWeight w = volume_weight(g);
  const std::size_t N = mesh.nodes.size();
  mesh.cell_mass.resize(N - 1);
  mesh.face_weight.resize(N - 1);
  for (std::size_t i = 0; i + 1 < N; ++i) {
    mesh.cell_mass[i] = gauss3(w, mesh.nodes[i], mesh.nodes[i + 1]);
    mesh.face_weight[i] = w(0.5 * (mesh.nodes[i] + mesh.nodes[i + 1]));
  }
  mesh.node_mass.assign(N, 0.0);
  for (std::size_t i = 0; i < N; ++i) {
    if (i > 0) mesh.node_mass[i] += gauss3(w, 0.5 * (mesh.nodes[i - 1] + mesh.nodes[i]), mesh.nodes[i]);
    if (i + 1 < N) mesh.node_mass[i] += gauss3(w, mesh.nodes[i], 0.5 * (mesh.nodes[i] + mesh.nodes[i + 1]));
  }
  const CurvatureData curv = scalar_curvature(g);
  mesh.dist_bdry.resize(N);
  for (std::size_t i = 0; i < N; ++i) mesh.dist_bdry[i] = curv.dist_to_boundary(mesh.nodes[i]);
  mesh.boundary_nodes.clear();
  for (const auto& c : g.boundary_components()) {
    const std::size_t idx = (c.outward_sign > 0) ? N - 1 : 0;
    mesh.boundary_nodes.push_back(idx);
  }
}

}  // namespace

double Mesh::h_min() const {
  double h = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < nodes.size(); ++i) h = std::min(h, nodes[i + 1] - nodes[i]);
  return h;
}

double Mesh::total_volume() const {
  double s = 0.0;
  for (double m : cell_mass) s += m;
  return s;
}

double Mesh::boundary_measure(std::size_t component) const {
  const auto comps = geom->boundary_components();
  return volume_weight(*geom).boundary(comps.at(component));
}

MeshPtr build_mesh(std::shared_ptr<const Geometry> geom, std::size_t M, Grading grading) {
  geom->validate();
  if (M < 16) throw std::invalid_argument("build_mesh: need M >= 16");
  if (grading.kind == Grading::Kind::boundary_graded &&
      !(grading.strength > 0.0 && grading.strength <= 10.0))
    throw std::invalid_argument("build_mesh: grading strength must lie in (0, 10]");

  const double lo = geom->x_lo, hi = geom->x_hi, L = hi - lo;
  std::vector<double> nodes;
  if (grading.kind == Grading::Kind::uniform) {
    nodes.resize(M + 1);
    for (std::size_t i = 0; i <= M; ++i) nodes[i] = lo + L * double(i) / double(M);
    nodes.back() = hi;
  } else if (geom->kind == GeomKind::warped_ball) {
    // single boundary at x_hi; grade toward it across the whole interval
    const auto xi = graded_side(L, M, grading.strength);
    nodes.resize(M + 1);
    for (std::size_t j = 0; j <= M; ++j) nodes[j] = hi - xi[M - j];
    nodes.front() = lo;
    nodes.back() = hi;
  } else {
    // two boundary components: grade each half toward its end
    const std::size_t m_lo = M / 2, m_hi = M - m_lo;
    const auto xi_lo = graded_side(0.5 * L, m_lo, grading.strength);
    const auto xi_hi = graded_side(0.5 * L, m_hi, grading.strength);
    nodes.reserve(M + 1);
    for (std::size_t j = 0; j <= m_lo; ++j) nodes.push_back(lo + xi_lo[j]);
    for (std::size_t j = m_hi; j-- > 0;) nodes.push_back(hi - xi_hi[j]);
    nodes.front() = lo;
    nodes.back() = hi;
  }

  auto mesh = std::make_shared<Mesh>();
  mesh->geom = std::move(geom);
  mesh->grading = grading;
  mesh->nodes = std::move(nodes);
  finalize(*mesh);
  return mesh;
}

MeshPtr refine_mesh(const Mesh& mesh) {
  std::vector<double> nodes;
  nodes.reserve(2 * mesh.nodes.size());
  for (std::size_t i = 0; i + 1 < mesh.nodes.size(); ++i) {
    nodes.push_back(mesh.nodes[i]);
    nodes.push_back(0.5 * (mesh.nodes[i] + mesh.nodes[i + 1]));
  }
  nodes.push_back(mesh.nodes.back());
  return mesh_from_nodes(mesh.geom, std::move(nodes), mesh.grading);
}

MeshPtr mesh_from_nodes(std::shared_ptr<const Geometry> geom, std::vector<double> nodes,
                        Grading grading) {
  for (std::size_t i = 1; i < nodes.size(); ++i)
    if (!(nodes[i] > nodes[i - 1]))
      throw std::invalid_argument("mesh_from_nodes: nodes must be strictly increasing");
  auto mesh = std::make_shared<Mesh>();
  mesh->geom = std::move(geom);
  mesh->grading = grading;
  mesh->nodes = std::move(nodes);
  finalize(*mesh);
  return mesh;
}

double integrate(const Field& f) {
  double s = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) s += f.mesh->node_mass[i] * f.v[i];
  return s;
}

double integrate(const Field& f, const Field& g) {
  double s = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) s += f.mesh->node_mass[i] * f.v[i] * g.v[i];
  return s;
}

double grad_energy(const Field& f) {
  const auto& m = *f.mesh;
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < f.size(); ++i) {
    const double h = m.nodes[i + 1] - m.nodes[i];
    const double du = (f.v[i + 1] - f.v[i]) / h;
    s += m.cell_mass[i] * du * du;
  }
  return s;
}

double sup_norm(const Field& f) {
  double s = 0.0;
  for (double x : f.v) s = std::max(s, std::abs(x));
  return s;
}

double inf_value(const Field& f) {
  double s = std::numeric_limits<double>::infinity();
  for (double x : f.v) s = std::min(s, x);
  return s;
}

double interior_sup(const Field& f, double margin) {
  if (margin < 0) throw std::invalid_argument("interior_sup: margin >= 0 required");
  double s = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < f.size(); ++i)
    if (f.mesh->dist_bdry[i] >= margin) s = std::max(s, f.v[i]);
  return s;
}

double interior_inf(const Field& f, double margin) {
  if (margin < 0) throw std::invalid_argument("interior_inf: margin >= 0 required");
  double s = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < f.size(); ++i)
    if (f.mesh->dist_bdry[i] >= margin) s = std::min(s, f.v[i]);
  return s;
}

double interpolate(const Field& f, double x) {
  const auto& xs = f.mesh->nodes;
  if (x < xs.front() - 1e-14 || x > xs.back() + 1e-14)
    throw std::invalid_argument("interpolate: x outside the mesh interval");
  x = std::clamp(x, xs.front(), xs.back());
  auto it = std::upper_bound(xs.begin(), xs.end(), x);
  std::size_t i = (it == xs.begin()) ? 0 : std::size_t(it - xs.begin()) - 1;
  if (i + 1 >= xs.size()) i = xs.size() - 2;

  // Fritsch-Carlson slopes at the two cell endpoints
  auto slope = [&](std::size_t j) {
    const std::size_t N = xs.size();
    auto sec = [&](std::size_t k) { return (f.v[k + 1] - f.v[k]) / (xs[k + 1] - xs[k]); };
    if (j == 0) return sec(0);
    if (j == N - 1) return sec(N - 2);
    const double dl = sec(j - 1), dr = sec(j);
    if (dl * dr <= 0.0) return 0.0;
    const double hl = xs[j] - xs[j - 1], hr = xs[j + 1] - xs[j];
    const double w1 = 2 * hr + hl, w2 = hr + 2 * hl;
    return (w1 + w2) / (w1 / dl + w2 / dr);
  };
  const double h = xs[i + 1] - xs[i], t = (x - xs[i]) / h;
  const double m0 = slope(i) * h, m1 = slope(i + 1) * h;
  const double t2 = t * t, t3 = t2 * t;
  return (2 * t3 - 3 * t2 + 1) * f.v[i] + (t3 - 2 * t2 + t) * m0 +
         (-2 * t3 + 3 * t2) * f.v[i + 1] + (t3 - t2) * m1;
}

void write_field_csv(const Field& f, std::ostream& os) {
  os << "x,value\n";
  char buf[80];
  for (std::size_t i = 0; i < f.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", f.mesh->nodes[i], f.v[i]);
    os << buf;
  }
}

void write_field_csv(const Field& f, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path);
  write_field_csv(f, os);
}

std::vector<std::pair<double, double>> read_xy_csv(std::istream& is) {
  std::vector<std::pair<double, double>> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || std::isalpha(static_cast<unsigned char>(line[0]))) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) continue;
    out.emplace_back(std::stod(line.substr(0, comma)), std::stod(line.substr(comma + 1)));
  }
  return out;
}

}  // namespace lnflow

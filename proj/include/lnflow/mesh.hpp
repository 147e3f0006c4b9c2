// Graded 1D meshes, node/cell masses under the geometry volume measure,
// sampled fields and their quadrature, norms and monotone interpolation.
//
// Grading: spacing h(x) proportional to (distance to the nearest boundary
// component + h_min), realized per side by x(tau) = delta (e^{s tau} - 1)
// with delta = ell / (e^s - 1); s is the grading strength.

#pragma once

#include <cstddef>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "lnflow/geometry.hpp"

namespace lnflow {

struct Grading {
  enum class Kind { uniform, boundary_graded } kind = Kind::uniform;
  double strength = 3.0;  // valid range (0, 10]

  static Grading uniform() { return {Kind::uniform, 0.0}; }
  static Grading graded(double strength = 3.0) { return {Kind::boundary_graded, strength}; }
};

struct Mesh {
  std::shared_ptr<const Geometry> geom;
  Grading grading;
  std::vector<double> nodes;        // x_0 < ... < x_M, endpoints exact
  std::vector<double> node_mass;    // integral of w over the dual cell (quad weights)
  std::vector<double> cell_mass;    // integral of w over [x_i, x_{i+1}]
  std::vector<double> face_weight;  // w at cell midpoints
  std::vector<double> dist_bdry;    // distance to the boundary per node
  std::vector<std::size_t> boundary_nodes;  // Dirichlet node indices, component order

  std::size_t size() const { return nodes.size(); }
  double h_min() const;
  double total_volume() const;
  // boundary measure w(x_b) of a component (index into boundary_nodes order)
  double boundary_measure(std::size_t component) const;
};

using MeshPtr = std::shared_ptr<const Mesh>;

// M = number of cells (M+1 nodes).  Requires M >= 16.
MeshPtr build_mesh(std::shared_ptr<const Geometry> geom, std::size_t M, Grading grading);

// Midpoint-insertion refinement; the refined mesh contains every parent node.
MeshPtr refine_mesh(const Mesh& mesh);

// Builds a mesh from an explicit node vector (masses/weights recomputed).
MeshPtr mesh_from_nodes(std::shared_ptr<const Geometry> geom, std::vector<double> nodes,
                        Grading grading = Grading::uniform());

struct Field {
  MeshPtr mesh;
  std::vector<double> v;

  Field() = default;
  explicit Field(MeshPtr m, double fill = 0.0) : mesh(std::move(m)), v(mesh->size(), fill) {}
  Field(MeshPtr m, std::vector<double> values) : mesh(std::move(m)), v(std::move(values)) {}

  std::size_t size() const { return v.size(); }
  double& operator[](std::size_t i) { return v[i]; }
  double operator[](std::size_t i) const { return v[i]; }

  template <class F>
  static Field sample(MeshPtr m, F&& f) {
    Field out(m);
    for (std::size_t i = 0; i < out.size(); ++i) out.v[i] = f(m->nodes[i]);
    return out;
  }
};

double integrate(const Field& f);                   // integral of f dV
double integrate(const Field& f, const Field& g);   // integral of f g dV
double grad_energy(const Field& f);                 // integral of |grad f|^2 dV
double sup_norm(const Field& f);
double inf_value(const Field& f);
// sup over nodes with dist_to_boundary >= margin (margin >= 0)
double interior_sup(const Field& f, double margin);
double interior_inf(const Field& f, double margin);

// Monotone piecewise-cubic (Fritsch-Carlson) interpolation; throws if x is
// outside the mesh interval.
double interpolate(const Field& f, double x);

// CSV round-trip with 17 significant digits (columns: x,value).
void write_field_csv(const Field& f, std::ostream& os);
void write_field_csv(const Field& f, const std::string& path);
std::vector<std::pair<double, double>> read_xy_csv(std::istream& is);

}  // namespace lnflow

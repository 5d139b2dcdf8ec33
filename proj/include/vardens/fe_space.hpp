#pragma once

#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "vardens/geometry.hpp"
#include "vardens/mesh.hpp"
#include "vardens/quadrature.hpp"

namespace vardens {

enum class SpaceKind {
  P1Continuous,
  P1BubbleVector,
  P1ZeroMean,
  P2DG,
  P1DG,
  RT1,
};

std::string_view to_string(SpaceKind kind);

/// Parses "P1", "P1b", "P1_zero_mean", "P2_dG", "P1_dG", "RT1".
/// Throws InvalidArgument for anything else.
SpaceKind parse_space_kind(std::string_view name);

/// Degree-of-freedom layout of one finite element space on a mesh.
///
/// Global numbering:
///  - P1 / P1_zero_mean: one dof per vertex.
///  - P1b vector: component c owns [c*(nv+nc), (c+1)*(nv+nc)); inside that
///    block vertex dofs come first, then one bubble dof per cell. Local
///    order is (component, [vertices..., bubble]).
///  - P2_dG / P1_dG: cell-contiguous blocks.
///  - RT1: dim dofs per facet (first), then dim interior dofs per cell. Facet
///    dof j is the moment of w.nu_F against the facet hat function of the
///    facet's j-th (sorted) vertex, divided by |F|; interior dof i is the mean
///    of w_i over the cell. nu_F is the facet's global normal, so normal
///    traces are single valued.
///
/// Constrained dofs are the homogeneous Dirichlet vertex dofs of P1b and the
/// boundary facet dofs of RT1 (zero normal trace).
class FeSpace {
 public:
  FeSpace(std::shared_ptr<const Mesh> mesh, SpaceKind kind);

  SpaceKind kind() const { return kind_; }
  const Mesh& mesh() const { return *mesh_; }
  const std::shared_ptr<const Mesh>& mesh_ptr() const { return mesh_; }
  int dim() const { return mesh_->dim(); }

  int n_dofs() const { return n_dofs_; }
  int local_size() const { return local_size_; }
  /// 1 for scalar spaces, dim for vector spaces.
  int components() const { return components_; }

  std::span<const int> cell_dofs(int cell) const {
    return {dofs_.data() + static_cast<std::size_t>(cell) * local_size_,
            static_cast<std::size_t>(local_size_)};
  }

  bool is_constrained(int dof) const { return constrained_[dof]; }
  const std::vector<int>& constrained_dofs() const { return constrained_list_; }

  /// P1b vector: first dof of component c.
  int component_offset(int c) const { return c * (mesh_->n_vertices() + mesh_->n_cells()); }

  /// RT1 only: values (and divergences) of the local basis at physical x,
  /// which must lie in (or on the boundary of) `cell`.
  void rt_basis(int cell, const Point& x, std::span<Vec3> values,
                std::span<double> divergence) const;

  /// RT1 only: monomial coefficients (see reference::rt1_monomials) of the
  /// field with local dof values `local` on `cell`.
  void rt_monomial_coefficients(int cell, std::span<const double> local,
                                std::span<double> out) const;

  /// RT1 only: value at physical x of the field with monomial coefficients
  /// `mono_coeffs` on `cell`. Costs O(local_size) per point.
  Vec3 rt_monomial_value(int cell, std::span<const double> mono_coeffs, const Point& x) const;

  /// RT1 only: out_b = sum_k m_k C_kb, turning monomial moments m_k into
  /// moments against the local basis.
  void rt_basis_moments(int cell, std::span<const double> monomial_moments,
                        std::span<double> out) const;

  /// RT1 only: scaled coordinates used by the monomial basis of `cell`.
  Point rt_local_coordinates(int cell, const Point& x) const;
  double rt_scale(int cell) const { return rt_scale_[cell]; }

 private:
  void build_rt_basis();

  std::shared_ptr<const Mesh> mesh_;
  SpaceKind kind_;
  int n_dofs_ = 0;
  int local_size_ = 0;
  int components_ = 1;
  std::vector<int> dofs_;
  std::vector<bool> constrained_;
  std::vector<int> constrained_list_;

  // RT1: per-cell inverse of the dof/monomial matrix (column b = basis b).
  std::vector<double> rt_coeffs_;
  std::vector<Point> rt_center_;
  std::vector<double> rt_scale_;
};

/// Values of the local basis of a space on one cell at reference points.
/// Scalar spaces store their value in component 0 and gradient in row 0.
/// Gradients are physical. RT1 fills values and divergence only.
struct BasisValues {
  int n_points = 0;
  int n_local = 0;
  std::vector<Vec3> values;        // [point * n_local + i]
  std::vector<Mat3> gradients;     // [point * n_local + i][component][direction]
  std::vector<double> divergence;  // [point * n_local + i]

  const Vec3& value(int q, int i) const { return values[q * n_local + i]; }
  const Mat3& gradient(int q, int i) const { return gradients[q * n_local + i]; }
  double div(int q, int i) const { return divergence[q * n_local + i]; }
};

BasisValues eval_basis(const FeSpace& space, int cell, std::span<const Point> ref_points);

/// Reference tabulation of a scalar Lagrange element at the points of a rule.
enum class ScalarElement { P1, P1Bubble, P2 };

struct Tabulation {
  int n_points = 0;
  int n_functions = 0;
  std::vector<double> values;
  std::vector<Vec3> ref_grads;

  double value(int q, int i) const { return values[q * n_functions + i]; }
  const Vec3& ref_grad(int q, int i) const { return ref_grads[q * n_functions + i]; }
};

Tabulation tabulate(ScalarElement element, int dim, std::span<const Point> ref_points);

/// Coefficient vector bound to a space.
class FeField {
 public:
  explicit FeField(std::shared_ptr<const FeSpace> space);
  FeField(std::shared_ptr<const FeSpace> space, std::vector<double> coeffs);

  const FeSpace& space() const { return *space_; }
  const std::shared_ptr<const FeSpace>& space_ptr() const { return space_; }
  std::span<const double> coeffs() const { return coeffs_; }
  std::vector<double>& coeffs() { return coeffs_; }

  /// Value at reference point xi of `cell`; scalars are returned in [0].
  Vec3 value(int cell, const Point& xi) const;
  double scalar(int cell, const Point& xi) const { return value(cell, xi)[0]; }
  /// Physical gradient (Lagrange spaces); row c is grad of component c.
  Mat3 gradient(int cell, const Point& xi) const;
  double divergence(int cell, const Point& xi) const;

  /// Local dof values of `cell`.
  void gather(int cell, std::span<double> out) const;

 private:
  std::shared_ptr<const FeSpace> space_;
  std::vector<double> coeffs_;
};

}  // namespace vardens

#pragma once

#include <memory>
#include <string>
#include <vector>

#include "vardens/fe_space.hpp"
#include "vardens/linalg.hpp"

namespace vardens {

/// Elementwise L2 projection onto a discontinuous scalar space (P2_dG or
/// P1_dG): one local mass solve per cell.
FeField project_dg(std::shared_ptr<const FeSpace> space, const ScalarFunction& f);

/// How the constant mode of the P1_dG multiplier is removed.
enum class MultiplierGauge {
  MeanZero,  // multiplier shifted to zero mean
  PinDof,    // multiplier dof `pinned_dof` fixed to zero
};

/// L2 projection onto divergence-free RT1 fields with zero normal trace,
/// computed from the mixed problem
///   (s, e) + (phi, div e) = (v, e)   for RT1 e with e.nu = 0 on the boundary
///   (div s, q)            = 0        for q in P1_dG
/// whose RT1 component is the projection. The matrix is assembled and
/// factorized once; project() may then be called concurrently.
class RtProjectionWorkspace {
 public:
  explicit RtProjectionWorkspace(std::shared_ptr<const Mesh> mesh,
                                 MultiplierGauge gauge = MultiplierGauge::MeanZero,
                                 int pinned_dof = 0);

  const std::shared_ptr<const FeSpace>& space() const { return rt_; }
  const std::shared_ptr<const FeSpace>& multiplier_space() const { return multiplier_; }
  const Mesh& mesh() const { return *mesh_; }
  /// The factorized mixed matrix (one multiplier dof pinned).
  const SparseMatrix& system_matrix() const { return solver_.matrix(); }
  int free_rt_dofs() const { return n_free_; }

  FeField project(const VectorFunction& v) const;
  /// Projects a finite element vector field (P1b or RT1) on the same mesh.
  FeField project(const FeField& v) const;

  /// Multiplier component of the mixed solution for right-hand side v.
  FeField multiplier(const VectorFunction& v) const;

 private:
  std::vector<double> solve(std::vector<double> rhs_free) const;
  std::vector<double> solve_function(const VectorFunction& v) const;
  void add_cell_moments(int cell, std::span<const Vec3> values, std::vector<double>& rhs) const;
  FeField expand(const std::vector<double>& solution) const;

  std::shared_ptr<const Mesh> mesh_;
  std::shared_ptr<const FeSpace> rt_;
  std::shared_ptr<const FeSpace> multiplier_;
  MultiplierGauge gauge_;
  std::vector<int> free_index_;  // RT dof -> unknown index, -1 when constrained
  int n_free_ = 0;
  int n_unknowns_ = 0;
  std::vector<double> mean_weights_;  // integrals of the multiplier basis (MeanZero)
  DirectSolver solver_;
};

/// Nodal values of the divergence of an RT1 field at the vertices of `cell`
/// (its P1 expansion there).
std::vector<double> divergence_coefficients(const FeField& rt_field, int cell);

/// Nodal interpolation into the MINI velocity space: vertex dofs take the
/// vertex values, bubble dofs are zero, boundary vertex dofs are exactly
/// zero. A boundary value above 1e-12 is recorded in `warnings` (if given).
FeField interpolate_mini(std::shared_ptr<const FeSpace> space, const VectorFunction& u0,
                         std::vector<std::string>* warnings = nullptr);

}  // namespace vardens

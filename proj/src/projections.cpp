#include "vardens/projections.hpp"

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <sstream>

#include "vardens/assembly.hpp"
#include "vardens/errors.hpp"
#include "vardens/reference_element.hpp"

namespace vardens {

FeField project_dg(std::shared_ptr<const FeSpace> space, const ScalarFunction& f) {
  if (!space || (space->kind() != SpaceKind::P2DG && space->kind() != SpaceKind::P1DG)) {
    throw InvalidArgument("project_dg: target must be P2_dG or P1_dG");
  }
  const Mesh& mesh = space->mesh();
  const QuadratureRule& rule = default_cell_rule(mesh.dim());
  const Tabulation tab = tabulate(
      space->kind() == SpaceKind::P2DG ? ScalarElement::P2 : ScalarElement::P1, mesh.dim(),
      rule.points);
  const int n = tab.n_functions;
  Eigen::MatrixXd mass = Eigen::MatrixXd::Zero(n, n);
  for (int q = 0; q < rule.size(); ++q) {
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) mass(i, j) += rule.weights[q] * tab.value(q, i) * tab.value(q, j);
    }
  }
  const Eigen::LLT<Eigen::MatrixXd> chol(mass);

  FeField out(space);
  Eigen::VectorXd rhs(n);
  for (int c = 0; c < mesh.n_cells(); ++c) {
    const AffineMap& map = mesh.affine_map(c);
    rhs.setZero();
    for (int q = 0; q < rule.size(); ++q) {
      const double fx = f(map.to_physical(rule.points[q]));
      for (int i = 0; i < n; ++i) rhs(i) += rule.weights[q] * fx * tab.value(q, i);
    }
    const Eigen::VectorXd local = chol.solve(rhs);
    const auto dofs = space->cell_dofs(c);
    for (int i = 0; i < n; ++i) out.coeffs()[dofs[i]] = local(i);
  }
  return out;
}

RtProjectionWorkspace::RtProjectionWorkspace(std::shared_ptr<const Mesh> mesh,
                                             MultiplierGauge gauge, int pinned_dof)
    : mesh_(std::move(mesh)), gauge_(gauge) {
  if (!mesh_) throw InvalidArgument("RtProjectionWorkspace: null mesh");
  rt_ = std::make_shared<FeSpace>(mesh_, SpaceKind::RT1);
  multiplier_ = std::make_shared<FeSpace>(mesh_, SpaceKind::P1DG);
  const int n_rt = rt_->n_dofs();
  const int n_mult = multiplier_->n_dofs();
  if (gauge_ == MultiplierGauge::PinDof && (pinned_dof < 0 || pinned_dof >= n_mult)) {
    throw InvalidArgument("RtProjectionWorkspace: pinned multiplier dof out of range");
  }

  free_index_.assign(n_rt, -1);
  for (int i = 0; i < n_rt; ++i) {
    if (!rt_->is_constrained(i)) free_index_[i] = n_free_++;
  }
  n_unknowns_ = n_free_ + n_mult;

  const SparseMatrix mass = assemble_matrix(Form::Mass, *rt_, *rt_);
  const SparseMatrix div = assemble_matrix(Form::Divergence, *rt_, *multiplier_);

  SparsityBuilder pattern(n_unknowns_, n_unknowns_);
  for (int r = 0; r < n_rt; ++r) {
    if (free_index_[r] < 0) continue;
    for (int k = mass.row_ptr()[r]; k < mass.row_ptr()[r + 1]; ++k) {
      if (free_index_[mass.col_idx()[k]] >= 0) pattern.add(free_index_[r], free_index_[mass.col_idx()[k]]);
    }
  }
  for (int r = 0; r < n_mult; ++r) {
    for (int k = div.row_ptr()[r]; k < div.row_ptr()[r + 1]; ++k) {
      const int c = free_index_[div.col_idx()[k]];
      if (c < 0) continue;
      pattern.add(n_free_ + r, c);
      pattern.add(c, n_free_ + r);
    }
    pattern.add(n_free_ + r, n_free_ + r);  // keeps a diagonal for pinning
  }
  SparseMatrix system = pattern.build();
  for (int r = 0; r < n_rt; ++r) {
    if (free_index_[r] < 0) continue;
    for (int k = mass.row_ptr()[r]; k < mass.row_ptr()[r + 1]; ++k) {
      const int c = free_index_[mass.col_idx()[k]];
      if (c >= 0) system.add(free_index_[r], c, mass.values()[k]);
    }
  }
  for (int r = 0; r < n_mult; ++r) {
    for (int k = div.row_ptr()[r]; k < div.row_ptr()[r + 1]; ++k) {
      const int c = free_index_[div.col_idx()[k]];
      if (c < 0) continue;
      system.add(n_free_ + r, c, div.values()[k]);
      system.add(c, n_free_ + r, div.values()[k]);
    }
  }

  // Both gauges factorize the pinned matrix; a bordering row would be dense
  // and ruins the sparsity of the factors. MeanZero shifts the multiplier
  // afterwards.
  const int pin[1] = {n_free_ + (gauge_ == MultiplierGauge::PinDof ? pinned_dof : 0)};
  system.eliminate(pin);
  solver_.factorize(system);
  if (gauge_ == MultiplierGauge::MeanZero) {
    mean_weights_.assign(n_mult, 0.0);
    const QuadratureRule& rule = default_cell_rule(mesh_->dim());
    for (int c = 0; c < mesh_->n_cells(); ++c) {
      const BasisValues b = eval_basis(*multiplier_, c, rule.points);
      const double det = std::abs(mesh_->affine_map(c).determinant);
      const auto dofs = multiplier_->cell_dofs(c);
      for (int q = 0; q < rule.size(); ++q) {
        for (int i = 0; i < b.n_local; ++i) {
          mean_weights_[dofs[i]] += rule.weights[q] * det * b.value(q, i)[0];
        }
      }
    }
  }
}

std::vector<double> RtProjectionWorkspace::solve(std::vector<double> rhs_free) const {
  rhs_free.resize(solver_.size(), 0.0);
  std::vector<double> x = solver_.solve(rhs_free);
  const double res = relative_residual(solver_.matrix(), x, rhs_free);
  if (!(res <= kSolverTolerance)) {
    throw SolverError("RT projection: relative residual " + format_scientific(res));
  }
  if (!mean_weights_.empty()) {
    // P1_dG bases sum to one, so the constant mode is the all-ones vector.
    double mean = 0.0;
    double area = 0.0;
    for (std::size_t i = 0; i < mean_weights_.size(); ++i) {
      mean += mean_weights_[i] * x[n_free_ + i];
      area += mean_weights_[i];
    }
    for (std::size_t i = 0; i < mean_weights_.size(); ++i) x[n_free_ + i] -= mean / area;
  }
  return x;
}

FeField RtProjectionWorkspace::expand(const std::vector<double>& solution) const {
  FeField out(rt_);
  for (int i = 0; i < rt_->n_dofs(); ++i) {
    if (free_index_[i] >= 0) out.coeffs()[i] = solution[free_index_[i]];
  }
  return out;
}

void RtProjectionWorkspace::add_cell_moments(int cell, std::span<const Vec3> values,
                                             std::vector<double>& rhs) const {
  // Moments against the monomials first, then one transposed coefficient
  // apply, instead of evaluating every basis function at every point.
  const QuadratureRule& rule = default_cell_rule(mesh_->dim());
  const AffineMap& map = mesh_->affine_map(cell);
  const double det = std::abs(map.determinant);
  const int n = rt_->local_size();
  std::array<Vec3, 15> mono;
  std::array<double, 15> moments{};
  std::array<double, 15> local{};
  for (int q = 0; q < rule.size(); ++q) {
    const Point x = map.to_physical(rule.points[q]);
    reference::rt1_monomials(mesh_->dim(), rt_->rt_local_coordinates(cell, x),
                             std::span<Vec3>(mono.data(), n), {});
    const double w = rule.weights[q] * det;
    for (int k = 0; k < n; ++k) moments[k] += w * dot(values[q], mono[k]);
  }
  rt_->rt_basis_moments(cell, std::span<const double>(moments.data(), n),
                        std::span<double>(local.data(), n));
  const auto dofs = rt_->cell_dofs(cell);
  for (int i = 0; i < n; ++i) {
    const int fi = free_index_[dofs[i]];
    if (fi >= 0) rhs[fi] += local[i];
  }
}

std::vector<double> RtProjectionWorkspace::solve_function(const VectorFunction& v) const {
  const QuadratureRule& rule = default_cell_rule(mesh_->dim());
  std::vector<double> rhs(n_free_, 0.0);
  std::vector<Vec3> values(rule.size());
  for (int c = 0; c < mesh_->n_cells(); ++c) {
    const AffineMap& map = mesh_->affine_map(c);
    for (int q = 0; q < rule.size(); ++q) values[q] = v(map.to_physical(rule.points[q]));
    add_cell_moments(c, values, rhs);
  }
  return solve(std::move(rhs));
}

FeField RtProjectionWorkspace::project(const VectorFunction& v) const {
  return expand(solve_function(v));
}

FeField RtProjectionWorkspace::project(const FeField& v) const {
  const FeSpace& vs = v.space();
  if (vs.mesh_ptr().get() != mesh_.get()) {
    throw InvalidArgument("RtProjectionWorkspace::project: field lives on another mesh");
  }
  if (vs.components() != mesh_->dim()) {
    throw InvalidArgument("RtProjectionWorkspace::project: field must be vector valued");
  }
  const QuadratureRule& rule = default_cell_rule(mesh_->dim());
  std::vector<double> rhs(n_free_, 0.0);
  std::vector<double> local(vs.local_size());
  std::vector<Vec3> values(rule.size());
  // Lagrange values do not depend on the cell; RT1 values do.
  const bool per_cell = vs.kind() == SpaceKind::RT1;
  BasisValues bv = eval_basis(vs, 0, rule.points);
  for (int c = 0; c < mesh_->n_cells(); ++c) {
    if (per_cell && c > 0) bv = eval_basis(vs, c, rule.points);
    v.gather(c, local);
    for (int q = 0; q < rule.size(); ++q) {
      Vec3 vx{};
      for (int j = 0; j < bv.n_local; ++j) vx = vx + local[j] * bv.value(q, j);
      values[q] = vx;
    }
    add_cell_moments(c, values, rhs);
  }
  return expand(solve(std::move(rhs)));
}

FeField RtProjectionWorkspace::multiplier(const VectorFunction& v) const {
  const std::vector<double> x = solve_function(v);
  FeField out(multiplier_);
  for (int i = 0; i < multiplier_->n_dofs(); ++i) out.coeffs()[i] = x[n_free_ + i];
  return out;
}

std::vector<double> divergence_coefficients(const FeField& rt_field, int cell) {
  const FeSpace& space = rt_field.space();
  if (space.kind() != SpaceKind::RT1) {
    throw InvalidArgument("divergence_coefficients: field is not RT1");
  }
  const Mesh& mesh = space.mesh();
  std::vector<double> out;
  for (int i = 0; i <= mesh.dim(); ++i) {
    Point xi{};
    if (i > 0) xi[i - 1] = 1.0;
    out.push_back(rt_field.divergence(cell, xi));
  }
  return out;
}

FeField interpolate_mini(std::shared_ptr<const FeSpace> space, const VectorFunction& u0,
                         std::vector<std::string>* warnings) {
  if (!space || space->kind() != SpaceKind::P1BubbleVector) {
    throw InvalidArgument("interpolate_mini: target must be the P1b vector space");
  }
  const Mesh& mesh = space->mesh();
  FeField out(space);
  for (int v = 0; v < mesh.n_vertices(); ++v) {
    const Vec3 val = u0(mesh.vertices()[v]);
    if (mesh.is_boundary_vertex(v)) {
      if (warnings && norm(val) > 1e-12) {
        std::ostringstream msg;
        msg << "interpolate_mini: |u0| = " << norm(val) << " at boundary vertex " << v;
        warnings->push_back(msg.str());
      }
      continue;
    }
    for (int c = 0; c < mesh.dim(); ++c) out.coeffs()[space->component_offset(c) + v] = val[c];
  }
  return out;
}

}  // namespace vardens

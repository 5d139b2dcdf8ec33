#include "vardens/fe_space.hpp"

#include <Eigen/Dense>
#include <array>
#include <string>

#include "vardens/errors.hpp"
#include "vardens/reference_element.hpp"

namespace vardens {

std::string_view to_string(SpaceKind kind) {
  switch (kind) {
    case SpaceKind::P1Continuous: return "P1";
    case SpaceKind::P1BubbleVector: return "P1b";
    case SpaceKind::P1ZeroMean: return "P1_zero_mean";
    case SpaceKind::P2DG: return "P2_dG";
    case SpaceKind::P1DG: return "P1_dG";
    case SpaceKind::RT1: return "RT1";
  }
  return "?";
}

SpaceKind parse_space_kind(std::string_view name) {
  for (SpaceKind k : {SpaceKind::P1Continuous, SpaceKind::P1BubbleVector,
                      SpaceKind::P1ZeroMean, SpaceKind::P2DG, SpaceKind::P1DG,
                      SpaceKind::RT1}) {
    if (to_string(k) == name) return k;
  }
  throw InvalidArgument("unknown space kind '" + std::string(name) + "'");
}

FeSpace::FeSpace(std::shared_ptr<const Mesh> mesh, SpaceKind kind)
    : mesh_(std::move(mesh)), kind_(kind) {
  if (!mesh_) throw InvalidArgument("FeSpace: null mesh");
  const Mesh& m = *mesh_;
  const int d = m.dim();
  const int nv = m.n_vertices();
  const int nc = m.n_cells();

  switch (kind_) {
    case SpaceKind::P1Continuous:
    case SpaceKind::P1ZeroMean:
      local_size_ = d + 1;
      n_dofs_ = nv;
      for (int c = 0; c < nc; ++c) {
        for (int i = 0; i <= d; ++i) dofs_.push_back(m.cell(c)[i]);
      }
      constrained_.assign(n_dofs_, false);
      break;
    case SpaceKind::P1BubbleVector:
      components_ = d;
      local_size_ = d * (d + 2);
      n_dofs_ = d * (nv + nc);
      for (int c = 0; c < nc; ++c) {
        for (int comp = 0; comp < d; ++comp) {
          const int off = comp * (nv + nc);
          for (int i = 0; i <= d; ++i) dofs_.push_back(off + m.cell(c)[i]);
          dofs_.push_back(off + nv + c);
        }
      }
      constrained_.assign(n_dofs_, false);
      for (int comp = 0; comp < d; ++comp) {
        for (int v = 0; v < nv; ++v) {
          if (m.is_boundary_vertex(v)) constrained_[comp * (nv + nc) + v] = true;
        }
      }
      break;
    case SpaceKind::P2DG:
    case SpaceKind::P1DG: {
      local_size_ = kind_ == SpaceKind::P2DG ? reference::p2_count(d) : d + 1;
      n_dofs_ = local_size_ * nc;
      dofs_.resize(n_dofs_);
      for (int i = 0; i < n_dofs_; ++i) dofs_[i] = i;
      constrained_.assign(n_dofs_, false);
      break;
    }
    case SpaceKind::RT1: {
      components_ = d;
      local_size_ = reference::rt1_count(d);
      const int nf = m.n_facets();
      n_dofs_ = d * nf + d * nc;
      for (int c = 0; c < nc; ++c) {
        for (int lf = 0; lf <= d; ++lf) {
          const int f = m.cell_facets(c)[lf];
          for (int j = 0; j < d; ++j) dofs_.push_back(d * f + j);
        }
        for (int i = 0; i < d; ++i) dofs_.push_back(d * nf + d * c + i);
      }
      constrained_.assign(n_dofs_, false);
      for (int f = 0; f < nf; ++f) {
        if (!m.facet(f).is_boundary()) continue;
        for (int j = 0; j < d; ++j) constrained_[d * f + j] = true;
      }
      build_rt_basis();
      break;
    }
  }
  for (int i = 0; i < n_dofs_; ++i) {
    if (constrained_[i]) constrained_list_.push_back(i);
  }
}

Point FeSpace::rt_local_coordinates(int cell, const Point& x) const {
  return (1.0 / rt_scale_[cell]) * (x - rt_center_[cell]);
}

void FeSpace::build_rt_basis() {
  const Mesh& m = *mesh_;
  const int d = m.dim();
  const int n = local_size_;
  const int nc = m.n_cells();
  rt_coeffs_.resize(static_cast<std::size_t>(nc) * n * n);
  rt_center_.resize(nc);
  rt_scale_.resize(nc);

  const QuadratureRule facet_rule = simplex_rule(d - 1, 4);
  const QuadratureRule cell_rule = simplex_rule(d, 3);
  const double facet_ref_measure = d == 2 ? 1.0 : 0.5;
  const double cell_ref_measure = d == 2 ? 0.5 : 1.0 / 6.0;

  std::vector<Vec3> mono(n);
  Eigen::MatrixXd dofmat(n, n);
  for (int c = 0; c < nc; ++c) {
    rt_center_[c] = m.cell_centroid(c);
    rt_scale_[c] = m.cell_diameter(c);
    dofmat.setZero();
    for (int lf = 0; lf <= d; ++lf) {
      const FacetRecord& f = m.facet(m.cell_facets(c)[lf]);
      std::array<Point, 3> fv{};
      for (int j = 0; j < d; ++j) fv[j] = m.vertices()[f.vertices[j]];
      for (int q = 0; q < facet_rule.size(); ++q) {
        const Point& zeta = facet_rule.points[q];
        std::array<double, 3> mu{1.0, 0.0, 0.0};
        Point x = fv[0];
        for (int k = 0; k < d - 1; ++k) {
          mu[0] -= zeta[k];
          mu[k + 1] = zeta[k];
          x = x + zeta[k] * (fv[k + 1] - fv[0]);
        }
        reference::rt1_monomials(d, rt_local_coordinates(c, x), mono, {});
        const double w = facet_rule.weights[q] / facet_ref_measure;
        for (int k = 0; k < n; ++k) {
          const double flux = dot(mono[k], f.normal);
          for (int j = 0; j < d; ++j) dofmat(lf * d + j, k) += w * flux * mu[j];
        }
      }
    }
    const AffineMap& map = m.affine_map(c);
    for (int q = 0; q < cell_rule.size(); ++q) {
      const Point x = map.to_physical(cell_rule.points[q]);
      reference::rt1_monomials(d, rt_local_coordinates(c, x), mono, {});
      const double w = cell_rule.weights[q] / cell_ref_measure;
      for (int k = 0; k < n; ++k) {
        for (int i = 0; i < d; ++i) dofmat((d + 1) * d + i, k) += w * mono[k][i];
      }
    }
    const Eigen::MatrixXd inv = dofmat.partialPivLu().inverse();
    double* out = rt_coeffs_.data() + static_cast<std::size_t>(c) * n * n;
    for (int k = 0; k < n; ++k) {
      for (int b = 0; b < n; ++b) out[k * n + b] = inv(k, b);
    }
  }
}

void FeSpace::rt_basis(int cell, const Point& x, std::span<Vec3> values,
                       std::span<double> divergence) const {
  if (kind_ != SpaceKind::RT1) throw InvalidArgument("rt_basis: space is not RT1");
  const int d = dim();
  const int n = local_size_;
  std::array<Vec3, 15> mono;
  std::array<double, 15> mdiv;
  reference::rt1_monomials(d, rt_local_coordinates(cell, x), mono, mdiv);
  const double inv_scale = 1.0 / rt_scale_[cell];
  const double* coef = rt_coeffs_.data() + static_cast<std::size_t>(cell) * n * n;
  for (int b = 0; b < n; ++b) {
    Vec3 v{};
    double dv = 0.0;
    for (int k = 0; k < n; ++k) {
      const double ck = coef[k * n + b];
      v = v + ck * mono[k];
      dv += ck * mdiv[k];
    }
    values[b] = v;
    if (!divergence.empty()) divergence[b] = dv * inv_scale;
  }
}

void FeSpace::rt_monomial_coefficients(int cell, std::span<const double> local,
                                       std::span<double> out) const {
  if (kind_ != SpaceKind::RT1) {
    throw InvalidArgument("rt_monomial_coefficients: space is not RT1");
  }
  const int n = local_size_;
  const double* coef = rt_coeffs_.data() + static_cast<std::size_t>(cell) * n * n;
  for (int k = 0; k < n; ++k) {
    double s = 0.0;
    for (int b = 0; b < n; ++b) s += coef[k * n + b] * local[b];
    out[k] = s;
  }
}

Vec3 FeSpace::rt_monomial_value(int cell, std::span<const double> mono_coeffs,
                                const Point& x) const {
  std::array<Vec3, 15> mono;
  reference::rt1_monomials(dim(), rt_local_coordinates(cell, x), mono, {});
  Vec3 v{};
  for (int k = 0; k < local_size_; ++k) v = v + mono_coeffs[k] * mono[k];
  return v;
}

void FeSpace::rt_basis_moments(int cell, std::span<const double> monomial_moments,
                               std::span<double> out) const {
  if (kind_ != SpaceKind::RT1) throw InvalidArgument("rt_basis_moments: space is not RT1");
  const int n = local_size_;
  const double* coef = rt_coeffs_.data() + static_cast<std::size_t>(cell) * n * n;
  for (int b = 0; b < n; ++b) out[b] = 0.0;
  for (int k = 0; k < n; ++k) {
    const double m = monomial_moments[k];
    for (int b = 0; b < n; ++b) out[b] += m * coef[k * n + b];
  }
}

BasisValues eval_basis(const FeSpace& space, int cell, std::span<const Point> ref_points) {
  const Mesh& m = space.mesh();
  if (cell < 0 || cell >= m.n_cells()) throw InvalidArgument("eval_basis: bad cell index");
  const int d = m.dim();
  const int n = space.local_size();
  BasisValues out;
  out.n_points = static_cast<int>(ref_points.size());
  out.n_local = n;
  out.values.assign(out.n_points * n, Vec3{});
  out.divergence.assign(out.n_points * n, 0.0);
  const AffineMap& map = m.affine_map(cell);

  if (space.kind() == SpaceKind::RT1) {
    for (int q = 0; q < out.n_points; ++q) {
      space.rt_basis(cell, map.to_physical(ref_points[q]),
                     std::span<Vec3>(out.values.data() + q * n, n),
                     std::span<double>(out.divergence.data() + q * n, n));
    }
    return out;
  }

  out.gradients.assign(out.n_points * n, Mat3{});
  std::array<double, 10> v{};
  std::array<Vec3, 10> g{};
  for (int q = 0; q < out.n_points; ++q) {
    const Point& xi = ref_points[q];
    int ns = 0;
    switch (space.kind()) {
      case SpaceKind::P2DG:
        reference::p2(d, xi, v, g);
        ns = reference::p2_count(d);
        break;
      case SpaceKind::P1BubbleVector:
        reference::p1(d, xi, v, g);
        reference::bubble(d, xi, v[d + 1], g[d + 1]);
        ns = d + 2;
        break;
      default:
        reference::p1(d, xi, v, g);
        ns = d + 1;
        break;
    }
    for (int a = 0; a < ns; ++a) g[a] = matvec_transposed(map.inverse, g[a]);

    if (space.kind() == SpaceKind::P1BubbleVector) {
      for (int comp = 0; comp < d; ++comp) {
        for (int a = 0; a < ns; ++a) {
          const int i = q * n + comp * ns + a;
          out.values[i][comp] = v[a];
          out.gradients[i][comp] = g[a];
          out.divergence[i] = g[a][comp];
        }
      }
    } else {
      for (int a = 0; a < ns; ++a) {
        out.values[q * n + a][0] = v[a];
        out.gradients[q * n + a][0] = g[a];
      }
    }
  }
  return out;
}

Tabulation tabulate(ScalarElement element, int dim, std::span<const Point> ref_points) {
  Tabulation t;
  t.n_points = static_cast<int>(ref_points.size());
  t.n_functions = element == ScalarElement::P1        ? dim + 1
                  : element == ScalarElement::P1Bubble ? dim + 2
                                                       : reference::p2_count(dim);
  t.values.resize(t.n_points * t.n_functions);
  t.ref_grads.resize(t.n_points * t.n_functions);
  for (int q = 0; q < t.n_points; ++q) {
    std::span<double> v(t.values.data() + q * t.n_functions, t.n_functions);
    std::span<Vec3> g(t.ref_grads.data() + q * t.n_functions, t.n_functions);
    if (element == ScalarElement::P2) {
      reference::p2(dim, ref_points[q], v, g);
    } else {
      reference::p1(dim, ref_points[q], v, g);
      if (element == ScalarElement::P1Bubble) {
        reference::bubble(dim, ref_points[q], v[dim + 1], g[dim + 1]);
      }
    }
  }
  return t;
}

FeField::FeField(std::shared_ptr<const FeSpace> space) : space_(std::move(space)) {
  if (!space_) throw InvalidArgument("FeField: null space");
  coeffs_.assign(space_->n_dofs(), 0.0);
}

FeField::FeField(std::shared_ptr<const FeSpace> space, std::vector<double> coeffs)
    : space_(std::move(space)), coeffs_(std::move(coeffs)) {
  if (!space_) throw InvalidArgument("FeField: null space");
  if (static_cast<int>(coeffs_.size()) != space_->n_dofs()) {
    throw InvalidArgument("FeField: coefficient vector has length " +
                          std::to_string(coeffs_.size()) + ", space has " +
                          std::to_string(space_->n_dofs()) + " dofs");
  }
}

void FeField::gather(int cell, std::span<double> out) const {
  const auto dofs = space_->cell_dofs(cell);
  for (std::size_t i = 0; i < dofs.size(); ++i) out[i] = coeffs_[dofs[i]];
}

Vec3 FeField::value(int cell, const Point& xi) const {
  const BasisValues b = eval_basis(*space_, cell, std::span<const Point>(&xi, 1));
  const auto dofs = space_->cell_dofs(cell);
  Vec3 v{};
  for (int i = 0; i < b.n_local; ++i) v = v + coeffs_[dofs[i]] * b.value(0, i);
  return v;
}

Mat3 FeField::gradient(int cell, const Point& xi) const {
  if (space_->kind() == SpaceKind::RT1) {
    throw InvalidArgument("FeField::gradient: not available for RT1");
  }
  const BasisValues b = eval_basis(*space_, cell, std::span<const Point>(&xi, 1));
  const auto dofs = space_->cell_dofs(cell);
  Mat3 g{};
  for (int i = 0; i < b.n_local; ++i) {
    const double c = coeffs_[dofs[i]];
    for (int r = 0; r < 3; ++r) g[r] = g[r] + c * b.gradient(0, i)[r];
  }
  return g;
}

double FeField::divergence(int cell, const Point& xi) const {
  const BasisValues b = eval_basis(*space_, cell, std::span<const Point>(&xi, 1));
  const auto dofs = space_->cell_dofs(cell);
  double s = 0.0;
  for (int i = 0; i < b.n_local; ++i) s += coeffs_[dofs[i]] * b.div(0, i);
  return s;
}

}  // namespace vardens

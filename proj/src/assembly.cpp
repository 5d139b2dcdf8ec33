#include "vardens/assembly.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "vardens/errors.hpp"
#include "vardens/reference_element.hpp"

namespace vardens {

namespace {

double reference_measure(int dim) { return dim == 1 ? 1.0 : dim == 2 ? 0.5 : 1.0 / 6.0; }

bool is_dg_scalar(const FeSpace& s) {
  return s.kind() == SpaceKind::P2DG || s.kind() == SpaceKind::P1DG;
}

void require_same_mesh(const FeSpace& a, const FeSpace& b, const char* what) {
  if (a.mesh_ptr().get() != b.mesh_ptr().get()) {
    throw InvalidArgument(std::string(what) + ": spaces live on different meshes");
  }
}

/// Values of a discontinuous scalar basis at physical x in `cell`.
int dg_basis(const FeSpace& space, int cell, const Point& x, std::span<double> values) {
  const Point xi = space.mesh().affine_map(cell).to_reference(x);
  if (space.kind() == SpaceKind::P2DG) {
    reference::p2(space.dim(), xi, values, {});
  } else {
    reference::p1(space.dim(), xi, values, {});
  }
  return space.local_size();
}

/// An RT1 field restricted to one cell, held as monomial coefficients.
class RtCellField {
 public:
  RtCellField(const FeField& field, int cell) : space_(field.space()), cell_(cell) {
    std::array<double, 15> local{};
    const int n = space_.local_size();
    field.gather(cell, std::span<double>(local.data(), n));
    space_.rt_monomial_coefficients(cell, std::span<const double>(local.data(), n),
                                    std::span<double>(mono_.data(), n));
  }
  Vec3 value(const Point& x) const {
    return space_.rt_monomial_value(cell_, std::span<const double>(mono_.data(), space_.local_size()), x);
  }

 private:
  const FeSpace& space_;
  int cell_;
  std::array<double, 15> mono_{};
};

double dg_value(const FeField& field, int cell, const Point& x) {
  std::array<double, 10> phi{};
  const int n = dg_basis(field.space(), cell, x, phi);
  const auto dofs = field.space().cell_dofs(cell);
  double v = 0.0;
  for (int i = 0; i < n; ++i) v += field.coeffs()[dofs[i]] * phi[i];
  return v;
}

ScalarElement scalar_element(const FeSpace& s) {
  return s.kind() == SpaceKind::P2DG ? ScalarElement::P2 : ScalarElement::P1;
}

/// (w . grad phi_j, psi_i) for scalar Lagrange trial/test spaces. Reference
/// values are tabulated once; only gradients are mapped per cell.
void assemble_transport(const FeField& w, const FeSpace& trial, const FeSpace& test,
                        SparseMatrix& a) {
  const Mesh& mesh = trial.mesh();
  const int d = mesh.dim();
  const QuadratureRule& rule = default_cell_rule(d);
  const Tabulation tt = tabulate(scalar_element(trial), d, rule.points);
  const Tabulation ts = tabulate(scalar_element(test), d, rule.points);
  const int nt = tt.n_functions;
  const int ns = ts.n_functions;
  const FeSpace& rt = w.space();
  const int nw = rt.local_size();
  std::vector<double> local(ns * nt);
  std::vector<double> advect(nt);
  std::array<double, 15> wlocal{};
  std::array<double, 15> wmono{};
  std::array<Vec3, 15> mono;
  for (int c = 0; c < mesh.n_cells(); ++c) {
    const AffineMap& map = mesh.affine_map(c);
    const double det = std::abs(map.determinant);
    w.gather(c, std::span<double>(wlocal.data(), nw));
    rt.rt_monomial_coefficients(c, std::span<const double>(wlocal.data(), nw),
                                std::span<double>(wmono.data(), nw));
    std::fill(local.begin(), local.end(), 0.0);
    for (int q = 0; q < rule.size(); ++q) {
      const Point x = map.to_physical(rule.points[q]);
      reference::rt1_monomials(d, rt.rt_local_coordinates(c, x), std::span<Vec3>(mono.data(), nw), {});
      Vec3 wval{};
      for (int k = 0; k < nw; ++k) wval = wval + wmono[k] * mono[k];
      // w . (J^-T g) = (J^-1 w) . g
      const Vec3 wref = matvec(map.inverse, wval);
      const double wq = rule.weights[q] * det;
      for (int j = 0; j < nt; ++j) advect[j] = wq * dot(wref, tt.ref_grad(q, j));
      for (int i = 0; i < ns; ++i) {
        const double vi = ts.value(q, i);
        for (int j = 0; j < nt; ++j) local[i * nt + j] += vi * advect[j];
      }
    }
    a.add_block(test.cell_dofs(c), trial.cell_dofs(c), local);
  }
}

std::vector<CellPoint> cell_points(const Mesh& mesh, int cell, const QuadratureRule& rule) {
  const AffineMap& map = mesh.affine_map(cell);
  std::vector<CellPoint> pts(rule.size());
  for (int q = 0; q < rule.size(); ++q) {
    pts[q] = {cell, rule.points[q], map.to_physical(rule.points[q]),
              rule.weights[q] * std::abs(map.determinant)};
  }
  return pts;
}

using Polygon = std::vector<Point>;

Polygon clip_half_plane(const Polygon& poly, const std::array<double, 3>& s, double sign) {
  auto value = [&](const Point& z) {
    return sign * (s[0] + z[0] * (s[1] - s[0]) + z[1] * (s[2] - s[0]));
  };
  Polygon out;
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Point& a = poly[i];
    const Point& b = poly[(i + 1) % n];
    const double va = value(a);
    const double vb = value(b);
    if (va >= 0.0) out.push_back(a);
    if ((va > 0.0 && vb < 0.0) || (va < 0.0 && vb > 0.0)) {
      const double t = va / (va - vb);
      out.push_back(a + t * (b - a));
    }
  }
  return out;
}

}  // namespace

Vec3 rt_value(const FeField& transport, int cell, const Point& x) {
  return RtCellField(transport, cell).value(x);
}

double normal_flux(const FeField& transport, int facet, const Point& x) {
  const FacetRecord& f = transport.space().mesh().facet(facet);
  return dot(rt_value(transport, f.minus_cell, x), f.normal);
}

std::vector<FacetPoint> split_facet_quadrature(const Mesh& mesh, int facet,
                                               std::span<const double> vertex_values,
                                               const QuadratureRule& facet_rule) {
  const int d = mesh.dim();
  const FacetRecord& f = mesh.facet(facet);
  std::array<Point, 3> fv{};
  for (int j = 0; j < d; ++j) fv[j] = mesh.vertices()[f.vertices[j]];
  const double scale = f.measure / reference_measure(d - 1);

  double smax = 0.0;
  double smin = 0.0;
  for (int j = 0; j < d; ++j) {
    smax = std::max(smax, vertex_values[j]);
    smin = std::min(smin, vertex_values[j]);
  }
  const bool sign_change = smax > 0.0 && smin < 0.0;

  // Pieces are simplices in facet reference coordinates.
  std::vector<std::array<Point, 3>> pieces;
  if (d == 2) {
    if (sign_change) {
      const double t = vertex_values[0] / (vertex_values[0] - vertex_values[1]);
      pieces.push_back({Point{0.0, 0.0, 0.0}, Point{t, 0.0, 0.0}, Point{}});
      pieces.push_back({Point{t, 0.0, 0.0}, Point{1.0, 0.0, 0.0}, Point{}});
    } else {
      pieces.push_back({Point{0.0, 0.0, 0.0}, Point{1.0, 0.0, 0.0}, Point{}});
    }
  } else {
    const Polygon tri{{0.0, 0.0, 0.0}, {1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}};
    if (sign_change) {
      const std::array<double, 3> s{vertex_values[0], vertex_values[1], vertex_values[2]};
      for (double sign : {1.0, -1.0}) {
        const Polygon part = clip_half_plane(tri, s, sign);
        for (std::size_t k = 1; k + 1 < part.size(); ++k) {
          pieces.push_back({part[0], part[k], part[k + 1]});
        }
      }
    } else {
      pieces.push_back({tri[0], tri[1], tri[2]});
    }
  }

  std::vector<FacetPoint> out;
  out.reserve(pieces.size() * facet_rule.size());
  for (const auto& piece : pieces) {
    double jac = 0.0;
    if (d == 2) {
      jac = std::abs(piece[1][0] - piece[0][0]);
    } else {
      const Vec3 e1 = piece[1] - piece[0];
      const Vec3 e2 = piece[2] - piece[0];
      jac = std::abs(e1[0] * e2[1] - e1[1] * e2[0]);
    }
    if (jac <= 0.0) continue;
    for (int q = 0; q < facet_rule.size(); ++q) {
      Point zeta = piece[0];
      for (int k = 0; k < d - 1; ++k) {
        zeta = zeta + facet_rule.points[q][k] * (piece[k + 1] - piece[0]);
      }
      Point x = fv[0];
      for (int k = 0; k < d - 1; ++k) x = x + zeta[k] * (fv[k + 1] - fv[0]);
      out.push_back({x, facet_rule.weights[q] * jac * scale});
    }
  }
  return out;
}

SparseMatrix assemble_matrix(Form form, const FeSpace& trial, const FeSpace& test,
                             const FormCoefficients& coefficients) {
  require_same_mesh(trial, test, "assemble_matrix");
  const Mesh& mesh = trial.mesh();
  switch (form) {
    case Form::Mass:
      if (trial.components() != test.components()) {
        throw InvalidArgument("assemble_matrix(Mass): component counts differ");
      }
      break;
    case Form::Stiffness:
      if (trial.kind() == SpaceKind::RT1 || test.kind() == SpaceKind::RT1 ||
          trial.components() != test.components()) {
        throw InvalidArgument("assemble_matrix(Stiffness): needs matching Lagrange spaces");
      }
      break;
    case Form::Divergence:
      if (trial.components() != mesh.dim() || test.components() != 1) {
        throw InvalidArgument("assemble_matrix(Divergence): trial must be vector, test scalar");
      }
      break;
    case Form::Transport:
      if (!coefficients.transport || coefficients.transport->space().kind() != SpaceKind::RT1) {
        throw InvalidArgument("assemble_matrix(Transport): transport field must be RT1");
      }
      require_same_mesh(coefficients.transport->space(), trial, "assemble_matrix");
      if (trial.components() != 1 || test.components() != 1 || trial.kind() == SpaceKind::RT1) {
        throw InvalidArgument("assemble_matrix(Transport): needs scalar Lagrange spaces");
      }
      break;
  }

  SparsityBuilder pattern(test.n_dofs(), trial.n_dofs());
  for (int c = 0; c < mesh.n_cells(); ++c) pattern.add_block(test.cell_dofs(c), trial.cell_dofs(c));
  SparseMatrix a = pattern.build();
  if (form == Form::Transport) {
    assemble_transport(*coefficients.transport, trial, test, a);
    return a;
  }

  const QuadratureRule& rule = default_cell_rule(mesh.dim());
  const int nt = trial.local_size();
  const int ns = test.local_size();
  std::vector<double> local(ns * nt);
  for (int c = 0; c < mesh.n_cells(); ++c) {
    const BasisValues bt = eval_basis(trial, c, rule.points);
    BasisValues test_values;
    if (&trial != &test) test_values = eval_basis(test, c, rule.points);
    const BasisValues& bs = (&trial == &test) ? bt : test_values;
    const AffineMap& map = mesh.affine_map(c);
    const double det = std::abs(map.determinant);
    std::fill(local.begin(), local.end(), 0.0);
    for (int q = 0; q < rule.size(); ++q) {
      const double wq = rule.weights[q] * det;
      for (int i = 0; i < ns; ++i) {
        for (int j = 0; j < nt; ++j) {
          double v = 0.0;
          switch (form) {
            case Form::Mass:
              v = dot(bs.value(q, i), bt.value(q, j));
              break;
            case Form::Stiffness:
              for (int r = 0; r < trial.components(); ++r) {
                v += dot(bs.gradient(q, i)[r], bt.gradient(q, j)[r]);
              }
              break;
            case Form::Divergence:
              v = bs.value(q, i)[0] * bt.div(q, j);
              break;
            case Form::Transport:
              break;  // handled by assemble_transport
          }
          local[i * nt + j] += wq * v;
        }
      }
    }
    a.add_block(test.cell_dofs(c), trial.cell_dofs(c), local);
  }
  return a;
}

SparseMatrix assemble_facet_upwind(const FeField& transport, const FeSpace& trial,
                                   const FeSpace& test) {
  if (transport.space().kind() != SpaceKind::RT1) {
    throw InvalidArgument("assemble_facet_upwind: transport field must be RT1");
  }
  if (!is_dg_scalar(trial) || !is_dg_scalar(test)) {
    throw InvalidArgument("assemble_facet_upwind: trial and test must be discontinuous scalars");
  }
  require_same_mesh(trial, test, "assemble_facet_upwind");
  require_same_mesh(transport.space(), trial, "assemble_facet_upwind");
  const Mesh& mesh = trial.mesh();
  const int d = mesh.dim();

  SparsityBuilder pattern(test.n_dofs(), trial.n_dofs());
  for (int c = 0; c < mesh.n_cells(); ++c) pattern.add_block(test.cell_dofs(c), trial.cell_dofs(c));
  for (const auto& f : mesh.facets()) {
    if (f.is_boundary()) continue;
    pattern.add_block(test.cell_dofs(f.minus_cell), trial.cell_dofs(f.plus_cell));
    pattern.add_block(test.cell_dofs(f.plus_cell), trial.cell_dofs(f.minus_cell));
  }
  SparseMatrix a = pattern.build();

  const QuadratureRule& rule = default_facet_rule(d);
  const int nt = trial.local_size();
  const int ns = test.local_size();
  std::array<double, 10> tm{}, tp{}, sm{}, sp{};
  for (int fi = 0; fi < mesh.n_facets(); ++fi) {
    const FacetRecord& f = mesh.facet(fi);
    if (f.is_boundary()) continue;
    const RtCellField w(transport, f.minus_cell);
    std::array<double, 3> vflux{};
    for (int j = 0; j < d; ++j) vflux[j] = dot(w.value(mesh.vertices()[f.vertices[j]]), f.normal);
    const auto points = split_facet_quadrature(mesh, fi, std::span<const double>(vflux.data(), d), rule);

    // Rows of the inflow ("downwind") cell; columns of both cells.
    std::vector<double> mm(ns * nt, 0.0), mp(ns * nt, 0.0), pp(ns * nt, 0.0), pm(ns * nt, 0.0);
    for (const auto& pt : points) {
      const double s = dot(w.value(pt.x), f.normal);
      if (s == 0.0) continue;
      dg_basis(trial, f.minus_cell, pt.x, tm);
      dg_basis(trial, f.plus_cell, pt.x, tp);
      dg_basis(test, f.minus_cell, pt.x, sm);
      dg_basis(test, f.plus_cell, pt.x, sp);
      if (s < 0.0) {
        // -s (u_minus - u_plus) v_minus
        for (int i = 0; i < ns; ++i) {
          for (int j = 0; j < nt; ++j) {
            mm[i * nt + j] += pt.weight * (-s) * sm[i] * tm[j];
            mp[i * nt + j] += pt.weight * s * sm[i] * tp[j];
          }
        }
      } else {
        // s (u_plus - u_minus) v_plus
        for (int i = 0; i < ns; ++i) {
          for (int j = 0; j < nt; ++j) {
            pp[i * nt + j] += pt.weight * s * sp[i] * tp[j];
            pm[i * nt + j] += pt.weight * (-s) * sp[i] * tm[j];
          }
        }
      }
    }
    a.add_block(test.cell_dofs(f.minus_cell), trial.cell_dofs(f.minus_cell), mm);
    a.add_block(test.cell_dofs(f.minus_cell), trial.cell_dofs(f.plus_cell), mp);
    a.add_block(test.cell_dofs(f.plus_cell), trial.cell_dofs(f.plus_cell), pp);
    a.add_block(test.cell_dofs(f.plus_cell), trial.cell_dofs(f.minus_cell), pm);
  }
  return a;
}

double upwind_jump_dissipation(const FeField& transport, const FeField& rho) {
  if (transport.space().kind() != SpaceKind::RT1 || !is_dg_scalar(rho.space())) {
    throw InvalidArgument("upwind_jump_dissipation: expects an RT1 transport and a dG scalar");
  }
  const Mesh& mesh = rho.space().mesh();
  const int d = mesh.dim();
  const QuadratureRule& rule = default_facet_rule(d);
  double total = 0.0;
  for (int fi = 0; fi < mesh.n_facets(); ++fi) {
    const FacetRecord& f = mesh.facet(fi);
    if (f.is_boundary()) continue;
    const RtCellField w(transport, f.minus_cell);
    std::array<double, 3> vflux{};
    for (int j = 0; j < d; ++j) vflux[j] = dot(w.value(mesh.vertices()[f.vertices[j]]), f.normal);
    for (const auto& pt : split_facet_quadrature(mesh, fi, std::span<const double>(vflux.data(), d), rule)) {
      const double s = dot(w.value(pt.x), f.normal);
      const double jump = dg_value(rho, f.minus_cell, pt.x) - dg_value(rho, f.plus_cell, pt.x);
      total += 0.5 * pt.weight * std::abs(s) * jump * jump;
    }
  }
  return total;
}

double integrate(const Mesh& mesh, const std::function<double(const CellPoint&)>& integrand,
                 const QuadratureRule& rule) {
  double total = 0.0;
  for (int c = 0; c < mesh.n_cells(); ++c) {
    for (const CellPoint& p : cell_points(mesh, c, rule)) total += p.weight * integrand(p);
  }
  return total;
}

double integrate(const Mesh& mesh, const std::function<double(const CellPoint&)>& integrand) {
  return integrate(mesh, integrand, default_cell_rule(mesh.dim()));
}

}  // namespace vardens

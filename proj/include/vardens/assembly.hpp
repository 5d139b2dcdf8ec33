#pragma once

#include <functional>
#include <span>
#include <vector>

#include "vardens/fe_space.hpp"
#include "vardens/quadrature.hpp"
#include "vardens/sparse_matrix.hpp"

namespace vardens {

/// Bilinear forms available through assemble_matrix. Rows are test dofs,
/// columns trial dofs.
enum class Form {
  Mass,        // (u, v)
  Stiffness,   // (grad u, grad v)
  Divergence,  // (q, div v): trial vector space, test scalar space
  Transport,   // (w . grad u, v): w is an RT1 coefficient field
};

struct FormCoefficients {
  const FeField* transport = nullptr;
};

/// Cell-by-cell assembly with the default cell rule. Throws InvalidArgument
/// when spaces live on different meshes or the form does not apply to them.
SparseMatrix assemble_matrix(Form form, const FeSpace& trial, const FeSpace& test,
                             const FormCoefficients& coefficients = {});

/// Upwind facet operator of the density equation,
///   -sum_K < w . [[u]], v >_{inflow part of dK},
/// on discontinuous scalar spaces. The facet is split along the zero line of
/// the (linear) normal flux w.nu, so each piece has one upwind side and is
/// integrated exactly. Boundary facets contribute nothing (w.nu = 0 there).
/// The sparsity pattern couples every pair of face neighbours regardless of
/// the flow direction, so it does not change between time steps.
SparseMatrix assemble_facet_upwind(const FeField& transport, const FeSpace& trial,
                                   const FeSpace& test);

/// A facet quadrature point: physical location and weight (facet measure
/// included).
struct FacetPoint {
  Point x;
  double weight;
};

/// Quadrature of an interior facet split where the linear function with
/// values `vertex_values` at the facet's (sorted) vertices changes sign.
std::vector<FacetPoint> split_facet_quadrature(const Mesh& mesh, int facet,
                                               std::span<const double> vertex_values,
                                               const QuadratureRule& facet_rule);

/// Normal flux w.nu_F of an RT1 field at a point of facet `facet`.
double normal_flux(const FeField& transport, int facet, const Point& x);

/// Value of an RT1 field at physical point x of `cell`.
Vec3 rt_value(const FeField& transport, int cell, const Point& x);

/// 1/2 sum_F || |w.nu|^(1/2) [[rho]] ||^2_F over interior facets.
double upwind_jump_dissipation(const FeField& transport, const FeField& rho);

/// A cell quadrature point; weight includes |det J|.
struct CellPoint {
  int cell;
  Point xi;
  Point x;
  double weight;
};

double integrate(const Mesh& mesh, const std::function<double(const CellPoint&)>& integrand,
                 const QuadratureRule& rule);
double integrate(const Mesh& mesh, const std::function<double(const CellPoint&)>& integrand);

}  // namespace vardens

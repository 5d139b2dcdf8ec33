#pragma once

#include <vector>

#include "vardens/geometry.hpp"

namespace vardens {

/// Points and positive weights on a reference simplex. The reference simplex
/// has vertices 0, e_1, ..., e_dim, so the weights sum to 1/dim!.
struct QuadratureRule {
  int dim = 0;
  int degree = 0;
  std::vector<Point> points;
  std::vector<double> weights;

  int size() const { return static_cast<int>(weights.size()); }
};

/// Gauss-Jacobi rule with m points on [-1, 1] for the weight (1-x)^alpha.
/// Computed by Golub-Welsch.
QuadratureRule gauss_jacobi(int m, double alpha);

/// Collapsed (conical product) rule on the reference simplex of dimension
/// dim in {1, 2, 3}, exact for polynomials of total degree <= degree.
QuadratureRule simplex_rule(int dim, int degree);

/// Cell rule used by all volume integrals of the solver: exact to degree 10
/// on triangles and degree 8 on tetrahedra.
const QuadratureRule& default_cell_rule(int dim);

/// Facet rule (a rule of dimension dim-1) exact to degree 7.
const QuadratureRule& default_facet_rule(int dim);

inline constexpr int kCellRuleDegree2d = 10;
inline constexpr int kCellRuleDegree3d = 8;
inline constexpr int kFacetRuleDegree = 7;

}  // namespace vardens

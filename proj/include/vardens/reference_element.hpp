#pragma once

#include <span>

#include "vardens/geometry.hpp"

namespace vardens::reference {

// Shape functions on the reference simplex with barycentric coordinates
// lambda_0 = 1 - sum(xi), lambda_i = xi_{i-1}. Gradients are with respect to
// the reference coordinates xi.

int p1_count(int dim);
int p2_count(int dim);

/// lambda_i for i = 0..dim.
void p1(int dim, const Point& xi, std::span<double> values, std::span<Vec3> grads);

/// Cell bubble normalised to 1 at the barycentre: 27 l0 l1 l2 (2D) and
/// 256 l0 l1 l2 l3 (3D).
void bubble(int dim, const Point& xi, double& value, Vec3& grad);

/// Quadratic Lagrange basis: vertex functions l_i (2 l_i - 1) first, then edge
/// functions 4 l_i l_j for the edges (i, j), i < j, in lexicographic order.
void p2(int dim, const Point& xi, std::span<double> values, std::span<Vec3> grads);

/// Number of local Raviart-Thomas (index 1) functions: 8 on triangles and
/// 15 on tetrahedra.
int rt1_count(int dim);

/// Monomial basis of P1^d + x P1_hom in scaled local coordinates eta:
/// e_i, eta_j e_i, eta eta_j. Divergences are with respect to eta.
void rt1_monomials(int dim, const Point& eta, std::span<Vec3> values,
                   std::span<double> divergence);

}  // namespace vardens::reference

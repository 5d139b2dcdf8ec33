#include "vardens/quadrature.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <string>

#include "vardens/errors.hpp"

namespace vardens {

QuadratureRule gauss_jacobi(int m, double alpha) {
  if (m < 1) throw InvalidArgument("gauss_jacobi: m must be >= 1");
  const double a = alpha;
  const double b = 0.0;
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(m, m);
  for (int n = 0; n < m; ++n) {
    const double s = 2.0 * n + a + b;
    jac(n, n) = (n == 0) ? (b - a) / (a + b + 2.0) : (b * b - a * a) / (s * (s + 2.0));
    if (n + 1 < m) {
      const double k = n + 1.0;
      const double t = 2.0 * k + a + b;
      const double off = std::sqrt(4.0 * k * (k + a) * (k + b) * (k + a + b) /
                                   (t * t * (t + 1.0) * (t - 1.0)));
      jac(n, n + 1) = off;
      jac(n + 1, n) = off;
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jac);
  const double mu0 = std::pow(2.0, a + b + 1.0) * std::tgamma(a + 1.0) *
                     std::tgamma(b + 1.0) / std::tgamma(a + b + 2.0);
  QuadratureRule rule;
  rule.dim = 1;
  rule.degree = 2 * m - 1;
  for (int i = 0; i < m; ++i) {
    rule.points.push_back({eig.eigenvalues()(i), 0.0, 0.0});
    const double v0 = eig.eigenvectors()(0, i);
    rule.weights.push_back(mu0 * v0 * v0);
  }
  return rule;
}

QuadratureRule simplex_rule(int dim, int degree) {
  if (dim < 1 || dim > 3) throw InvalidArgument("simplex_rule: dim must be 1..3");
  if (degree < 0) throw InvalidArgument("simplex_rule: negative degree");
  const int m = std::max(1, (degree + 2) / 2);
  QuadratureRule rule;
  rule.dim = dim;
  rule.degree = 2 * m - 1;

  // x = u, y = (1-u) v, z = (1-u)(1-v) w; the Jacobian factors (1-u)^(dim-1)
  // and (1-v)^(dim-2) are absorbed into Jacobi weights.
  const QuadratureRule g0 = gauss_jacobi(m, 0.0);
  if (dim == 1) {
    for (int i = 0; i < m; ++i) {
      rule.points.push_back({0.5 * (1.0 + g0.points[i][0]), 0.0, 0.0});
      rule.weights.push_back(0.5 * g0.weights[i]);
    }
    return rule;
  }
  const QuadratureRule g1 = gauss_jacobi(m, 1.0);
  if (dim == 2) {
    for (int i = 0; i < m; ++i) {
      const double u = 0.5 * (1.0 + g1.points[i][0]);
      for (int j = 0; j < m; ++j) {
        const double v = 0.5 * (1.0 + g0.points[j][0]);
        rule.points.push_back({u, (1.0 - u) * v, 0.0});
        rule.weights.push_back(0.25 * g1.weights[i] * 0.5 * g0.weights[j]);
      }
    }
    return rule;
  }
  const QuadratureRule g2 = gauss_jacobi(m, 2.0);
  for (int i = 0; i < m; ++i) {
    const double u = 0.5 * (1.0 + g2.points[i][0]);
    for (int j = 0; j < m; ++j) {
      const double v = 0.5 * (1.0 + g1.points[j][0]);
      for (int k = 0; k < m; ++k) {
        const double w = 0.5 * (1.0 + g0.points[k][0]);
        rule.points.push_back({u, (1.0 - u) * v, (1.0 - u) * (1.0 - v) * w});
        rule.weights.push_back(0.125 * g2.weights[i] * 0.25 * g1.weights[j] * 0.5 *
                               g0.weights[k]);
      }
    }
  }
  return rule;
}

const QuadratureRule& default_cell_rule(int dim) {
  static const QuadratureRule tri = simplex_rule(2, kCellRuleDegree2d);
  static const QuadratureRule tet = simplex_rule(3, kCellRuleDegree3d);
  if (dim == 2) return tri;
  if (dim == 3) return tet;
  throw InvalidArgument("default_cell_rule: dim must be 2 or 3");
}

const QuadratureRule& default_facet_rule(int dim) {
  static const QuadratureRule seg = simplex_rule(1, kFacetRuleDegree);
  static const QuadratureRule tri = simplex_rule(2, kFacetRuleDegree);
  if (dim == 2) return seg;
  if (dim == 3) return tri;
  throw InvalidArgument("default_facet_rule: dim must be 2 or 3");
}

}  // namespace vardens

#include "vardens/reference_element.hpp"

namespace vardens::reference {

namespace {

void barycentric(int dim, const Point& xi, double* lambda, Vec3* grad) {
  lambda[0] = 1.0;
  grad[0] = {0.0, 0.0, 0.0};
  for (int k = 0; k < dim; ++k) {
    lambda[0] -= xi[k];
    grad[0][k] = -1.0;
    lambda[k + 1] = xi[k];
    grad[k + 1] = {0.0, 0.0, 0.0};
    grad[k + 1][k] = 1.0;
  }
}

}  // namespace

int p1_count(int dim) { return dim + 1; }
int p2_count(int dim) { return (dim + 1) * (dim + 2) / 2; }
int rt1_count(int dim) { return dim * (dim + 2); }

void p1(int dim, const Point& xi, std::span<double> values, std::span<Vec3> grads) {
  double l[4];
  Vec3 g[4];
  barycentric(dim, xi, l, g);
  for (int i = 0; i <= dim; ++i) {
    values[i] = l[i];
    if (!grads.empty()) grads[i] = g[i];
  }
}

void bubble(int dim, const Point& xi, double& value, Vec3& grad) {
  double l[4];
  Vec3 g[4];
  barycentric(dim, xi, l, g);
  const double scale = dim == 2 ? 27.0 : 256.0;
  value = scale;
  for (int i = 0; i <= dim; ++i) value *= l[i];
  grad = {0.0, 0.0, 0.0};
  for (int i = 0; i <= dim; ++i) {
    double others = scale;
    for (int j = 0; j <= dim; ++j) {
      if (j != i) others *= l[j];
    }
    grad = grad + others * g[i];
  }
}

void p2(int dim, const Point& xi, std::span<double> values, std::span<Vec3> grads) {
  double l[4];
  Vec3 g[4];
  barycentric(dim, xi, l, g);
  int k = 0;
  for (int i = 0; i <= dim; ++i, ++k) {
    values[k] = l[i] * (2.0 * l[i] - 1.0);
    if (!grads.empty()) grads[k] = (4.0 * l[i] - 1.0) * g[i];
  }
  for (int i = 0; i <= dim; ++i) {
    for (int j = i + 1; j <= dim; ++j, ++k) {
      values[k] = 4.0 * l[i] * l[j];
      if (!grads.empty()) grads[k] = (4.0 * l[j]) * g[i] + (4.0 * l[i]) * g[j];
    }
  }
}

void rt1_monomials(int dim, const Point& eta, std::span<Vec3> values,
                   std::span<double> divergence) {
  int k = 0;
  for (int i = 0; i < dim; ++i, ++k) {
    values[k] = {0.0, 0.0, 0.0};
    values[k][i] = 1.0;
    if (!divergence.empty()) divergence[k] = 0.0;
  }
  for (int i = 0; i < dim; ++i) {
    for (int j = 0; j < dim; ++j, ++k) {
      values[k] = {0.0, 0.0, 0.0};
      values[k][i] = eta[j];
      if (!divergence.empty()) divergence[k] = (i == j) ? 1.0 : 0.0;
    }
  }
  for (int j = 0; j < dim; ++j, ++k) {
    values[k] = {0.0, 0.0, 0.0};
    for (int i = 0; i < dim; ++i) values[k][i] = eta[i] * eta[j];
    if (!divergence.empty()) divergence[k] = (dim + 1) * eta[j];
  }
}

}  // namespace vardens::reference

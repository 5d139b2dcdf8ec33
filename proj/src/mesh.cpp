#include "vardens/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <string>

#include "vardens/errors.hpp"

namespace vardens {

Point AffineMap::to_physical(const Point& xi) const {
  const Vec3 jx = matvec(jacobian, xi);
  return {origin[0] + jx[0], origin[1] + jx[1], origin[2] + jx[2]};
}

Point AffineMap::to_reference(const Point& x) const {
  return matvec(inverse, x - origin);
}

AffineMap affine_map(std::span<const Point> vertices) {
  const int dim = static_cast<int>(vertices.size()) - 1;
  if (dim < 1 || dim > 3) {
    throw InvalidArgument("affine_map: expected 2 to 4 vertices");
  }
  AffineMap map;
  map.origin = vertices[0];
  Mat3 j{};
  for (int k = 0; k < 3; ++k) j[k][k] = 1.0;
  for (int col = 0; col < dim; ++col) {
    for (int row = 0; row < 3; ++row) {
      j[row][col] = vertices[col + 1][row] - vertices[0][row];
    }
  }
  map.jacobian = j;
  const double det = determinant(j);
  double scale = 0.0;
  for (int col = 0; col < dim; ++col) {
    scale = std::max(scale, norm({j[0][col], j[1][col], j[2][col]}));
  }
  if (!(std::abs(det) > 1e-14 * std::pow(scale, dim))) {
    throw GeometryError("affine_map: degenerate simplex (det = " +
                        std::to_string(det) + ")");
  }
  map.determinant = det;

  Mat3& inv = map.inverse;
  inv[0][0] = (j[1][1] * j[2][2] - j[1][2] * j[2][1]) / det;
  inv[0][1] = (j[0][2] * j[2][1] - j[0][1] * j[2][2]) / det;
  inv[0][2] = (j[0][1] * j[1][2] - j[0][2] * j[1][1]) / det;
  inv[1][0] = (j[1][2] * j[2][0] - j[1][0] * j[2][2]) / det;
  inv[1][1] = (j[0][0] * j[2][2] - j[0][2] * j[2][0]) / det;
  inv[1][2] = (j[0][2] * j[1][0] - j[0][0] * j[1][2]) / det;
  inv[2][0] = (j[1][0] * j[2][1] - j[1][1] * j[2][0]) / det;
  inv[2][1] = (j[0][1] * j[2][0] - j[0][0] * j[2][1]) / det;
  inv[2][2] = (j[0][0] * j[1][1] - j[0][1] * j[1][0]) / det;
  return map;
}

namespace {

double factorial(int d) { return d == 1 ? 1.0 : d == 2 ? 2.0 : 6.0; }

}  // namespace

Mesh::Mesh(int dim, std::vector<Point> vertices,
           std::vector<std::array<int, 4>> cells)
    : dim_(dim), vertices_(std::move(vertices)), cells_(std::move(cells)) {
  if (dim_ != 2 && dim_ != 3) throw InvalidArgument("Mesh: dim must be 2 or 3");
  if (cells_.empty()) throw InvalidArgument("Mesh: no cells");

  maps_.reserve(cells_.size());
  volumes_.reserve(cells_.size());
  for (auto& cell : cells_) {
    if (dim_ == 2) cell[3] = -1;
    for (int i = 0; i <= dim_; ++i) {
      if (cell[i] < 0 || cell[i] >= n_vertices()) {
        throw InvalidArgument("Mesh: cell references unknown vertex");
      }
    }
    std::array<Point, 4> pts{};
    for (int i = 0; i <= dim_; ++i) pts[i] = vertices_[cell[i]];
    AffineMap map = vardens::affine_map(std::span<const Point>(pts.data(), dim_ + 1));
    if (map.determinant < 0.0) {
      std::swap(cell[1], cell[2]);
      std::swap(pts[1], pts[2]);
      map = vardens::affine_map(std::span<const Point>(pts.data(), dim_ + 1));
    }
    volumes_.push_back(map.determinant / factorial(dim_));
    maps_.push_back(map);
  }

  build_facets();

  for (int c = 0; c < n_cells(); ++c) h_ = std::max(h_, cell_diameter(c));
}

Point Mesh::cell_centroid(int c) const {
  Point x{};
  for (int i = 0; i <= dim_; ++i) x = x + vertices_[cells_[c][i]];
  return (1.0 / (dim_ + 1)) * x;
}

double Mesh::cell_diameter(int c) const {
  double diam = 0.0;
  for (int i = 0; i <= dim_; ++i) {
    for (int j = i + 1; j <= dim_; ++j) {
      diam = std::max(diam, norm(cell_vertex(c, i) - cell_vertex(c, j)));
    }
  }
  return diam;
}

Vec3 Mesh::outward_normal(int c, int local) const {
  // grad(lambda_local) points from the facet toward the opposite vertex.
  Vec3 ref_grad{};
  if (local == 0) {
    for (int k = 0; k < dim_; ++k) ref_grad[k] = -1.0;
  } else {
    ref_grad[local - 1] = 1.0;
  }
  const Vec3 g = matvec_transposed(maps_[c].inverse, ref_grad);
  return (-1.0 / norm(g)) * g;
}

void Mesh::build_facets() {
  std::map<std::array<int, 3>, int> index;
  cell_facets_.assign(cells_.size(), {-1, -1, -1, -1});
  for (int c = 0; c < n_cells(); ++c) {
    for (int local = 0; local <= dim_; ++local) {
      std::array<int, 3> key{-1, -1, -1};
      int k = 0;
      for (int i = 0; i <= dim_; ++i) {
        if (i != local) key[k++] = cells_[c][i];
      }
      std::sort(key.begin(), key.begin() + dim_);
      auto [it, inserted] = index.try_emplace(key, n_facets());
      if (inserted) {
        FacetRecord rec;
        rec.vertices = key;
        rec.minus_cell = c;
        rec.minus_local = local;
        rec.normal = outward_normal(c, local);
        const Point& a = vertices_[key[0]];
        const Point& b = vertices_[key[1]];
        if (dim_ == 2) {
          rec.measure = norm(b - a);
        } else {
          rec.measure = 0.5 * norm(cross(b - a, vertices_[key[2]] - a));
        }
        facets_.push_back(rec);
      } else {
        FacetRecord& rec = facets_[it->second];
        if (rec.plus_cell >= 0) {
          throw GeometryError("Mesh: facet shared by more than two cells");
        }
        rec.plus_cell = c;
        rec.plus_local = local;
      }
      cell_facets_[c][local] = it->second;
    }
  }

  boundary_vertex_.assign(vertices_.size(), false);
  for (const auto& f : facets_) {
    if (!f.is_boundary()) continue;
    for (int i = 0; i < dim_; ++i) boundary_vertex_[f.vertices[i]] = true;
  }
}

void Mesh::dump(std::ostream& out) const {
  out << "# dim " << dim_ << " vertices " << n_vertices() << " cells "
      << n_cells() << " facets " << n_facets() << "\n";
  out.precision(17);
  for (int v = 0; v < n_vertices(); ++v) {
    out << "v " << v;
    for (int k = 0; k < dim_; ++k) out << ' ' << vertices_[v][k];
    out << '\n';
  }
  for (int c = 0; c < n_cells(); ++c) {
    out << "c " << c;
    for (int i = 0; i <= dim_; ++i) out << ' ' << cells_[c][i];
    out << '\n';
  }
  for (int f = 0; f < n_facets(); ++f) {
    const auto& rec = facets_[f];
    out << "f " << f;
    for (int i = 0; i < dim_; ++i) out << ' ' << rec.vertices[i];
    out << ' ' << rec.minus_cell << ' ' << rec.plus_cell;
    for (int k = 0; k < dim_; ++k) out << ' ' << rec.normal[k];
    out << ' ' << rec.measure << '\n';
  }
}

Mesh unit_square_mesh(int n) {
  if (n < 1) throw InvalidArgument("unit_square_mesh: n must be >= 1");
  std::vector<Point> vertices;
  vertices.reserve((n + 1) * (n + 1));
  for (int j = 0; j <= n; ++j) {
    for (int i = 0; i <= n; ++i) {
      vertices.push_back({static_cast<double>(i) / n, static_cast<double>(j) / n, 0.0});
    }
  }
  auto id = [n](int i, int j) { return j * (n + 1) + i; };
  std::vector<std::array<int, 4>> cells;
  cells.reserve(2 * n * n);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      cells.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1), -1});
      cells.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1), -1});
    }
  }
  return Mesh(2, std::move(vertices), std::move(cells));
}

Mesh unit_cube_mesh(int n) {
  if (n < 1) throw InvalidArgument("unit_cube_mesh: n must be >= 1");
  std::vector<Point> vertices;
  vertices.reserve((n + 1) * (n + 1) * (n + 1));
  for (int k = 0; k <= n; ++k) {
    for (int j = 0; j <= n; ++j) {
      for (int i = 0; i <= n; ++i) {
        vertices.push_back({static_cast<double>(i) / n, static_cast<double>(j) / n,
                            static_cast<double>(k) / n});
      }
    }
  }
  auto id = [n](int i, int j, int k) { return (k * (n + 1) + j) * (n + 1) + i; };
  // Each tetrahedron walks from the cube origin to the opposite corner, one
  // axis at a time, in the order given by a permutation of (x, y, z).
  constexpr std::array<std::array<int, 3>, 6> perms{{
      {0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};
  std::vector<std::array<int, 4>> cells;
  cells.reserve(6 * n * n * n);
  for (int k = 0; k < n; ++k) {
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < n; ++i) {
        for (const auto& p : perms) {
          std::array<int, 3> pos{i, j, k};
          std::array<int, 4> cell{};
          cell[0] = id(pos[0], pos[1], pos[2]);
          for (int s = 0; s < 3; ++s) {
            ++pos[p[s]];
            cell[s + 1] = id(pos[0], pos[1], pos[2]);
          }
          cells.push_back(cell);
        }
      }
    }
  }
  return Mesh(3, std::move(vertices), std::move(cells));
}

}  // namespace vardens

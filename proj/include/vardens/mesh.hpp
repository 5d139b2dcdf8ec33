#pragma once

#include <array>
#include <iosfwd>
#include <span>
#include <vector>

#include "vardens/geometry.hpp"

namespace vardens {

/// Reference-to-physical map x = origin + J * xi of a simplex.
struct AffineMap {
  Point origin{};
  Mat3 jacobian{};
  Mat3 inverse{};
  double determinant = 0.0;

  Point to_physical(const Point& xi) const;
  Point to_reference(const Point& x) const;
};

/// Builds the affine map of a simplex from its d+1 vertices (dim = size-1).
/// Throws GeometryError when the simplex is degenerate.
AffineMap affine_map(std::span<const Point> vertices);

/// One facet of the mesh. Vertex ids are sorted ascending; the normal points
/// out of the minus cell (the lower-indexed neighbour), hence outward on the
/// boundary.
struct FacetRecord {
  std::array<int, 3> vertices{-1, -1, -1};
  int minus_cell = -1;
  int plus_cell = -1;   // -1 on the boundary
  int minus_local = -1;  // local facet index inside minus_cell
  int plus_local = -1;
  Vec3 normal{};
  double measure = 0.0;

  bool is_boundary() const { return plus_cell < 0; }
};

/// Simplicial mesh of the unit square or unit cube. Immutable after
/// construction. Local facet i of a cell is the facet opposite local vertex i.
class Mesh {
 public:
  /// Takes raw connectivity; cells with negative orientation are fixed by
  /// swapping their first two non-origin vertices.
  Mesh(int dim, std::vector<Point> vertices,
       std::vector<std::array<int, 4>> cells);

  int dim() const { return dim_; }
  int n_vertices() const { return static_cast<int>(vertices_.size()); }
  int n_cells() const { return static_cast<int>(cells_.size()); }
  int n_facets() const { return static_cast<int>(facets_.size()); }
  int vertices_per_cell() const { return dim_ + 1; }

  const std::vector<Point>& vertices() const { return vertices_; }
  const std::vector<std::array<int, 4>>& cells() const { return cells_; }
  const std::vector<FacetRecord>& facets() const { return facets_; }
  const FacetRecord& facet(int f) const { return facets_[f]; }
  const std::array<int, 4>& cell(int c) const { return cells_[c]; }
  const std::array<int, 4>& cell_facets(int c) const { return cell_facets_[c]; }

  Point cell_vertex(int c, int local) const { return vertices_[cells_[c][local]]; }
  Point cell_centroid(int c) const;
  double cell_volume(int c) const { return volumes_[c]; }
  double cell_diameter(int c) const;
  const AffineMap& affine_map(int c) const { return maps_[c]; }

  bool is_boundary_vertex(int v) const { return boundary_vertex_[v]; }

  /// Maximum cell diameter.
  double h() const { return h_; }

  /// Outward unit normal of local facet `local` of cell `c`.
  Vec3 outward_normal(int c, int local) const;

  /// Whitespace-separated dump: one "v", "c" or "f" record per line.
  void dump(std::ostream& out) const;

 private:
  void build_facets();

  int dim_;
  std::vector<Point> vertices_;
  std::vector<std::array<int, 4>> cells_;
  std::vector<std::array<int, 4>> cell_facets_;
  std::vector<FacetRecord> facets_;
  std::vector<AffineMap> maps_;
  std::vector<double> volumes_;
  std::vector<bool> boundary_vertex_;
  double h_ = 0.0;
};

/// n x n squares, each cut along the (i,j)-(i+1,j+1) diagonal.
Mesh unit_square_mesh(int n);

/// n^3 cubes, each cut into the 6 Kuhn tetrahedra sharing the main diagonal.
Mesh unit_cube_mesh(int n);

}  // namespace vardens

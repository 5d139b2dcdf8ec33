#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "vardens/errors.hpp"
#include "vardens/mesh.hpp"

using namespace vardens;

namespace {

double total_volume(const Mesh& m) {
  double v = 0.0;
  for (int c = 0; c < m.n_cells(); ++c) v += m.cell_volume(c);
  return v;
}

// Facet vertex sets counted straight from the cell list.
std::map<std::vector<int>, int> facet_incidence(const Mesh& m) {
  std::map<std::vector<int>, int> count;
  const int nv = m.vertices_per_cell();
  for (int c = 0; c < m.n_cells(); ++c) {
    for (int skip = 0; skip < nv; ++skip) {
      std::vector<int> f;
      for (int i = 0; i < nv; ++i) {
        if (i != skip) f.push_back(m.cell(c)[i]);
      }
      std::sort(f.begin(), f.end());
      ++count[f];
    }
  }
  return count;
}

Point facet_centroid(const Mesh& m, const FacetRecord& f) {
  Point x{};
  for (int j = 0; j < m.dim(); ++j) x = x + m.vertices()[f.vertices[j]];
  return (1.0 / m.dim()) * x;
}

}  // namespace

TEST_CASE("unit square mesh: counts and size") {
  const Mesh m1 = unit_square_mesh(1);
  CHECK(m1.n_cells() == 2);
  CHECK(m1.n_vertices() == 4);
  CHECK(m1.n_facets() == 5);
  int boundary = 0;
  for (const auto& f : m1.facets()) boundary += f.is_boundary() ? 1 : 0;
  CHECK(boundary == 4);

  const Mesh m8 = unit_square_mesh(8);
  CHECK(m8.n_cells() == 128);
  CHECK(m8.h() == doctest::Approx(std::sqrt(2.0) / 8).epsilon(1e-14));
  CHECK(m8.h() == doctest::Approx(0.17678).epsilon(1e-4));

  CHECK(std::abs(total_volume(unit_square_mesh(2)) - 1.0) <= 1e-12);
}

TEST_CASE("unit cube mesh: counts and volume") {
  const Mesh m1 = unit_cube_mesh(1);
  CHECK(m1.n_cells() == 6);
  CHECK(std::abs(total_volume(m1) - 1.0) <= 1e-12);
  CHECK(unit_cube_mesh(2).n_cells() == 48);
  CHECK(unit_cube_mesh(3).n_cells() == 6 * 27);
}

TEST_CASE("n = 0 is rejected") {
  CHECK_THROWS_AS(unit_square_mesh(0), InvalidArgument);
  CHECK_THROWS_AS(unit_cube_mesh(0), InvalidArgument);
}

TEST_CASE("volumes tile the domain for every n") {
  for (int n = 1; n <= 6; ++n) {
    CHECK(std::abs(total_volume(unit_square_mesh(n)) - 1.0) <= 1e-12);
    CHECK(std::abs(total_volume(unit_cube_mesh(n)) - 1.0) <= 1e-12);
  }
}

TEST_CASE("facet adjacency matches a brute-force incidence count") {
  for (const Mesh& m : {unit_square_mesh(3), unit_cube_mesh(2)}) {
    const auto incidence = facet_incidence(m);
    CHECK(static_cast<int>(incidence.size()) == m.n_facets());
    for (const auto& f : m.facets()) {
      std::vector<int> key(f.vertices.begin(), f.vertices.begin() + m.dim());
      REQUIRE(incidence.count(key) == 1);
      CHECK(incidence.at(key) == (f.is_boundary() ? 1 : 2));
      CHECK(std::is_sorted(key.begin(), key.end()));
      if (!f.is_boundary()) CHECK(f.minus_cell < f.plus_cell);
      for (int v : key) {
        const auto& cm = m.cell(f.minus_cell);
        CHECK(std::find(cm.begin(), cm.begin() + m.vertices_per_cell(), v) !=
              cm.begin() + m.vertices_per_cell());
        if (!f.is_boundary()) {
          const auto& cp = m.cell(f.plus_cell);
          CHECK(std::find(cp.begin(), cp.begin() + m.vertices_per_cell(), v) !=
                cp.begin() + m.vertices_per_cell());
        }
      }
    }
  }
}

TEST_CASE("cube boundary facets lie on the faces of the cube") {
  const Mesh m = unit_cube_mesh(4);
  int boundary = 0;
  for (const auto& f : m.facets()) {
    if (!f.is_boundary()) continue;
    ++boundary;
    bool on_plane = false;
    for (int axis = 0; axis < 3; ++axis) {
      for (double side : {0.0, 1.0}) {
        bool all = true;
        for (int j = 0; j < 3; ++j) all = all && m.vertices()[f.vertices[j]][axis] == side;
        on_plane = on_plane || all;
      }
    }
    CHECK(on_plane);
  }
  // 6 faces of 4x4 squares, 2 triangles each.
  CHECK(boundary == 6 * 16 * 2);
}

TEST_CASE("normals: unit length, minus to plus, outward on the boundary") {
  for (const Mesh& m : {unit_square_mesh(4), unit_cube_mesh(3)}) {
    for (const auto& f : m.facets()) {
      CHECK(std::abs(norm(f.normal) - 1.0) <= 1e-14);
      CHECK(f.measure <= m.h());
      CHECK(f.measure > 0.0);
      const Point xf = facet_centroid(m, f);
      // Normal points away from the minus cell's centroid.
      CHECK(dot(f.normal, xf - m.cell_centroid(f.minus_cell)) > 0.0);
      const Vec3 own = m.outward_normal(f.minus_cell, f.minus_local);
      CHECK(norm(own - f.normal) <= 1e-14);
      if (f.is_boundary()) {
        // Outward: stepping along the normal leaves the unit box.
        const Point out = xf + 1e-3 * f.normal;
        bool outside = false;
        for (int k = 0; k < m.dim(); ++k) outside = outside || out[k] < 0.0 || out[k] > 1.0;
        CHECK(outside);
      } else {
        const Vec3 other = m.outward_normal(f.plus_cell, f.plus_local);
        CHECK(norm(other + f.normal) <= 1e-14);
      }
    }
  }
}

TEST_CASE("divergence theorem holds cell by cell for affine fields") {
  const Mat3 a{{{0.3, -1.2, 0.7}, {2.0, 0.4, -0.5}, {-0.8, 1.1, 0.9}}};
  const Vec3 b{0.2, -0.6, 1.3};
  auto v = [&](const Point& x) { return matvec(a, x) + b; };
  for (int n = 1; n <= 4; ++n) {
    for (const Mesh& m : {unit_square_mesh(n), unit_cube_mesh(n)}) {
      const int d = m.dim();
      double div = 0.0;
      for (int k = 0; k < d; ++k) div += a[k][k];
      double cells_sum = 0.0;
      for (int c = 0; c < m.n_cells(); ++c) {
        for (int lf = 0; lf <= d; ++lf) {
          const FacetRecord& f = m.facet(m.cell_facets(c)[lf]);
          // Midpoint rule is exact for affine integrands.
          cells_sum += dot(v(facet_centroid(m, f)), m.outward_normal(c, lf)) * f.measure;
        }
      }
      double boundary_sum = 0.0;
      for (const auto& f : m.facets()) {
        if (f.is_boundary()) boundary_sum += dot(v(facet_centroid(m, f)), f.normal) * f.measure;
      }
      CHECK(std::abs(cells_sum - boundary_sum) <= 1e-12);
      CHECK(std::abs(boundary_sum - div) <= 1e-12);
    }
  }
}

TEST_CASE("affine map of a simplex") {
  SUBCASE("reference triangle maps to itself") {
    const Point v[3] = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
    const AffineMap map = affine_map(v);
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) CHECK(map.jacobian[i][j] == (i == j ? 1.0 : 0.0));
    }
    CHECK(map.determinant == 1.0);
  }
  SUBCASE("reference tetrahedron maps to itself") {
    const Point v[4] = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    const AffineMap map = affine_map(v);
    CHECK(map.determinant == 1.0);
    const Point x{0.1, 0.2, 0.3};
    CHECK(norm(map.to_physical(x) - x) == 0.0);
  }
  SUBCASE("n = 2 square cells have |det| = 2 |K| = 1/4") {
    const Mesh m = unit_square_mesh(2);
    for (int c = 0; c < m.n_cells(); ++c) {
      CHECK(std::abs(m.affine_map(c).determinant) == doctest::Approx(0.25).epsilon(1e-14));
      CHECK(m.affine_map(c).determinant > 0.0);
    }
  }
  SUBCASE("|det| = d! |K| on the cube") {
    const Mesh m = unit_cube_mesh(2);
    for (int c = 0; c < m.n_cells(); ++c) {
      CHECK(m.affine_map(c).determinant == doctest::Approx(6.0 * m.cell_volume(c)).epsilon(1e-14));
    }
  }
  SUBCASE("reflected vertex order flips the sign") {
    const Point v[3] = {{0.2, 0.1, 0}, {0.9, 0.3, 0}, {0.4, 0.8, 0}};
    const Point w[3] = {v[0], v[2], v[1]};
    CHECK(affine_map(v).determinant == doctest::Approx(-affine_map(w).determinant));
  }
  SUBCASE("inverse round trip") {
    const Point v[4] = {{0.1, 0.2, 0.0}, {1.0, 0.3, 0.1}, {0.2, 0.9, 0.2}, {0.3, 0.1, 1.1}};
    const AffineMap map = affine_map(v);
    const Point x{0.3, 0.2, 0.25};
    CHECK(norm(map.to_reference(map.to_physical(x)) - x) <= 1e-14);
  }
  SUBCASE("degenerate simplex") {
    const Point v[3] = {{0, 0, 0}, {1, 1, 0}, {2, 2, 0}};
    CHECK_THROWS_AS(affine_map(v), GeometryError);
  }
}

TEST_CASE("mesh cells are positively oriented after construction") {
  // Second cell listed clockwise.
  Mesh m(2, {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}}, {{0, 1, 2, -1}, {0, 2, 3, -1}});
  for (int c = 0; c < m.n_cells(); ++c) CHECK(m.affine_map(c).determinant > 0.0);
  Mesh flipped(2, {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}}, {{0, 2, 1, -1}});
  CHECK(flipped.affine_map(0).determinant > 0.0);
}

TEST_CASE("dump writes one record per line") {
  const Mesh m = unit_square_mesh(2);
  std::ostringstream out;
  m.dump(out);
  std::istringstream in(out.str());
  std::string line;
  std::map<char, int> kinds;
  while (std::getline(in, line)) {
    if (!line.empty()) ++kinds[line[0]];
  }
  CHECK(kinds['v'] == m.n_vertices());
  CHECK(kinds['c'] == m.n_cells());
  CHECK(kinds['f'] == m.n_facets());
}

#include <doctest.h>

#include <cmath>
#include <memory>
#include <numbers>
#include <random>

#include "vardens/assembly.hpp"
#include "vardens/errors.hpp"
#include "vardens/projections.hpp"

using namespace vardens;

namespace {

constexpr double pi = std::numbers::pi;

std::shared_ptr<const Mesh> square(int n) { return std::make_shared<const Mesh>(unit_square_mesh(n)); }
std::shared_ptr<const Mesh> cube(int n) { return std::make_shared<const Mesh>(unit_cube_mesh(n)); }

double quadratic_form(const SparseMatrix& a, std::span<const double> x) {
  const std::vector<double> ax = a.multiply(x);
  double s = 0.0;
  for (std::size_t i = 0; i < ax.size(); ++i) s += x[i] * ax[i];
  return s;
}

// Local basis function `local` of `cell` at physical x.
double basis_at(const FeSpace& s, int cell, int local, const Point& x) {
  const Point xi = s.mesh().affine_map(cell).to_reference(x);
  const BasisValues b = eval_basis(s, cell, std::span<const Point>(&xi, 1));
  return b.value(0, local)[0];
}

// A random divergence-free RT1 field with zero boundary flux.
FeField random_divfree(const RtProjectionWorkspace& ws, std::mt19937& gen) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  const double a = dist(gen), b = dist(gen), c = dist(gen);
  return ws.project([=](const Point& x) {
    return Vec3{a + b * x[1] + std::sin(3 * x[2] + c), c * x[0] - a * x[2], b + x[0] * x[1]};
  });
}

FeField random_dg(std::shared_ptr<const FeSpace> s, std::mt19937& gen) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  FeField f(s);
  for (auto& v : f.coeffs()) v = dist(gen);
  return f;
}

}  // namespace

TEST_CASE("P2_dG mass matrix is block diagonal") {
  auto mesh = square(1);
  const FeSpace s(mesh, SpaceKind::P2DG);
  const SparseMatrix m = assemble_matrix(Form::Mass, s, s);
  CHECK(m.nnz() == 2 * 36);
  for (int r = 0; r < m.rows(); ++r) {
    for (int k = m.row_ptr()[r]; k < m.row_ptr()[r + 1]; ++k) CHECK(r / 6 == m.col_idx()[k] / 6);
  }
  // Row sums are the integrals of the basis functions; they add to |Omega|.
  double total = 0.0;
  for (double v : m.values()) total += v;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-13));
}

TEST_CASE("stiffness annihilates constants") {
  for (auto mesh : {square(3), cube(2)}) {
    for (auto kind : {SpaceKind::P1Continuous, SpaceKind::P2DG, SpaceKind::P1DG}) {
      const FeSpace s(mesh, kind);
      const SparseMatrix k = assemble_matrix(Form::Stiffness, s, s);
      const std::vector<double> ones(s.n_dofs(), 1.0);
      double worst = 0.0;
      for (double v : k.multiply(ones)) worst = std::max(worst, std::abs(v));
      CHECK(worst <= 1e-12);
    }
    const FeSpace u(mesh, SpaceKind::P1BubbleVector);
    std::vector<double> constant(u.n_dofs(), 0.0);
    for (int c = 0; c < mesh->dim(); ++c) {
      for (int v = 0; v < mesh->n_vertices(); ++v) constant[u.component_offset(c) + v] = 1.0 + c;
    }
    const SparseMatrix k = assemble_matrix(Form::Stiffness, u, u);
    double worst = 0.0;
    for (double v : k.multiply(constant)) worst = std::max(worst, std::abs(v));
    CHECK(worst <= 1e-12);
  }
}

TEST_CASE("symmetric forms give symmetric matrices") {
  for (auto mesh : {square(3), cube(2)}) {
    for (auto kind : {SpaceKind::P1Continuous, SpaceKind::P1BubbleVector, SpaceKind::P2DG, SpaceKind::RT1}) {
      const FeSpace s(mesh, kind);
      CHECK(assemble_matrix(Form::Mass, s, s).is_symmetric(1e-12));
      if (kind != SpaceKind::RT1) CHECK(assemble_matrix(Form::Stiffness, s, s).is_symmetric(1e-12));
    }
  }
}

TEST_CASE("assembly is deterministic") {
  auto mesh = cube(2);
  RtProjectionWorkspace ws(mesh);
  std::mt19937 gen(3);
  const FeField w = random_divfree(ws, gen);
  const FeSpace s(mesh, SpaceKind::P2DG);
  const FormCoefficients coeffs{&w};
  const SparseMatrix a1 = assemble_matrix(Form::Transport, s, s, coeffs);
  const SparseMatrix a2 = assemble_matrix(Form::Transport, s, s, coeffs);
  CHECK(a1.values() == a2.values());
  const SparseMatrix u1 = assemble_facet_upwind(w, s, s);
  const SparseMatrix u2 = assemble_facet_upwind(w, s, s);
  CHECK(u1.values() == u2.values());
}

TEST_CASE("divergence form vanishes on projected divergence-free fields") {
  auto mesh = square(4);
  RtProjectionWorkspace ws(mesh);
  const FeField sigma = ws.project([](const Point& x) {
    return Vec3{std::pow(std::sin(pi * x[0]), 2) * std::sin(2 * pi * x[1]),
                -std::sin(2 * pi * x[0]) * std::pow(std::sin(pi * x[1]), 2), 0.0};
  });
  for (auto kind : {SpaceKind::P1DG, SpaceKind::P2DG, SpaceKind::P1Continuous}) {
    const FeSpace q(mesh, kind);
    const SparseMatrix b = assemble_matrix(Form::Divergence, sigma.space(), q);
    double worst = 0.0;
    for (double v : b.multiply(sigma.coeffs())) worst = std::max(worst, std::abs(v));
    CHECK(worst <= 1e-12);
  }
}

TEST_CASE("transport form matches a pointwise evaluation") {
  auto mesh = cube(1);
  RtProjectionWorkspace ws(mesh);
  std::mt19937 gen(8);
  const FeField w = random_divfree(ws, gen);
  const FeSpace s(mesh, SpaceKind::P2DG);
  const SparseMatrix a = assemble_matrix(Form::Transport, s, s, FormCoefficients{&w});
  const QuadratureRule& rule = default_cell_rule(3);
  const int cell = 3;
  const BasisValues b = eval_basis(s, cell, rule.points);
  const AffineMap& map = mesh->affine_map(cell);
  const auto dofs = s.cell_dofs(cell);
  for (int i : {0, 4, 9}) {
    for (int j : {1, 5, 8}) {
      double v = 0.0;
      for (int q = 0; q < rule.size(); ++q) {
        const Vec3 wx = rt_value(w, cell, map.to_physical(rule.points[q]));
        v += rule.weights[q] * std::abs(map.determinant) * dot(wx, b.gradient(q, j)[0]) * b.value(q, i)[0];
      }
      CHECK(a.at(dofs[i], dofs[j]) == doctest::Approx(v).epsilon(1e-12).scale(1.0));
    }
  }
}

TEST_CASE("facet upwind: zero transport gives the zero matrix") {
  auto mesh = square(3);
  auto rt = std::make_shared<const FeSpace>(mesh, SpaceKind::RT1);
  const FeSpace s(mesh, SpaceKind::P2DG);
  const SparseMatrix a = assemble_facet_upwind(FeField(rt), s, s);
  CHECK(a.max_abs() == 0.0);
}

TEST_CASE("facet upwind: continuous densities have no jump terms") {
  auto mesh = square(4);
  RtProjectionWorkspace ws(mesh);
  std::mt19937 gen(1);
  const FeField w = random_divfree(ws, gen);
  auto s = std::make_shared<const FeSpace>(mesh, SpaceKind::P2DG);
  const FeField rho = project_dg(s, [](const Point& x) { return 2.0 + x[0] * x[1] - x[1] * x[1]; });
  const SparseMatrix a = assemble_facet_upwind(w, *s, *s);
  double worst = 0.0;
  for (double v : a.multiply(rho.coeffs())) worst = std::max(worst, std::abs(v));
  CHECK(worst <= 1e-12);
}

TEST_CASE("facet upwind: sign change inside a facet matches hand quadrature") {
  auto mesh = square(1);
  auto rt = std::make_shared<const FeSpace>(mesh, SpaceKind::RT1);
  const FeSpace s(mesh, SpaceKind::P2DG);
  int fi = -1;
  for (int f = 0; f < mesh->n_facets(); ++f) {
    if (!mesh->facet(f).is_boundary()) fi = f;
  }
  REQUIRE(fi >= 0);
  const FacetRecord& f = mesh->facet(fi);
  // Flux s = mu_0 - mu_1 along the facet: dofs are its P1 moments / |F|.
  FeField w(rt);
  w.coeffs()[2 * fi] = 1.0 / 3 - 1.0 / 6;
  w.coeffs()[2 * fi + 1] = 1.0 / 6 - 1.0 / 3;
  w.coeffs()[2 * mesh->n_facets()] = 0.3;  // interior dofs do not touch the trace
  w.coeffs()[2 * mesh->n_facets() + 3] = -0.7;
  const Point v0 = mesh->vertices()[f.vertices[0]];
  const Point v1 = mesh->vertices()[f.vertices[1]];
  CHECK(normal_flux(w, fi, v0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(normal_flux(w, fi, v1) == doctest::Approx(-1.0).epsilon(1e-12));

  const SparseMatrix a = assemble_facet_upwind(w, s, s);

  // Five-point Gauss-Legendre on each half of the facet.
  const double gx[5] = {-0.9061798459386640, -0.5384693101056831, 0.0, 0.5384693101056831,
                        0.9061798459386640};
  const double gw[5] = {0.2369268850561891, 0.4786286704993665, 0.5688888888888889,
                        0.4786286704993665, 0.2369268850561891};
  const int m = f.minus_cell, p = f.plus_cell;
  const auto dm = s.cell_dofs(m), dp = s.cell_dofs(p);
  const double len = f.measure;
  for (int i = 0; i < 6; ++i) {
    for (int j = 0; j < 6; ++j) {
      double mm = 0, mp = 0, pp = 0, pm = 0;
      for (int half = 0; half < 2; ++half) {
        for (int q = 0; q < 5; ++q) {
          const double t = 0.25 + 0.5 * half + 0.25 * gx[q];
          const double wt = gw[q] * 0.25 * len;
          const Point x = v0 + t * (v1 - v0);
          const double flux = 1.0 - 2.0 * t;
          const double phi_im = basis_at(s, m, i, x), phi_jm = basis_at(s, m, j, x);
          const double phi_ip = basis_at(s, p, i, x), phi_jp = basis_at(s, p, j, x);
          if (flux < 0.0) {
            mm += wt * (-flux) * phi_im * phi_jm;
            mp += wt * flux * phi_im * phi_jp;
          } else {
            pp += wt * flux * phi_ip * phi_jp;
            pm += wt * (-flux) * phi_ip * phi_jm;
          }
        }
      }
      // Facet terms only: the mass and transport forms are not included.
      CHECK(a.at(dm[i], dm[j]) == doctest::Approx(mm).epsilon(1e-12).scale(1.0));
      CHECK(a.at(dm[i], dp[j]) == doctest::Approx(mp).epsilon(1e-12).scale(1.0));
      CHECK(a.at(dp[i], dp[j]) == doctest::Approx(pp).epsilon(1e-12).scale(1.0));
      CHECK(a.at(dp[i], dm[j]) == doctest::Approx(pm).epsilon(1e-12).scale(1.0));
    }
  }
}

TEST_CASE("split facet quadrature covers the facet") {
  auto mesh = cube(1);
  const QuadratureRule& rule = default_facet_rule(3);
  for (int fi = 0; fi < mesh->n_facets(); ++fi) {
    const double values[3] = {1.0, -0.5, 0.25};
    double area = 0.0, first = 0.0;
    const FacetRecord& f = mesh->facet(fi);
    for (const auto& pt : split_facet_quadrature(*mesh, fi, values, rule)) {
      area += pt.weight;
      first += pt.weight * pt.x[0];
    }
    Point c{};
    for (int j = 0; j < 3; ++j) c = c + (1.0 / 3) * mesh->vertices()[f.vertices[j]];
    CHECK(area == doctest::Approx(f.measure).epsilon(1e-13));
    CHECK(first == doctest::Approx(f.measure * c[0]).epsilon(1e-13).scale(1.0));
  }
}

TEST_CASE("upwind skew identity for divergence-free transport") {
  std::mt19937 gen(17);
  for (auto mesh : {square(4), cube(2)}) {
    RtProjectionWorkspace ws(mesh);
    auto s = std::make_shared<const FeSpace>(mesh, SpaceKind::P2DG);
    for (int trial = 0; trial < 5; ++trial) {
      const FeField w = random_divfree(ws, gen);
      const FeField rho = random_dg(s, gen);
      const double lhs = quadratic_form(assemble_matrix(Form::Transport, *s, *s, FormCoefficients{&w}),
                                        rho.coeffs()) +
                         quadratic_form(assemble_facet_upwind(w, *s, *s), rho.coeffs());
      const double rhs = upwind_jump_dissipation(w, rho);
      CHECK(std::abs(lhs - rhs) <= 1e-10);
      CHECK(rhs >= 0.0);
    }
  }
}

TEST_CASE("integrate") {
  auto mesh = square(4);
  CHECK(std::abs(integrate(*mesh, [](const CellPoint&) { return 1.0; }) - 1.0) <= 1e-12);
  CHECK(integrate(*mesh, [](const CellPoint& p) { return p.x[0]; }) == doctest::Approx(0.5).epsilon(1e-13));
  auto fine = square(32);
  const double s2 = integrate(*fine, [](const CellPoint& p) {
    const double v = std::sin(pi * p.x[0]) * std::sin(pi * p.x[1]);
    return v * v;
  });
  CHECK(std::abs(s2 - 0.25) <= 1e-6);
  CHECK(std::abs(integrate(*cube(2), [](const CellPoint& p) { return p.x[2] * p.x[2]; }) - 1.0 / 3) <= 1e-13);
}

TEST_CASE("operand checks") {
  auto a = square(2);
  auto b = square(2);
  const FeSpace sa(a, SpaceKind::P2DG), sb(b, SpaceKind::P2DG);
  CHECK_THROWS_AS(assemble_matrix(Form::Mass, sa, sb), InvalidArgument);
  CHECK_THROWS_AS(assemble_matrix(Form::Transport, sa, sa), InvalidArgument);
  auto p1 = std::make_shared<const FeSpace>(a, SpaceKind::P1BubbleVector);
  const FeField not_rt(p1);
  CHECK_THROWS_AS(assemble_facet_upwind(not_rt, sa, sa), InvalidArgument);
  const FeSpace u(a, SpaceKind::P1BubbleVector);
  CHECK_THROWS_AS(assemble_facet_upwind(FeField(std::make_shared<const FeSpace>(a, SpaceKind::RT1)), u, u),
                  InvalidArgument);
  CHECK_THROWS_AS(assemble_matrix(Form::Divergence, sa, sa), InvalidArgument);
}

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <random>
#include <sstream>

#include "vardens/assembly.hpp"
#include "vardens/errors.hpp"
#include "vardens/scheme.hpp"
#include "vardens/study.hpp"

using namespace vardens;

namespace {

std::shared_ptr<const Mesh> square(int n) { return std::make_shared<const Mesh>(unit_square_mesh(n)); }

SchemeConfig strict_config(double tau, int steps) {
  SchemeConfig c;
  c.tau = tau;
  c.T = tau * steps;
  c.mu = 0.001;
  c.cutoff_mode = CutoffMode::Strict;
  return c;
}

SchemeConfig bounded(double lo, double hi, CutoffMode mode = CutoffMode::Strict) {
  SchemeConfig c;
  c.rho_min = lo;
  c.rho_max = hi;
  c.cutoff_mode = mode;
  return c;
}

double mass(const FeField& rho) {
  return integrate(rho.space().mesh(),
                   [&](const CellPoint& p) { return rho.value(p.cell, p.xi)[0]; });
}

double max_abs(const FeField& f) {
  double m = 0.0;
  for (double v : f.coeffs()) m = std::max(m, std::abs(v));
  return m;
}

const ExactCase& square_case() {
  static const ExactCase c = make_case("square2d");
  return c;
}

double rho0(const Point& x) { return square_case().rho(x, 0.0); }
Vec3 u0(const Point& x) { return square_case().u(x, 0.0); }
Vec3 zero_velocity(const Point&) { return {}; }

}  // namespace

TEST_CASE("cutoff branches") {
  const double lo = 0.8, hi = 3.0;
  const SchemeConfig c = bounded(lo, hi);
  CHECK(cutoff(lo, c) == lo);
  CHECK(cutoff(0.25 * lo, c) == 0.5 * lo);
  CHECK(cutoff(2 * hi, c) == 1.5 * hi);
  CHECK(cutoff(0.5 * lo, c) == 0.5 * lo);
  CHECK(cutoff(1.5 * hi, c) == 1.5 * hi);
  SUBCASE("widened mode scales the bounds") {
    const SchemeConfig w = bounded(lo, hi, CutoffMode::Widened);
    const auto [a, b] = cutoff_interval(w);
    CHECK(a == doctest::Approx(0.5 * lo / 1.5));
    CHECK(b == doctest::Approx(1.5 * hi * 1.5));
    CHECK(cutoff(0.0, w) == doctest::Approx(a));
  }
  SUBCASE("disabled mode is the identity") {
    const SchemeConfig d = bounded(lo, hi, CutoffMode::Disabled);
    CHECK(cutoff(-5.0, d) == -5.0);
    CHECK(cutoff(100.0, d) == 100.0);
  }
  SUBCASE("missing bounds") {
    SchemeConfig m;
    m.cutoff_mode = CutoffMode::Strict;
    CHECK_THROWS_AS(cutoff(1.0, m), ConfigError);
  }
}

TEST_CASE("cutoff is 1-Lipschitz") {
  std::mt19937 gen(3);
  std::uniform_real_distribution<double> dist(-2.0, 8.0);
  for (CutoffMode mode : {CutoffMode::Strict, CutoffMode::Widened, CutoffMode::Disabled}) {
    const SchemeConfig c = bounded(1.0, 2.0, mode);
    for (int i = 0; i < 1000; ++i) {
      const double a = dist(gen), b = dist(gen);
      CHECK(std::abs(cutoff(a, c) - cutoff(b, c)) <= std::abs(a - b));
    }
  }
}

TEST_CASE("cutoff mode names") {
  CHECK(parse_cutoff_mode("strict") == CutoffMode::Strict);
  CHECK(parse_cutoff_mode("widened") == CutoffMode::Widened);
  CHECK(parse_cutoff_mode("off") == CutoffMode::Disabled);
  for (CutoffMode m : {CutoffMode::Strict, CutoffMode::Widened, CutoffMode::Disabled}) {
    CHECK(parse_cutoff_mode(to_string(m)) == m);
  }
  CHECK_THROWS_AS(parse_cutoff_mode("loose"), InvalidArgument);
}

TEST_CASE("config validation") {
  SchemeConfig c;
  c.tau = 1.0 / 64;
  c.T = 0.25;
  CHECK(c.steps() == 16);
  CHECK_NOTHROW(c.validate());
  SUBCASE("non-positive tau") {
    c.tau = 0.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
  }
  SUBCASE("non-positive mu") {
    c.mu = -1.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
  }
  SUBCASE("T not a multiple of tau") {
    c.T = 0.26;
    CHECK_THROWS_AS(c.steps(), ConfigError);
    CHECK_THROWS_AS(c.validate(), ConfigError);
  }
  SUBCASE("bounds") {
    c.rho_min = 0.0;
    c.rho_max = 1.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c.rho_min = 2.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c.cutoff_mode = CutoffMode::Disabled;
    c.rho_min = -1.0;
    CHECK_NOTHROW(c.validate());
  }
  SUBCASE("widen factor below one") {
    c.widen_factor = 0.5;
    CHECK_THROWS_AS(c.validate(), ConfigError);
  }
  SUBCASE("scheme construction validates") {
    c.mu = 0.0;
    CHECK_THROWS_AS(Scheme(square(2), c), ConfigError);
  }
}

TEST_CASE("initialize") {
  SUBCASE("constant density, zero velocity") {
    Scheme s(square(4), strict_config(1.0 / 64, 1));
    const StepState st = s.initialize([](const Point&) { return 2.0; }, zero_velocity);
    CHECK(st.n == 0);
    CHECK(st.t == 0.0);
    for (double v : st.rho.coeffs()) CHECK(v == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(max_abs(st.u) == 0.0);
    CHECK(max_abs(st.p) == 0.0);
    CHECK(max_abs(st.w) == 0.0);
    CHECK(*s.config().rho_min == 2.0);
    CHECK(*s.config().rho_max == 2.0);
  }
  SUBCASE("square2d data") {
    Scheme s(square(8), strict_config(1.0 / 64, 1));
    const StepState st = s.initialize(rho0, u0);
    // rho0 = 2 + x(x-1) is quadratic, so the P2 projection is exact.
    CHECK(l2_error(st.rho, rho0) <= 1e-12);
    CHECK(*s.config().rho_min == doctest::Approx(1.75).epsilon(1e-15));
    CHECK(*s.config().rho_max == doctest::Approx(2.0).epsilon(1e-15));
  }
  SUBCASE("explicit bounds are kept") {
    SchemeConfig c = strict_config(1.0 / 64, 1);
    c.rho_min = 1.0;
    c.rho_max = 5.0;
    Scheme s(square(2), c);
    s.initialize(rho0, u0);
    CHECK(*s.config().rho_min == 1.0);
    CHECK(*s.config().rho_max == 5.0);
  }
  SUBCASE("non-positive density is rejected") {
    Scheme s(square(4), strict_config(1.0 / 64, 1));
    CHECK_THROWS_AS(s.initialize([](const Point& x) { return x[0] - 0.5; }, zero_velocity),
                    PositivityViolation);
    CHECK_THROWS_AS(s.initialize([](const Point&) { return 0.0; }, zero_velocity),
                    PositivityViolation);
  }
}

TEST_CASE("density step") {
  Scheme s(square(4), strict_config(1.0 / 16, 1));
  SUBCASE("zero velocity leaves rho unchanged") {
    const StepState st = s.initialize(rho0, zero_velocity);
    const FeField next = s.density_step(st);
    for (int i = 0; i < next.space().n_dofs(); ++i) {
      CHECK(std::abs(next.coeffs()[i] - st.rho.coeffs()[i]) <= 1e-12);
    }
  }
  SUBCASE("constants are preserved") {
    const StepState st = s.initialize([](const Point&) { return 1.5; }, u0);
    REQUIRE(max_abs(st.w) > 0.1);
    const FeField next = s.density_step(st);
    for (double v : next.coeffs()) CHECK(v == doctest::Approx(1.5).epsilon(1e-10));
  }
  SUBCASE("mass is conserved") {
    const StepState st = s.initialize([](const Point& x) { return 2.0 + std::sin(5 * x[0]) * x[1]; }, u0);
    const FeField next = s.density_step(st);
    CHECK(std::abs(mass(next) - mass(st.rho)) <= 1e-10);
    double moved = 0.0;
    for (int i = 0; i < next.space().n_dofs(); ++i) {
      moved = std::max(moved, std::abs(next.coeffs()[i] - st.rho.coeffs()[i]));
    }
    CHECK(moved > 1e-4);
  }
}

TEST_CASE("density step conserves mass on a two-cell mesh") {
  auto mesh = square(1);
  REQUIRE(mesh->n_cells() == 2);
  Scheme s(mesh, strict_config(0.5, 1));
  StepState st = s.initialize([](const Point& x) { return 1.0 + x[0] * x[0] + 2 * x[1]; },
                              zero_velocity);
  // Interpolated velocities vanish here (all vertices are on the boundary);
  // transport with a rotational projected field instead.
  st.w = s.projection().project([](const Point& x) { return Vec3{x[1] - 0.5, 0.5 - x[0], 0.0}; });
  REQUIRE(max_abs(st.w) > 1e-3);
  const FeField next = s.density_step(st);
  // Each cell gains what the other loses through the shared facet.
  const QuadratureRule& rule = default_cell_rule(2);
  double cell_mass[2][2] = {};
  for (int c = 0; c < 2; ++c) {
    const double det = std::abs(mesh->affine_map(c).determinant);
    for (int q = 0; q < rule.size(); ++q) {
      cell_mass[0][c] += rule.weights[q] * det * st.rho.value(c, rule.points[q])[0];
      cell_mass[1][c] += rule.weights[q] * det * next.value(c, rule.points[q])[0];
    }
  }
  const double gain0 = cell_mass[1][0] - cell_mass[0][0];
  const double gain1 = cell_mass[1][1] - cell_mass[0][1];
  CHECK(std::abs(gain0) > 1e-4);
  CHECK(std::abs(gain0 + gain1) <= 1e-12);
}

TEST_CASE("velocity step") {
  SUBCASE("homogeneous data give the zero solution") {
    Scheme s(square(4), strict_config(1.0 / 16, 1));
    const StepState st = s.initialize([](const Point&) { return 2.0; }, zero_velocity);
    const FeField rho = s.density_step(st);
    const auto [u, p] = s.velocity_step(st, rho);
    CHECK(max_abs(u) <= 1e-14);
    CHECK(max_abs(p) <= 1e-14);
  }
  SUBCASE("discrete divergence and energy inequality") {
    Scheme s(square(6), strict_config(1.0 / 16, 1));
    const StepState st = s.initialize(rho0, u0);
    const auto [next, diag] = s.step(st);
    const StepDiagnostics before = s.diagnostics(st);
    CHECK(s.divergence_residual(next.u) <= 1e-10);
    CHECK(diag.divergence_residual <= 1e-10);
    CHECK(std::abs(diag.pressure_mean) <= 1e-10);
    CHECK(diag.energy + diag.viscous_dissipation <= before.energy + 1e-9);
    CHECK(diag.viscous_dissipation > 0.0);
    CHECK(diag.upwind_dissipation >= 0.0);
    CHECK(std::abs(diag.balance_residual(before.energy)) <= 1e-10);
    CHECK(next.n == 1);
    CHECK(next.t == doctest::Approx(1.0 / 16));
  }
}

TEST_CASE("run without sources dissipates energy and conserves mass") {
  Scheme s(square(8), strict_config(1.0 / 64, 16));
  int observed = 0;
  const RunResult r = s.run(rho0, u0, [&](const StepState&, const StepDiagnostics&) { ++observed; });
  REQUIRE(r.diagnostics.size() == 17);
  CHECK(observed == 17);
  CHECK(r.final_state.n == 16);
  CHECK(r.final_state.t == doctest::Approx(0.25));
  for (std::size_t n = 1; n < r.diagnostics.size(); ++n) {
    CHECK(r.diagnostics[n].energy <= r.diagnostics[n - 1].energy + 1e-9);
    CHECK(std::abs(r.diagnostics[n].mass - r.diagnostics[n - 1].mass) <= 1e-10);
    CHECK(std::abs(r.diagnostics[n].balance_residual(r.diagnostics[n - 1].energy)) <= 1e-10);
    CHECK_FALSE(r.diagnostics[n].cutoff_active);
  }
  CHECK(std::abs(r.diagnostics.back().mass - r.diagnostics.front().mass) <= 1e-9);
  CHECK(r.diagnostics.back().energy < r.diagnostics.front().energy);
}

TEST_CASE("cutoff stays inactive on the smooth manufactured solution") {
  const double mu = 0.001;
  for (CutoffMode mode : {CutoffMode::Strict, CutoffMode::Widened}) {
    SchemeConfig c = strict_config(1.0 / 32, 8);
    c.cutoff_mode = mode;
    c.sources = [mu](const Point& x, double t) { return square_case().sources(x, t, mu); };
    Scheme s(square(8), c);
    const RunResult r = s.run(rho0, u0);
    for (const StepDiagnostics& d : r.diagnostics) CHECK_FALSE(d.cutoff_active);
  }
}

TEST_CASE("cutoff flag reports densities outside the interval") {
  SchemeConfig c = strict_config(1.0 / 16, 1);
  c.rho_min = 4.0;
  c.rho_max = 5.0;
  Scheme s(square(2), c);
  const StepState st = s.initialize([](const Point&) { return 1.0; }, zero_velocity);
  CHECK(s.diagnostics(st).cutoff_active);
}

TEST_CASE("step failures carry the step index and the last good state") {
  SchemeConfig c = strict_config(1.0 / 16, 4);
  c.sources = [](const Point&, double t) {
    Sources s;
    if (t > 0.1) s.f = std::numeric_limits<double>::quiet_NaN();
    return s;
  };
  Scheme s(square(2), c);
  try {
    s.run(rho0, u0);
    FAIL("expected a step failure");
  } catch (const StepFailure& e) {
    CHECK(e.step() == 2);
    CHECK(e.last_good().n == 1);
    CHECK(std::string(e.what()).find("step 2") != std::string::npos);
  }
}

TEST_CASE("diagnostics csv") {
  Scheme s(square(4), strict_config(1.0 / 16, 2));
  const RunResult r = s.run(rho0, u0);
  std::ostringstream out;
  write_diagnostics_csv(out, r.diagnostics);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "n,t,energy,dissipation,mass,cutoff_active");
  int rows = 0;
  while (std::getline(in, line)) {
    CHECK(std::count(line.begin(), line.end(), ',') == 5);
    CHECK(line.starts_with(std::to_string(rows) + ","));
    CHECK(line.ends_with(",0"));
    ++rows;
  }
  CHECK(rows == 3);
}

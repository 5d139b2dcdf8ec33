#include <doctest.h>

#include <cmath>
#include <sstream>

#include "vardens/errors.hpp"
#include "vardens/projections.hpp"
#include "vardens/study.hpp"

using namespace vardens;

namespace {

// Orders are printed to two decimals.
void check_rounds_to(std::optional<double> order, double printed) {
  REQUIRE(order);
  CHECK(std::abs(*order - printed) <= 0.005);
}

std::string csv(const std::vector<ConvergenceRecord>& rows, bool timing) {
  std::ostringstream out;
  write_csv(out, rows, TableOptions{timing});
  return out.str();
}

StudySpec small_space_study() {
  StudySpec s;
  s.case_name = "square2d";
  s.mode = StudyMode::Space;
  s.params = {1.0 / 2, 1.0 / 4};
  s.tau = 1.0 / 16;
  s.T = 1.0 / 8;
  return s;
}

}  // namespace

TEST_CASE("observed orders of tabulated error pairs") {
  check_rounds_to(compute_order(7.48e-06, 1.0 / 8, 4.84e-06, 1.0 / 10), 1.95);
  check_rounds_to(compute_order(3.17e-04, 1.0 / 8, 2.01e-04, 1.0 / 10), 2.04);
  check_rounds_to(compute_order(3.45e-03, 1.0 / 256, 2.72e-03, 1.0 / 324), 1.01);
}

TEST_CASE("compute_order") {
  CHECK(*compute_order(1e-3, 0.1, 0.25e-3, 0.05) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(*compute_order(0.25e-3, 0.05, 1e-3, 0.1) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(*compute_order(2.0, 1.0, 2.0, 0.5) == 0.0);
  CHECK_FALSE(compute_order(0.0, 0.1, 1e-3, 0.05));
  CHECK_FALSE(compute_order(1e-3, 0.1, -1.0, 0.05));
  CHECK_FALSE(compute_order(1e-3, 0.1, 1e-4, 0.1));
}

TEST_CASE("parse_fraction") {
  CHECK(parse_fraction("1/8") == 0.125);
  CHECK(parse_fraction("0.125") == 0.125);
  CHECK(parse_fraction(" 3/4 ") == 0.75);
  CHECK(parse_fraction("8", true) == 0.125);
  CHECK(parse_fraction("8") == 8.0);
  CHECK_THROWS_AS(parse_fraction("1/0"), InvalidArgument);
  CHECK_THROWS_AS(parse_fraction("abc"), InvalidArgument);
  CHECK_THROWS_AS(parse_fraction("-1/8"), InvalidArgument);
  CHECK_THROWS_AS(parse_fraction(""), InvalidArgument);
  const auto list = parse_fraction_list("1/4,1/6, 1/8");
  REQUIRE(list.size() == 3);
  CHECK(list[1] == doctest::Approx(1.0 / 6));
}

TEST_CASE("mesh_divisions and reciprocal formatting") {
  CHECK(mesh_divisions(0.125) == 8);
  CHECK(mesh_divisions(1.0 / 14) == 14);
  CHECK(mesh_divisions(1.0) == 1);
  CHECK_THROWS_AS(mesh_divisions(0.3), InvalidArgument);
  CHECK_THROWS_AS(mesh_divisions(0.0), InvalidArgument);
  CHECK_THROWS_AS(mesh_divisions(-0.5), InvalidArgument);
  CHECK_THROWS_AS(mesh_divisions(std::nan("")), InvalidArgument);
  CHECK(format_reciprocal(1.0 / 2048) == "1/2048");
  CHECK(format_reciprocal(0.3) == "0.3");
}

TEST_CASE("study modes") {
  CHECK(parse_study_mode("space") == StudyMode::Space);
  CHECK(parse_study_mode("time") == StudyMode::Time);
  CHECK_THROWS_AS(parse_study_mode("both"), InvalidArgument);
}

TEST_CASE("StudySpec validation") {
  StudySpec s = small_space_study();
  CHECK_NOTHROW(s.validate());
  SUBCASE("empty") {
    s.params.clear();
    CHECK_THROWS_AS(s.validate(), InvalidArgument);
  }
  SUBCASE("not decreasing") {
    s.params = {1.0 / 4, 1.0 / 2};
    CHECK_THROWS_AS(s.validate(), InvalidArgument);
  }
  SUBCASE("not a reciprocal integer") {
    s.params = {0.3};
    CHECK_THROWS_AS(s.validate(), InvalidArgument);
  }
  SUBCASE("time steps must be squares of mesh sizes") {
    s.mode = StudyMode::Time;
    s.params = {1.0 / 64, 1.0 / 100};
    CHECK_NOTHROW(s.validate());
    s.params = {1.0 / 50};
    CHECK_THROWS_AS(s.validate(), InvalidArgument);
  }
}

TEST_CASE("l2_error vanishes on resolved polynomials") {
  auto mesh = std::make_shared<const Mesh>(unit_square_mesh(3));
  auto s = std::make_shared<const FeSpace>(mesh, SpaceKind::P2DG);
  auto f = [](const Point& x) { return x[0] * x[1] - 0.5 * x[1] * x[1]; };
  CHECK(l2_error(project_dg(s, f), f) <= 1e-13);
  CHECK(l2_error(project_dg(s, f), [](const Point&) { return 0.0; }) > 0.01);
  // ||1||_{L2} of the unit square.
  CHECK(l2_error(FeField(s), [](const Point&) { return 1.0; }) == doctest::Approx(1.0).epsilon(1e-13));
  auto v = std::make_shared<const FeSpace>(mesh, SpaceKind::P1BubbleVector);
  CHECK(l2_error(FeField(v), [](const Point&) { return Vec3{3.0, 4.0, 0.0}; }) ==
        doctest::Approx(5.0).epsilon(1e-13));
}

TEST_CASE("simulate") {
  RunSpec r;
  r.n = 4;
  r.tau = 1.0 / 16;
  r.T = 1.0 / 8;
  const RunSummary s = simulate(r);
  CHECK(s.n == 4);
  CHECK(s.h == 0.25);
  CHECK(s.steps == 2);
  CHECK(s.diagnostics.size() == 3);
  CHECK(std::isfinite(s.e_rho));
  CHECK(s.e_rho > 0.0);
  CHECK(s.e_u > 0.0);
  CHECK(s.e_u < 0.5);
  CHECK(s.kink_hits == 0);
  r.n = 0;
  CHECK_THROWS_AS(simulate(r), InvalidArgument);
}

TEST_CASE("one-row studies have no orders") {
  StudySpec s = small_space_study();
  s.params = {1.0 / 2};
  const auto rows = run_study(s);
  REQUIRE(rows.size() == 1);
  CHECK_FALSE(rows[0].order_rho);
  CHECK_FALSE(rows[0].order_u);
  CHECK_FALSE(rows[0].failed);
}

TEST_CASE("study tables") {
  const auto rows = run_study(small_space_study());
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].h == 0.5);
  CHECK(rows[1].tau == 1.0 / 16);
  REQUIRE(rows[1].order_rho);
  CHECK(*rows[1].order_rho == doctest::Approx(*compute_order(rows[0].e_rho, 0.5, rows[1].e_rho, 0.25)));

  const std::string a = csv(rows, false);
  CHECK(a.starts_with("h,tau,E_rho,order_rho,E_u,order_u,seconds\n"));
  CHECK(a.find("1/2,1/16,") != std::string::npos);
  // Without timing every line ends with an empty seconds column.
  std::istringstream lines(a);
  std::string line;
  std::getline(lines, line);
  while (std::getline(lines, line)) CHECK(line.ends_with(","));
  CHECK(csv(run_study(small_space_study()), false) == a);
  CHECK(csv(rows, true) != a);

  std::ostringstream md;
  write_markdown(md, rows, TableOptions{false});
  CHECK(md.str().starts_with("| h | tau |"));
  std::ostringstream table;
  write_table(table, rows);
  CHECK(table.str().find("order_rho") != std::string::npos);
}

TEST_CASE("time studies tie h to the square root of tau") {
  StudySpec s;
  s.mode = StudyMode::Time;
  s.params = {1.0 / 4, 1.0 / 16};
  s.T = 1.0 / 4;
  const auto rows = run_study(s);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].h == 0.5);
  CHECK(rows[1].h == 0.25);
  CHECK(rows[1].tau == 1.0 / 16);
  CHECK(rows[1].order_u);
}

TEST_CASE("failed rows break the order chain") {
  std::vector<ConvergenceRecord> rows(4);
  const double h[] = {0.5, 0.25, 0.125, 0.0625};
  for (int i = 0; i < 4; ++i) {
    rows[i].h = h[i];
    rows[i].e_rho = rows[i].e_u = h[i] * h[i];
  }
  rows[2].failed = true;
  rows[2].error = "boom";
  fill_orders(rows, StudyMode::Space);
  CHECK(*rows[1].order_rho == doctest::Approx(2.0));
  CHECK_FALSE(rows[2].order_rho);
  CHECK_FALSE(rows[3].order_rho);
  std::ostringstream out;
  write_csv(out, rows, TableOptions{false});
  CHECK(out.str().find("failed") != std::string::npos);
  std::ostringstream table;
  write_table(table, rows);
  CHECK(table.str().find("boom") != std::string::npos);
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "pbounds/lp.hpp"
#include "pbounds/lp_oracle.hpp"

#include <random>
#include <sstream>

using namespace pbounds;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

LinearProgram box_lp(int n) {
  LinearProgram lp;
  lp.c = Vector::Zero(n);
  lp.a_ub = Matrix(0, n);
  lp.b_ub = Vector(0);
  lp.a_eq = Matrix(0, n);
  lp.b_eq = Vector(0);
  lp.lo = Vector::Zero(n);
  lp.hi = Vector::Constant(n, kInf);
  return lp;
}

LinearProgram random_feasible_lp(std::mt19937& gen) {
  std::uniform_int_distribution<int> nvar(2, 6), nrow(2, 8), coef(-4, 4),
      rhs(0, 6), ub(1, 5), cost(-5, 5);
  const int n = nvar(gen), m = nrow(gen);
  LinearProgram lp = box_lp(n);
  lp.a_ub.resize(m, n);
  lp.b_ub.resize(m);
  for (int j = 0; j < n; ++j) {
    lp.c[j] = cost(gen);
    lp.hi[j] = ub(gen);  // bounded box keeps the region pointed
  }
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) lp.a_ub(i, j) = coef(gen);
    lp.b_ub[i] = rhs(gen);  // the origin stays feasible
  }
  if (m >= 2 && gen() % 4 == 0) {  // degenerate: duplicated constraint
    lp.a_ub.row(1) = lp.a_ub.row(0);
    lp.b_ub[1] = lp.b_ub[0];
  }
  return lp;
}

}  // namespace

TEST_CASE("toy programs") {
  SUBCASE("minimize x with x >= 1") {
    LinearProgram lp = box_lp(1);
    lp.c[0] = 1.0;
    lp.a_ub = Matrix::Constant(1, 1, -1.0);
    lp.b_ub = Vector::Constant(1, -1.0);
    lp.hi[0] = 10.0;
    const LpSolution s = solve_lp(lp);
    REQUIRE(s.status == LpStatus::Optimal);
    CHECK(s.v[0] == doctest::Approx(1.0));
    CHECK(s.objective == doctest::Approx(1.0));
    CHECK(s.max_primal_residual <= 1e-9);
    CHECK(std::abs(s.duality_gap) <= 1e-8);
  }
  SUBCASE("simplex vertex of the unit triangle") {
    LinearProgram lp = box_lp(2);
    lp.c = Vector::Constant(2, -1.0);
    lp.a_ub = Matrix::Constant(1, 2, 1.0);
    lp.b_ub = Vector::Constant(1, 1.0);
    const LpSolution s = solve_lp(lp);
    REQUIRE(s.status == LpStatus::Optimal);
    CHECK(s.objective == doctest::Approx(-1.0));
    CHECK(s.v.sum() == doctest::Approx(1.0));
  }
  SUBCASE("infeasible sign constraint") {
    LinearProgram lp = box_lp(1);
    lp.a_ub = Matrix::Constant(1, 1, 1.0);
    lp.b_ub = Vector::Constant(1, -1.0);
    CHECK(solve_lp(lp).status == LpStatus::Infeasible);
    CHECK(enumerate_vertices_oracle(lp).status == LpStatus::Infeasible);
  }
  SUBCASE("unbounded ray") {
    LinearProgram lp = box_lp(1);
    lp.c[0] = -1.0;
    CHECK(solve_lp(lp).status == LpStatus::Unbounded);
  }
  SUBCASE("equality constraints via pairing") {
    LinearProgram lp = box_lp(2);
    lp.c << 1.0, 2.0;
    lp.a_eq = Matrix::Constant(1, 2, 1.0);
    lp.b_eq = Vector::Constant(1, 1.0);
    const LpSolution s = solve_lp(lp);
    REQUIRE(s.status == LpStatus::Optimal);
    CHECK(s.v[0] == doctest::Approx(1.0));
    CHECK(s.objective == doctest::Approx(1.0));
  }
  SUBCASE("free variables split") {
    LinearProgram lp = box_lp(1);
    lp.lo[0] = -kInf;
    lp.c[0] = 1.0;
    lp.a_ub = Matrix::Constant(1, 1, -1.0);
    lp.b_ub = Vector::Constant(1, 3.0);  // x >= -3
    const LpSolution s = solve_lp(lp);
    REQUIRE(s.status == LpStatus::Optimal);
    CHECK(s.v[0] == doctest::Approx(-3.0));
  }
}

TEST_CASE("simplex agrees with exhaustive vertex enumeration") {
  std::mt19937 gen(20240801);
  int optimal = 0;
  for (int rep = 0; rep < 200; ++rep) {
    const LinearProgram lp = random_feasible_lp(gen);
    const LpSolution s = solve_lp(lp);
    const OracleResult o = enumerate_vertices_oracle(lp);
    REQUIRE(s.status == LpStatus::Optimal);
    REQUIRE(o.status == LpStatus::Optimal);
    CHECK(std::abs(s.objective - o.objective) <= 1e-7);
    ++optimal;
  }
  CHECK(optimal == 200);
}

TEST_CASE("degenerate programs terminate") {
  // many identical rows through the optimum force degenerate pivots
  LinearProgram lp = box_lp(3);
  lp.c << -1.0, -1.0, -1.0;
  lp.a_ub = Matrix::Ones(6, 3);
  lp.b_ub = Vector::Ones(6);
  lp.hi = Vector::Constant(3, 1.0);
  const LpSolution s = solve_lp(lp);
  REQUIRE(s.status == LpStatus::Optimal);
  CHECK(s.objective == doctest::Approx(-1.0));
  CHECK(enumerate_vertices_oracle(lp).objective == doctest::Approx(-1.0));

  // the classic cycling-prone fixture (Beale)
  LinearProgram beale = box_lp(4);
  beale.c << -0.75, 150.0, -0.02, 6.0;
  beale.a_ub.resize(3, 4);
  beale.a_ub << 0.25, -60.0, -0.04, 9.0,
      0.5, -90.0, -0.02, 3.0,
      0.0, 0.0, 1.0, 0.0;
  beale.b_ub.resize(3);
  beale.b_ub << 0.0, 0.0, 1.0;
  const LpSolution sb = solve_lp(beale);
  REQUIRE(sb.status == LpStatus::Optimal);
  CHECK(sb.objective == doctest::Approx(-0.05));
}

TEST_CASE("scaling the cost leaves the argmin unchanged") {
  std::mt19937 gen(7);
  for (int rep = 0; rep < 20; ++rep) {
    LinearProgram lp = random_feasible_lp(gen);
    const LpSolution s1 = solve_lp(lp);
    lp.c *= 7.5;
    const LpSolution s2 = solve_lp(lp);
    REQUIRE(s1.status == LpStatus::Optimal);
    REQUIRE(s2.status == s1.status);
    CHECK((s1.v - s2.v).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK(s2.objective == doctest::Approx(7.5 * s1.objective).epsilon(1e-9));
  }
}

TEST_CASE("determinism: identical inputs give identical solutions") {
  std::mt19937 gen(99);
  const LinearProgram lp = random_feasible_lp(gen);
  const LpSolution a = solve_lp(lp), b = solve_lp(lp);
  CHECK(a.iterations == b.iterations);
  CHECK((a.v - b.v).cwiseAbs().maxCoeff() == 0.0);
  CHECK(a.objective == b.objective);
}

TEST_CASE("cutting-plane wrapper matches the direct solve") {
  // half-plane approximations of a circle: many rows, two variables
  const int m = 700;
  LinearProgram lp = box_lp(2);
  lp.c = Vector::Constant(2, 1.0);
  lp.a_ub.resize(m, 2);
  lp.b_ub.resize(m);
  for (int i = 0; i < m; ++i) {
    const double ang = kPi * i / (2.0 * m);
    lp.a_ub(i, 0) = -std::cos(ang);
    lp.a_ub(i, 1) = -std::sin(ang);
    lp.b_ub[i] = -1.0;
  }
  lp.hi = Vector::Constant(2, 10.0);
  const LpSolution direct = solve_lp(lp);
  const LpSolution cut = solve_lp_cutting(lp);
  REQUIRE(direct.status == LpStatus::Optimal);
  REQUIRE(cut.status == LpStatus::Optimal);
  CHECK(cut.objective == doctest::Approx(direct.objective).epsilon(1e-9));
  CHECK(cut.max_primal_residual <= 1e-9);
  CHECK(cut.dual.size() == lp.a_ub.rows());
}

TEST_CASE("anchored programs skip phase one") {
  LinearProgram lp = box_lp(2);
  lp.c << 1.0, -1.0;
  lp.lo << 0.0, 0.0;
  lp.hi << 1.0, 1.0;
  lp.a_ub = Matrix::Constant(1, 2, 1.0);
  lp.b_ub = Vector::Constant(1, 1.5);
  lp.anchor.resize(2);
  lp.anchor << 0.0, 1.0;  // a feasible box vertex
  const LpSolution s = solve_lp(lp);
  REQUIRE(s.status == LpStatus::Optimal);
  CHECK(s.objective == doctest::Approx(-1.0));
  CHECK(s.iterations <= 2);
}

TEST_CASE("lp text dump lists objective, rows and bounds") {
  LinearProgram lp = box_lp(2);
  lp.c << 1.0, -2.0;
  lp.a_ub = Matrix::Constant(1, 2, 1.0);
  lp.b_ub = Vector::Constant(1, 1.0);
  lp.a_eq = Matrix::Constant(1, 2, 1.0);
  lp.a_eq(0, 1) = -1.0;
  lp.b_eq = Vector::Constant(1, 0.25);
  lp.hi[0] = 2.0;
  const std::string text = lp_to_text(lp);
  CHECK(text.find("Minimize") != std::string::npos);
  CHECK(text.find("Subject To") != std::string::npos);
  CHECK(text.find("Bounds") != std::string::npos);
  CHECK(text.find("<= 1") != std::string::npos);
  CHECK(text.find("= 0.25") != std::string::npos);
  CHECK(text.find("End") != std::string::npos);
}

TEST_CASE("validation rejects malformed programs") {
  LinearProgram lp = box_lp(2);
  lp.b_ub = Vector::Constant(1, 1.0);  // rows mismatch
  CHECK_THROWS_AS(solve_lp(lp), std::invalid_argument);
  LinearProgram lp2 = box_lp(1);
  lp2.c[0] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(solve_lp(lp2), std::invalid_argument);
  LinearProgram lp3 = box_lp(1);
  lp3.lo[0] = 2.0;
  lp3.hi[0] = 1.0;
  CHECK_THROWS_AS(solve_lp(lp3), std::invalid_argument);
  LinearProgram big = box_lp(9);
  big.a_ub = Matrix::Zero(9, 9);
  big.b_ub = Vector::Zero(9);
  CHECK_THROWS_AS(enumerate_vertices_oracle(big), std::invalid_argument);
}

TEST_CASE("the solver adapter point routes to the reference simplex") {
  LinearProgram lp = box_lp(2);
  lp.c = Vector::Constant(2, -1.0);
  lp.a_ub = Matrix::Constant(1, 2, 1.0);
  lp.b_ub = Vector::Constant(1, 1.0);
  const ReferenceSimplex solver;
  const LpSolverAdapter& adapter = solver;
  const LpSolution s = adapter.solve(lp, SolveOptions{});
  REQUIRE(s.status == LpStatus::Optimal);
  CHECK(s.objective == doctest::Approx(-1.0));
}

#include <doctest.h>

#include <limits>
#include <random>

#include "bilevel/solve.hpp"
#include "support/lp_oracle.hpp"

using namespace bilevel;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

LinearProgram one_dimensional(double cost) {
  LinearProgram lp;
  lp.cost = Vector::Constant(1, cost);
  lp.a_ineq = Matrix::Zero(0, 1);
  lp.b_ineq = Vector::Zero(0);
  lp.a_eq = Matrix::Zero(0, 1);
  lp.b_eq = Vector::Zero(0);
  return lp;
}

// Random bounded LP with a known feasible point.
LinearProgram random_lp(std::mt19937_64& rng, int n, int rows, int eq_rows) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  LinearProgram lp;
  lp.cost = Vector::NullaryExpr(n, [&] { return u(rng); });
  const Vector x0 = Vector::NullaryExpr(n, [&] { return 2.0 * u(rng); });
  lp.a_ineq = Matrix::NullaryExpr(rows, n, [&] { return u(rng); });
  lp.b_ineq = lp.a_ineq * x0 + Vector::NullaryExpr(rows, [&] { return 0.5 * (1.0 + u(rng)); });
  lp.a_eq = Matrix::NullaryExpr(eq_rows, n, [&] { return u(rng); });
  lp.b_eq = lp.a_eq * x0;
  lp.lower = Vector::Constant(n, -5.0);
  lp.upper = Vector::Constant(n, 5.0);
  return lp;
}

double dual_objective(const LinearProgram& lp, const SolveReport& r) {
  const Vector& lam = r.multipliers.get("ineq");
  const Vector& mu = r.multipliers.get("eq");
  double value = -lp.b_ineq.dot(lam) - lp.b_eq.dot(mu);
  const Vector& lo = r.multipliers.get("lower");
  const Vector& hi = r.multipliers.get("upper");
  for (int j = 0; j < lp.num_vars(); ++j) {
    if (lo[j] != 0.0) value += lo[j] * lp.lower[j];
    if (hi[j] != 0.0) value -= hi[j] * lp.upper[j];
  }
  return value;
}

}  // namespace

TEST_CASE("min x s.t. x >= 1") {
  LinearProgram lp = one_dimensional(1.0);
  lp.a_ineq = Matrix::Constant(1, 1, -1.0);
  lp.b_ineq = Vector::Constant(1, -1.0);
  const SolveReport r = solve_lp(lp);
  REQUIRE(r.optimal());
  CHECK(r.point[0] == doctest::Approx(1.0));
  CHECK(r.multipliers.get("ineq")[0] == doctest::Approx(1.0));
}

TEST_CASE("min -y s.t. -y >= -1, y >= 0") {
  LinearProgram lp = one_dimensional(-1.0);
  lp.a_ineq = Matrix::Constant(1, 1, 1.0);
  lp.b_ineq = Vector::Constant(1, 1.0);
  lp.lower = Vector::Zero(1);
  const SolveReport r = solve_lp(lp);
  REQUIRE(r.optimal());
  CHECK(r.point[0] == doctest::Approx(1.0));
  CHECK(r.objective == doctest::Approx(-1.0));
}

TEST_CASE("infeasible and unbounded programs are reported") {
  LinearProgram infeasible = one_dimensional(1.0);
  infeasible.a_ineq = (Matrix(2, 1) << 1.0, -1.0).finished();
  infeasible.b_ineq = (Vector(2) << 0.0, -1.0).finished();
  CHECK(solve_lp(infeasible).status == SolveStatus::kInfeasible);

  LinearProgram unbounded = one_dimensional(-1.0);
  unbounded.lower = Vector::Zero(1);
  CHECK(solve_lp(unbounded).status == SolveStatus::kUnbounded);

  LinearProgram bad_bounds = one_dimensional(1.0);
  bad_bounds.lower = Vector::Constant(1, 2.0);
  bad_bounds.upper = Vector::Constant(1, 1.0);
  CHECK(solve_lp(bad_bounds).status == SolveStatus::kInfeasible);
}

TEST_CASE("upper-bounded and free variables") {
  // max x1 + x2 with x1 ≤ 3 (no lower bound), x2 free, x1 + x2 ≤ 4, x2 − x1 ≤ 0.
  LinearProgram lp;
  lp.cost = (Vector(2) << -1.0, -1.0).finished();
  lp.a_ineq = (Matrix(2, 2) << 1.0, 1.0, -1.0, 1.0).finished();
  lp.b_ineq = (Vector(2) << 4.0, 0.0).finished();
  lp.a_eq = Matrix::Zero(0, 2);
  lp.b_eq = Vector::Zero(0);
  lp.lower = (Vector(2) << -kInf, -kInf).finished();
  lp.upper = (Vector(2) << 3.0, kInf).finished();
  const SolveReport r = solve_lp(lp);
  REQUIRE(r.optimal());
  CHECK(r.objective == doctest::Approx(-4.0));
  CHECK(dual_objective(lp, r) == doctest::Approx(-4.0));
}

TEST_CASE("random LPs agree with vertex enumeration and satisfy strong duality") {
  std::mt19937_64 rng(1234);
  int solved = 0;
  for (int k = 0; k < 200; ++k) {
    const int n = 1 + k % 6;
    const int rows = 1 + (k / 6) % 5;
    const int eq_rows = (k % 3 == 0) ? std::min(1, n - 1) : 0;
    const LinearProgram lp = random_lp(rng, n, rows, eq_rows);
    const auto oracle = bilevel::testing::vertex_enumeration(lp);
    REQUIRE(oracle.has_value());
    const SolveReport r = solve_lp(lp);
    REQUIRE(r.optimal());
    CHECK(std::abs(r.objective - *oracle) <= 1e-9 * std::max(1.0, std::abs(*oracle)));
    CHECK(std::abs(dual_objective(lp, r) - r.objective) <= 1e-9);

    // Primal feasibility, dual sign, complementary slackness.
    const Vector slack = lp.b_ineq - lp.a_ineq * r.point;
    CHECK(slack.minCoeff() >= -1e-10);
    const Vector& lam = r.multipliers.get("ineq");
    CHECK(lam.minCoeff() >= 0.0);
    CHECK(lam.cwiseProduct(slack).cwiseAbs().maxCoeff() <= 1e-10);
    const Vector stat = lp.cost + lp.a_ineq.transpose() * lam + lp.a_eq.transpose() * r.multipliers.get("eq") -
                        r.multipliers.get("lower") + r.multipliers.get("upper");
    CHECK(stat.cwiseAbs().maxCoeff() <= 1e-10);
    ++solved;
  }
  CHECK(solved == 200);
}

TEST_CASE("degenerate LP with redundant equalities") {
  // x1 + x2 = 1 stated twice, x ≥ 0, min x1 − x2.
  LinearProgram lp;
  lp.cost = (Vector(2) << 1.0, -1.0).finished();
  lp.a_ineq = Matrix::Zero(0, 2);
  lp.b_ineq = Vector::Zero(0);
  lp.a_eq = (Matrix(2, 2) << 1.0, 1.0, 2.0, 2.0).finished();
  lp.b_eq = (Vector(2) << 1.0, 2.0).finished();
  lp.lower = Vector::Zero(2);
  const SolveReport r = solve_lp(lp);
  REQUIRE(r.optimal());
  CHECK(r.objective == doctest::Approx(-1.0));
  CHECK(r.point[1] == doctest::Approx(1.0));
}

#include <doctest.h>

#include <random>

#include "bilevel/model.hpp"
#include "support/examples.hpp"

using namespace bilevel;
using bilevel::testing::make_point;

namespace {

LinearBilevelData scalar_data() {
  LinearBilevelData d;
  d.A1 = Matrix::Constant(1, 1, 1.0);
  d.b1 = Vector::Zero(1);
  d.c1 = Vector::Constant(1, 1.0);
  d.c2 = Vector::Constant(1, 1.0);
  d.d2 = Vector::Constant(1, 1.0);
  d.A2 = Matrix::Zero(1, 1);
  d.B2 = Matrix::Constant(1, 1, 1.0);
  d.b2 = Vector::Zero(1);
  d.lb = Vector::Constant(1, -10.0);
  d.ub = Vector::Constant(1, 10.0);
  return d;
}

}  // namespace

TEST_CASE("to_expressions: counts and objective") {
  LinearBilevelData d = scalar_data();
  const BilevelProblem bp = to_expressions(d);
  CHECK(bp.p() == 3);
  CHECK(bp.q() == 0);
  CHECK(bp.upper_ineq.size() == 1);

  d.c1[0] = 3.0;
  d.c2[0] = 4.0;
  CHECK(eval(to_expressions(d).upper_objective, make_point({1.0, 2.0})) == 11.0);

  d.ub[0] = -20.0;
  CHECK_THROWS_AS(to_expressions(d), Error);
  LinearBilevelData bad = scalar_data();
  bad.b2 = Vector::Zero(2);
  try {
    to_expressions(bad);
    FAIL("expected DimensionMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kDimensionMismatch);
  }
}

TEST_CASE("to_expressions: g matches matrix arithmetic") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int k = 0; k < 20; ++k) {
    const LinearBilevelData d = generate_instance(100 + k, {3, 2, 4, 3}, 0.6);
    const BilevelProblem bp = to_expressions(d);
    const Vector x = Vector::NullaryExpr(3, [&] { return u(rng); });
    const Vector y = Vector::NullaryExpr(4, [&] { return u(rng); });
    Point p(7);
    p << x, y;
    Vector expected(3 + 8);
    expected << d.A2 * x + d.B2 * y - d.b2, y - d.ub, d.lb - y;
    for (int i = 0; i < bp.p(); ++i) {
      CHECK(std::abs(eval(bp.lower_ineq[static_cast<std::size_t>(i)], p) - expected[i]) <= 1e-12);
    }
    CHECK(std::abs(eval(bp.lower_objective, p) - d.d2.dot(y)) <= 1e-12);
    CHECK(std::abs(eval(bp.upper_objective, p) - d.c1.dot(x) - d.c2.dot(y)) <= 1e-12);
    CHECK(validate(bp).empty());
  }
}

TEST_CASE("generate_instance: ranges, bounds and determinism") {
  const LinearBilevelData d = generate_instance(5, {2, 2, 2, 2}, 1.0);
  for (const Matrix* m : {&d.A1, &d.A2, &d.B2}) {
    CHECK(m->minCoeff() >= 0.0);
    CHECK(m->maxCoeff() <= 1.0);
  }
  for (const Vector* v : {&d.b1, &d.b2, &d.c1, &d.c2, &d.d2}) {
    CHECK(v->minCoeff() >= 0.0);
    CHECK(v->maxCoeff() <= 1.0);
  }
  CHECK((d.lb.array() == -10.0).all());
  CHECK((d.ub.array() == 10.0).all());

  const LinearBilevelData again = generate_instance(5, {2, 2, 2, 2}, 1.0);
  CHECK(again.A1 == d.A1);
  CHECK(again.B2 == d.B2);
  CHECK(again.d2 == d.d2);
  CHECK(generate_instance(6, {2, 2, 2, 2}, 1.0).A1 != d.A1);

  CHECK_THROWS_AS(generate_instance(1, {2, 2, 2, 2}, 0.0), Error);
  CHECK_THROWS_AS(generate_instance(1, {0, 2, 2, 2}, 0.5), Error);
}

TEST_CASE("generate_instance: density 0.1 gives about 10% nonzeros") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const LinearBilevelData d = generate_instance(seed, {50, 40, 60, 50}, 0.1);
    const double fraction = static_cast<double>((d.A2.array() != 0.0).count()) /
                            static_cast<double>(d.A2.size());
    CHECK(fraction >= 0.05);
    CHECK(fraction <= 0.15);
  }
}

TEST_CASE("generate_instance: x = 0 is upper- and lower-level feasible") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const LinearBilevelData d = generate_instance(seed, {4, 3, 5, 4}, 0.3);
    CHECK(d.b1.minCoeff() >= 0.0);
    CHECK(solve_lp(lower_level_lp(d, Vector::Zero(4))).optimal());
    CHECK(validate(to_expressions(d)).empty());
  }
}

TEST_CASE("lower_level_lp: scalar instance") {
  const LinearBilevelData d = scalar_data();
  const LinearProgram lp = lower_level_lp(d, Vector::Constant(1, 7.0));
  CHECK(lp.b_ineq[0] == 0.0);  // A2 = 0: independent of x
  const SolveReport r = solve_lp(lp);
  REQUIRE(r.optimal());
  CHECK(r.point[0] == doctest::Approx(-10.0));
  CHECK(r.objective == doctest::Approx(-10.0));
}

TEST_CASE("lower_level_lp: value matches a grid search") {
  const double h = 0.01;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    LinearBilevelData d = generate_instance(seed, {2, 2, 2, 2}, 1.0);
    // Shift b2 down so the coupling rows cut through the box.
    d.b2 -= Vector::Constant(2, 3.0);
    const Vector x = Vector::Constant(2, 0.5);
    const SolveReport r = solve_lp(lower_level_lp(d, x));
    const Vector rhs = d.b2 - d.A2 * x;
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= 2000; ++i) {
      for (int j = 0; j <= 2000; ++j) {
        const Eigen::Vector2d y(-10.0 + i * h, -10.0 + j * h);
        if (((d.B2 * y - rhs).array() <= 1e-12).all()) best = std::min(best, d.d2.dot(y));
      }
    }
    if (!std::isfinite(best)) {
      CHECK(r.status == SolveStatus::kInfeasible);
      continue;
    }
    REQUIRE(r.optimal());
    CHECK(r.objective <= best + 1e-12);
    CHECK(best - r.objective <= d.d2.lpNorm<1>() * h);
  }
}

TEST_CASE("validate: index and upper-level checks") {
  BilevelProblem bp = bilevel::testing::quadratic_lower_level();
  CHECK(validate(bp).empty());

  BilevelProblem out_of_range = bp;
  out_of_range.lower_ineq.push_back(Expr::variable(2));
  const auto issues = validate(out_of_range);
  REQUIRE(issues.size() == 1);
  CHECK(issues[0].code == ErrorCode::kIndexOutOfRange);

  BilevelProblem uses_y = bp;
  uses_y.upper_ineq.push_back(Expr::variable(1) - 1.0);
  const auto y_issues = validate(uses_y);
  REQUIRE(y_issues.size() == 1);
  CHECK(y_issues[0].code == ErrorCode::kUpperConstraintUsesY);
  try {
    require_valid(uses_y);
    FAIL("expected UpperConstraintUsesY");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kUpperConstraintUsesY);
  }
}

#pragma once

// Worked bilevel programs used across the test suites.

#include <random>

#include "bilevel/model.hpp"

namespace bilevel::testing {

// min 2x − y  s.t.  x ≥ 0,  y ∈ argmin { −e^{−(y−x)²} + 0.3y² − 0.6xy : y ≥ x }.
inline BilevelProblem exp_lower_level() {
  const Expr x = Expr::variable(0);
  const Expr y = Expr::variable(1);
  BilevelProblem bp;
  bp.n = 1;
  bp.m = 1;
  bp.upper_objective = 2.0 * x - y;
  bp.lower_objective = -exp(-pow(y - x, 2)) + 0.3 * pow(y, 2) - 0.6 * x * y;
  bp.lower_ineq = {x - y};
  bp.upper_ineq = {-x};
  return bp;
}

// min (x − y − 8)²  s.t.  x ≥ 1,  y ∈ argmin { y : y³ ≤ x, y ≥ 0 }.
inline BilevelProblem cubic_lower_level() {
  const Expr x = Expr::variable(0);
  const Expr y = Expr::variable(1);
  BilevelProblem bp;
  bp.n = 1;
  bp.m = 1;
  bp.upper_objective = pow(x - y - 8.0, 2);
  bp.lower_objective = y;
  bp.lower_ineq = {pow(y, 3) - x, -y};
  bp.upper_ineq = {1.0 - x};
  return bp;
}

// min x² − (2y + 1)²  s.t.  x ≤ 0,  y ∈ argmin { (y − 1)² : 3x − y − 3 ≤ 0, x + y − 1 ≤ 0 }.
inline BilevelProblem quadratic_lower_level() {
  const Expr x = Expr::variable(0);
  const Expr y = Expr::variable(1);
  BilevelProblem bp;
  bp.n = 1;
  bp.m = 1;
  bp.upper_objective = pow(x, 2) - pow(2.0 * y + 1.0, 2);
  bp.lower_objective = pow(y - 1.0, 2);
  bp.lower_ineq = {3.0 * x - y - 3.0, x + y - 1.0};
  bp.upper_ineq = {x};
  return bp;
}

inline Point make_point(std::initializer_list<double> values) {
  Point p(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double v : values) p[i++] = v;
  return p;
}

}  // namespace bilevel::testing

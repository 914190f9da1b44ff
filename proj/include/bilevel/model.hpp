#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "bilevel/expr.hpp"
#include "bilevel/solve.hpp"

namespace bilevel {

/**
 * Smooth bilevel program
 *
 *   min F(x, y)  s.t.  G_X(x) ≤ 0,  y ∈ argmin_y { f(x, y) : g(x, y) ≤ 0, h(x, y) = 0 }.
 *
 * Variables are laid out as x = [0, n), y = [n, n + m).
 */
struct BilevelProblem {
  int n = 0;
  int m = 0;
  Expr upper_objective;           // F
  Expr lower_objective;           // f
  std::vector<Expr> lower_ineq;   // g, p entries
  std::vector<Expr> lower_eq;     // h, q entries
  std::vector<Expr> upper_ineq;   // G_X, x-indices only

  int p() const { return static_cast<int>(lower_ineq.size()); }
  int q() const { return static_cast<int>(lower_eq.size()); }
  int dim() const { return n + m; }
};

/// Generator dimensions, in the order (n, p, m, q): p rows of A1, q rows of A2.
struct LinearDims {
  int n = 0;
  int p = 0;
  int m = 0;
  int q = 0;
};

/**
 * Linear bilevel program
 *
 *   min c1ᵀx + c2ᵀy  s.t.  A1 x ≤ b1,
 *   y ∈ argmin { d2ᵀy : A2 x + B2 y ≤ b2, l_b ≤ y ≤ u_b }.
 */
struct LinearBilevelData {
  Matrix A1;  // p × n
  Vector b1;
  Vector c1;
  Vector c2;
  Vector d2;
  Matrix A2;  // q × n
  Matrix B2;  // q × m
  Vector b2;
  Vector lb;
  Vector ub;

  // Generator provenance; zero for hand-written data.
  std::uint64_t seed = 0;
  int retries = 0;

  LinearDims dims() const {
    return {static_cast<int>(A1.cols()), static_cast<int>(A1.rows()),
            static_cast<int>(B2.cols()), static_cast<int>(A2.rows())};
  }
};

/// Throws kDimensionMismatch / kInvalidArgument if the data is inconsistent.
void check_linear_data(const LinearBilevelData& d);

/// Expression form with g = (A2x + B2y − b2; y − u_b; l_b − y) and no h.
BilevelProblem to_expressions(const LinearBilevelData& d);

/// Sparse uniform random instance; deterministic in (seed, dims, density).
LinearBilevelData generate_instance(std::uint64_t seed, LinearDims dims, double density);

/// min d2ᵀy  s.t.  B2 y ≤ b2 − A2 x,  y ≤ u_b,  −y ≤ −l_b (rows in that order).
LinearProgram lower_level_lp(const LinearBilevelData& d, const Vector& x);

struct ValidationIssue {
  ErrorCode code;
  std::string message;
};

/// Every invariant violation of the problem; empty when well formed.
std::vector<ValidationIssue> validate(const BilevelProblem& bp);

/// Throws the first validation issue, if any.
void require_valid(const BilevelProblem& bp);

}  // namespace bilevel

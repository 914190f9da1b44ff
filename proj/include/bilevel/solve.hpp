#pragma once

#include <functional>
#include <string_view>

#include "bilevel/expr.hpp"
#include "bilevel/multipliers.hpp"
#include "bilevel/nlp.hpp"

namespace bilevel {

enum class SolveStatus { kOptimal, kInfeasible, kUnbounded, kIterLimit, kStalled };

std::string_view to_string(SolveStatus status);

struct SolveReport {
  SolveStatus status = SolveStatus::kIterLimit;
  Point point;
  MultiplierSet multipliers;
  double objective = 0.0;
  int iterations = 0;
  double wall_time = 0.0;  // seconds

  bool optimal() const { return status == SolveStatus::kOptimal; }
};

/**
 * min costᵀx  s.t.  a_ineq x ≤ b_ineq,  a_eq x = b_eq,  lower ≤ x ≤ upper.
 *
 * Empty bound vectors mean "free"; individual entries may be ±infinity.
 */
struct LinearProgram {
  Vector cost;
  Matrix a_ineq;
  Vector b_ineq;
  Matrix a_eq;
  Vector b_eq;
  Vector lower;
  Vector upper;

  int num_vars() const { return static_cast<int>(cost.size()); }
};

/// min ½xᵀHx + gᵀx  s.t.  a_ineq x ≤ b_ineq,  a_eq x = b_eq.
struct QuadraticProgram {
  Matrix hessian;
  Vector gradient;
  Matrix a_ineq;
  Vector b_ineq;
  Matrix a_eq;
  Vector b_eq;

  int num_vars() const { return static_cast<int>(gradient.size()); }
};

/**
 * Two-phase revised simplex.
 *
 * On kOptimal the multipliers hold blocks "ineq" (≥ 0), "eq", "lower" (≥ 0)
 * and "upper" (≥ 0) with
 *   cost + a_ineqᵀ ineq + a_eqᵀ eq − lower + upper = 0.
 */
SolveReport solve_lp(const LinearProgram& lp);

struct QpOptions {
  int max_iter = 0;  // 0: 50 · (variables + constraints) + 50
};

/**
 * Dual active-set method (Goldfarb–Idnani) for convex QPs, started from the
 * unconstrained minimizer.
 *
 * An indefinite Hessian first gets ρA_eqᵀA_eq added (convex on the equality
 * null space) and is then shifted by τI (τ doubling from 1e-8) until it
 * factors as positive definite. Multipliers: "ineq" (≥ 0) and "eq" with
 * Hx + g + a_ineqᵀ ineq + a_eqᵀ eq = 0.
 */
SolveReport solve_qp(const QuadraticProgram& qp, const QpOptions& options = {});

/// One accepted or rejected SQP iteration, as seen by NlpOptions::on_iteration.
struct SqpIteration {
  int iter = 0;
  double merit_before = 0.0;  // ℓ1 merit at the iterate, current penalty
  double merit_after = 0.0;   // ℓ1 merit at the accepted trial point, same penalty
  double penalty = 0.0;
  double feasibility = 0.0;
  double stationarity = 0.0;
  double step = 0.0;
};

struct NlpOptions {
  double tol = 1e-8;
  int max_iter = 200;
  bool verbose = false;
  /// Lines are passed here when verbose; default prints to stderr.
  std::function<void(std::string_view)> log;
  std::function<void(const SqpIteration&)> on_iteration;
};

/**
 * Line-search SQP with exact Lagrangian Hessians and an ℓ1 merit function.
 *
 * Multipliers: "ineq" (≥ 0) and "eq" with ∇f + Σ ineq_i ∇c_i + Σ eq_j ∇h_j = 0.
 */
SolveReport solve_nlp(const Nlp& nlp, const Point& start, const NlpOptions& options = {});

/// Convenience overload matching the (tol, max_iter) call shape.
inline SolveReport solve_nlp(const Nlp& nlp, const Point& start, double tol, int max_iter) {
  NlpOptions options;
  options.tol = tol;
  options.max_iter = max_iter;
  return solve_nlp(nlp, start, options);
}

}  // namespace bilevel

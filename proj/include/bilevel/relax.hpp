#pragma once

#include <functional>
#include <optional>
#include <string_view>
#include <vector>

#include "bilevel/model.hpp"
#include "bilevel/solve.hpp"

namespace bilevel {

enum class RelaxMode { kWdp, kMpec };

std::string_view to_string(RelaxMode mode);

struct RelaxConfig {
  double t0 = 1.0;
  double sigma = 0.1;
  double eps_p = 1e-8;
  double eps_r = 1e-16;
  double delta_min = 1e-16;
  int max_outer = 20;
  RelaxMode mode = RelaxMode::kWdp;
  /// Step 3 keeps x̃ fixed instead of taking the x-block of the Step 2 point.
  bool literal_step3 = false;
  /// SQP iteration cap per Step 2 solve.
  int max_inner = 200;
  std::optional<double> u_cap;
  bool verbose = false;
  std::function<void(std::string_view)> log;
};

/// Throws kInvalidArgument on out-of-range fields.
void validate(const RelaxConfig& cfg);

enum class RelaxExit { kStep1, kStep2, kMaxOuter };

std::string_view to_string(RelaxExit exit);

struct RelaxTraceRow {
  int k = 0;
  double t = 0.0;
  double objective = 0.0;      // upper objective at the Step 2 point
  double kkt_residual = 0.0;   // unrelaxed reformulation, +inf if infeasible there
  double step1_residual = 0.0; // same check at w̃^k
  SolveStatus status = SolveStatus::kOptimal;  // Step 2 solver status
  int inner_iterations = 0;
};

struct RunReport {
  Point point;  // on the WDP or MPEC layout
  Vector x;
  Vector y;
  double objective = 0.0;
  double infeasibility = 0.0;
  int outer_iterations = 0;
  RelaxExit exit = RelaxExit::kMaxOuter;
  std::vector<RelaxTraceRow> trace;
  double wall_time = 0.0;
};

/**
 * Relaxation method on a linear bilevel program, starting from x̃0 = 0 unless
 * `x0` is given. The lower level is solved as an LP.
 *
 * Throws kLowerLevelInfeasible, or kSolverFailure with the trace so far in
 * the message.
 */
RunReport run(const LinearBilevelData& d, const RelaxConfig& cfg,
              const std::optional<Vector>& x0 = std::nullopt);

/**
 * Same scheme on an expression-defined program. Step 1 solves the lower level
 * locally with SQP from `y0` (from ỹ^{k−1} afterwards); its multipliers give
 * ũ, ṽ. The reported infeasibility is
 *   ‖max(0, G)‖ + ‖max(0, g)‖ + ‖h‖ + |f(x, y) − f(x, ỹ)|
 * with ỹ a fresh lower-level solve at the final x.
 */
RunReport run(const BilevelProblem& bp, const RelaxConfig& cfg, const Vector& x0,
              const Vector& y0);

}  // namespace bilevel

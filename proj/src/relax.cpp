#include "bilevel/relax.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>

#include "bilevel/bench.hpp"
#include "bilevel/certify.hpp"
#include "bilevel/reform.hpp"
#include "norms.hpp"

namespace bilevel {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kLowerTol = 1e-10;
constexpr double kLowerFeasTol = 1e-6;

struct LowerSolution {
  Vector y;
  Vector u;
  Vector v;
};

using LowerSolver = std::function<LowerSolution(const Vector& x)>;
using InfeasibilityFn = std::function<double(const Vector& x, const Vector& y)>;

double unrelaxed_residual(const Nlp& nlp, const Point& p, double eps_p) {
  try {
    return kkt_residual(nlp, p, eps_p).residual;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kInfeasiblePoint) return kInf;
    throw;
  }
}

std::string trace_summary(const std::vector<RelaxTraceRow>& trace) {
  std::string out = " after " + std::to_string(trace.size()) + " outer iterations";
  if (!trace.empty()) {
    char buf[96];
    std::snprintf(buf, sizeof buf, " (last t=%.3e, objective=%.6e)", trace.back().t,
                  trace.back().objective);
    out += buf;
  }
  return out;
}

RunReport drive(const BilevelProblem& bp, const RelaxConfig& cfg, Vector x,
                const LowerSolver& lower, const InfeasibilityFn& infeas) {
  validate(cfg);
  require_valid(bp);
  const auto started = std::chrono::steady_clock::now();
  auto log = [&](const std::string& line) {
    if (!cfg.verbose) return;
    if (cfg.log) {
      cfg.log(line);
    } else {
      std::fprintf(stderr, "%s\n", line.c_str());
    }
  };

  ReformOptions reform;
  reform.u_cap = cfg.u_cap;
  const bool wdp = cfg.mode == RelaxMode::kWdp;
  const Nlp unrelaxed = wdp ? build_wdp(bp, reform) : build_mpec(bp, reform);

  RunReport report;
  double t = cfg.t0;
  Point last;
  for (int k = 0; k < cfg.max_outer; ++k) {
    // Step 1
    const LowerSolution ls = lower(x);
    Point start(unrelaxed.dim);
    if (wdp) {
      start << x, ls.y, ls.y, ls.u, ls.v;
    } else {
      start << x, ls.y, ls.u, ls.v;
    }
    RelaxTraceRow row;
    row.k = k;
    row.t = t;
    row.step1_residual = unrelaxed_residual(unrelaxed, start, cfg.eps_p);
    report.outer_iterations = k + 1;
    if (row.step1_residual <= cfg.eps_p) {
      Point xy(bp.n + bp.m);
      xy << x, ls.y;
      row.objective = eval(bp.upper_objective, xy);
      row.kkt_residual = row.step1_residual;
      row.inner_iterations = 0;
      report.trace.push_back(row);
      report.exit = RelaxExit::kStep1;
      last = start;
      break;
    }

    // Step 2
    const Nlp relaxed = wdp ? relax_wdp(unrelaxed, t) : relax_mpec(unrelaxed, t);
    NlpOptions options;
    options.tol = cfg.eps_r;
    options.max_iter = cfg.max_inner;
    SolveReport sr;
    try {
      sr = solve_nlp(relaxed, start, options);
    } catch (const Error& e) {
      throw Error(ErrorCode::kSolverFailure,
                  std::string("step 2 solve failed: ") + e.what() + trace_summary(report.trace));
    }
    if (!sr.point.allFinite()) {
      throw Error(ErrorCode::kSolverFailure,
                  "step 2 returned a non-finite point" + trace_summary(report.trace));
    }
    row.objective = sr.objective;
    row.status = sr.status;
    row.inner_iterations = sr.iterations;
    row.kkt_residual = unrelaxed_residual(unrelaxed, sr.point, cfg.eps_p);
    report.trace.push_back(row);
    last = sr.point;

    char line[160];
    std::snprintf(line, sizeof line, "k=%-3d t=%.3e  objective=% .8e  step1=%.3e  kkt=%.3e  %s (%d)",
                  k, t, row.objective, row.step1_residual, row.kkt_residual,
                  std::string(to_string(sr.status)).c_str(), sr.iterations);
    log(line);

    if (row.kkt_residual <= cfg.eps_p) {
      report.exit = RelaxExit::kStep2;
      break;
    }
    // Step 3
    if (!cfg.literal_step3) x = sr.point.head(bp.n);
    t = std::max(cfg.sigma * t, cfg.delta_min);
  }

  report.point = last;
  report.x = last.head(bp.n);
  report.y = last.segment(bp.n, bp.m);
  Point xy(bp.n + bp.m);
  xy << report.x, report.y;
  report.objective = eval(bp.upper_objective, xy);
  report.infeasibility = infeas(report.x, report.y);
  report.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return report;
}

// min_y f(x, y) s.t. g(x, y) ≤ 0, h(x, y) = 0 with x fixed.
Nlp lower_level_nlp(const BilevelProblem& bp, const Vector& x) {
  std::vector<Expr> replacement;
  replacement.reserve(static_cast<std::size_t>(bp.n + bp.m));
  for (int i = 0; i < bp.n; ++i) replacement.push_back(Expr::constant(x[i]));
  for (int j = 0; j < bp.m; ++j) replacement.push_back(Expr::variable(j));
  Nlp nlp;
  nlp.dim = bp.m;
  nlp.layout.add("y", bp.m);
  nlp.objective = substitute(bp.lower_objective, replacement);
  for (const Expr& g : bp.lower_ineq) nlp.ineq.push_back(substitute(g, replacement));
  for (const Expr& h : bp.lower_eq) nlp.eq.push_back(substitute(h, replacement));
  return nlp;
}

LowerSolution solve_lower_nlp(const BilevelProblem& bp, const Vector& x, const Vector& y_start) {
  const Nlp nlp = lower_level_nlp(bp, x);
  const SolveReport r = solve_nlp(nlp, y_start, kLowerTol, 500);
  const NlpEvaluation ev = evaluate(nlp, r.point);
  double violation = ev.ineq.size() ? std::max(0.0, ev.ineq.maxCoeff()) : 0.0;
  violation = std::max(violation, inf_norm(ev.eq));
  if (r.status == SolveStatus::kInfeasible || violation > kLowerFeasTol) {
    throw Error(ErrorCode::kLowerLevelInfeasible, "lower-level solve found no feasible y");
  }
  return {r.point, r.multipliers.get("ineq"), r.multipliers.get("eq")};
}

}  // namespace

std::string_view to_string(RelaxMode mode) { return mode == RelaxMode::kWdp ? "WDP" : "MPEC"; }

std::string_view to_string(RelaxExit exit) {
  switch (exit) {
    case RelaxExit::kStep1:
      return "step1";
    case RelaxExit::kStep2:
      return "step2";
    case RelaxExit::kMaxOuter:
      return "max_outer";
  }
  return "max_outer";
}

void validate(const RelaxConfig& cfg) {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::kInvalidArgument, what); };
  if (!(cfg.t0 > 0.0)) fail("t0 must be positive");
  if (!(cfg.sigma > 0.0 && cfg.sigma < 1.0)) fail("sigma must lie in (0, 1)");
  if (!(cfg.eps_p > 0.0) || !(cfg.eps_r > 0.0)) fail("tolerances must be positive");
  if (!(cfg.delta_min > 0.0) || cfg.delta_min > cfg.t0) fail("delta_min must lie in (0, t0]");
  if (cfg.eps_r > cfg.eps_p) fail("eps_r must not exceed eps_p");
  if (cfg.max_outer < 1) fail("max_outer must be at least 1");
  if (cfg.max_inner < 1) fail("max_inner must be at least 1");
  if (cfg.u_cap && !(*cfg.u_cap > 0.0)) fail("u_cap must be positive");
}

RunReport run(const LinearBilevelData& d, const RelaxConfig& cfg, const std::optional<Vector>& x0) {
  const BilevelProblem bp = to_expressions(d);
  const auto dims = d.dims();
  const Vector x = x0 ? *x0 : Vector::Zero(dims.n);
  if (x.size() != dims.n) throw Error(ErrorCode::kDimensionMismatch, "x0 has the wrong size");
  const LowerSolver lower = [&](const Vector& xk) {
    const SolveReport r = solve_lp(lower_level_lp(d, xk));
    if (!r.optimal()) {
      throw Error(ErrorCode::kLowerLevelInfeasible,
                  "lower-level LP ended " + std::string(to_string(r.status)));
    }
    return LowerSolution{r.point, r.multipliers.get("ineq"), Vector::Zero(0)};
  };
  const InfeasibilityFn infeas = [&](const Vector& x_final, const Vector& y_final) {
    return infeasibility(d, x_final, y_final);
  };
  return drive(bp, cfg, x, lower, infeas);
}

RunReport run(const BilevelProblem& bp, const RelaxConfig& cfg, const Vector& x0, const Vector& y0) {
  require_valid(bp);
  if (x0.size() != bp.n || y0.size() != bp.m) {
    throw Error(ErrorCode::kDimensionMismatch, "x0 / y0 do not match the problem");
  }
  Vector y_prev = y0;
  const LowerSolver lower = [&](const Vector& xk) {
    LowerSolution s = solve_lower_nlp(bp, xk, y_prev);
    y_prev = s.y;
    return s;
  };
  const InfeasibilityFn infeas = [&](const Vector& x, const Vector& y) {
    Point xy(bp.n + bp.m);
    xy << x, y;
    Vector upper(static_cast<Eigen::Index>(bp.upper_ineq.size()));
    for (std::size_t i = 0; i < bp.upper_ineq.size(); ++i) {
      upper[static_cast<Eigen::Index>(i)] = std::max(0.0, eval(bp.upper_ineq[i], xy));
    }
    Vector g(bp.p());
    for (int i = 0; i < bp.p(); ++i) g[i] = std::max(0.0, eval(bp.lower_ineq[static_cast<std::size_t>(i)], xy));
    Vector h(bp.q());
    for (int j = 0; j < bp.q(); ++j) h[j] = eval(bp.lower_eq[static_cast<std::size_t>(j)], xy);
    const LowerSolution fresh = solve_lower_nlp(bp, x, y);
    Point xy_fresh(bp.n + bp.m);
    xy_fresh << x, fresh.y;
    return upper.norm() + g.norm() + h.norm() +
           std::abs(eval(bp.lower_objective, xy) - eval(bp.lower_objective, xy_fresh));
  };
  return drive(bp, cfg, x0, lower, infeas);
}

}  // namespace bilevel

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>

#include <Eigen/QR>

#include "bilevel/solve.hpp"
#include "norms.hpp"

namespace bilevel {

namespace {

constexpr double kArmijo = 1e-4;
constexpr int kMaxBacktracks = 30;
constexpr double kElasticCurvature = 1e-8;
constexpr double kInitialRadius = 10.0;
constexpr double kMinRadius = 1e-12;

double l1_violation(const Vector& ineq, const Vector& eq) {
  return ineq.cwiseMax(0.0).sum() + eq.cwiseAbs().sum();
}

double max_violation(const Vector& ineq, const Vector& eq) {
  double v = 0.0;
  if (ineq.size()) v = std::max(v, ineq.maxCoeff());
  if (eq.size()) v = std::max(v, eq.cwiseAbs().maxCoeff());
  return v;
}

struct Step {
  SolveStatus status = SolveStatus::kOptimal;
  Vector d;
  Vector ineq_mult;
  Vector eq_mult;
  bool elastic = false;
  bool on_bound = false;
};

// Appends −radius ≤ d_j ≤ radius for the first n variables.
void add_step_bound(QuadraticProgram& qp, int n, double radius) {
  const auto rows = qp.a_ineq.rows();
  const auto cols = qp.a_ineq.cols();
  qp.a_ineq.conservativeResize(rows + 2 * n, cols);
  qp.b_ineq.conservativeResize(rows + 2 * n);
  qp.a_ineq.bottomRows(2 * n).setZero();
  for (int j = 0; j < n; ++j) {
    qp.a_ineq(rows + j, j) = 1.0;
    qp.a_ineq(rows + n + j, j) = -1.0;
  }
  qp.b_ineq.tail(2 * n).setConstant(radius);
}

Step solve_subproblem(const NlpEvaluation& ev, const Matrix& hessian, double penalty,
                      double radius) {
  const int n = static_cast<int>(ev.gradient.size());
  const int mi = static_cast<int>(ev.ineq.size());
  const int me = static_cast<int>(ev.eq.size());

  QuadraticProgram qp;
  qp.hessian = hessian;
  qp.gradient = ev.gradient;
  qp.a_ineq = ev.ineq_jacobian;
  qp.b_ineq = -ev.ineq;
  qp.a_eq = ev.eq_jacobian;
  qp.b_eq = -ev.eq;
  add_step_bound(qp, n, radius);
  SolveReport r = solve_qp(qp);
  Step step;
  auto bound_active = [&](const Vector& d) { return inf_norm(d) >= radius * (1.0 - 1e-9); };
  if (r.optimal()) {
    step.d = r.point;
    step.ineq_mult = r.multipliers.get("ineq").head(mi);
    step.eq_mult = r.multipliers.get("eq");
    step.on_bound = bound_active(step.d);
    return step;
  }

  // Elastic mode: J_eq d − s⁺ + s⁻ = −c_eq, J_in d − t ≤ −c_in, slacks ≥ 0 with
  // linear penalty.
  const int ns = 2 * me + mi;
  const int nv = n + ns;
  const double elastic_penalty = std::max(penalty, 1e2);
  QuadraticProgram el;
  el.hessian = Matrix::Zero(nv, nv);
  el.hessian.topLeftCorner(n, n) = hessian;
  el.hessian.bottomRightCorner(ns, ns).diagonal().setConstant(kElasticCurvature);
  el.gradient = Vector::Constant(nv, elastic_penalty);
  el.gradient.head(n) = ev.gradient;
  el.a_eq = Matrix::Zero(me, nv);
  el.a_eq.leftCols(n) = ev.eq_jacobian;
  for (int j = 0; j < me; ++j) {
    el.a_eq(j, n + j) = -1.0;
    el.a_eq(j, n + me + j) = 1.0;
  }
  el.b_eq = -ev.eq;
  el.a_ineq = Matrix::Zero(mi + ns, nv);
  el.b_ineq = Vector::Zero(mi + ns);
  el.a_ineq.topLeftCorner(mi, n) = ev.ineq_jacobian;
  for (int i = 0; i < mi; ++i) el.a_ineq(i, n + 2 * me + i) = -1.0;
  el.b_ineq.head(mi) = -ev.ineq;
  for (int k = 0; k < ns; ++k) el.a_ineq(mi + k, n + k) = -1.0;
  add_step_bound(el, n, radius);
  SolveReport er = solve_qp(el);
  step.elastic = true;
  step.status = er.status;
  if (!er.optimal() && er.status != SolveStatus::kIterLimit) return step;
  step.status = SolveStatus::kOptimal;
  step.d = er.point.head(n);
  step.ineq_mult = er.multipliers.get("ineq").head(mi);
  step.eq_mult = er.multipliers.get("eq");
  step.on_bound = bound_active(step.d);
  return step;
}

}  // namespace

SolveReport solve_nlp(const Nlp& nlp, const Point& start, const NlpOptions& options) {
  const auto start_time = std::chrono::steady_clock::now();
  check_nlp(nlp);
  if (start.size() != nlp.dim) {
    throw Error(ErrorCode::kDimensionMismatch, "start point has dimension " +
                                                   std::to_string(start.size()) + ", problem has " +
                                                   std::to_string(nlp.dim));
  }
  auto log = [&](const std::string& line) {
    if (!options.verbose) return;
    if (options.log) {
      options.log(line);
    } else {
      std::cerr << line << '\n';
    }
  };

  SolveReport report;
  auto finish = [&](SolveStatus status, const Point& x, const NlpEvaluation& ev, const Vector& mi,
                    const Vector& me) {
    report.status = status;
    report.point = x;
    report.objective = ev.objective;
    report.multipliers.set("ineq", mi);
    report.multipliers.set("eq", me);
    report.wall_time =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_time).count();
    return report;
  };

  Point x = start;
  Vector ineq_mult = Vector::Zero(nlp.num_ineq());
  Vector eq_mult = Vector::Zero(nlp.num_eq());
  double penalty = 1.0;
  NlpEvaluation ev = evaluate(nlp, x);
  int tiny_steps = 0;
  double radius = kInitialRadius * (1.0 + inf_norm(x));
  log("iter  merit          feasibility  stationarity  step");

  for (int iter = 0; iter < options.max_iter; ++iter) {
    report.iterations = iter;
    const Matrix hessian = lagrangian_hessian(nlp, x, 1.0, ineq_mult, eq_mult);
    Step step = solve_subproblem(ev, hessian, penalty, radius);
    if (step.status != SolveStatus::kOptimal) {
      return finish(SolveStatus::kStalled, x, ev, ineq_mult, eq_mult);
    }

    // Convergence test at x with the subproblem's multipliers.
    Vector lagrangian_grad = ev.gradient;
    if (nlp.num_ineq()) lagrangian_grad += ev.ineq_jacobian.transpose() * step.ineq_mult;
    if (nlp.num_eq()) lagrangian_grad += ev.eq_jacobian.transpose() * step.eq_mult;
    const double stationarity = inf_norm(lagrangian_grad);
    const double feasibility = max_violation(ev.ineq, ev.eq);
    const double complementarity =
        nlp.num_ineq() ? step.ineq_mult.cwiseProduct(ev.ineq).cwiseAbs().maxCoeff() : 0.0;
    if (stationarity <= options.tol && feasibility <= options.tol &&
        complementarity <= options.tol) {
      return finish(SolveStatus::kOptimal, x, ev, step.ineq_mult, step.eq_mult);
    }

    double mult_norm = 0.0;
    if (step.ineq_mult.size()) mult_norm = step.ineq_mult.cwiseAbs().maxCoeff();
    if (step.eq_mult.size()) mult_norm = std::max(mult_norm, step.eq_mult.cwiseAbs().maxCoeff());
    penalty = std::max(penalty, 2.0 * mult_norm + 1.0);

    const Vector& d = step.d;
    const double violation = l1_violation(ev.ineq, ev.eq);
    const Vector lin_ineq = ev.ineq + ev.ineq_jacobian * d;
    const Vector lin_eq = ev.eq + ev.eq_jacobian * d;
    const double merit = ev.objective + penalty * violation;
    double slope = ev.gradient.dot(d) - penalty * (violation - l1_violation(lin_ineq, lin_eq));
    if (slope >= 0.0) slope = -std::abs(d.dot(hessian * d)) - 1e-16;

    double alpha = 1.0;
    bool accepted = false;
    Point trial;
    NlpEvaluation trial_ev;
    double trial_merit = merit;
    for (int k = 0; k <= kMaxBacktracks; ++k) {
      trial = x + alpha * d;
      try {
        trial_ev = evaluate(nlp, trial);
        trial_merit = trial_ev.objective + penalty * l1_violation(trial_ev.ineq, trial_ev.eq);
        if (trial_merit <= merit + kArmijo * alpha * slope) {
          accepted = true;
          break;
        }
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kNonFiniteValue) throw;
      }
      if (k == 0) {
        // Second-order correction against the Maratos effect.
        try {
          std::vector<Eigen::Index> rows;
          for (Eigen::Index i = 0; i < lin_ineq.size(); ++i) {
            if (lin_ineq[i] >= -1e-10 * (1.0 + std::abs(ev.ineq[i]))) rows.push_back(i);
          }
          Matrix a(nlp.num_eq() + static_cast<Eigen::Index>(rows.size()), nlp.dim);
          Vector c(a.rows());
          const NlpEvaluation& te = trial_ev;
          if (te.eq.size() == nlp.num_eq() && te.ineq.size() == nlp.num_ineq()) {
            a.topRows(nlp.num_eq()) = ev.eq_jacobian;
            c.head(nlp.num_eq()) = te.eq;
            for (std::size_t r = 0; r < rows.size(); ++r) {
              a.row(nlp.num_eq() + static_cast<Eigen::Index>(r)) = ev.ineq_jacobian.row(rows[r]);
              c[nlp.num_eq() + static_cast<Eigen::Index>(r)] = te.ineq[rows[r]];
            }
            const Vector correction =
                -a.transpose() * (a * a.transpose()).completeOrthogonalDecomposition().solve(c);
            const Point soc = x + d + correction;
            const NlpEvaluation soc_ev = evaluate(nlp, soc);
            const double soc_merit = soc_ev.objective + penalty * l1_violation(soc_ev.ineq, soc_ev.eq);
            if (soc_merit <= merit + kArmijo * slope) {
              trial = soc;
              trial_ev = soc_ev;
              trial_merit = soc_merit;
              accepted = true;
              break;
            }
          }
        } catch (const Error& e) {
          if (e.code() != ErrorCode::kNonFiniteValue) throw;
        }
      }
      alpha *= 0.5;
    }

    char line[160];
    std::snprintf(line, sizeof line, "%4d  % .6e  %.3e    %.3e     %.3e%s", iter,
                  merit, feasibility, stationarity, alpha * inf_norm(d),
                  step.elastic ? "  (elastic)" : "");
    log(line);
    if (options.on_iteration) {
      options.on_iteration({iter, merit, accepted ? trial_merit : merit, penalty, feasibility,
                            stationarity, accepted ? inf_norm(trial - x) : 0.0});
    }

    if (!accepted) {
      return finish(SolveStatus::kStalled, x, ev, step.ineq_mult, step.eq_mult);
    }
    if (alpha == 1.0 && step.on_bound) {
      radius *= 2.0;
    } else if (alpha < 0.25) {
      radius = std::max(kMinRadius, std::max(4.0 * alpha, 0.5) * std::min(radius, inf_norm(d)));
    }
    const double moved = inf_norm(trial - x);
    tiny_steps = moved <= 1e-15 * (1.0 + inf_norm(x)) ? tiny_steps + 1 : 0;
    x = trial;
    ev = std::move(trial_ev);
    ineq_mult = step.ineq_mult;
    eq_mult = step.eq_mult;
    if (tiny_steps >= 3) {
      return finish(SolveStatus::kStalled, x, ev, ineq_mult, eq_mult);
    }
  }
  report.iterations = options.max_iter;
  return finish(SolveStatus::kIterLimit, x, ev, ineq_mult, eq_mult);
}

}  // namespace bilevel

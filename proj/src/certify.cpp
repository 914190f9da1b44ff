#include "bilevel/certify.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/LU>
#include <Eigen/QR>

#include "bilevel/reform.hpp"
#include "bilevel/solve.hpp"
#include "norms.hpp"

namespace bilevel {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kDiagonalTol = 1e-12;
constexpr double kAbnormalTol = 1e-10;

enum class Sign { kZero, kFree, kNonneg };

struct Fit {
  Vector mult;
  double residual = kInf;
};

// min_λ max(‖grad + rowsᵀλ‖∞, max_i |λ_i values_i|) with λ_i fixed by signs[i].
// `values` may be empty (no complementarity term).
Fit fit_multipliers(const Vector& grad, const Matrix& rows, const std::vector<Sign>& signs,
                    const Vector& values = Vector()) {
  const auto n = grad.size();
  std::vector<Eigen::Index> selected;
  for (std::size_t i = 0; i < signs.size(); ++i) {
    if (signs[i] != Sign::kZero) selected.push_back(static_cast<Eigen::Index>(i));
  }
  const auto k = static_cast<Eigen::Index>(selected.size());

  LinearProgram lp;
  lp.cost = Vector::Zero(k + 1);
  lp.cost[k] = 1.0;
  lp.a_ineq = Matrix::Zero(2 * n, k + 1);
  lp.b_ineq = Vector(2 * n);
  for (Eigen::Index c = 0; c < k; ++c) {
    lp.a_ineq.block(0, c, n, 1) = rows.row(selected[static_cast<std::size_t>(c)]).transpose();
    lp.a_ineq.block(n, c, n, 1) = -rows.row(selected[static_cast<std::size_t>(c)]).transpose();
  }
  lp.a_ineq.col(k).setConstant(-1.0);
  lp.b_ineq << -grad, grad;
  if (values.size()) {
    // |λ_i values_i| ≤ r, split by the sign of λ_i where it is free.
    for (Eigen::Index c = 0; c < k; ++c) {
      const double w = std::abs(values[selected[static_cast<std::size_t>(c)]]);
      if (w == 0.0) continue;
      const bool free = signs[static_cast<std::size_t>(selected[static_cast<std::size_t>(c)])] == Sign::kFree;
      for (double sign : {1.0, -1.0}) {
        if (sign < 0.0 && !free) continue;
        const Eigen::Index row = lp.a_ineq.rows();
        lp.a_ineq.conservativeResize(row + 1, Eigen::NoChange);
        lp.a_ineq.row(row).setZero();
        lp.a_ineq(row, c) = sign * w;
        lp.a_ineq(row, k) = -1.0;
        lp.b_ineq.conservativeResize(row + 1);
        lp.b_ineq[row] = 0.0;
      }
    }
  }
  lp.a_eq = Matrix::Zero(0, k + 1);
  lp.b_eq = Vector::Zero(0);
  lp.lower = Vector::Constant(k + 1, -kInf);
  lp.lower[k] = 0.0;
  for (Eigen::Index c = 0; c < k; ++c) {
    if (signs[static_cast<std::size_t>(selected[static_cast<std::size_t>(c)])] == Sign::kNonneg) {
      lp.lower[c] = 0.0;
    }
  }

  Fit fit;
  fit.mult = Vector::Zero(static_cast<Eigen::Index>(signs.size()));
  const SolveReport r = solve_lp(lp);
  if (!r.optimal()) return fit;
  for (Eigen::Index c = 0; c < k; ++c) {
    const auto i = selected[static_cast<std::size_t>(c)];
    double value = r.point[c];
    if (signs[static_cast<std::size_t>(i)] == Sign::kNonneg) value = std::max(0.0, value);
    fit.mult[i] = value;
  }
  Vector residual = grad;
  if (rows.rows()) residual += rows.transpose() * fit.mult;
  fit.residual = inf_norm(residual);
  if (values.size()) fit.residual = std::max(fit.residual, inf_norm(fit.mult.cwiseProduct(values)));
  return fit;
}

Matrix stacked_jacobian(const NlpEvaluation& ev) {
  Matrix rows(ev.ineq_jacobian.rows() + ev.eq_jacobian.rows(), ev.gradient.size());
  rows << ev.ineq_jacobian, ev.eq_jacobian;
  return rows;
}

Vector segment(const Vector& v, Range r) { return v.segment(r.begin, r.size()); }

bool on_diagonal(const Nlp& wdp, const Point& p) {
  const Range y = wdp.layout.at("y");
  const Range z = wdp.layout.at("z");
  const Vector yv = segment(p, y);
  return inf_norm(segment(p, z) - yv) <= kDiagonalTol * (1.0 + inf_norm(yv));
}

void require_wdp(const Nlp& nlp) {
  if (nlp.kind != NlpKind::kWdp || nlp.groups.gap.size() != 1) {
    throw Error(ErrorCode::kNotAWdp, "problem is not a WDP reformulation");
  }
}

void require_point(const Nlp& nlp, const Point& p) {
  if (p.size() != nlp.dim) {
    throw Error(ErrorCode::kDimensionMismatch, "point has dimension " + std::to_string(p.size()) +
                                                   ", problem has " + std::to_string(nlp.dim));
  }
}

Vector block_or_zero(const MultiplierSet& m, const std::string& name, Eigen::Index size) {
  if (!m.has(name)) return Vector::Zero(size);
  const Vector& v = m.get(name);
  if (v.size() != size) {
    throw Error(ErrorCode::kDimensionMismatch, "multiplier block '" + name + "' has size " +
                                                   std::to_string(v.size()) + ", expected " +
                                                   std::to_string(size));
  }
  return v;
}

}  // namespace

std::string_view to_string(Verdict verdict) {
  switch (verdict) {
    case Verdict::kHolds:
      return "Holds";
    case Verdict::kFails:
      return "Fails";
    case Verdict::kInconclusive:
      return "Inconclusive";
  }
  return "Inconclusive";
}

double activity_threshold(const Vector& gradient, double tol) {
  return tol * (1.0 + inf_norm(gradient));
}

std::vector<int> active_set(const Nlp& nlp, const Point& p, double tol) {
  require_point(nlp, p);
  const NlpEvaluation ev = evaluate(nlp, p);
  std::vector<int> active;
  for (int i = 0; i < nlp.num_ineq(); ++i) {
    if (ev.ineq[i] >= -activity_threshold(ev.ineq_jacobian.row(i).transpose(), tol)) active.push_back(i);
  }
  return active;
}

void require_feasible(const Nlp& nlp, const Point& p, double tol) {
  require_point(nlp, p);
  const NlpEvaluation ev = evaluate(nlp, p);
  for (int i = 0; i < nlp.num_ineq(); ++i) {
    if (ev.ineq[i] > activity_threshold(ev.ineq_jacobian.row(i).transpose(), tol)) {
      throw Error(ErrorCode::kInfeasiblePoint,
                  "inequality " + std::to_string(i) + " violated by " + std::to_string(ev.ineq[i]));
    }
  }
  for (int j = 0; j < nlp.num_eq(); ++j) {
    if (std::abs(ev.eq[j]) > activity_threshold(ev.eq_jacobian.row(j).transpose(), tol)) {
      throw Error(ErrorCode::kInfeasiblePoint,
                  "equality " + std::to_string(j) + " violated by " + std::to_string(ev.eq[j]));
    }
  }
}

MultiplierSet name_blocks(const Nlp& nlp, const Vector& ineq_mult, const Vector& eq_mult) {
  MultiplierSet out;
  out.set("ineq", ineq_mult);
  out.set("eq", eq_mult);
  const auto& g = nlp.groups;
  if (nlp.kind == NlpKind::kWdp) {
    out.set("upper", segment(ineq_mult, g.upper));
    out.set("eta_g", segment(ineq_mult, g.lower_g));
    out.set("alpha", segment(ineq_mult, g.gap));
    out.set("eta_u", segment(ineq_mult, g.u_nonneg));
    out.set("u_cap", segment(ineq_mult, g.u_cap));
    out.set("h", segment(eq_mult, g.h));
    out.set("beta", segment(eq_mult, g.stationarity));
  } else if (nlp.kind == NlpKind::kMpec) {
    out.set("upper", segment(ineq_mult, g.upper));
    out.set("lambda_g", segment(ineq_mult, g.lower_g));
    out.set("lambda_u", segment(ineq_mult, g.u_nonneg));
    out.set("u_cap", segment(ineq_mult, g.u_cap));
    out.set("h", segment(eq_mult, g.h));
    out.set("gamma", segment(eq_mult, g.stationarity));
    if (!g.complementarity.empty()) out.set("comp", segment(eq_mult, g.complementarity));
    if (!g.relaxed_comp.empty()) out.set("comp", segment(ineq_mult, g.relaxed_comp));
  }
  return out;
}

CertifyReport kkt_residual(const Nlp& nlp, const Point& p, double tol) {
  require_feasible(nlp, p, tol);
  const NlpEvaluation ev = evaluate(nlp, p);
  CertifyReport report;
  report.active_ineq = active_set(nlp, p, tol);
  std::vector<Sign> signs(static_cast<std::size_t>(nlp.num_ineq() + nlp.num_eq()), Sign::kZero);
  for (int i : report.active_ineq) signs[static_cast<std::size_t>(i)] = Sign::kNonneg;
  for (int j = 0; j < nlp.num_eq(); ++j) signs[static_cast<std::size_t>(nlp.num_ineq() + j)] = Sign::kFree;
  Vector values(nlp.num_ineq() + nlp.num_eq());
  values << ev.ineq, Vector::Zero(nlp.num_eq());
  const Fit fit = fit_multipliers(ev.gradient, stacked_jacobian(ev), signs, values);
  report.residual = std::max(fit.residual, ev.ineq.size() ? ev.ineq.maxCoeff() : 0.0);
  if (ev.eq.size()) report.residual = std::max(report.residual, inf_norm(ev.eq));
  report.verdict = fit.residual <= tol ? Verdict::kHolds : Verdict::kFails;
  report.multipliers =
      name_blocks(nlp, fit.mult.head(nlp.num_ineq()), fit.mult.tail(nlp.num_eq()));
  return report;
}

double kkt_certificate_residual(const Nlp& nlp, const Point& p, const Vector& ineq_mult,
                                const Vector& eq_mult) {
  require_point(nlp, p);
  if (ineq_mult.size() != nlp.num_ineq() || eq_mult.size() != nlp.num_eq()) {
    throw Error(ErrorCode::kDimensionMismatch, "multiplier sizes do not match the problem");
  }
  const NlpEvaluation ev = evaluate(nlp, p);
  Vector stationarity = ev.gradient;
  if (nlp.num_ineq()) stationarity += ev.ineq_jacobian.transpose() * ineq_mult;
  if (nlp.num_eq()) stationarity += ev.eq_jacobian.transpose() * eq_mult;
  double residual = inf_norm(stationarity);
  if (nlp.num_ineq()) {
    residual = std::max(residual, inf_norm(ineq_mult.cwiseProduct(ev.ineq)));
    residual = std::max(residual, -ineq_mult.minCoeff());
  }
  return residual;
}

MpecIndexSets classify(const Nlp& mpec, const Point& p, double tol) {
  require_point(mpec, p);
  const NlpEvaluation ev = evaluate(mpec, p);
  const Range u = mpec.layout.at("u");
  MpecIndexSets sets;
  for (int i = 0; i < u.size(); ++i) {
    const int row = mpec.groups.lower_g.begin + i;
    const bool g_active =
        ev.ineq[row] >= -activity_threshold(ev.ineq_jacobian.row(row).transpose(), tol);
    const bool u_zero = p[u.begin + i] <= 2.0 * tol;
    if (g_active && u_zero) {
      sets.zero_zero.push_back(i);
    } else if (g_active) {
      sets.zero_plus.push_back(i);
    } else if (u_zero) {
      sets.minus_zero.push_back(i);
    } else {
      throw Error(ErrorCode::kInfeasiblePoint,
                  "complementarity violated at index " + std::to_string(i));
    }
  }
  return sets;
}

CertifyReport s_stationarity(const Nlp& mpec, const Point& p, double tol) {
  if (mpec.kind != NlpKind::kMpec || mpec.relaxed) {
    throw Error(ErrorCode::kNotAnMpec, "S-stationarity needs an unrelaxed MPEC reformulation");
  }
  require_feasible(mpec, p, tol);
  const NlpEvaluation ev = evaluate(mpec, p);
  const MpecIndexSets sets = classify(mpec, p, tol);
  const auto& g = mpec.groups;

  std::vector<Sign> signs(static_cast<std::size_t>(mpec.num_ineq() + mpec.num_eq()), Sign::kZero);
  auto set_sign = [&](int row, Sign s) { signs[static_cast<std::size_t>(row)] = s; };
  const auto active = active_set(mpec, p, tol);
  for (int i : active) {
    if (g.upper.contains(i) || g.u_cap.contains(i)) set_sign(i, Sign::kNonneg);
  }
  for (int i : sets.zero_plus) set_sign(g.lower_g.begin + i, Sign::kFree);
  for (int i : sets.minus_zero) set_sign(g.u_nonneg.begin + i, Sign::kFree);
  for (int i : sets.zero_zero) {
    set_sign(g.lower_g.begin + i, Sign::kNonneg);
    set_sign(g.u_nonneg.begin + i, Sign::kNonneg);
  }
  for (int j = g.h.begin; j < g.stationarity.end; ++j) set_sign(mpec.num_ineq() + j, Sign::kFree);

  const Fit fit = fit_multipliers(ev.gradient, stacked_jacobian(ev), signs);
  CertifyReport report;
  report.active_ineq = active;
  report.residual = fit.residual;
  report.verdict = fit.residual <= tol ? Verdict::kHolds : Verdict::kFails;
  report.multipliers =
      name_blocks(mpec, fit.mult.head(mpec.num_ineq()), fit.mult.tail(mpec.num_eq()));
  return report;
}

double s_certificate_residual(const Nlp& mpec, const Point& p, const MultiplierSet& mult,
                              double tol) {
  if (mpec.kind != NlpKind::kMpec || mpec.relaxed) {
    throw Error(ErrorCode::kNotAnMpec, "S-stationarity needs an unrelaxed MPEC reformulation");
  }
  const auto& g = mpec.groups;
  const NlpEvaluation ev = evaluate(mpec, p);
  Vector ineq = Vector::Zero(mpec.num_ineq());
  Vector eq = Vector::Zero(mpec.num_eq());
  ineq.segment(g.upper.begin, g.upper.size()) = block_or_zero(mult, "upper", g.upper.size());
  ineq.segment(g.lower_g.begin, g.lower_g.size()) = mult.get("lambda_g");
  ineq.segment(g.u_nonneg.begin, g.u_nonneg.size()) = mult.get("lambda_u");
  ineq.segment(g.u_cap.begin, g.u_cap.size()) = block_or_zero(mult, "u_cap", g.u_cap.size());
  eq.segment(g.h.begin, g.h.size()) = block_or_zero(mult, "h", g.h.size());
  eq.segment(g.stationarity.begin, g.stationarity.size()) = mult.get("gamma");

  // Sign and index-set conditions.
  const MpecIndexSets sets = classify(mpec, p, tol);
  const auto active = active_set(mpec, p, tol);
  auto is_active = [&](int row) { return std::find(active.begin(), active.end(), row) != active.end(); };
  for (Range r : {g.upper, g.u_cap}) {
    for (int i = r.begin; i < r.end; ++i) {
      if (ineq[i] < -tol || (!is_active(i) && std::abs(ineq[i]) > tol)) return kInf;
    }
  }
  for (int i : sets.minus_zero) {
    if (std::abs(ineq[g.lower_g.begin + i]) > tol) return kInf;
  }
  for (int i : sets.zero_plus) {
    if (std::abs(ineq[g.u_nonneg.begin + i]) > tol) return kInf;
  }
  for (int i : sets.zero_zero) {
    if (ineq[g.lower_g.begin + i] < -tol || ineq[g.u_nonneg.begin + i] < -tol) return kInf;
  }

  Vector stationarity = ev.gradient;
  if (mpec.num_ineq()) stationarity += ev.ineq_jacobian.transpose() * ineq;
  if (mpec.num_eq()) stationarity += ev.eq_jacobian.transpose() * eq;
  return inf_norm(stationarity);
}

MultiplierSet wdp_kkt_to_s(const Nlp& wdp, const Point& p, const MultiplierSet& m) {
  require_wdp(wdp);
  require_point(wdp, p);
  if (!on_diagonal(wdp, p)) throw Error(ErrorCode::kNotOnDiagonal, "z differs from y");
  const auto& g = wdp.groups;
  const NlpEvaluation ev = evaluate(wdp, p);
  const Vector u = segment(p, wdp.layout.at("u"));
  const Vector v = segment(p, wdp.layout.at("v"));
  const Vector lower_g = segment(ev.ineq, g.lower_g);
  const double alpha = m.get("alpha")[0];

  MultiplierSet out;
  out.set("upper", block_or_zero(m, "upper", g.upper.size()));
  out.set("lambda_g", m.get("eta_g") - alpha * u);
  out.set("lambda_u", m.get("eta_u") + alpha * lower_g);
  out.set("u_cap", block_or_zero(m, "u_cap", g.u_cap.size()));
  out.set("h", block_or_zero(m, "h", g.h.size()) - alpha * v);
  out.set("gamma", m.get("beta"));
  return out;
}

CertifyReport mfcq_check(const Nlp& nlp, const Point& p, double tol) {
  require_feasible(nlp, p, tol);
  const NlpEvaluation ev = evaluate(nlp, p);
  const int n = nlp.dim;
  CertifyReport report;
  report.active_ineq = active_set(nlp, p, tol);

  if (nlp.num_eq() > 0) {
    Eigen::ColPivHouseholderQR<Matrix> qr(ev.eq_jacobian.transpose());
    qr.setThreshold(tol);
    if (qr.rank() < nlp.num_eq()) {
      report.verdict = Verdict::kFails;
      report.residual = 0.0;
      report.note = "equality gradients are linearly dependent";
      return report;
    }
  }

  const auto k = static_cast<Eigen::Index>(report.active_ineq.size());
  LinearProgram lp;
  lp.cost = Vector::Zero(n + 1);
  lp.cost[n] = -1.0;
  lp.a_ineq = Matrix::Zero(k, n + 1);
  for (Eigen::Index r = 0; r < k; ++r) {
    lp.a_ineq.row(r).head(n) = ev.ineq_jacobian.row(report.active_ineq[static_cast<std::size_t>(r)]);
    lp.a_ineq(r, n) = 1.0;
  }
  lp.b_ineq = Vector::Zero(k);
  lp.a_eq = Matrix::Zero(nlp.num_eq(), n + 1);
  lp.a_eq.leftCols(n) = ev.eq_jacobian;
  lp.b_eq = Vector::Zero(nlp.num_eq());
  lp.lower = Vector::Constant(n + 1, -1.0);
  lp.lower[n] = -kInf;
  lp.upper = Vector::Constant(n + 1, 1.0);
  const SolveReport r = solve_lp(lp);
  if (!r.optimal()) {
    report.note = std::string("margin LP ended ") + std::string(to_string(r.status));
    return report;
  }
  report.direction = r.point.head(n);
  report.residual = r.point[n];
  report.verdict = report.residual > tol ? Verdict::kHolds : Verdict::kFails;
  if (report.verdict == Verdict::kFails) report.note = "no strictly descending tangent direction";
  return report;
}

double mfcq_direction_margin(const Nlp& nlp, const Point& p, const Vector& d, double tol) {
  require_point(nlp, p);
  if (d.size() != nlp.dim) throw Error(ErrorCode::kDimensionMismatch, "direction has the wrong size");
  const double norm = inf_norm(d);
  if (norm == 0.0) return -kInf;
  const NlpEvaluation ev = evaluate(nlp, p);
  if (nlp.num_eq() && inf_norm(ev.eq_jacobian * d) > 1e-9 * norm * (1.0 + inf_norm(ev.eq_jacobian))) {
    return -kInf;
  }
  double margin = 1.0;
  for (int i : active_set(nlp, p, tol)) {
    margin = std::min(margin, -ev.ineq_jacobian.row(i).dot(d) / norm);
  }
  return margin;
}

CertifyReport abnormal_multiplier(const Nlp& wdp, const Point& p) {
  require_wdp(wdp);
  require_point(wdp, p);
  if (!on_diagonal(wdp, p)) throw Error(ErrorCode::kNotOnDiagonal, "z differs from y");
  const auto& g = wdp.groups;
  const NlpEvaluation ev = evaluate(wdp, p);

  Vector ineq = Vector::Zero(wdp.num_ineq());
  Vector eq = Vector::Zero(wdp.num_eq());
  ineq.segment(g.lower_g.begin, g.lower_g.size()) = segment(p, wdp.layout.at("u"));
  ineq[g.gap.begin] = 1.0;
  ineq.segment(g.u_nonneg.begin, g.u_nonneg.size()) = -segment(ev.ineq, g.lower_g);
  eq.segment(g.h.begin, g.h.size()) = segment(p, wdp.layout.at("v"));

  Vector combination = Vector::Zero(wdp.dim);
  if (wdp.num_ineq()) combination += ev.ineq_jacobian.transpose() * ineq;
  if (wdp.num_eq()) combination += ev.eq_jacobian.transpose() * eq;
  double residual = inf_norm(combination);
  residual = std::max(residual, inf_norm(ineq.cwiseProduct(ev.ineq)));
  residual = std::max(residual, -ineq.minCoeff());
  residual = std::max(residual, inf_norm(ev.eq));
  residual = std::max(residual, ev.ineq.size() ? ev.ineq.maxCoeff() : 0.0);

  CertifyReport report;
  report.residual = residual;
  report.verdict = residual <= kAbnormalTol ? Verdict::kHolds : Verdict::kFails;
  report.multipliers = name_blocks(wdp, ineq, eq);
  if (report.holds()) report.note = "nonzero abnormal multiplier: MFCQ fails";
  return report;
}

CertifyReport plin_dependent(const std::vector<Vector>& a, const std::vector<Vector>& b, double tol) {
  const Eigen::Index dim = !a.empty() ? a.front().size() : (!b.empty() ? b.front().size() : 0);
  for (const auto* family : {&a, &b}) {
    for (const auto& v : *family) {
      if (v.size() != dim) throw Error(ErrorCode::kDimensionMismatch, "vectors differ in dimension");
    }
  }
  const auto l = static_cast<Eigen::Index>(a.size());
  const auto r = static_cast<Eigen::Index>(b.size());
  Matrix ma(dim, l);
  for (Eigen::Index i = 0; i < l; ++i) ma.col(i) = a[static_cast<std::size_t>(i)];
  Matrix mb(dim, r);
  for (Eigen::Index j = 0; j < r; ++j) mb.col(j) = b[static_cast<std::size_t>(j)];

  CertifyReport report;
  report.verdict = Verdict::kFails;
  auto accept = [&](Vector alpha, Vector beta) {
    const double scale = alpha.sum() + beta.cwiseAbs().sum();
    alpha /= scale;
    beta /= scale;
    Vector combination = Vector::Zero(dim);
    if (l) combination += ma * alpha;
    if (r) combination += mb * beta;
    report.verdict = Verdict::kHolds;
    report.residual = inf_norm(combination);
    report.multipliers.set("alpha", alpha);
    report.multipliers.set("beta", beta);
  };

  // α = 0: plain linear dependence of the b family.
  if (r > 0) {
    Eigen::FullPivLU<Matrix> lu(mb);
    lu.setThreshold(tol);
    if (lu.rank() < r) {
      accept(Vector::Zero(l), lu.kernel().col(0));
      return report;
    }
  }
  // α ≠ 0: normalize Σα = 1.
  if (l > 0) {
    LinearProgram lp;
    lp.cost = Vector::Zero(l + r);
    lp.a_ineq = Matrix::Zero(0, l + r);
    lp.b_ineq = Vector::Zero(0);
    lp.a_eq = Matrix::Zero(dim + 1, l + r);
    lp.a_eq.topLeftCorner(dim, l) = ma;
    lp.a_eq.topRightCorner(dim, r) = mb;
    lp.a_eq.row(dim).head(l).setOnes();
    lp.b_eq = Vector::Zero(dim + 1);
    lp.b_eq[dim] = 1.0;
    lp.lower = Vector::Constant(l + r, -kInf);
    lp.lower.head(l).setZero();
    const SolveReport s = solve_lp(lp);
    if (s.optimal()) {
      accept(s.point.head(l), s.point.tail(r));
      return report;
    }
  }
  report.residual = 0.0;
  return report;
}

double duality_gap(const BilevelProblem& bp, const Vector& x, const Vector& y, const Vector& z,
                   const Vector& u, const Vector& v, double tol) {
  require_valid(bp);
  if (x.size() != bp.n || y.size() != bp.m || z.size() != bp.m || u.size() != bp.p() ||
      v.size() != bp.q()) {
    throw Error(ErrorCode::kDimensionMismatch, "duality_gap arguments do not match the problem");
  }
  Point xy(bp.n + bp.m);
  xy << x, y;
  for (int i = 0; i < bp.p(); ++i) {
    if (eval(bp.lower_ineq[static_cast<std::size_t>(i)], xy) > tol) {
      throw Error(ErrorCode::kInfeasibleInput, "y violates lower-level inequality " + std::to_string(i));
    }
  }
  for (int j = 0; j < bp.q(); ++j) {
    if (std::abs(eval(bp.lower_eq[static_cast<std::size_t>(j)], xy)) > tol) {
      throw Error(ErrorCode::kInfeasibleInput, "y violates lower-level equality " + std::to_string(j));
    }
  }
  if (u.size() && u.minCoeff() < -tol) throw Error(ErrorCode::kInfeasibleInput, "u has a negative entry");

  const int z_first = bp.n;
  const int u_first = bp.n + bp.m;
  const int v_first = u_first + bp.p();
  const Expr lagrangian = lower_lagrangian(bp, z_first, u_first, v_first);
  Point xzuv(v_first + bp.q());
  xzuv << x, z, u, v;
  std::vector<int> wrt(static_cast<std::size_t>(bp.m));
  for (int j = 0; j < bp.m; ++j) wrt[static_cast<std::size_t>(j)] = z_first + j;
  if (inf_norm(grad(lagrangian, xzuv, wrt)) > tol) {
    throw Error(ErrorCode::kInfeasibleInput, "(z, u, v) violates the Wolfe-dual stationarity");
  }
  return eval(bp.lower_objective, xy) - eval(lagrangian, xzuv);
}

}  // namespace bilevel

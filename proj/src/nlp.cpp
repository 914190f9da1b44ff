#include "bilevel/nlp.hpp"

#include <algorithm>
#include <cmath>

namespace bilevel {

void VariableLayout::add(std::string name, int size) {
  if (size < 0) throw Error(ErrorCode::kInvalidArgument, "negative block size");
  if (find(name)) throw Error(ErrorCode::kLayoutMismatch, "duplicate block '" + name + "'");
  blocks_.emplace_back(std::move(name), Range{dim_, dim_ + size});
  dim_ += size;
}

std::optional<Range> VariableLayout::find(const std::string& name) const {
  for (const auto& [block, range] : blocks_) {
    if (block == name) return range;
  }
  return std::nullopt;
}

Range VariableLayout::at(const std::string& name) const {
  auto r = find(name);
  if (!r) throw Error(ErrorCode::kLayoutMismatch, "layout has no block '" + name + "'");
  return *r;
}

void check_nlp(const Nlp& nlp) {
  auto check = [&](const Expr& e, const char* what) {
    if (e.min_dimension() > nlp.dim) {
      throw Error(ErrorCode::kIndexOutOfRange,
                  std::string(what) + " references variable " +
                      std::to_string(e.min_dimension() - 1) + " of a " +
                      std::to_string(nlp.dim) + "-dimensional problem");
    }
  };
  check(nlp.objective, "objective");
  for (const auto& c : nlp.ineq) check(c, "inequality");
  for (const auto& c : nlp.eq) check(c, "equality");
  if (!nlp.layout.blocks().empty() && nlp.layout.dim() != nlp.dim) {
    throw Error(ErrorCode::kLayoutMismatch, "variable layout does not partition [0, dim)");
  }
}

namespace {

void check_point(const Nlp& nlp, const Point& p) {
  if (p.size() != nlp.dim) {
    throw Error(ErrorCode::kDimensionMismatch, "point has dimension " + std::to_string(p.size()) +
                                                   ", problem has " + std::to_string(nlp.dim));
  }
}

}  // namespace

NlpEvaluation evaluate(const Nlp& nlp, const Point& p) {
  check_point(nlp, p);
  NlpEvaluation out;
  const auto obj = differentiate_at(nlp.objective, p, false);
  out.objective = obj.value;
  out.gradient = Vector::Zero(nlp.dim);
  for (const auto& [i, g] : obj.gradient) out.gradient[i] = g;

  auto fill = [&](const std::vector<Expr>& rows, Vector& values, Matrix& jac) {
    values.resize(static_cast<Eigen::Index>(rows.size()));
    jac = Matrix::Zero(static_cast<Eigen::Index>(rows.size()), nlp.dim);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const auto d = differentiate_at(rows[r], p, false);
      values[static_cast<Eigen::Index>(r)] = d.value;
      for (const auto& [i, g] : d.gradient) jac(static_cast<Eigen::Index>(r), i) = g;
    }
  };
  fill(nlp.ineq, out.ineq, out.ineq_jacobian);
  fill(nlp.eq, out.eq, out.eq_jacobian);
  return out;
}

Matrix lagrangian_hessian(const Nlp& nlp, const Point& p, double objective_weight,
                          const Vector& ineq_mult, const Vector& eq_mult) {
  check_point(nlp, p);
  Matrix h = Matrix::Zero(nlp.dim, nlp.dim);
  auto accumulate = [&](const Expr& e, double weight) {
    if (weight == 0.0) return;
    const auto d = differentiate_at(e, p, true);
    for (const auto& [i, j, v] : d.hessian) {
      h(i, j) += weight * v;
      if (i != j) h(j, i) += weight * v;
    }
  };
  accumulate(nlp.objective, objective_weight);
  for (int i = 0; i < nlp.num_ineq(); ++i) accumulate(nlp.ineq[static_cast<std::size_t>(i)], ineq_mult[i]);
  for (int j = 0; j < nlp.num_eq(); ++j) accumulate(nlp.eq[static_cast<std::size_t>(j)], eq_mult[j]);
  return h;
}

FeasibilityReport check_feasible(const Nlp& nlp, const Point& p) {
  check_point(nlp, p);
  FeasibilityReport r;
  for (const auto& c : nlp.ineq) r.max_ineq_violation = std::max(r.max_ineq_violation, eval(c, p));
  for (const auto& c : nlp.eq) r.max_eq_violation = std::max(r.max_eq_violation, std::abs(eval(c, p)));
  return r;
}

}  // namespace bilevel

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/LU>

#include "bilevel/solve.hpp"
#include "norms.hpp"

namespace bilevel {

std::string_view to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::kOptimal:
      return "Optimal";
    case SolveStatus::kInfeasible:
      return "Infeasible";
    case SolveStatus::kUnbounded:
      return "Unbounded";
    case SolveStatus::kIterLimit:
      return "IterLimit";
    case SolveStatus::kStalled:
      return "Stalled";
  }
  return "Unknown";
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Revised simplex on  min cᵀx  s.t.  Ax = b,  x ≥ 0,  b ≥ 0,
// starting from a given feasible basis.
class Simplex {
 public:
  enum class Result { kOptimal, kUnbounded, kIterLimit };

  Simplex(Matrix a, Vector b, std::vector<int> basis)
      : a_(std::move(a)), b_(std::move(b)), basis_(std::move(basis)) {
    is_basic_.assign(static_cast<std::size_t>(a_.cols()), false);
    for (int j : basis_) is_basic_[static_cast<std::size_t>(j)] = true;
    refactor();
  }

  Result run(const Vector& cost, const std::vector<bool>& may_enter, int max_iter) {
    const double cost_scale = std::max(1.0, cost.size() ? cost.cwiseAbs().maxCoeff() : 0.0);
    const double opt_tol = 1e-11 * cost_scale;
    int degenerate_run = 0;
    for (int iter = 0; iter < max_iter; ++iter, ++iterations_) {
      if (iter % 32 == 31) refactor();
      const Vector duals = dual_values(cost);

      // Pricing: Dantzig, switching to Bland's rule while stuck at a degenerate vertex.
      const bool bland = degenerate_run > 20;
      int entering = -1;
      double best = -opt_tol;
      for (Eigen::Index j = 0; j < a_.cols(); ++j) {
        if (is_basic_[static_cast<std::size_t>(j)] || !may_enter[static_cast<std::size_t>(j)]) {
          continue;
        }
        const double reduced = cost[j] - a_.col(j).dot(duals);
        if (reduced < best) {
          entering = static_cast<int>(j);
          if (bland) break;
          best = reduced;
        }
      }
      if (entering < 0) return Result::kOptimal;

      const Vector direction = inverse_ * a_.col(entering);
      const double piv_tol = 1e-9 * std::max(1.0, inf_norm(direction));
      int leaving = -1;
      double step = kInf;
      for (Eigen::Index i = 0; i < direction.size(); ++i) {
        if (direction[i] <= piv_tol) continue;
        const double ratio = std::max(0.0, x_basic_[i]) / direction[i];
        const bool tie = leaving >= 0 && std::abs(ratio - step) <= 1e-12 * std::max(1.0, step);
        if (ratio < step && !tie) {
          step = ratio;
          leaving = static_cast<int>(i);
        } else if (tie && basis_[static_cast<std::size_t>(i)] <
                              basis_[static_cast<std::size_t>(leaving)]) {
          leaving = static_cast<int>(i);
          step = std::min(step, ratio);
        }
      }
      if (leaving < 0) return Result::kUnbounded;

      degenerate_run = step <= 1e-12 ? degenerate_run + 1 : 0;
      pivot(leaving, entering, direction, step);
    }
    return Result::kIterLimit;
  }

  void refactor() {
    const auto rows = a_.rows();
    Matrix basis_matrix(rows, rows);
    for (Eigen::Index i = 0; i < rows; ++i) {
      basis_matrix.col(i) = a_.col(basis_[static_cast<std::size_t>(i)]);
    }
    inverse_ = rows ? Matrix(Eigen::PartialPivLU<Matrix>(basis_matrix).inverse())
                    : Matrix(0, 0);
    x_basic_ = inverse_ * b_;
  }

  Vector dual_values(const Vector& cost) const {
    Vector cost_basic(a_.rows());
    for (Eigen::Index i = 0; i < a_.rows(); ++i) {
      cost_basic[i] = cost[basis_[static_cast<std::size_t>(i)]];
    }
    return inverse_.transpose() * cost_basic;
  }

  // Pivots basic artificial columns (index ≥ first_artificial) out of the basis
  // where some admissible column has a nonzero entry in that row.
  void drive_out(int first_artificial) {
    for (Eigen::Index r = 0; r < a_.rows(); ++r) {
      if (basis_[static_cast<std::size_t>(r)] < first_artificial) continue;
      const Vector row = inverse_.row(r) * a_.leftCols(first_artificial);
      Eigen::Index best = -1;
      double best_abs = 1e-8;
      for (Eigen::Index j = 0; j < row.size(); ++j) {
        if (!is_basic_[static_cast<std::size_t>(j)] && std::abs(row[j]) > best_abs) {
          best_abs = std::abs(row[j]);
          best = j;
        }
      }
      if (best < 0) continue;  // redundant row: the artificial stays basic at zero
      const Vector direction = inverse_ * a_.col(best);
      pivot(static_cast<int>(r), static_cast<int>(best), direction, x_basic_[r] / direction[r]);
    }
  }

  Vector solution() const {
    Vector x = Vector::Zero(a_.cols());
    for (Eigen::Index i = 0; i < a_.rows(); ++i) {
      x[basis_[static_cast<std::size_t>(i)]] = std::max(0.0, x_basic_[i]);
    }
    return x;
  }

  int iterations() const { return iterations_; }

 private:
  void pivot(int leaving, int entering, const Vector& direction, double step) {
    x_basic_ -= step * direction;
    x_basic_[leaving] = step;
    is_basic_[static_cast<std::size_t>(basis_[static_cast<std::size_t>(leaving)])] = false;
    is_basic_[static_cast<std::size_t>(entering)] = true;
    basis_[static_cast<std::size_t>(leaving)] = entering;

    const double pivot_value = direction[leaving];
    inverse_.row(leaving) /= pivot_value;
    for (Eigen::Index i = 0; i < inverse_.rows(); ++i) {
      if (i != leaving && direction[i] != 0.0) {
        inverse_.row(i) -= direction[i] * inverse_.row(leaving);
      }
    }
  }

  Matrix a_;
  Vector b_;
  std::vector<int> basis_;
  std::vector<bool> is_basic_;
  Matrix inverse_;
  Vector x_basic_;
  int iterations_ = 0;
};

// How one original variable maps onto nonnegative standard-form columns.
struct VariableMap {
  enum class Kind { kShiftedLower, kReflectedUpper, kFree } kind = Kind::kFree;
  int column = -1;      // x' column (x⁺ for free variables)
  int column_neg = -1;  // x⁻ column for free variables
  double offset = 0.0;
  int bound_row = -1;   // row of x' ≤ upper − lower, if any
};

}  // namespace

SolveReport solve_lp(const LinearProgram& lp) {
  const auto start_time = std::chrono::steady_clock::now();
  const int n = lp.num_vars();
  const int m_in = static_cast<int>(lp.b_ineq.size());
  const int m_eq = static_cast<int>(lp.b_eq.size());
  if ((m_in > 0 && lp.a_ineq.cols() != n) || lp.a_ineq.rows() != m_in ||
      (m_eq > 0 && lp.a_eq.cols() != n) || lp.a_eq.rows() != m_eq ||
      (lp.lower.size() != 0 && lp.lower.size() != n) ||
      (lp.upper.size() != 0 && lp.upper.size() != n)) {
    throw Error(ErrorCode::kDimensionMismatch, "linear program blocks have inconsistent sizes");
  }
  if (!lp.cost.allFinite() || !lp.a_ineq.allFinite() || !lp.b_ineq.allFinite() ||
      !lp.a_eq.allFinite() || !lp.b_eq.allFinite()) {
    throw Error(ErrorCode::kNonFiniteValue, "linear program data must be finite");
  }

  SolveReport report;
  auto finish = [&](SolveStatus status) {
    report.status = status;
    report.wall_time =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_time).count();
    return report;
  };

  // Map variables to nonnegative columns.
  std::vector<VariableMap> vars(static_cast<std::size_t>(n));
  int columns = 0;
  int bound_rows = 0;
  for (int j = 0; j < n; ++j) {
    const double lo = lp.lower.size() ? lp.lower[j] : -kInf;
    const double hi = lp.upper.size() ? lp.upper[j] : kInf;
    if (lo > hi) return finish(SolveStatus::kInfeasible);
    auto& v = vars[static_cast<std::size_t>(j)];
    if (std::isfinite(lo)) {
      v.kind = VariableMap::Kind::kShiftedLower;
      v.offset = lo;
      v.column = columns++;
      if (std::isfinite(hi)) v.bound_row = m_in + bound_rows++;
    } else if (std::isfinite(hi)) {
      v.kind = VariableMap::Kind::kReflectedUpper;
      v.offset = hi;
      v.column = columns++;
    } else {
      v.column = columns++;
      v.column_neg = columns++;
    }
  }

  const int rows_with_slack = m_in + bound_rows;
  const int rows = rows_with_slack + m_eq;
  const int structural = columns;
  Matrix a = Matrix::Zero(rows, structural + rows_with_slack);
  Vector b(rows);
  Vector cost = Vector::Zero(structural + rows_with_slack);

  auto place_row = [&](int row, const Eigen::Ref<const Vector>& coeffs, double rhs) {
    for (int j = 0; j < n; ++j) {
      const double c = coeffs[j];
      if (c == 0.0) continue;
      const auto& v = vars[static_cast<std::size_t>(j)];
      switch (v.kind) {
        case VariableMap::Kind::kShiftedLower:
          a(row, v.column) += c;
          rhs -= c * v.offset;
          break;
        case VariableMap::Kind::kReflectedUpper:
          a(row, v.column) -= c;
          rhs -= c * v.offset;
          break;
        case VariableMap::Kind::kFree:
          a(row, v.column) += c;
          a(row, v.column_neg) -= c;
          break;
      }
    }
    b[row] = rhs;
  };

  for (int i = 0; i < m_in; ++i) place_row(i, lp.a_ineq.row(i).transpose(), lp.b_ineq[i]);
  for (int j = 0; j < n; ++j) {
    const auto& v = vars[static_cast<std::size_t>(j)];
    if (v.bound_row >= 0) {
      a(v.bound_row, v.column) = 1.0;
      b[v.bound_row] = lp.upper[j] - lp.lower[j];
    }
  }
  for (int i = 0; i < m_eq; ++i) {
    place_row(rows_with_slack + i, lp.a_eq.row(i).transpose(), lp.b_eq[i]);
  }
  for (int i = 0; i < rows_with_slack; ++i) a(i, structural + i) = 1.0;

  for (int j = 0; j < n; ++j) {
    const auto& v = vars[static_cast<std::size_t>(j)];
    const double c = lp.cost[j];
    switch (v.kind) {
      case VariableMap::Kind::kShiftedLower:
        cost[v.column] = c;
        break;
      case VariableMap::Kind::kReflectedUpper:
        cost[v.column] = -c;
        break;
      case VariableMap::Kind::kFree:
        cost[v.column] = c;
        cost[v.column_neg] = -c;
        break;
    }
  }

  // Normalize to b ≥ 0 and pick the starting basis; artificial columns go last.
  Vector row_sign = Vector::Ones(rows);
  std::vector<int> basis(static_cast<std::size_t>(rows));
  std::vector<int> artificial_rows;
  for (int i = 0; i < rows; ++i) {
    if (b[i] < 0.0) {
      a.row(i) *= -1.0;
      b[i] = -b[i];
      row_sign[i] = -1.0;
    }
    if (i < rows_with_slack && row_sign[i] > 0) {
      basis[static_cast<std::size_t>(i)] = structural + i;
    } else {
      artificial_rows.push_back(i);
    }
  }
  const int first_artificial = structural + rows_with_slack;
  const int total = first_artificial + static_cast<int>(artificial_rows.size());
  Matrix full = Matrix::Zero(rows, total);
  full.leftCols(first_artificial) = a;
  for (std::size_t k = 0; k < artificial_rows.size(); ++k) {
    full(artificial_rows[k], first_artificial + static_cast<int>(k)) = 1.0;
    basis[static_cast<std::size_t>(artificial_rows[k])] = first_artificial + static_cast<int>(k);
  }

  const int max_iter = 100 * (rows + total) + 100;
  Simplex simplex(std::move(full), b, std::move(basis));

  if (!artificial_rows.empty()) {
    Vector phase1_cost = Vector::Zero(total);
    phase1_cost.tail(total - first_artificial).setOnes();
    std::vector<bool> may_enter(static_cast<std::size_t>(total), true);
    const auto result = simplex.run(phase1_cost, may_enter, max_iter);
    report.iterations = simplex.iterations();
    if (result == Simplex::Result::kIterLimit) return finish(SolveStatus::kIterLimit);
    simplex.refactor();
    const Vector x = simplex.solution();
    const double infeasibility = x.tail(total - first_artificial).sum();
    if (infeasibility > 1e-9 * std::max(1.0, b.size() ? b.cwiseAbs().maxCoeff() : 0.0)) {
      return finish(SolveStatus::kInfeasible);
    }
    simplex.drive_out(first_artificial);
  }

  Vector phase2_cost = Vector::Zero(total);
  phase2_cost.head(first_artificial) = cost;
  std::vector<bool> may_enter(static_cast<std::size_t>(total), false);
  std::fill(may_enter.begin(), may_enter.begin() + first_artificial, true);
  const auto result = simplex.run(phase2_cost, may_enter, max_iter);
  report.iterations = simplex.iterations();
  if (result == Simplex::Result::kIterLimit) return finish(SolveStatus::kIterLimit);
  if (result == Simplex::Result::kUnbounded) return finish(SolveStatus::kUnbounded);

  simplex.refactor();
  const Vector xs = simplex.solution();
  const Vector y = simplex.dual_values(phase2_cost);

  Vector x(n);
  for (int j = 0; j < n; ++j) {
    const auto& v = vars[static_cast<std::size_t>(j)];
    switch (v.kind) {
      case VariableMap::Kind::kShiftedLower:
        x[j] = v.offset + xs[v.column];
        break;
      case VariableMap::Kind::kReflectedUpper:
        x[j] = v.offset - xs[v.column];
        break;
      case VariableMap::Kind::kFree:
        x[j] = xs[v.column] - xs[v.column_neg];
        break;
    }
  }

  // Standard-form duals y give λ_i = −σ_i y_i for the original rows.
  Vector ineq_duals(m_in);
  for (int i = 0; i < m_in; ++i) ineq_duals[i] = std::max(0.0, -row_sign[i] * y[i]);
  Vector eq_duals(m_eq);
  for (int i = 0; i < m_eq; ++i) {
    eq_duals[i] = -row_sign[rows_with_slack + i] * y[rows_with_slack + i];
  }

  // Bound multipliers from cost + Aᵀλ − lower + upper = 0.
  Vector reduced = lp.cost;
  if (m_in) reduced += lp.a_ineq.transpose() * ineq_duals;
  if (m_eq) reduced += lp.a_eq.transpose() * eq_duals;
  Vector lower_duals = Vector::Zero(n);
  Vector upper_duals = Vector::Zero(n);
  for (int j = 0; j < n; ++j) {
    const auto& v = vars[static_cast<std::size_t>(j)];
    if (v.kind == VariableMap::Kind::kShiftedLower) {
      if (v.bound_row >= 0) upper_duals[j] = std::max(0.0, -row_sign[v.bound_row] * y[v.bound_row]);
      lower_duals[j] = std::max(0.0, reduced[j] + upper_duals[j]);
    } else if (v.kind == VariableMap::Kind::kReflectedUpper) {
      upper_duals[j] = std::max(0.0, -reduced[j]);
    }
  }

  report.point = x;
  report.objective = lp.cost.dot(x);
  report.multipliers.set("ineq", ineq_duals);
  report.multipliers.set("eq", eq_duals);
  report.multipliers.set("lower", lower_duals);
  report.multipliers.set("upper", upper_duals);
  return finish(SolveStatus::kOptimal);
}

}  // namespace bilevel

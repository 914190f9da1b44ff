#include "bilevel/model.hpp"

#include <random>

namespace bilevel {

namespace {

template <typename M>
void expect_shape(const M& value, Eigen::Index rows, Eigen::Index cols, const char* name) {
  if (value.rows() != rows || value.cols() != cols) {
    throw Error(ErrorCode::kDimensionMismatch,
                std::string(name) + " is " + std::to_string(value.rows()) + "x" +
                    std::to_string(value.cols()) + ", expected " + std::to_string(rows) + "x" +
                    std::to_string(cols));
  }
}

// Uniform double in [0, 1) from the top 53 bits of one mt19937_64 draw.
double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

Matrix sparse_matrix(std::mt19937_64& rng, int rows, int cols, double density) {
  Matrix out = Matrix::Zero(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      if (uniform01(rng) < density) out(i, j) = uniform01(rng);
    }
  }
  return out;
}

Vector dense_vector(std::mt19937_64& rng, int size) {
  Vector out(size);
  for (int i = 0; i < size; ++i) out[i] = uniform01(rng);
  return out;
}

}  // namespace

void check_linear_data(const LinearBilevelData& d) {
  const auto [n, p, m, q] = d.dims();
  expect_shape(d.A1, p, n, "A1");
  expect_shape(d.b1, p, 1, "b1");
  expect_shape(d.c1, n, 1, "c1");
  expect_shape(d.c2, m, 1, "c2");
  expect_shape(d.d2, m, 1, "d2");
  expect_shape(d.A2, q, n, "A2");
  expect_shape(d.B2, q, m, "B2");
  expect_shape(d.b2, q, 1, "b2");
  expect_shape(d.lb, m, 1, "l_b");
  expect_shape(d.ub, m, 1, "u_b");
  if ((d.lb.array() >= d.ub.array()).any()) {
    throw Error(ErrorCode::kInvalidArgument, "l_b < u_b must hold componentwise");
  }
}

BilevelProblem to_expressions(const LinearBilevelData& d) {
  check_linear_data(d);
  const auto [n, p, m, q] = d.dims();
  BilevelProblem bp;
  bp.n = n;
  bp.m = m;
  bp.upper_objective = linear_form(d.c1, 0) + linear_form(d.c2, n);
  bp.lower_objective = linear_form(d.d2, n);
  for (int i = 0; i < p; ++i) {
    const Vector row = d.A1.row(i).transpose();
    bp.upper_ineq.push_back(linear_form(row, 0) - d.b1[i]);
  }
  for (int i = 0; i < q; ++i) {
    const Vector ax = d.A2.row(i).transpose();
    const Vector by = d.B2.row(i).transpose();
    bp.lower_ineq.push_back(linear_form(ax, 0) + linear_form(by, n) - d.b2[i]);
  }
  for (int j = 0; j < m; ++j) bp.lower_ineq.push_back(Expr::variable(n + j) - d.ub[j]);
  for (int j = 0; j < m; ++j) bp.lower_ineq.push_back(d.lb[j] - Expr::variable(n + j));
  return bp;
}

LinearProgram lower_level_lp(const LinearBilevelData& d, const Vector& x) {
  check_linear_data(d);
  const auto [n, p, m, q] = d.dims();
  if (x.size() != n) {
    throw Error(ErrorCode::kDimensionMismatch, "x has dimension " + std::to_string(x.size()) +
                                                   ", expected " + std::to_string(n));
  }
  LinearProgram lp;
  lp.cost = d.d2;
  lp.a_ineq = Matrix::Zero(q + 2 * m, m);
  lp.b_ineq = Vector::Zero(q + 2 * m);
  lp.a_ineq.topRows(q) = d.B2;
  lp.b_ineq.head(q) = d.b2 - d.A2 * x;
  lp.a_ineq.middleRows(q, m).setIdentity();
  lp.b_ineq.segment(q, m) = d.ub;
  lp.a_ineq.bottomRows(m) = -Matrix::Identity(m, m);
  lp.b_ineq.tail(m) = -d.lb;
  lp.a_eq = Matrix::Zero(0, m);
  lp.b_eq = Vector::Zero(0);
  return lp;
}

LinearBilevelData generate_instance(std::uint64_t seed, LinearDims dims, double density) {
  if (!(density > 0.0 && density <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "density must lie in (0, 1]");
  }
  if (dims.n <= 0 || dims.p <= 0 || dims.m <= 0 || dims.q <= 0) {
    throw Error(ErrorCode::kInvalidArgument, "dimensions must be positive");
  }
  constexpr int kMaxRetries = 1000;
  for (int retry = 0; retry < kMaxRetries; ++retry) {
    std::mt19937_64 rng(seed + static_cast<std::uint64_t>(retry));
    LinearBilevelData d;
    d.A1 = sparse_matrix(rng, dims.p, dims.n, density);
    d.A2 = sparse_matrix(rng, dims.q, dims.n, density);
    d.B2 = sparse_matrix(rng, dims.q, dims.m, density);
    d.b1 = dense_vector(rng, dims.p);
    d.b2 = dense_vector(rng, dims.q);
    d.c1 = dense_vector(rng, dims.n);
    d.c2 = dense_vector(rng, dims.m);
    d.d2 = dense_vector(rng, dims.m);
    d.lb = Vector::Constant(dims.m, -10.0);
    d.ub = Vector::Constant(dims.m, 10.0);
    d.seed = seed;
    d.retries = retry;
    if (solve_lp(lower_level_lp(d, Vector::Zero(dims.n))).optimal()) return d;
  }
  throw Error(ErrorCode::kLowerLevelInfeasible,
              "no instance with a feasible lower level at x = 0 after retries");
}

std::vector<ValidationIssue> validate(const BilevelProblem& bp) {
  std::vector<ValidationIssue> issues;
  const int dim = bp.n + bp.m;
  if (bp.n < 0 || bp.m < 0) {
    issues.push_back({ErrorCode::kInvalidArgument, "negative dimension"});
    return issues;
  }
  auto check = [&](const Expr& e, const std::string& what) {
    if (e.min_dimension() > dim) {
      issues.push_back({ErrorCode::kIndexOutOfRange,
                        what + " references index " + std::to_string(e.min_dimension() - 1) +
                            " >= n + m = " + std::to_string(dim)});
    }
  };
  check(bp.upper_objective, "F");
  check(bp.lower_objective, "f");
  for (int i = 0; i < bp.p(); ++i) check(bp.lower_ineq[static_cast<std::size_t>(i)], "g[" + std::to_string(i) + "]");
  for (int j = 0; j < bp.q(); ++j) check(bp.lower_eq[static_cast<std::size_t>(j)], "h[" + std::to_string(j) + "]");
  for (std::size_t k = 0; k < bp.upper_ineq.size(); ++k) {
    const std::string what = "upper[" + std::to_string(k) + "]";
    const auto& e = bp.upper_ineq[k];
    check(e, what);
    for (int v : e.variables()) {
      if (v >= bp.n && v < dim) {
        issues.push_back({ErrorCode::kUpperConstraintUsesY,
                          what + " references lower-level variable " + std::to_string(v)});
        break;
      }
    }
  }
  return issues;
}

void require_valid(const BilevelProblem& bp) {
  const auto issues = validate(bp);
  if (!issues.empty()) throw Error(issues.front().code, issues.front().message);
}

}  // namespace bilevel

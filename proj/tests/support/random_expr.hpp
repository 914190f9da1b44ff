#pragma once

// Test-only generators and finite-difference oracles for expression trees.

#include <cmath>
#include <random>
#include <vector>

#include "bilevel/expr.hpp"

namespace bilevel::testing {

/// Random tree over variables [0, dim) of depth at most `depth`. Divisions
/// use denominators of the form c + t² with c ≥ 1 so evaluation stays finite.
inline Expr random_expr(std::mt19937_64& rng, int dim, int depth) {
  std::uniform_int_distribution<int> pick(0, 8);
  std::uniform_real_distribution<double> coeff(-2.0, 2.0);
  std::uniform_int_distribution<int> var(0, dim - 1);
  if (depth <= 1) {
    return pick(rng) < 3 ? Expr::constant(coeff(rng)) : Expr::variable(var(rng));
  }
  auto sub = [&] { return random_expr(rng, dim, depth - 1); };
  switch (pick(rng)) {
    case 0:
      return Expr::make_raw(NodeKind::kAdd, {sub(), sub()});
    case 1:
      return Expr::make_raw(NodeKind::kSub, {sub(), sub()});
    case 2:
    case 3:
      return Expr::make_raw(NodeKind::kMul, {sub(), sub()});
    case 4: {
      const Expr den = Expr::make_raw(
          NodeKind::kAdd, {Expr::constant(1.0 + std::abs(coeff(rng))),
                           Expr::make_raw(NodeKind::kPow, {sub()}, 0.0, 2)});
      return Expr::make_raw(NodeKind::kDiv, {sub(), den});
    }
    case 5:
      return Expr::make_raw(NodeKind::kPow, {sub()}, 0.0,
                            std::uniform_int_distribution<int>(0, 3)(rng));
    case 6: {
      // exp(0.3 · t) keeps values moderate for deep trees.
      const Expr scaled = Expr::make_raw(NodeKind::kMul, {Expr::constant(0.3), sub()});
      return Expr::make_raw(NodeKind::kExp, {scaled});
    }
    case 7:
      return Expr::make_raw(NodeKind::kNeg, {sub()});
    default:
      return Expr::variable(var(rng));
  }
}

inline Point random_point(std::mt19937_64& rng, int dim, double radius = 1.0) {
  std::uniform_real_distribution<double> u(-radius, radius);
  Point p(dim);
  for (int i = 0; i < dim; ++i) p[i] = u(rng);
  return p;
}

/// Central differences of eval.
inline Vector fd_gradient(const Expr& e, const Point& p, double h = 1e-6) {
  Vector g(p.size());
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    Point a = p;
    Point b = p;
    a[i] += h;
    b[i] -= h;
    g[i] = (eval(e, a) - eval(e, b)) / (2.0 * h);
  }
  return g;
}

/// Central differences of the analytic gradient.
inline Matrix fd_hessian(const Expr& e, const Point& p, std::span<const int> wrt, double h = 1e-6) {
  const auto n = static_cast<Eigen::Index>(wrt.size());
  Matrix out(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    Point a = p;
    Point b = p;
    a[wrt[static_cast<std::size_t>(j)]] += h;
    b[wrt[static_cast<std::size_t>(j)]] -= h;
    out.col(j) = (grad(e, a, wrt) - grad(e, b, wrt)) / (2.0 * h);
  }
  return out;
}

inline double relative_error(double actual, double expected) {
  return std::abs(actual - expected) / std::max(1.0, std::abs(expected));
}

inline std::vector<int> iota_indices(int n) {
  std::vector<int> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = i;
  return out;
}

}  // namespace bilevel::testing

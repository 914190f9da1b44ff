#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "bilevel/error.hpp"

namespace bilevel {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Primal point: one coordinate per variable index.
using Point = Eigen::VectorXd;

enum class NodeKind : std::uint8_t {
  kConstant,
  kVariable,
  kAdd,
  kSub,
  kMul,
  kDiv,
  kPow,
  kExp,
  kNeg,
};

/**
 * Immutable scalar expression over indexed variables.
 *
 * An Expr is a cheap handle to a shared, acyclic node tree. Nodes are never
 * mutated after construction, so Expr values may be copied freely and
 * evaluated from several threads at once.
 *
 * The arithmetic operators fold constants and drop neutral elements (x + 0,
 * 1 * x, x ^ 1, ...) so that symbolic derivatives of linear and bilinear
 * expressions stay small.
 */
class Expr {
 public:
  /// The constant zero.
  Expr();

  static Expr constant(double value);
  static Expr variable(int index);

  NodeKind kind() const;
  double constant_value() const;
  int variable_index() const;
  int exponent() const;
  std::span<const Expr> children() const;

  bool is_constant() const { return kind() == NodeKind::kConstant; }
  bool is_constant(double value) const {
    return is_constant() && constant_value() == value;
  }

  /// Largest variable index referenced plus one (0 for constant trees).
  int min_dimension() const;

  /// Sorted, de-duplicated variable indices referenced by the tree.
  std::vector<int> variables() const;

  std::size_t node_count() const;
  int depth() const;

  friend Expr operator+(const Expr& a, const Expr& b);
  friend Expr operator-(const Expr& a, const Expr& b);
  friend Expr operator*(const Expr& a, const Expr& b);
  friend Expr operator/(const Expr& a, const Expr& b);
  friend Expr operator-(const Expr& a);
  friend Expr pow(const Expr& base, int exponent);
  friend Expr exp(const Expr& a);

  Expr& operator+=(const Expr& other) { return *this = *this + other; }
  Expr& operator-=(const Expr& other) { return *this = *this - other; }
  Expr& operator*=(const Expr& other) { return *this = *this * other; }

  /// Structural node constructors without any simplification. Used by the
  /// parser so that serialized trees round-trip node for node.
  static Expr make_raw(NodeKind kind, std::vector<Expr> children, double value = 0.0,
                       int index = 0);

 private:
  struct Node;
  explicit Expr(std::shared_ptr<const Node> node);

  std::shared_ptr<const Node> node_;
};

inline Expr operator+(const Expr& a, double b) { return a + Expr::constant(b); }
inline Expr operator+(double a, const Expr& b) { return Expr::constant(a) + b; }
inline Expr operator-(const Expr& a, double b) { return a - Expr::constant(b); }
inline Expr operator-(double a, const Expr& b) { return Expr::constant(a) - b; }
inline Expr operator*(const Expr& a, double b) { return a * Expr::constant(b); }
inline Expr operator*(double a, const Expr& b) { return Expr::constant(a) * b; }

/// Returns Σ coefficients[i] · x_{first + i}, skipping zero coefficients.
Expr linear_form(std::span<const double> coefficients, int first_index);

inline Expr linear_form(const Vector& coefficients, int first_index) {
  return linear_form(std::span<const double>(coefficients.data(), static_cast<std::size_t>(coefficients.size())),
                     first_index);
}

/// Returns the sum of terms (constant zero when empty).
Expr sum(std::span<const Expr> terms);

/// Evaluates e at p. Throws kDimensionMismatch or kNonFiniteValue.
double eval(const Expr& e, const Point& p);

/// Exact partial derivatives with respect to `wrt`, in the order given.
Vector grad(const Expr& e, const Point& p, std::span<const int> wrt);

/// Exact Hessian block over `wrt`. Symmetric bit for bit.
Matrix hess(const Expr& e, const Point& p, std::span<const int> wrt);

/// Value with sparse first and second derivatives over all variables.
struct SparseDerivatives {
  double value = 0.0;
  /// (index, ∂e/∂x_index), sorted by index.
  std::vector<std::pair<int, double>> gradient;
  /// (i, j, ∂²e/∂x_i∂x_j) with i ≤ j, sorted.
  std::vector<std::tuple<int, int, double>> hessian;
};

/// One forward sweep computing value, gradient, and (optionally) Hessian.
SparseDerivatives differentiate_at(const Expr& e, const Point& p, bool with_hessian);

/// Symbolic partial derivative ∂e/∂x_index as a new expression.
Expr derivative(const Expr& e, int index);

/// Replaces every variable i by replacement[i] (identity where the map is
/// shorter than the index).
Expr substitute(const Expr& e, std::span<const Expr> replacement);

/// Renames variable indices through `index_map` (index_map[i] is the new
/// index of variable i).
Expr remap_variables(const Expr& e, std::span<const int> index_map);

/// Prefix text form, e.g. `(add (pow (var 0) 2) (exp (neg (var 1))))`.
std::string to_string(const Expr& e);

/// Parses the prefix text form. Throws kParseError.
Expr parse_expr(std::string_view text);

}  // namespace bilevel

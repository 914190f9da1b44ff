#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bilevel/expr.hpp"

namespace bilevel {

/// Half-open index interval [begin, end).
struct Range {
  int begin = 0;
  int end = 0;

  int size() const { return end - begin; }
  bool empty() const { return end <= begin; }
  bool contains(int i) const { return i >= begin && i < end; }
};

/// Named variable blocks (x, y, z, u, v) partitioning [0, dim).
class VariableLayout {
 public:
  void add(std::string name, int size);

  std::optional<Range> find(const std::string& name) const;

  /// Like find, but throws kLayoutMismatch for a missing block.
  Range at(const std::string& name) const;

  int dim() const { return dim_; }
  const std::vector<std::pair<std::string, Range>>& blocks() const { return blocks_; }

 private:
  std::vector<std::pair<std::string, Range>> blocks_;
  int dim_ = 0;
};

enum class NlpKind { kGeneric, kWdp, kMpec };

/// Positions of the structured constraint groups inside Nlp::ineq / Nlp::eq.
struct ConstraintGroups {
  // inequality rows
  Range upper;          // G_X(x) ≤ 0
  Range lower_g;        // g(x, y) ≤ 0
  Range gap;            // WDP: f − L − t ≤ 0
  Range u_nonneg;       // −u ≤ 0
  Range u_cap;          // u − cap ≤ 0
  Range relaxed_comp;   // MPEC(t): −uᵀg − t ≤ 0
  // equality rows
  Range h;              // h(x, y) = 0
  Range stationarity;   // ∇_z L = 0 (WDP) or ∇_y L = 0 (MPEC)
  Range complementarity;  // MPEC: uᵀg = 0 (or u_i g_i = 0)
};

/**
 * Single-level problem  min objective  s.t.  ineq ≤ 0,  eq = 0.
 *
 * Problems built from a bilevel program also carry the variable layout and
 * the group structure needed by the certificates and the relaxations.
 */
struct Nlp {
  int dim = 0;
  Expr objective;
  std::vector<Expr> ineq;
  std::vector<Expr> eq;
  VariableLayout layout;

  NlpKind kind = NlpKind::kGeneric;
  ConstraintGroups groups;
  // Unrelaxed gap (WDP) or complementarity (MPEC) expressions.
  std::vector<Expr> relaxable;
  double relaxation = 0.0;
  bool relaxed = false;
  bool componentwise = false;

  int num_ineq() const { return static_cast<int>(ineq.size()); }
  int num_eq() const { return static_cast<int>(eq.size()); }
};

/// Throws kIndexOutOfRange / kLayoutMismatch when an invariant fails.
void check_nlp(const Nlp& nlp);

/// Values and dense first derivatives of every function of an Nlp.
struct NlpEvaluation {
  double objective = 0.0;
  Vector gradient;
  Vector ineq;
  Vector eq;
  Matrix ineq_jacobian;  // num_ineq × dim
  Matrix eq_jacobian;    // num_eq × dim
};

NlpEvaluation evaluate(const Nlp& nlp, const Point& p);

/// ∇²(w·objective + Σ ineq_mult_i c_i + Σ eq_mult_j h_j); entries with a zero
/// multiplier are skipped.
Matrix lagrangian_hessian(const Nlp& nlp, const Point& p, double objective_weight,
                          const Vector& ineq_mult, const Vector& eq_mult);

struct FeasibilityReport {
  double max_ineq_violation = 0.0;  // max(0, max_i c_i)
  double max_eq_violation = 0.0;    // max_j |h_j|

  double max_violation() const { return std::max(max_ineq_violation, max_eq_violation); }
  bool feasible(double tol) const { return max_violation() <= tol; }
};

/// Exact constraint violations at p. Throws kDimensionMismatch.
FeasibilityReport check_feasible(const Nlp& nlp, const Point& p);

}  // namespace bilevel

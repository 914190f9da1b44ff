#pragma once

#include <optional>

#include "bilevel/model.hpp"
#include "bilevel/nlp.hpp"

namespace bilevel {

struct ReformOptions {
  /// Adds u ≤ u_cap rows when set.
  std::optional<double> u_cap;
  /// MPEC only: u_i g_i = 0 per index instead of the aggregated uᵀg = 0.
  bool componentwise = false;
};

/// Lower-level Lagrangian f + uᵀg + vᵀh, with the lower-level variable block
/// relocated to `y_first` and multipliers at `u_first` / `v_first`.
Expr lower_lagrangian(const BilevelProblem& bp, int y_first, int u_first, int v_first);

/**
 * Wolfe-dual reformulation over (x, y, z, u, v):
 *
 *   min F(x, y)  s.t.  G_X(x) ≤ 0,  g(x, y) ≤ 0,  f(x, y) − L(x, z, u, v) ≤ 0,  −u ≤ 0,
 *                      h(x, y) = 0,  ∇_z L(x, z, u, v) = 0.
 */
Nlp build_wdp(const BilevelProblem& bp, const ReformOptions& options = {});

/**
 * KKT (MPEC) reformulation over (x, y, u, v):
 *
 *   min F(x, y)  s.t.  G_X(x) ≤ 0,  g(x, y) ≤ 0,  −u ≤ 0,
 *                      h(x, y) = 0,  ∇_y L(x, y, u, v) = 0,  uᵀg(x, y) = 0.
 */
Nlp build_mpec(const BilevelProblem& bp, const ReformOptions& options = {});

/// Gap row becomes f − L − t ≤ 0. Throws kNotAWdp or kInvalidArgument (t < 0).
Nlp relax_wdp(const Nlp& wdp, double t);

/// Complementarity equality becomes −uᵀg − t ≤ 0. Throws kNotAnMpec.
Nlp relax_mpec(const Nlp& mpec, double t);

/// (x, y, u, v) on the MPEC layout → (x, y, z = y, u, v) on the WDP layout.
Point lift_point(const Nlp& mpec, const Point& p);

/// Inverse of lift_point: drops the z block of a WDP point.
Point drop_z(const Nlp& wdp, const Point& p);

}  // namespace bilevel

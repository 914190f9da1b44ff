#pragma once

#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "bilevel/model.hpp"
#include "bilevel/multipliers.hpp"
#include "bilevel/nlp.hpp"

namespace bilevel {

enum class Verdict { kHolds, kFails, kInconclusive };

std::string_view to_string(Verdict verdict);

/**
 * Outcome of a certification.
 *
 * `residual` depends on the check: minimized stationarity residual (KKT,
 * S-stationarity), optimal margin s (MFCQ), largest row residual (abnormal
 * multiplier), or ‖Σαa + Σβb‖∞ (positive-linear dependence).
 */
struct CertifyReport {
  Verdict verdict = Verdict::kInconclusive;
  MultiplierSet multipliers;
  Vector direction;
  double residual = std::numeric_limits<double>::infinity();
  std::vector<int> active_ineq;
  std::string note;

  bool holds() const { return verdict == Verdict::kHolds; }
};

/// Activity threshold of a row with gradient `gradient`: tol · (1 + ‖gradient‖∞).
double activity_threshold(const Vector& gradient, double tol);

/// Indices of inequality rows with c_i ≥ −activity_threshold.
std::vector<int> active_set(const Nlp& nlp, const Point& p, double tol);

/// Throws kInfeasiblePoint if some row is violated beyond its activity threshold.
void require_feasible(const Nlp& nlp, const Point& p, double tol);

/// Splits flat "ineq" / "eq" multipliers into the named blocks of a WDP or MPEC
/// (see multipliers.hpp); the flat blocks are kept as well.
MultiplierSet name_blocks(const Nlp& nlp, const Vector& ineq_mult, const Vector& eq_mult);

/// Minimizes max(‖∇F + Σλ∇c‖∞, max_i |λ_i c_i|) over sign-constrained
/// multipliers, with multipliers of inactive rows fixed at zero. The residual
/// also counts the primal violation. Holds iff it is ≤ tol.
CertifyReport kkt_residual(const Nlp& nlp, const Point& p, double tol = 1e-6);

/// max(stationarity, |λ_i c_i|, negative parts of inequality multipliers).
double kkt_certificate_residual(const Nlp& nlp, const Point& p, const Vector& ineq_mult,
                                const Vector& eq_mult);

/// Biactivity classes of an MPEC point.
struct MpecIndexSets {
  std::vector<int> zero_plus;   // g_i = 0, u_i > 0
  std::vector<int> minus_zero;  // g_i < 0, u_i = 0
  std::vector<int> zero_zero;   // g_i = 0, u_i = 0
};

MpecIndexSets classify(const Nlp& mpec, const Point& p, double tol);

/// S-stationarity of an unrelaxed MPEC point. Certificate blocks: "upper",
/// "lambda_g", "lambda_u", "u_cap", "h", "gamma".
CertifyReport s_stationarity(const Nlp& mpec, const Point& p, double tol = 1e-6);

/// Stationarity residual of an S-stationarity certificate, or +∞ when a sign
/// or index-set condition is violated.
double s_certificate_residual(const Nlp& mpec, const Point& p, const MultiplierSet& mult,
                              double tol = 1e-6);

/// λ^g = η^g − αu, λ^u = η^u + αg(x, y), γ = β, h-multiplier ν − αv; upper
/// and u_cap multipliers unchanged. Throws kNotOnDiagonal unless z = y.
MultiplierSet wdp_kkt_to_s(const Nlp& wdp, const Point& p, const MultiplierSet& wdp_mult);

/// Equality gradients independent and a direction d (‖d‖∞ ≤ 1) with
/// ∇hᵀd = 0 and ∇c_iᵀd ≤ −s on active rows for some s > tol.
CertifyReport mfcq_check(const Nlp& nlp, const Point& p, double tol = 1e-6);

/// Margin min_i(−∇c_iᵀd) / ‖d‖∞ over active rows, or −∞ if d leaves the
/// equality tangent space. d is accepted iff the margin is positive.
double mfcq_direction_margin(const Nlp& nlp, const Point& p, const Vector& d, double tol = 1e-6);

/// The abnormal multiplier (α, β, η^g, η^u) = (1, 0, u, −g(x, y)) of a WDP point
/// with z = y. Holds iff every row of the abnormal system is ≤ 1e-10.
/// Throws kNotOnDiagonal.
CertifyReport abnormal_multiplier(const Nlp& wdp, const Point& p);

/// Positive-linear dependence of the family ({a_i} with α ≥ 0, {b_j} free).
/// Certificate blocks "alpha" and "beta" scaled to Σα + Σ|β| = 1.
CertifyReport plin_dependent(const std::vector<Vector>& a, const std::vector<Vector>& b,
                             double tol = 1e-9);

/// f(x, y) − L(x, z, u, v). Throws kInfeasibleInput unless y ∈ Y(x) and
/// (z, u, v) is Wolfe-dual feasible within tol.
double duality_gap(const BilevelProblem& bp, const Vector& x, const Vector& y, const Vector& z,
                   const Vector& u, const Vector& v, double tol = 1e-6);

}  // namespace bilevel

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include "bilevel/solve.hpp"
#include "norms.hpp"

namespace bilevel {

namespace {

struct Convexified {
  Matrix h;
  double rho = 0.0;
};

// H itself if positive definite. Otherwise H + ρA_eqᵀA_eq, which has the
// same minimizer on the equality set, and then the smallest τ ∈ {1e-8, 2e-8,
// ...}·scale making it positive definite after adding τI.
Convexified convexified(const Matrix& h, const Matrix& a_eq) {
  Convexified out{0.5 * (h + h.transpose()), 0.0};
  if (Eigen::LLT<Matrix>(out.h).info() == Eigen::Success) return out;
  const double scale = std::max(1.0, inf_norm(out.h));
  if (a_eq.rows() > 0) {
    const Matrix gram = a_eq.transpose() * a_eq;
    const double gram_scale = inf_norm(gram);
    if (gram_scale > 0.0) {
      for (double factor : {1.0, 10.0, 100.0}) {
        const double rho = factor * scale / gram_scale;
        Matrix trial = out.h + rho * gram;
        const Eigen::SelfAdjointEigenSolver<Matrix> eig(trial, Eigen::EigenvaluesOnly);
        if (eig.eigenvalues().minCoeff() >= -1e-10 * scale) {
          out.h = std::move(trial);
          out.rho = rho;
          break;
        }
      }
    }
  }
  const double shift_scale = std::max(1.0, inf_norm(out.h));
  if (Eigen::LLT<Matrix>(out.h).info() == Eigen::Success) return out;
  for (double tau = 1e-8 * shift_scale;; tau *= 2.0) {
    Matrix trial = out.h;
    trial.diagonal().array() += tau;
    if (Eigen::LLT<Matrix>(trial).info() == Eigen::Success) {
      out.h = std::move(trial);
      return out;
    }
  }
}


// Givens rotation zeroing b against a; returns (c, s, h) with a' = h.
struct Rotation {
  double c = 1.0;
  double s = 0.0;
  double h = 0.0;
};

Rotation rotation(double a, double b) {
  const double h = std::hypot(a, b);
  if (h == 0.0) return {1.0, 0.0, 0.0};
  Rotation r{a / h, b / h, h};
  if (r.c < 0.0) {
    r.c = -r.c;
    r.s = -r.s;
    r.h = -h;
  }
  return r;
}

// Applies the rotation to columns (i, j) of m.
void rotate_columns(Matrix& m, Eigen::Index i, Eigen::Index j, const Rotation& r) {
  const double nu = r.s / (1.0 + r.c);
  for (Eigen::Index k = 0; k < m.rows(); ++k) {
    const double a = m(k, i);
    const double b = m(k, j);
    m(k, i) = a * r.c + b * r.s;
    m(k, j) = nu * (a + m(k, i)) - b;
  }
}

// Dual active-set (Goldfarb–Idnani) state: H = LLᵀ, J = L⁻ᵀQ, R upper
// triangular with the active normals N satisfying JᵀN = [R; 0].
class DualActiveSet {
 public:
  DualActiveSet(const Eigen::LLT<Matrix>& llt, int n) : n_(n) {
    j_ = llt.matrixU().solve(Matrix::Identity(n, n));
    r_ = Matrix::Zero(n, n);
    d_ = Vector::Zero(n);
  }

  int size() const { return active_; }

  // d = Jᵀnp, z = J₂d₂ (primal direction), r = R⁻¹d₁ (dual direction).
  void directions(const Vector& np, Vector& z, Vector& r) {
    d_ = j_.transpose() * np;
    z = j_.rightCols(n_ - active_) * d_.tail(n_ - active_);
    r = active_ ? Vector(r_.topLeftCorner(active_, active_).triangularView<Eigen::Upper>().solve(
                      d_.head(active_)))
                : Vector(0);
  }

  // Appends the normal whose d was computed by the last directions() call.
  // Returns false (state unchanged apart from a basis rotation) if it is
  // linearly dependent on the active normals.
  bool add() {
    for (int k = n_ - 1; k > active_; --k) {
      const Rotation rot = rotation(d_[k - 1], d_[k]);
      if (rot.h == 0.0) continue;
      d_[k - 1] = rot.h;
      d_[k] = 0.0;
      rotate_columns(j_, k - 1, k, rot);
    }
    if (active_ >= n_ || std::abs(d_[active_]) <= kDependence * norm_) return false;
    r_.col(active_).head(active_ + 1) = d_.head(active_ + 1);
    norm_ = std::max(norm_, std::abs(d_[active_]));
    ++active_;
    return true;
  }

  // Removes active position q and restores the triangular structure.
  void remove(int q) {
    for (int k = q; k < active_ - 1; ++k) r_.col(k) = r_.col(k + 1);
    r_.col(active_ - 1).setZero();
    --active_;
    for (int k = q; k < active_; ++k) {
      const Rotation rot = rotation(r_(k, k), r_(k + 1, k));
      if (rot.h == 0.0) continue;
      r_(k, k) = rot.h;
      r_(k + 1, k) = 0.0;
      const double nu = rot.s / (1.0 + rot.c);
      for (int c = k + 1; c < active_; ++c) {
        const double a = r_(k, c);
        const double b = r_(k + 1, c);
        r_(k, c) = a * rot.c + b * rot.s;
        r_(k + 1, c) = nu * (a + r_(k, c)) - b;
      }
      rotate_columns(j_, k, k + 1, rot);
    }
  }

 private:
  static constexpr double kDependence = 1e-12;
  int n_;
  int active_ = 0;
  double norm_ = 1.0;
  Matrix j_;
  Matrix r_;
  Vector d_;
};

// Re-solves the equality-constrained problem on the active set: x = x_p + Zw
// with N x_p = b and ZᵀHZw = −Zᵀ(Hx_p + g). Large cancellations in the dual
// iterations leave the active rows only approximately satisfied.
bool polish(const Matrix& h, const Vector& g, const Matrix& normals, const Vector& rhs, Vector& x,
            Vector& u) {
  const int n = static_cast<int>(g.size());
  const int k = static_cast<int>(rhs.size());
  if (k == 0) {
    x = h.llt().solve(-g);
    u.resize(0);
    return true;
  }
  const Eigen::ColPivHouseholderQR<Matrix> qr(normals.transpose());
  const int rank = static_cast<int>(qr.rank());
  if (rank < k) return false;
  const Matrix q = qr.householderQ() * Matrix::Identity(n, n);
  Vector xp = normals.completeOrthogonalDecomposition().solve(rhs);
  if (rank < n) {
    const Matrix zb = q.rightCols(n - rank);
    const Matrix reduced = zb.transpose() * h * zb;
    const Eigen::LLT<Matrix> llt(reduced);
    if (llt.info() != Eigen::Success) return false;
    xp += zb * llt.solve(-zb.transpose() * (h * xp + g));
  }
  if (!xp.allFinite()) return false;
  x = xp;
  u = qr.solve(Vector(-(h * x + g)));
  return u.allFinite();
}

}  // namespace


SolveReport solve_qp(const QuadraticProgram& qp, const QpOptions& options) {
  const auto start_time = std::chrono::steady_clock::now();
  const int n = qp.num_vars();
  const int m_in = static_cast<int>(qp.b_ineq.size());
  const int m_eq = static_cast<int>(qp.b_eq.size());
  if (qp.hessian.rows() != n || qp.hessian.cols() != n || qp.a_ineq.rows() != m_in ||
      (m_in && qp.a_ineq.cols() != n) || qp.a_eq.rows() != m_eq || (m_eq && qp.a_eq.cols() != n)) {
    throw Error(ErrorCode::kDimensionMismatch, "quadratic program blocks have inconsistent sizes");
  }
  if (!qp.hessian.allFinite() || !qp.gradient.allFinite() || !qp.a_ineq.allFinite() ||
      !qp.b_ineq.allFinite() || !qp.a_eq.allFinite() || !qp.b_eq.allFinite()) {
    throw Error(ErrorCode::kNonFiniteValue, "quadratic program data must be finite");
  }

  SolveReport report;
  auto finish = [&](SolveStatus status) {
    report.status = status;
    report.wall_time =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_time).count();
    return report;
  };

  const Convexified conv = convexified(qp.hessian, qp.a_eq);
  const Matrix& h = conv.h;
  const Eigen::LLT<Matrix> llt(h);
  DualActiveSet set(llt, n);
  Vector x = llt.solve(-qp.gradient);

  // Active constraints by position: equality k is encoded as −(k + 1).
  std::vector<int> active;
  std::vector<double> u;
  Vector z;
  Vector r;
  auto normal = [&](int c) -> Vector {
    return c < 0 ? Vector(qp.a_eq.row(-c - 1).transpose()) : Vector(qp.a_ineq.row(c).transpose());
  };
  const double row_scale = [&] {
    double s = 1.0;
    if (m_in) s = std::max(s, qp.a_ineq.cwiseAbs().maxCoeff());
    if (m_eq) s = std::max(s, qp.a_eq.cwiseAbs().maxCoeff());
    return s;
  }();
  auto feas_tol = [&](double rhs) {
    return 1e-12 * (1.0 + std::abs(rhs) + row_scale * inf_norm(x));
  };

  // Equalities: constrained steps onto each hyperplane in turn.
  for (int k = 0; k < m_eq; ++k) {
    const Vector np = qp.a_eq.row(k).transpose();
    set.directions(np, z, r);
    const double residual = np.dot(x) - qp.b_eq[k];
    const double curvature = z.dot(np);
    if (z.squaredNorm() <= 1e-24 * np.squaredNorm()) {
      // Dependent on earlier equalities: consistent or infeasible.
      if (std::abs(residual) > 1e-9 * (1.0 + std::abs(qp.b_eq[k]) + row_scale * inf_norm(x))) {
        report.point = x;
        return finish(SolveStatus::kInfeasible);
      }
      continue;
    }
    const double t = -residual / curvature;
    x += t * z;
    for (std::size_t i = 0; i < u.size(); ++i) u[i] += t * r[static_cast<Eigen::Index>(i)];
    if (!set.add()) continue;
    active.push_back(-(k + 1));
    u.push_back(-t);
  }

  const int max_iter = options.max_iter > 0 ? options.max_iter : 50 * (n + m_in + m_eq) + 50;
  std::vector<bool> is_active(static_cast<std::size_t>(m_in), false);
  std::vector<bool> excluded(static_cast<std::size_t>(m_in), false);
  bool converged = false;
  bool infeasible = false;
  int iter = 0;
  int restarts = 0;
  bool polished = false;
  constexpr int kMaxRestarts = 5;
  while (iter < max_iter && !converged && !infeasible) {
    // Most violated inequality.
    int p = -1;
    double worst = 0.0;
    for (int i = 0; i < m_in; ++i) {
      if (is_active[static_cast<std::size_t>(i)] || excluded[static_cast<std::size_t>(i)]) continue;
      const double v = qp.a_ineq.row(i).dot(x) - qp.b_ineq[i];
      if (v > feas_tol(qp.b_ineq[i]) && v > worst) {
        worst = v;
        p = i;
      }
    }
    if (p < 0) {
      // Rows skipped earlier get another look once x has moved.
      bool retry = false;
      for (int i = 0; i < m_in && restarts < kMaxRestarts; ++i) {
        if (excluded[static_cast<std::size_t>(i)] &&
            qp.a_ineq.row(i).dot(x) - qp.b_ineq[i] > feas_tol(qp.b_ineq[i])) {
          retry = true;
        }
      }
      if (retry) {
        ++restarts;
        std::fill(excluded.begin(), excluded.end(), false);
        continue;
      }
      if (!polished && !active.empty()) {
        polished = true;
        Matrix normals(static_cast<Eigen::Index>(active.size()), n);
        Vector rhs(static_cast<Eigen::Index>(active.size()));
        for (std::size_t k = 0; k < active.size(); ++k) {
          const int c = active[k];
          normals.row(static_cast<Eigen::Index>(k)) = normal(c).transpose();
          rhs[static_cast<Eigen::Index>(k)] = c < 0 ? qp.b_eq[-c - 1] : qp.b_ineq[c];
        }
        Vector px = x;
        Vector pu;
        if (polish(h, qp.gradient, normals, rhs, px, pu)) {
          bool dual_ok = true;
          for (std::size_t k = 0; k < active.size(); ++k) {
            if (active[k] >= 0 && pu[static_cast<Eigen::Index>(k)] < -1e-9 * (1.0 + std::abs(u[k]))) {
              dual_ok = false;
            }
          }
          if (dual_ok) {
            x = px;
            for (std::size_t k = 0; k < active.size(); ++k) u[k] = pu[static_cast<Eigen::Index>(k)];
            continue;
          }
        }
      }
      converged = true;
      break;
    }
    const Vector np = normal(p);
    double multiplier = 0.0;
    const DualActiveSet saved_set = set;
    const Vector saved_x = x;
    const std::vector<int> saved_active = active;
    const std::vector<double> saved_u = u;
    for (;;) {
      ++iter;
      if (iter > max_iter) break;
      set.directions(np, z, r);
      // Partial step: first active inequality multiplier to reach zero.
      double t1 = std::numeric_limits<double>::infinity();
      int leave = -1;
      for (int k = 0; k < set.size(); ++k) {
        if (active[static_cast<std::size_t>(k)] < 0 || r[k] <= 0.0) continue;
        const double ratio = u[static_cast<std::size_t>(k)] / r[k];
        if (ratio < t1 || (ratio == t1 && active[static_cast<std::size_t>(k)] < active[static_cast<std::size_t>(leave)])) {
          t1 = ratio;
          leave = k;
        }
      }
      const double violation = np.dot(x) - qp.b_ineq[p];
      const double curvature = z.dot(np);
      const double t2 = z.squaredNorm() > 1e-24 * np.squaredNorm() && curvature > 0.0
                            ? violation / curvature
                            : std::numeric_limits<double>::infinity();
      const double t = std::min(t1, t2);
      if (!std::isfinite(t)) {
        if (violation <= 1e-9 * (1.0 + std::abs(qp.b_ineq[p]) + row_scale * inf_norm(x))) {
          // Roundoff at a degenerate vertex: treat p as satisfied.
          set = saved_set;
          x = saved_x;
          active = saved_active;
          u = saved_u;
          excluded[static_cast<std::size_t>(p)] = true;
          break;
        }
        infeasible = true;
        break;
      }
      if (std::isfinite(t2)) x -= t * z;
      for (int k = 0; k < set.size(); ++k) u[static_cast<std::size_t>(k)] -= t * r[k];
      multiplier += t;
      if (t == t2) {
        if (set.add()) {
          active.push_back(p);
          u.push_back(multiplier);
          std::fill(excluded.begin(), excluded.end(), false);
        } else {
          // Dependent on the active normals: undo this pass and skip p.
          set = saved_set;
          x = saved_x;
          active = saved_active;
          u = saved_u;
          excluded[static_cast<std::size_t>(p)] = true;
        }
        std::fill(is_active.begin(), is_active.end(), false);
        for (int c : active) {
          if (c >= 0) is_active[static_cast<std::size_t>(c)] = true;
        }
        break;
      }
      is_active[static_cast<std::size_t>(active[static_cast<std::size_t>(leave)])] = false;
      set.remove(leave);
      active.erase(active.begin() + leave);
      u.erase(u.begin() + leave);
    }
  }
  // A row excluded for dependence still has to hold at the end.
  if (converged) {
    for (int i = 0; i < m_in; ++i) {
      if (qp.a_ineq.row(i).dot(x) - qp.b_ineq[i] > 1e-9 * (1.0 + std::abs(qp.b_ineq[i]) + row_scale * inf_norm(x))) {
        converged = false;
        infeasible = true;
      }
    }
  }

  report.iterations = iter;
  report.point = x;
  report.objective = 0.5 * x.dot(qp.hessian * x) + qp.gradient.dot(x);
  Vector ineq = Vector::Zero(m_in);
  Vector eq = Vector::Zero(m_eq);
  for (std::size_t k = 0; k < active.size(); ++k) {
    if (active[k] < 0) {
      eq[-active[k] - 1] = u[k];
    } else {
      ineq[active[k]] = std::max(0.0, u[k]);
    }
  }
  report.multipliers.set("ineq", ineq);
  if (m_eq) eq += conv.rho * (qp.a_eq * x);
  report.multipliers.set("eq", eq);
  if (infeasible) return finish(SolveStatus::kInfeasible);
  return finish(converged ? SolveStatus::kOptimal : SolveStatus::kIterLimit);
}

}  // namespace bilevel

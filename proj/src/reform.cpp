#include "bilevel/reform.hpp"

#include <cmath>

namespace bilevel {

namespace {

// Expression replacing the y block of the bilevel problem by variables at `y_first`.
std::vector<Expr> relocate_y(const BilevelProblem& bp, int y_first) {
  std::vector<Expr> map;
  map.reserve(static_cast<std::size_t>(bp.dim()));
  for (int i = 0; i < bp.n; ++i) map.push_back(Expr::variable(i));
  for (int j = 0; j < bp.m; ++j) map.push_back(Expr::variable(y_first + j));
  return map;
}

void add_u_cap(Nlp& nlp, const ReformOptions& options, Range u) {
  const int begin = nlp.num_ineq();
  if (options.u_cap) {
    if (!(*options.u_cap > 0.0)) throw Error(ErrorCode::kInvalidArgument, "u_cap must be positive");
    for (int i = u.begin; i < u.end; ++i) nlp.ineq.push_back(Expr::variable(i) - *options.u_cap);
  }
  nlp.groups.u_cap = {begin, nlp.num_ineq()};
}

}  // namespace

Expr lower_lagrangian(const BilevelProblem& bp, int y_first, int u_first, int v_first) {
  const auto map = relocate_y(bp, y_first);
  Expr lagrangian = substitute(bp.lower_objective, map);
  for (int i = 0; i < bp.p(); ++i) {
    lagrangian += Expr::variable(u_first + i) * substitute(bp.lower_ineq[static_cast<std::size_t>(i)], map);
  }
  for (int j = 0; j < bp.q(); ++j) {
    lagrangian += Expr::variable(v_first + j) * substitute(bp.lower_eq[static_cast<std::size_t>(j)], map);
  }
  return lagrangian;
}

Nlp build_wdp(const BilevelProblem& bp, const ReformOptions& options) {
  require_valid(bp);
  const int n = bp.n;
  const int m = bp.m;
  Nlp nlp;
  nlp.kind = NlpKind::kWdp;
  nlp.layout.add("x", n);
  nlp.layout.add("y", m);
  nlp.layout.add("z", m);
  nlp.layout.add("u", bp.p());
  nlp.layout.add("v", bp.q());
  nlp.dim = nlp.layout.dim();
  const Range z = nlp.layout.at("z");
  const Range u = nlp.layout.at("u");
  const Range v = nlp.layout.at("v");

  nlp.objective = bp.upper_objective;
  const Expr lagrangian = lower_lagrangian(bp, z.begin, u.begin, v.begin);

  nlp.ineq = bp.upper_ineq;
  nlp.groups.upper = {0, nlp.num_ineq()};
  nlp.ineq.insert(nlp.ineq.end(), bp.lower_ineq.begin(), bp.lower_ineq.end());
  nlp.groups.lower_g = {nlp.groups.upper.end, nlp.num_ineq()};
  const Expr gap = bp.lower_objective - lagrangian;
  nlp.relaxable = {gap};
  nlp.ineq.push_back(gap);
  nlp.groups.gap = {nlp.groups.lower_g.end, nlp.num_ineq()};
  for (int i = u.begin; i < u.end; ++i) nlp.ineq.push_back(-Expr::variable(i));
  nlp.groups.u_nonneg = {nlp.groups.gap.end, nlp.num_ineq()};
  add_u_cap(nlp, options, u);

  nlp.eq = bp.lower_eq;
  nlp.groups.h = {0, nlp.num_eq()};
  for (int j = z.begin; j < z.end; ++j) nlp.eq.push_back(derivative(lagrangian, j));
  nlp.groups.stationarity = {nlp.groups.h.end, nlp.num_eq()};
  check_nlp(nlp);
  return nlp;
}

Nlp build_mpec(const BilevelProblem& bp, const ReformOptions& options) {
  require_valid(bp);
  const int n = bp.n;
  const int m = bp.m;
  Nlp nlp;
  nlp.kind = NlpKind::kMpec;
  nlp.componentwise = options.componentwise;
  nlp.layout.add("x", n);
  nlp.layout.add("y", m);
  nlp.layout.add("u", bp.p());
  nlp.layout.add("v", bp.q());
  nlp.dim = nlp.layout.dim();
  const Range y = nlp.layout.at("y");
  const Range u = nlp.layout.at("u");
  const Range v = nlp.layout.at("v");

  nlp.objective = bp.upper_objective;
  const Expr lagrangian = lower_lagrangian(bp, y.begin, u.begin, v.begin);

  nlp.ineq = bp.upper_ineq;
  nlp.groups.upper = {0, nlp.num_ineq()};
  nlp.ineq.insert(nlp.ineq.end(), bp.lower_ineq.begin(), bp.lower_ineq.end());
  nlp.groups.lower_g = {nlp.groups.upper.end, nlp.num_ineq()};
  for (int i = u.begin; i < u.end; ++i) nlp.ineq.push_back(-Expr::variable(i));
  nlp.groups.u_nonneg = {nlp.groups.lower_g.end, nlp.num_ineq()};
  add_u_cap(nlp, options, u);

  nlp.eq = bp.lower_eq;
  nlp.groups.h = {0, nlp.num_eq()};
  for (int j = y.begin; j < y.end; ++j) nlp.eq.push_back(derivative(lagrangian, j));
  nlp.groups.stationarity = {nlp.groups.h.end, nlp.num_eq()};

  std::vector<Expr> products;
  for (int i = 0; i < bp.p(); ++i) {
    products.push_back(Expr::variable(u.begin + i) * bp.lower_ineq[static_cast<std::size_t>(i)]);
  }
  if (options.componentwise) {
    nlp.relaxable = products;
  } else if (!products.empty()) {
    nlp.relaxable = {sum(products)};
  }
  nlp.eq.insert(nlp.eq.end(), nlp.relaxable.begin(), nlp.relaxable.end());
  nlp.groups.complementarity = {nlp.groups.stationarity.end, nlp.num_eq()};
  check_nlp(nlp);
  return nlp;
}

Nlp relax_wdp(const Nlp& wdp, double t) {
  if (wdp.kind != NlpKind::kWdp || wdp.groups.gap.size() != 1 || wdp.relaxable.size() != 1) {
    throw Error(ErrorCode::kNotAWdp, "problem has no duality-gap constraint to relax");
  }
  if (!(t >= 0.0) || !std::isfinite(t)) {
    throw Error(ErrorCode::kInvalidArgument, "relaxation parameter must be finite and >= 0");
  }
  Nlp out = wdp;
  out.ineq[static_cast<std::size_t>(wdp.groups.gap.begin)] = wdp.relaxable.front() - t;
  out.relaxation = t;
  out.relaxed = true;
  return out;
}

Nlp relax_mpec(const Nlp& mpec, double t) {
  if (mpec.kind != NlpKind::kMpec) {
    throw Error(ErrorCode::kNotAnMpec, "problem is not an MPEC reformulation");
  }
  if (!(t >= 0.0) || !std::isfinite(t)) {
    throw Error(ErrorCode::kInvalidArgument, "relaxation parameter must be finite and >= 0");
  }
  Nlp out = mpec;
  if (!mpec.relaxed) {
    out.eq.resize(static_cast<std::size_t>(mpec.groups.complementarity.begin));
    out.groups.complementarity = {out.num_eq(), out.num_eq()};
    out.groups.relaxed_comp = {out.num_ineq(), out.num_ineq() + static_cast<int>(mpec.relaxable.size())};
    out.ineq.resize(static_cast<std::size_t>(out.groups.relaxed_comp.end));
  }
  for (std::size_t k = 0; k < mpec.relaxable.size(); ++k) {
    out.ineq[static_cast<std::size_t>(out.groups.relaxed_comp.begin) + k] = -mpec.relaxable[k] - t;
  }
  out.relaxation = t;
  out.relaxed = true;
  return out;
}

Point lift_point(const Nlp& mpec, const Point& p) {
  if (mpec.kind != NlpKind::kMpec || p.size() != mpec.dim) {
    throw Error(ErrorCode::kLayoutMismatch, "point is not laid out as (x, y, u, v) of this MPEC");
  }
  const Range x = mpec.layout.at("x");
  const Range y = mpec.layout.at("y");
  const Range uv{mpec.layout.at("u").begin, mpec.dim};
  Point out(p.size() + y.size());
  out << p.segment(x.begin, x.size()), p.segment(y.begin, y.size()), p.segment(y.begin, y.size()),
      p.segment(uv.begin, uv.size());
  return out;
}

Point drop_z(const Nlp& wdp, const Point& p) {
  if (wdp.kind != NlpKind::kWdp || p.size() != wdp.dim) {
    throw Error(ErrorCode::kLayoutMismatch, "point is not laid out as (x, y, z, u, v) of this WDP");
  }
  const Range z = wdp.layout.at("z");
  Point out(p.size() - z.size());
  out << p.head(z.begin), p.tail(p.size() - z.end);
  return out;
}

}  // namespace bilevel

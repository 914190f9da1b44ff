// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits nonzero if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "bilevel/bench.hpp"
#include "bilevel/certify.hpp"
#include "bilevel/reform.hpp"
#include "bilevel/relax.hpp"
#include "support/examples.hpp"
#include "support/instances.hpp"
#include "support/random_expr.hpp"

using namespace bilevel;
using bilevel::testing::make_point;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string fmt(const char* format, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

// Random MPEC points of a generated instance: random upper-feasible x, lower
// level primal/dual from the LP solver. Skips x whose lower level is empty.
std::vector<Point> feasible_mpec_points(const LinearBilevelData& d, std::mt19937_64& rng, int count) {
  std::vector<Point> out;
  for (int attempt = 0; static_cast<int>(out.size()) < count && attempt < 50 * count; ++attempt) {
    const Vector x = bilevel::testing::random_upper_feasible_x(rng, d);
    if (!solve_lp(lower_level_lp(d, x)).optimal()) continue;
    out.push_back(bilevel::testing::mpec_point_from_lp(d, x));
  }
  return out;
}

// Generated instance with the box −10 ≤ x ≤ 10 appended to A1 x ≤ b1, so the
// upper level is bounded and the relaxation method ends at KKT points.
LinearBilevelData boxed_instance(std::uint64_t seed, LinearDims dims) {
  LinearBilevelData d = generate_instance(seed, dims, 1.0);
  const int n = dims.n;
  Matrix a(d.A1.rows() + 2 * n, n);
  a << d.A1, Matrix::Identity(n, n), -Matrix::Identity(n, n);
  Vector b(d.b1.size() + 2 * n);
  b << d.b1, Vector::Constant(2 * n, 10.0);
  d.A1 = a;
  d.b1 = b;
  return d;
}

Outcome exp_example_relax() {
  const auto start = std::chrono::steady_clock::now();
  RelaxConfig cfg;
  const RunReport r = run(bilevel::testing::exp_lower_level(), cfg, make_point({1.0}), make_point({1.0}));
  const double elapsed = seconds_since(start);
  const double dist = r.point.cwiseAbs().maxCoeff();
  const bool pass = r.point.size() == 4 && r.objective <= 1e-6 && dist <= 1e-6 && elapsed < 5.0;
  return {pass, fmt("objective %.3e, |point|inf %.3e, %.2f s", r.objective, dist, elapsed)};
}

Outcome exp_example_lagrangian() {
  // L(x, z, u) over (x, z, u).
  const Expr lag = lower_lagrangian(bilevel::testing::exp_lower_level(), 1, 2, 3);
  const double u_bar = 1.3;
  auto value = [&](double x, double z) { return eval(lag, make_point({x, z, u_bar})); };
  // Hand-written ∂L/∂z, used only to locate z₂.
  auto dz = [&](double x, double z) {
    const double s = z - x;
    return 2.0 * s * std::exp(-s * s) + 0.6 * z - 0.6 * x - u_bar;
  };
  bool pass = true;
  double worst1 = 0.0;
  double worst2 = 0.0;
  double grad_at_z2 = 0.0;
  for (double x : {0.0, 0.5, 1.0, 2.0}) {
    double lo = x + 0.5;
    double hi = x + 0.9;
    if (!(dz(x, lo) < 0.0 && dz(x, hi) > 0.0)) return {false, "bisection bracket lost"};
    while (hi - lo > 1e-10) {
      const double mid = 0.5 * (lo + hi);
      (dz(x, mid) < 0.0 ? lo : hi) = mid;
    }
    const double z2 = 0.5 * (lo + hi);
    const int wrt[] = {1};
    grad_at_z2 = std::max(grad_at_z2, std::abs(grad(lag, make_point({x, z2, u_bar}), wrt)[0]));
    // The x² terms of L(x, x + s, ū) sum to −0.3x², so L + 0.3x² is free of x.
    const double l1 = value(x, 1.75 + x) + 0.3 * x * x;
    const double l2 = value(x, z2) + 0.3 * x * x;
    worst1 = std::max(worst1, std::abs(l1 + 1.403));
    worst2 = std::max(worst2, std::abs(l2 + 1.376));
    pass = pass && l1 < l2;
  }
  pass = pass && worst1 <= 2e-3 && worst2 <= 2e-3 && grad_at_z2 <= 1e-8;
  return {pass, fmt("max |L1 + 1.403| %.2e, max |L2 + 1.376| %.2e, |dL/dz(z2)| %.1e", worst1, worst2,
                    grad_at_z2)};
}

bool has_row(const Matrix& jacobian, const std::vector<int>& rows, const Vector& expected) {
  for (int r : rows) {
    if (jacobian.row(r).transpose() == expected) return true;
  }
  return false;
}

Outcome cubic_example_mfcq() {
  const auto start = std::chrono::steady_clock::now();
  const Nlp wdp = build_wdp(bilevel::testing::cubic_lower_level());
  const Point p = make_point({8.0, 0.0, -3.0, 0.0, 1.0});
  const CertifyReport r = mfcq_check(wdp, p);
  const NlpEvaluation ev = evaluate(wdp, p);
  const std::vector<int> active = active_set(wdp, p, 1e-6);
  bool gradients = active.size() == 3 && ev.eq_jacobian.rows() == 1 &&
                   ev.eq_jacobian.row(0).transpose() == make_point({0, 0, 0, 27, -1}) &&
                   has_row(ev.ineq_jacobian, active, make_point({0, -1, 0, 0, 0})) &&
                   has_row(ev.ineq_jacobian, active, make_point({0, 1, 0, 35, -3})) &&
                   has_row(ev.ineq_jacobian, active, make_point({0, 0, 0, -1, 0}));
  const double margin = mfcq_direction_margin(wdp, p, make_point({0, 1, 0, 1, 27}));
  const double elapsed = seconds_since(start);
  const bool pass = r.holds() && gradients && margin > 0.0 && elapsed < 1.0;
  return {pass, fmt("verdict %s, gradients %s, margin of d %.3e, %.3f s", std::string(to_string(r.verdict)).c_str(),
                    gradients ? "exact" : "differ", margin, elapsed)};
}

Outcome quadratic_example_verdicts() {
  const auto start = std::chrono::steady_clock::now();
  const BilevelProblem bp = bilevel::testing::quadratic_lower_level();
  const Nlp mpec = build_mpec(bp);
  const Point p = make_point({0.0, 1.0, 0.0, 0.0});
  const CertifyReport s = s_stationarity(mpec, p);
  MultiplierSet printed;
  printed.set("upper", make_point({0.0}));
  printed.set("gamma", make_point({6.0}));
  printed.set("lambda_u", make_point({-6.0, 6.0}));
  printed.set("lambda_g", make_point({0.0, 0.0}));
  const double printed_residual = s_certificate_residual(mpec, p, printed);
  const CertifyReport k = kkt_residual(build_wdp(bp), make_point({0.0, 1.0, 1.0, 0.0, 0.0}));
  const double elapsed = seconds_since(start);
  const bool pass = s.holds() && printed_residual <= 1e-9 && k.verdict == Verdict::kFails && elapsed < 1.0;
  return {pass, fmt("S-stationarity %s, printed certificate residual %.1e, WDP KKT %s (residual %.2f), %.3f s",
                    std::string(to_string(s.verdict)).c_str(), printed_residual,
                    std::string(to_string(k.verdict)).c_str(), k.residual, elapsed)};
}

struct LiftedPoints {
  std::vector<Nlp> wdps;
  std::vector<std::pair<int, Point>> points;  // (instance, WDP point)
};

Outcome lift_preserves_feasibility(LiftedPoints& lifted) {
  std::mt19937_64 rng(4101);
  int checked = 0;
  int failed = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const LinearBilevelData d = generate_instance(seed, {6, 5, 8, 6}, 1.0);
    const BilevelProblem bp = to_expressions(d);
    const Nlp mpec = build_mpec(bp);
    lifted.wdps.push_back(build_wdp(bp));
    const Nlp& wdp = lifted.wdps.back();
    const auto points = feasible_mpec_points(d, rng, 50);
    if (points.size() != 50) return {false, fmt("only %zu feasible points for seed %llu", points.size(),
                                                static_cast<unsigned long long>(seed))};
    for (const Point& p : points) {
      ++checked;
      const bool mpec_ok = check_feasible(mpec, p).feasible(1e-10);
      const Point w = lift_point(mpec, p);
      const bool wdp_ok = check_feasible(wdp, w).feasible(1e-10);
      const Point back = drop_z(wdp, w);
      const bool back_ok = back == p && check_feasible(mpec, back).feasible(1e-10);
      if (!(mpec_ok && wdp_ok && back_ok)) ++failed;
      lifted.points.emplace_back(static_cast<int>(seed), w);
    }
  }
  return {failed == 0 && checked == 1000, fmt("%d of %d points feasible in both forms", checked - failed, checked)};
}

Outcome lifted_points_abnormal(const LiftedPoints& lifted) {
  int agree = 0;
  for (const auto& [instance, w] : lifted.points) {
    const Nlp& wdp = lifted.wdps[static_cast<std::size_t>(instance)];
    if (abnormal_multiplier(wdp, w).holds() && mfcq_check(wdp, w).verdict == Verdict::kFails) ++agree;
  }
  const int total = static_cast<int>(lifted.points.size());
  return {total > 0 && agree == total, fmt("%d of %d points with abnormal multiplier and MFCQ failing", agree, total)};
}

Outcome weak_duality() {
  std::mt19937_64 rng(2101);
  std::exponential_distribution<double> pos(1.0);
  std::normal_distribution<double> normal(0.0, 3.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  int checked = 0;
  int failed = 0;
  double worst = std::numeric_limits<double>::infinity();
  double closest = std::numeric_limits<double>::infinity();
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const LinearBilevelData d = generate_instance(100 + seed, {4, 3, 6, 5}, 1.0);
    const BilevelProblem bp = to_expressions(d);
    const auto [n, p, m, q] = d.dims();
    int sampled = 0;
    while (sampled < 100) {
      const Vector x = bilevel::testing::random_upper_feasible_x(rng, d);
      LinearProgram lp = lower_level_lp(d, x);
      if (!solve_lp(lp).optimal()) continue;
      // y: convex combination of two vertices of Y(x) picked by random costs.
      Vector vertices[2];
      for (Vector& v : vertices) {
        lp.cost = Vector::NullaryExpr(m, [&] { return normal(rng); });
        v = solve_lp(lp).point;
      }
      const double w = unit(rng);
      Vector y = w * vertices[0] + (1.0 - w) * vertices[1];
      // (z, u): z is free since L is affine in z; u solves d2 + B2ᵀu1 + u2 − u3 = 0, u ≥ 0.
      const Vector z = Vector::NullaryExpr(m, [&] { return normal(rng); });
      const Vector u1 = Vector::NullaryExpr(q, [&] { return pos(rng); });
      const Vector rest = -d.d2 - d.B2.transpose() * u1;
      const Vector slack = Vector::NullaryExpr(m, [&] { return pos(rng); });
      Vector u(q + 2 * m);
      u << u1, rest.cwiseMax(0.0) + slack, (-rest).cwiseMax(0.0) + slack;
      // Every fourth sample takes the optimal primal/dual pair, where the gap closes.
      if (sampled % 4 == 0) {
        const Point opt = bilevel::testing::mpec_point_from_lp(d, x);
        y = opt.segment(n, m);
        u = opt.tail(q + 2 * m);
      }
      const double gap = duality_gap(bp, x, y, z, u, Vector::Zero(0));
      closest = std::min(closest, std::abs(gap));
      worst = std::min(worst, gap);
      if (gap < -1e-8) ++failed;
      ++checked;
      ++sampled;
    }
  }
  return {failed == 0 && checked == 1000,
          fmt("%d of %d gaps >= -1e-8, smallest %.3e, closest to zero %.1e", checked - failed, checked, worst,
              closest)};
}

Outcome kkt_to_s_mapping() {
  int certificates = 0;
  int passed = 0;
  int off_diagonal = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const LinearBilevelData d = boxed_instance(seed, {3, 2, 4, 3});
    const BilevelProblem bp = to_expressions(d);
    const Nlp wdp = build_wdp(bp);
    const Nlp mpec = build_mpec(bp);
    const RunReport r = run(d, RelaxConfig{});
    CertifyReport k;
    try {
      k = kkt_residual(wdp, r.point, 1e-6);
    } catch (const Error&) {
      continue;
    }
    if (!k.holds()) continue;
    const Vector y = r.point.segment(wdp.layout.at("y").begin, d.dims().m);
    const Vector z = r.point.segment(wdp.layout.at("z").begin, d.dims().m);
    if (y != z) {
      ++off_diagonal;
      continue;
    }
    ++certificates;
    const MultiplierSet s = wdp_kkt_to_s(wdp, r.point, k.multipliers);
    const Point p = drop_z(wdp, r.point);
    if (s_certificate_residual(mpec, p, s) <= 1e-9 && s_stationarity(mpec, p).holds()) ++passed;
  }
  return {certificates >= 10 && passed == certificates,
          fmt("%d of %d mapped certificates S-stationary (%d KKT points off the diagonal skipped)", passed,
              certificates, off_diagonal)};
}

Outcome derivatives() {
  std::mt19937_64 rng(909);
  const int dim = 4;
  const auto wrt = bilevel::testing::iota_indices(dim);
  double worst_grad = 0.0;
  double worst_hess = 0.0;
  for (int tree = 0; tree < 100; ++tree) {
    const Expr e = bilevel::testing::random_expr(rng, dim, 2 + tree % 5);
    const Point p = bilevel::testing::random_point(rng, dim);
    const Vector g = grad(e, p, wrt);
    const Vector fd = bilevel::testing::fd_gradient(e, p);
    const Matrix h = hess(e, p, wrt);
    const Matrix fdh = bilevel::testing::fd_hessian(e, p, wrt);
    for (int i = 0; i < dim; ++i) {
      worst_grad = std::max(worst_grad, bilevel::testing::relative_error(g[i], fd[i]));
      for (int j = 0; j < dim; ++j) {
        worst_hess = std::max(worst_hess, bilevel::testing::relative_error(h(i, j), fdh(i, j)));
      }
    }
  }
  return {worst_grad <= 1e-6 && worst_hess <= 1e-5,
          fmt("100 trees, max gradient error %.2e, max Hessian error %.2e", worst_grad, worst_hess)};
}

Outcome desk_benchmark() {
  std::vector<std::uint64_t> seeds;
  for (std::uint64_t s = 0; s < 10; ++s) seeds.push_back(s);
  const std::vector<BenchMethod> methods{BenchMethod::kMpecDirect, BenchMethod::kWdpDirect,
                                         BenchMethod::kMpecRelax, BenchMethod::kWdpRelax};
  SuiteOptions options;
  options.dims = {10, 8, 12, 10};
  options.threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  const auto rows = run_suite(seeds, methods, RelaxConfig{}, options);

  int good = 0;
  double slowest = 0.0;
  for (const BenchRow& r : rows) {
    if (r.method != BenchMethod::kWdpRelax) continue;
    slowest = std::max(slowest, r.time_s);
    if (r.infeasibility <= 1e-6 && r.time_s < 60.0) ++good;
  }

  const auto path = std::filesystem::temp_directory_path() / "bilevel_acceptance_report.csv";
  write_report(rows, path.string());
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  const bool header = line == "problem,method,objective,infeasibility,time_s,status";
  int per_method[4] = {0, 0, 0, 0};
  int lines = 0;
  while (std::getline(in, line)) {
    std::stringstream cells(line);
    std::string problem;
    std::string method;
    std::getline(cells, problem, ',');
    std::getline(cells, method, ',');
    ++per_method[static_cast<int>(parse_method(method))];
    ++lines;
  }
  std::filesystem::remove(path);
  bool all_methods = lines == 40;
  for (int c : per_method) all_methods = all_methods && c == 10;
  return {good >= 8 && header && all_methods,
          fmt("WDP-relax within 1e-6 on %d of 10 seeds, slowest %.1f s, CSV rows %d", good, slowest, lines)};
}

}  // namespace

int main() {
  LiftedPoints lifted;
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"exponential example: WDP relaxation reaches the origin", exp_example_relax},
      {"exponential example: Lagrangian values at z1 and z2", exp_example_lagrangian},
      {"cubic example: MFCQ, active gradients and direction", cubic_example_mfcq},
      {"quadratic example: S-stationary MPEC point, non-KKT WDP point", quadratic_example_verdicts},
      {"lifting keeps MPEC and WDP feasibility", [&] { return lift_preserves_feasibility(lifted); }},
      {"lifted points: abnormal multiplier holds, MFCQ fails", [&] { return lifted_points_abnormal(lifted); }},
      {"weak duality on linear lower levels", weak_duality},
      {"WDP-KKT certificates map to S-stationarity", kkt_to_s_mapping},
      {"gradients and Hessians match finite differences", derivatives},
      {"desk-scale benchmark", desk_benchmark},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("%s %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}

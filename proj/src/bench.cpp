#include "bilevel/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <thread>

#include "bilevel/reform.hpp"

namespace bilevel {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string lower_case(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string problem_id(std::uint64_t seed, LinearDims dims) {
  return "s" + std::to_string(seed) + "_" + std::to_string(dims.n) + "x" + std::to_string(dims.p) +
         "x" + std::to_string(dims.m) + "x" + std::to_string(dims.q);
}

BenchRow run_row(const LinearBilevelData& d, const std::string& id, BenchMethod method,
                 const RelaxConfig& cfg, const SuiteOptions& options) {
  BenchRow row;
  row.problem = id;
  row.method = method;
  const auto dims = d.dims();
  const auto started = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  };
  try {
    if (method == BenchMethod::kMpecRelax || method == BenchMethod::kWdpRelax) {
      RelaxConfig c = cfg;
      c.mode = method == BenchMethod::kWdpRelax ? RelaxMode::kWdp : RelaxMode::kMpec;
      c.verbose = false;
      const RunReport r = run(d, c);
      row.time_s = elapsed();
      row.objective = r.objective;
      row.status = std::string(to_string(r.exit));
      row.infeasibility = infeasibility(d, r.x, r.y);
    } else {
      const BilevelProblem bp = to_expressions(d);
      const Nlp nlp = method == BenchMethod::kWdpDirect ? build_wdp(bp) : build_mpec(bp);
      const SolveReport r =
          solve_nlp(nlp, Point::Zero(nlp.dim), options.direct_tol, options.direct_max_iter);
      row.time_s = elapsed();
      const Vector x = r.point.head(dims.n);
      const Vector y = r.point.segment(dims.n, dims.m);
      row.objective = d.c1.dot(x) + d.c2.dot(y);
      row.status = std::string(to_string(r.status));
      row.infeasibility = infeasibility(d, x, y);
    }
  } catch (const Error& e) {
    if (row.time_s == 0.0) row.time_s = elapsed();
    row.status = std::string(to_string(e.code()));
    if (row.objective == 0.0) row.objective = kNaN;
    row.infeasibility = kNaN;
  }
  return row;
}

}  // namespace

std::string_view to_string(BenchMethod method) {
  switch (method) {
    case BenchMethod::kMpecDirect:
      return "MPEC-direct";
    case BenchMethod::kWdpDirect:
      return "WDP-direct";
    case BenchMethod::kMpecRelax:
      return "MPEC-relax";
    case BenchMethod::kWdpRelax:
      return "WDP-relax";
  }
  return "WDP-relax";
}

BenchMethod parse_method(std::string_view name) {
  const std::string key = lower_case(name);
  for (BenchMethod m : {BenchMethod::kMpecDirect, BenchMethod::kWdpDirect, BenchMethod::kMpecRelax,
                        BenchMethod::kWdpRelax}) {
    if (lower_case(to_string(m)) == key) return m;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown method '" + std::string(name) + "'");
}

double infeasibility(const LinearBilevelData& d, const Vector& x, const Vector& y) {
  const auto dims = d.dims();
  if (x.size() != dims.n || y.size() != dims.m) {
    throw Error(ErrorCode::kDimensionMismatch, "x / y do not match the instance");
  }
  if (!x.allFinite() || !y.allFinite()) throw Error(ErrorCode::kNonFiniteValue, "non-finite x or y");
  const SolveReport lower = solve_lp(lower_level_lp(d, x));
  if (!lower.optimal()) {
    throw Error(ErrorCode::kLowerLevelInfeasible,
                "lower-level LP ended " + std::string(to_string(lower.status)));
  }
  return (d.A1 * x - d.b1).cwiseMax(0.0).norm() + (d.A2 * x + d.B2 * y - d.b2).cwiseMax(0.0).norm() +
         (y - d.ub).cwiseMax(0.0).norm() + (d.lb - y).cwiseMax(0.0).norm() +
         std::abs(d.d2.dot(y) - lower.objective);
}

std::vector<BenchRow> run_suite(const std::vector<std::uint64_t>& seeds,
                                const std::vector<BenchMethod>& methods, const RelaxConfig& cfg,
                                const SuiteOptions& options) {
  validate(cfg);
  const std::size_t total = seeds.size() * methods.size();
  std::vector<BenchRow> rows(total);
  std::vector<LinearBilevelData> instances(seeds.size());
  std::vector<std::string> generation_error(seeds.size());
  for (std::size_t s = 0; s < seeds.size(); ++s) {
    try {
      instances[s] = generate_instance(seeds[s], options.dims, options.density);
    } catch (const Error& e) {
      generation_error[s] = std::string(to_string(e.code()));
    }
  }

  auto work = [&](std::size_t task) {
    const std::size_t s = task / methods.size();
    const BenchMethod method = methods[task % methods.size()];
    const std::string id = problem_id(seeds[s], options.dims);
    if (!generation_error[s].empty()) {
      rows[task] = {id, method, kNaN, kNaN, 0.0, generation_error[s]};
      return;
    }
    rows[task] = run_row(instances[s], id, method, cfg, options);
  };

  const int threads = std::max(1, std::min<int>(options.threads, static_cast<int>(total)));
  if (threads == 1) {
    for (std::size_t task = 0; task < total; ++task) work(task);
    return rows;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  for (int w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      for (std::size_t task = next++; task < total; task = next++) work(task);
    });
  }
  pool.clear();
  return rows;
}

std::string format_report(const std::vector<BenchRow>& rows) {
  std::string out = "problem,method,objective,infeasibility,time_s,status\n";
  char buf[64];
  auto number = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.4e", v);
    return std::string(buf);
  };
  for (const BenchRow& r : rows) {
    out += r.problem + "," + std::string(to_string(r.method)) + "," + number(r.objective) + "," +
           number(r.infeasibility) + "," + number(r.time_s) + "," + r.status + "\n";
  }
  return out;
}

void write_report(const std::vector<BenchRow>& rows, const std::string& path) {
  std::ofstream file(path);
  if (!file) throw Error(ErrorCode::kIoError, "cannot open '" + path + "' for writing");
  file << format_report(rows);
  file.close();
  if (!file) throw Error(ErrorCode::kIoError, "failed writing '" + path + "'");
}

}  // namespace bilevel

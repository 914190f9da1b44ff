// Command-line front end: generate, reform dump, solve, certify, relax, bench.

#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bilevel/bench.hpp"
#include "bilevel/certify.hpp"
#include "bilevel/io.hpp"
#include "bilevel/reform.hpp"
#include "bilevel/relax.hpp"

using namespace bilevel;

namespace {

constexpr int kUsage = 1;
constexpr int kFailure = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, sep)) out.push_back(cell);
  return out;
}

Vector parse_numbers(const std::string& text, const char* what) {
  if (text.empty()) return Vector(0);
  const auto cells = split(text, ',');
  Vector v(static_cast<Eigen::Index>(cells.size()));
  for (std::size_t i = 0; i < cells.size(); ++i) {
    try {
      std::size_t used = 0;
      v[static_cast<Eigen::Index>(i)] = std::stod(cells[i], &used);
      if (used != cells[i].size()) throw std::invalid_argument(cells[i]);
    } catch (const std::exception&) {
      throw UsageError(std::string("bad number in ") + what + ": '" + cells[i] + "'");
    }
  }
  return v;
}

LinearDims parse_dims(const std::string& text) {
  const Vector v = parse_numbers(text, "--dims");
  if (v.size() != 4 || (v.array() < 0).any() || (v.array() != v.array().floor()).any()) {
    throw UsageError("--dims needs four nonnegative integers n,p,m,q");
  }
  return {static_cast<int>(v[0]), static_cast<int>(v[1]), static_cast<int>(v[2]),
          static_cast<int>(v[3])};
}

// "0..9" or "1,4,7".
std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> out;
  try {
    if (const auto dots = text.find(".."); dots != std::string::npos) {
      const auto first = std::stoull(text.substr(0, dots));
      const auto last = std::stoull(text.substr(dots + 2));
      if (last < first) throw UsageError("--seeds range is empty");
      for (auto s = first; s <= last; ++s) out.push_back(s);
    } else {
      for (const auto& cell : split(text, ',')) out.push_back(std::stoull(cell));
    }
  } catch (const UsageError&) {
    throw;
  } catch (const std::exception&) {
    throw UsageError("bad --seeds '" + text + "'");
  }
  if (out.empty()) throw UsageError("--seeds is empty");
  return out;
}

std::string format_vector(const Vector& v) {
  std::string out = "[";
  char buf[32];
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    // Adding 0.0 turns -0 into 0.
    std::snprintf(buf, sizeof buf, "%.10g", v[i] + 0.0);
    out += (i ? ", " : "") + std::string(buf);
  }
  return out + "]";
}

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4e", v);
  return buf;
}

void emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << text;
  } else {
    write_text(out_path, text);
  }
}

Nlp build_form(const BilevelProblem& bp, const std::string& form, const std::optional<double>& u_cap,
               bool componentwise) {
  ReformOptions options;
  options.u_cap = u_cap;
  options.componentwise = componentwise;
  if (form == "wdp") return build_wdp(bp, options);
  return build_mpec(bp, options);
}

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::kParseError:
    case ErrorCode::kIoError:
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kDimensionMismatch:
    case ErrorCode::kLayoutMismatch:
    case ErrorCode::kIndexOutOfRange:
    case ErrorCode::kUpperConstraintUsesY:
      return kUsage;
    default:
      return kFailure;
  }
}

// Input source shared by relax: a problem file or a generator spec.
struct Source {
  std::string path;
  std::optional<std::uint64_t> seed;
  std::string dims = "10,8,12,10";
  double density = 1.0;

  ProblemFile load() const {
    if (!path.empty() && seed) throw UsageError("give either a problem file or --seed, not both");
    if (path.empty() && !seed) throw UsageError("a problem file or --seed is required");
    if (seed) {
      ProblemFile f;
      f.kind = ProblemKind::kGenerated;
      f.linear = generate_instance(*seed, parse_dims(dims), density);
      f.problem = to_expressions(*f.linear);
      return f;
    }
    return load_problem(path);
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bilevel programs through single-level reformulations"};
  app.require_subcommand(1);
  std::string format = "text";
  app.add_option("--format", format, "Output format")
      ->check(CLI::IsMember({"text", "csv"}))
      ->capture_default_str();
  std::function<int()> action;

  // generate
  auto* gen = app.add_subcommand("generate", "Write a random linear instance");
  std::uint64_t gen_seed = 0;
  std::string gen_dims = "10,8,12,10";
  double gen_density = 1.0;
  std::string gen_out;
  bool gen_spec = false;
  gen->add_option("--seed", gen_seed, "Generator seed")->required();
  gen->add_option("--dims", gen_dims, "n,p,m,q")->capture_default_str();
  gen->add_option("--density", gen_density, "Matrix density in (0, 1]")->capture_default_str();
  gen->add_option("--out", gen_out, "Output file (default stdout)");
  gen->add_flag("--spec", gen_spec, "Write the generator spec instead of the matrices");
  gen->callback([&] {
    action = [&] {
      const LinearDims dims = parse_dims(gen_dims);
      const std::string text = gen_spec ? serialize_generated(gen_seed, dims, gen_density)
                                        : serialize_linear(generate_instance(gen_seed, dims, gen_density));
      emit(text, gen_out);
      return 0;
    };
  });

  // reform dump
  auto* reform = app.add_subcommand("reform", "Build a reformulation");
  reform->require_subcommand(1);
  auto* dump = reform->add_subcommand("dump", "Print the reformulation in expression text form");
  std::string dump_form = "wdp";
  std::string dump_path;
  std::optional<double> dump_t;
  std::optional<double> dump_cap;
  bool dump_componentwise = false;
  dump->add_option("--form", dump_form, "wdp or mpec")
      ->check(CLI::IsMember({"wdp", "mpec"}))
      ->capture_default_str();
  dump->add_option("--relax", dump_t, "Relaxation parameter t > 0");
  dump->add_option("--u-cap", dump_cap, "Upper bound on u");
  dump->add_flag("--componentwise", dump_componentwise, "MPEC: u_i g_i = 0 rows");
  dump->add_option("problem", dump_path, "Problem file")->required();
  dump->callback([&] {
    action = [&] {
      Nlp nlp = build_form(load_problem(dump_path).problem, dump_form, dump_cap, dump_componentwise);
      if (dump_t) nlp = dump_form == "wdp" ? relax_wdp(nlp, *dump_t) : relax_mpec(nlp, *dump_t);
      std::cout << dump_nlp(nlp);
      return 0;
    };
  });

  // solve
  auto* solve = app.add_subcommand("solve", "Solve a reformulation with SQP");
  std::string solve_form = "wdp";
  std::string solve_path;
  std::string solve_start;
  std::optional<double> solve_cap;
  NlpOptions solve_options;
  solve->add_option("--form", solve_form, "wdp or mpec")
      ->check(CLI::IsMember({"wdp", "mpec"}))
      ->capture_default_str();
  solve->add_option("--tol", solve_options.tol, "Optimality tolerance")->capture_default_str();
  solve->add_option("--max-iter", solve_options.max_iter, "SQP iteration cap")->capture_default_str();
  solve->add_option("--start", solve_start, "Point file with the start (default origin)");
  solve->add_option("--u-cap", solve_cap, "Upper bound on u");
  solve->add_flag("--verbose", solve_options.verbose, "Per-iteration log on stderr");
  solve->add_option("problem", solve_path, "Problem file")->required();
  solve->callback([&] {
    action = [&] {
      const Nlp nlp = build_form(load_problem(solve_path).problem, solve_form, solve_cap, false);
      Point start = Point::Zero(nlp.dim);
      if (!solve_start.empty()) {
        const PointFile p = load_point(solve_start);
        if (p.layout != solve_form) throw UsageError("start point layout is '" + p.layout + "'");
        start = p.values;
      }
      const SolveReport r = solve_nlp(nlp, start, solve_options);
      if (format == "csv") {
        std::cout << "status,objective,iterations,time_s\n"
                  << to_string(r.status) << "," << sci(r.objective) << "," << r.iterations << ","
                  << sci(r.wall_time) << "\n";
      } else {
        std::cout << "status: " << to_string(r.status) << "\n"
                  << "objective: " << sci(r.objective) << "\n"
                  << "iterations: " << r.iterations << "\n"
                  << "point: " << format_vector(r.point) << "\n";
      }
      return r.optimal() ? 0 : kFailure;
    };
  });

  // certify
  auto* certify = app.add_subcommand("certify", "Check a point against a stationarity notion or CQ");
  std::string check = "kkt";
  std::string cert_problem;
  std::string cert_point;
  double cert_tol = 1e-6;
  std::optional<double> cert_cap;
  certify->add_option("--check", check, "kkt, mfcq, s-stationarity or abnormal")
      ->check(CLI::IsMember({"kkt", "mfcq", "s-stationarity", "abnormal"}))
      ->capture_default_str();
  certify->add_option("--tol", cert_tol, "Activity and residual tolerance")->capture_default_str();
  certify->add_option("--u-cap", cert_cap, "Upper bound on u");
  certify->add_option("problem", cert_problem, "Problem file")->required();
  certify->add_option("point", cert_point, "Point file (layout wdp or mpec)")->required();
  certify->callback([&] {
    action = [&] {
      const BilevelProblem bp = load_problem(cert_problem).problem;
      const PointFile p = load_point(cert_point);
      if (p.layout == "xy") throw UsageError("certify needs a point on the wdp or mpec layout");
      const bool componentwise = check == "s-stationarity";
      const Nlp nlp = build_form(bp, p.layout, cert_cap, componentwise);
      CertifyReport r;
      if (check == "kkt") {
        r = kkt_residual(nlp, p.values, cert_tol);
      } else if (check == "mfcq") {
        r = mfcq_check(nlp, p.values, cert_tol);
      } else if (check == "s-stationarity") {
        r = s_stationarity(nlp, p.values, cert_tol);
      } else {
        r = abnormal_multiplier(nlp, p.values);
      }
      if (format == "csv") {
        std::cout << "check,verdict,residual\n"
                  << check << "," << to_string(r.verdict) << "," << sci(r.residual) << "\n";
        return 0;
      }
      std::cout << "check: " << check << "\n"
                << "form: " << p.layout << "\n"
                << "verdict: " << to_string(r.verdict) << "\n"
                << "residual: " << sci(r.residual) << "\n";
      std::cout << "active:";
      for (int i : r.active_ineq) std::cout << " " << i;
      std::cout << "\n";
      if (r.direction.size()) std::cout << "direction: " << format_vector(r.direction) << "\n";
      for (const auto& [name, values] : r.multipliers.blocks()) {
        if (name == "ineq" || name == "eq" || values.size() == 0) continue;
        std::cout << "multiplier " << name << ": " << format_vector(values) << "\n";
      }
      if (!r.note.empty()) std::cout << "note: " << r.note << "\n";
      return 0;
    };
  });

  // relax
  auto* relax = app.add_subcommand("relax", "Run the relaxation method");
  Source relax_source;
  RelaxConfig cfg;
  std::string mode = "wdp";
  std::string relax_x0;
  std::string relax_y0;
  bool relax_trace = false;
  relax->add_option("--mode", mode, "wdp or mpec")->check(CLI::IsMember({"wdp", "mpec"}))->capture_default_str();
  relax->add_option("--seed", relax_source.seed, "Generate the instance from this seed");
  relax->add_option("--dims", relax_source.dims, "n,p,m,q for --seed")->capture_default_str();
  relax->add_option("--density", relax_source.density, "Density for --seed")->capture_default_str();
  relax->add_option("--t0", cfg.t0, "Initial relaxation")->capture_default_str();
  relax->add_option("--sigma", cfg.sigma, "Shrink factor")->capture_default_str();
  relax->add_option("--eps-p", cfg.eps_p, "Termination tolerance")->capture_default_str();
  relax->add_option("--eps-r", cfg.eps_r, "Step 2 solver tolerance")->capture_default_str();
  relax->add_option("--delta-min", cfg.delta_min, "Smallest relaxation")->capture_default_str();
  relax->add_option("--max-outer", cfg.max_outer, "Outer iteration cap")->capture_default_str();
  relax->add_option("--max-inner", cfg.max_inner, "SQP iterations per Step 2")->capture_default_str();
  relax->add_option("--u-cap", cfg.u_cap, "Upper bound on u");
  relax->add_option("--x0", relax_x0, "Start x, comma separated (default origin)");
  relax->add_option("--y0", relax_y0, "Lower-level start for expression problems (default origin)");
  relax->add_flag("--literal-step3", cfg.literal_step3, "Keep x fixed in Step 3");
  relax->add_flag("--verbose", cfg.verbose, "Per-iteration log on stderr");
  relax->add_flag("--trace", relax_trace, "Print the outer trace as CSV");
  relax->add_option("problem", relax_source.path, "Problem file");
  relax->callback([&] {
    action = [&] {
      cfg.mode = mode == "wdp" ? RelaxMode::kWdp : RelaxMode::kMpec;
      const ProblemFile f = relax_source.load();
      const Vector x0 = parse_numbers(relax_x0, "--x0");
      const Vector y0 = parse_numbers(relax_y0, "--y0");
      RunReport r;
      if (f.linear) {
        r = run(*f.linear, cfg, x0.size() ? std::optional<Vector>(x0) : std::nullopt);
      } else {
        r = run(f.problem, cfg, x0.size() ? x0 : Vector(Vector::Zero(f.problem.n)),
                y0.size() ? y0 : Vector(Vector::Zero(f.problem.m)));
      }
      if (format == "csv") {
        std::cout << "mode,objective,infeasibility,outer_iterations,exit,time_s\n"
                  << to_string(cfg.mode) << "," << sci(r.objective) << "," << sci(r.infeasibility)
                  << "," << r.outer_iterations << "," << to_string(r.exit) << "," << sci(r.wall_time)
                  << "\n";
      } else {
        std::cout << "mode: " << to_string(cfg.mode) << "\n"
                  << "exit: " << to_string(r.exit) << "\n"
                  << "outer_iterations: " << r.outer_iterations << "\n"
                  << "objective: " << sci(r.objective) << "\n"
                  << "infeasibility: " << sci(r.infeasibility) << "\n"
                  << "time_s: " << sci(r.wall_time) << "\n"
                  << "x: " << format_vector(r.x) << "\n"
                  << "y: " << format_vector(r.y) << "\n";
      }
      if (relax_trace) {
        std::cout << "k,t,objective,kkt_residual,step1_residual,status,inner_iterations\n";
        for (const auto& row : r.trace) {
          std::cout << row.k << "," << sci(row.t) << "," << sci(row.objective) << ","
                    << sci(row.kkt_residual) << "," << sci(row.step1_residual) << ","
                    << (row.inner_iterations ? std::string(to_string(row.status)) : "-") << ","
                    << row.inner_iterations << "\n";
        }
      }
      return 0;
    };
  });

  // bench
  auto* bench = app.add_subcommand("bench", "Run the benchmark suite");
  int group = 1;
  std::string seeds = "0..9";
  std::string methods = "wdp-relax,mpec-relax,wdp-direct,mpec-direct";
  std::string bench_out;
  SuiteOptions suite;
  RelaxConfig bench_cfg;
  bench->add_option("--group", group, "1: dims 10,8,12,10; 2: dims 10,8,20,16")
      ->check(CLI::IsMember({1, 2}))
      ->capture_default_str();
  bench->add_option("--seeds", seeds, "Range a..b or list")->capture_default_str();
  bench->add_option("--methods", methods, "Comma separated methods")->capture_default_str();
  bench->add_option("--out", bench_out, "CSV output (default stdout)");
  bench->add_option("--threads", suite.threads, "Worker threads")->capture_default_str();
  bench->add_option("--density", suite.density, "Matrix density")->capture_default_str();
  bench->add_option("--max-outer", bench_cfg.max_outer, "Relaxation outer iterations")->capture_default_str();
  bench->add_option("--u-cap", bench_cfg.u_cap, "Upper bound on u");
  bench->callback([&] {
    action = [&] {
      suite.dims = group == 1 ? LinearDims{10, 8, 12, 10} : LinearDims{10, 8, 20, 16};
      std::vector<BenchMethod> list;
      for (const auto& name : split(methods, ',')) {
        try {
          list.push_back(parse_method(name));
        } catch (const Error&) {
          throw UsageError("unknown method '" + name + "'");
        }
      }
      const auto rows = run_suite(parse_seeds(seeds), list, bench_cfg, suite);
      if (bench_out.empty()) {
        std::cout << format_report(rows);
      } else {
        write_report(rows, bench_out);
      }
      return 0;
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return kUsage;
  }

  try {
    return action();
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
}

#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "bilevel/model.hpp"
#include "bilevel/relax.hpp"

namespace bilevel {

enum class BenchMethod { kMpecDirect, kWdpDirect, kMpecRelax, kWdpRelax };

/// "MPEC-direct", "WDP-direct", "MPEC-relax", "WDP-relax".
std::string_view to_string(BenchMethod method);

/// Accepts the display names and the CLI spellings (mpec-direct, wdp-relax, ...).
BenchMethod parse_method(std::string_view name);

struct BenchRow {
  std::string problem;
  BenchMethod method = BenchMethod::kWdpRelax;
  double objective = 0.0;
  double infeasibility = 0.0;
  double time_s = 0.0;
  std::string status;
};

/**
 * ‖max(0, A1x − b1)‖ + ‖max(0, A2x + B2y − b2)‖ + ‖max(0, y − ub)‖
 *   + ‖max(0, lb − y)‖ + |d2ᵀy − h*(x)|
 * with Euclidean norms and h*(x) the lower-level optimal value from a fresh LP
 * solve. Throws kLowerLevelInfeasible.
 */
double infeasibility(const LinearBilevelData& d, const Vector& x, const Vector& y);

struct SuiteOptions {
  LinearDims dims{10, 8, 12, 10};
  double density = 1.0;
  /// Worker threads; 1 runs rows in order on the calling thread.
  int threads = 1;
  /// Tolerance and iteration cap of the direct methods.
  double direct_tol = 1e-8;
  int direct_max_iter = 500;
};

/// One row per (seed, method), seed-major. Failures land in `status`.
std::vector<BenchRow> run_suite(const std::vector<std::uint64_t>& seeds,
                                const std::vector<BenchMethod>& methods, const RelaxConfig& cfg,
                                const SuiteOptions& options = {});

/// Header `problem,method,objective,infeasibility,time_s,status`; numbers as "%.4e".
std::string format_report(const std::vector<BenchRow>& rows);

/// Writes format_report to `path`. Throws kIoError.
void write_report(const std::vector<BenchRow>& rows, const std::string& path);

}  // namespace bilevel

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "bilevel/bench.hpp"
#include "support/lp_oracle.hpp"

using namespace bilevel;

namespace {

// y ∈ [0, 1]², d2 = (1, 1), one slack coupling row that never binds.
LinearBilevelData box_follower() {
  LinearBilevelData d;
  d.A1 = Matrix::Ones(1, 1);
  d.b1 = Vector::Ones(1);
  d.c1 = Vector::Ones(1);
  d.c2 = Vector::Ones(2);
  d.d2 = Vector::Ones(2);
  d.A2 = Matrix::Zero(1, 1);
  d.B2 = Matrix::Zero(1, 2);
  d.b2 = Vector::Ones(1);
  d.lb = Vector::Zero(2);
  d.ub = Vector::Ones(2);
  return d;
}

// Straight-line evaluation of the metric with h* from vertex enumeration.
double infeasibility_oracle(const LinearBilevelData& d, const Vector& x, const Vector& y) {
  auto positive_norm = [](const Vector& v) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      if (v[i] > 0.0) s += v[i] * v[i];
    }
    return std::sqrt(s);
  };
  const auto h = bilevel::testing::vertex_enumeration(lower_level_lp(d, x));
  REQUIRE(h.has_value());
  double lower_value = 0.0;
  for (Eigen::Index j = 0; j < y.size(); ++j) lower_value += d.d2[j] * y[j];
  return positive_norm(d.A1 * x - d.b1) + positive_norm(d.A2 * x + d.B2 * y - d.b2) +
         positive_norm(y - d.ub) + positive_norm(d.lb - y) + std::abs(lower_value - *h);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

}  // namespace

TEST_CASE("infeasibility is zero at a lower-level solution") {
  const LinearBilevelData d = generate_instance(5, {4, 3, 5, 4}, 1.0);
  const Vector x = Vector::Zero(4);
  const SolveReport lower = solve_lp(lower_level_lp(d, x));
  REQUIRE(lower.optimal());
  CHECK(infeasibility(d, x, lower.point) <= 1e-12);
}

TEST_CASE("infeasibility term isolation") {
  const LinearBilevelData d = box_follower();
  const Vector x = Vector::Zero(1);
  Vector y(2);
  y << 1.5, 0.0;
  // 0.5 above u_b, plus |d2ᵀy − h*| = |1.5 − 0|.
  CHECK(infeasibility(d, x, y) == doctest::Approx(0.5 + 1.5).epsilon(1e-14));
  y << -0.25, 0.0;
  CHECK(infeasibility(d, x, y) == doctest::Approx(0.25 + 0.25).epsilon(1e-14));
  y << 0.0, 0.0;
  CHECK(infeasibility(d, Vector::Constant(1, 3.0), y) == doctest::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("infeasibility matches a re-implementation") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> noise(0.0, 0.3);
  int checked = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const LinearBilevelData d = generate_instance(seed, {2, 2, 3, 2}, 1.0);
    for (int k = 0; k < 10; ++k) {
      const Vector x = Vector::Zero(2).unaryExpr([&](double) { return std::abs(noise(rng)) * 0.1; });
      if ((d.A1 * x - d.b1).maxCoeff() > 0.0) continue;
      if (!solve_lp(lower_level_lp(d, x)).optimal()) continue;
      const Vector y = Vector::Zero(3).unaryExpr([&](double) { return noise(rng); });
      const double expected = infeasibility_oracle(d, x, y);
      CHECK(infeasibility(d, x, y) == doctest::Approx(expected).epsilon(1e-12).scale(1.0));
      ++checked;
    }
  }
  CHECK(checked >= 50);
}

TEST_CASE("infeasibility rejects bad inputs") {
  const LinearBilevelData d = box_follower();
  CHECK_THROWS_AS(infeasibility(d, Vector::Zero(2), Vector::Zero(2)), Error);
  Vector y = Vector::Zero(2);
  y[0] = std::nan("");
  CHECK_THROWS_AS(infeasibility(d, Vector::Zero(1), y), Error);

  LinearBilevelData blocked = box_follower();
  blocked.A2 = Matrix::Ones(1, 1);
  blocked.B2 = Matrix::Ones(1, 2);
  blocked.b2 = Vector::Zero(1);
  try {
    infeasibility(blocked, Vector::Ones(1), Vector::Zero(2));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kLowerLevelInfeasible);
  }
}

TEST_CASE("method names") {
  CHECK(parse_method("wdp-relax") == BenchMethod::kWdpRelax);
  CHECK(parse_method("MPEC-direct") == BenchMethod::kMpecDirect);
  CHECK(parse_method("Wdp-Direct") == BenchMethod::kWdpDirect);
  CHECK(to_string(BenchMethod::kMpecRelax) == "MPEC-relax");
  CHECK_THROWS_AS(parse_method("relax"), Error);
}

TEST_CASE("report formatting") {
  CHECK(format_report({}) == "problem,method,objective,infeasibility,time_s,status\n");
  BenchRow row{"s1_2x2x2x2", BenchMethod::kWdpRelax, 1.23456e-4, 0.0, 12.5, "max_outer"};
  const std::string text = format_report({row});
  CHECK(text ==
        "problem,method,objective,infeasibility,time_s,status\n"
        "s1_2x2x2x2,WDP-relax,1.2346e-04,0.0000e+00,1.2500e+01,max_outer\n");
}

TEST_CASE("report file round trip") {
  const auto path = std::filesystem::temp_directory_path() / "bilevel_report_test.csv";
  BenchRow row{"s7_3x2x4x3", BenchMethod::kMpecDirect, -2.5e11, 3.25e-9, 0.5, "Optimal"};
  write_report({row}, path.string());
  std::ifstream in(path);
  std::string header;
  std::string line;
  std::getline(in, header);
  std::getline(in, line);
  CHECK(split(header) == std::vector<std::string>{"problem", "method", "objective", "infeasibility",
                                                   "time_s", "status"});
  const auto cells = split(line);
  REQUIRE(cells.size() == 6);
  CHECK(cells[0] == row.problem);
  CHECK(parse_method(cells[1]) == row.method);
  CHECK(std::stod(cells[2]) == doctest::Approx(row.objective).epsilon(1e-4));
  CHECK(std::stod(cells[3]) == doctest::Approx(row.infeasibility).epsilon(1e-4));
  CHECK(std::stod(cells[4]) == doctest::Approx(row.time_s).epsilon(1e-4));
  CHECK(cells[5] == row.status);
  std::filesystem::remove(path);

  try {
    write_report({row}, "/nonexistent-dir/report.csv");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kIoError);
  }
}

TEST_CASE("suite rows") {
  RelaxConfig cfg;
  cfg.max_outer = 3;
  SuiteOptions options;
  options.dims = {3, 2, 4, 3};
  const std::vector<BenchMethod> methods{BenchMethod::kWdpRelax, BenchMethod::kMpecDirect};
  const auto rows = run_suite({4}, methods, cfg, options);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].method == BenchMethod::kWdpRelax);
  CHECK(rows[1].method == BenchMethod::kMpecDirect);
  for (const auto& r : rows) {
    CHECK(r.problem == "s4_3x2x4x3");
    CHECK(r.time_s >= 0.0);
    if (!std::isnan(r.infeasibility)) CHECK(r.infeasibility >= 0.0);
    CHECK(!r.status.empty());
  }

  // Determinism, also across thread counts.
  options.threads = 3;
  const std::vector<BenchMethod> all{BenchMethod::kMpecDirect, BenchMethod::kWdpDirect,
                                     BenchMethod::kMpecRelax, BenchMethod::kWdpRelax};
  const auto a = run_suite({1, 2}, all, cfg, options);
  options.threads = 1;
  const auto b = run_suite({1, 2}, all, cfg, options);
  REQUIRE(a.size() == 8);
  REQUIRE(b.size() == 8);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].problem == b[i].problem);
    CHECK(a[i].method == b[i].method);
    CHECK(a[i].status == b[i].status);
    CHECK((a[i].objective == b[i].objective || (std::isnan(a[i].objective) && std::isnan(b[i].objective))));
    CHECK((a[i].infeasibility == b[i].infeasibility ||
           (std::isnan(a[i].infeasibility) && std::isnan(b[i].infeasibility))));
  }
  CHECK(a[0].problem == "s1_3x2x4x3");
  CHECK(a[4].problem == "s2_3x2x4x3");
}

TEST_CASE("relax rows match a direct relax call") {
  RelaxConfig cfg;
  cfg.max_outer = 3;
  SuiteOptions options;
  options.dims = {3, 2, 4, 3};
  const auto rows = run_suite({6}, {BenchMethod::kWdpRelax}, cfg, options);
  REQUIRE(rows.size() == 1);
  const LinearBilevelData d = generate_instance(6, options.dims, options.density);
  const RunReport r = run(d, cfg);
  CHECK(rows[0].objective == r.objective);
  CHECK(rows[0].infeasibility == infeasibility(d, r.x, r.y));
  CHECK(rows[0].status == to_string(r.exit));
}

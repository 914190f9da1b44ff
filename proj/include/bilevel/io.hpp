#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "bilevel/model.hpp"
#include "bilevel/nlp.hpp"

namespace bilevel {

enum class ProblemKind { kGenerated, kLinear, kExpression };

std::string_view to_string(ProblemKind kind);

/**
 * A loaded problem file. `linear` is set for generated and linear files;
 * `problem` always holds the expression form. See docs/problem_format.md.
 */
struct ProblemFile {
  ProblemKind kind = ProblemKind::kExpression;
  std::optional<LinearBilevelData> linear;
  BilevelProblem problem;
};

/// Throws kParseError on malformed text, kDimensionMismatch on bad shapes.
ProblemFile parse_problem(std::string_view text);

/// Throws kIoError if the file cannot be read.
ProblemFile load_problem(const std::string& path);

std::string serialize_generated(std::uint64_t seed, LinearDims dims, double density);
std::string serialize_linear(const LinearBilevelData& d);
std::string serialize_expression(const BilevelProblem& bp);

/// Layout a point file refers to: "xy", "wdp" or "mpec".
struct PointFile {
  std::string layout = "xy";
  Point values;
};

PointFile parse_point(std::string_view text);
PointFile load_point(const std::string& path);
std::string serialize_point(const PointFile& point);

/**
 * Line-oriented text form of an Nlp: `kind`, `dim`, one `block` line per
 * layout block, then `objective`, `ineq i`, `eq i` lines with each function
 * in the prefix expression syntax. Rows are tagged with their group name.
 */
std::string dump_nlp(const Nlp& nlp);

std::string read_text(const std::string& path);
void write_text(const std::string& path, const std::string& text);

}  // namespace bilevel

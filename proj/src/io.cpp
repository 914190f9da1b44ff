#include "bilevel/io.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace bilevel {

namespace {

using Json = nlohmann::ordered_json;

[[noreturn]] void parse_fail(const std::string& what) { throw Error(ErrorCode::kParseError, what); }

const Json& field(const Json& doc, const char* key) {
  const auto it = doc.find(key);
  if (it == doc.end()) parse_fail(std::string("missing field '") + key + "'");
  return *it;
}

Vector read_vector(const Json& j, const char* key) {
  if (!j.is_array()) parse_fail(std::string("'") + key + "' must be an array of numbers");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) parse_fail(std::string("'") + key + "' must be an array of numbers");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

// Dense row-major list of rows; `cols` fixes the width of an empty matrix.
Matrix read_matrix(const Json& j, const char* key, Eigen::Index cols) {
  if (!j.is_array()) parse_fail(std::string("'") + key + "' must be a list of rows");
  Matrix m(static_cast<Eigen::Index>(j.size()), cols);
  for (std::size_t r = 0; r < j.size(); ++r) {
    const Vector row = read_vector(j[r], key);
    if (row.size() != cols) {
      throw Error(ErrorCode::kDimensionMismatch, std::string("row ") + std::to_string(r) + " of '" +
                                                     key + "' has " + std::to_string(row.size()) +
                                                     " entries, expected " + std::to_string(cols));
    }
    m.row(static_cast<Eigen::Index>(r)) = row.transpose();
  }
  return m;
}

Json write_vector(const Vector& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Json write_matrix(const Matrix& m) {
  Json out = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) out.push_back(write_vector(m.row(r).transpose()));
  return out;
}

int read_int(const Json& j, const char* key) {
  if (!j.is_number_integer() || j.get<long long>() < 0) {
    parse_fail(std::string("'") + key + "' must be a nonnegative integer");
  }
  return j.get<int>();
}

LinearDims read_dims(const Json& j) {
  if (!j.is_array() || j.size() != 4) parse_fail("'dims' must be [n, p, m, q]");
  return {read_int(j[0], "dims"), read_int(j[1], "dims"), read_int(j[2], "dims"),
          read_int(j[3], "dims")};
}

std::vector<Expr> read_exprs(const Json& doc, const char* key) {
  std::vector<Expr> out;
  const auto it = doc.find(key);
  if (it == doc.end()) return out;
  if (!it->is_array()) parse_fail(std::string("'") + key + "' must be a list of expressions");
  for (const Json& e : *it) {
    if (!e.is_string()) parse_fail(std::string("'") + key + "' must be a list of expressions");
    out.push_back(parse_expr(e.get<std::string>()));
  }
  return out;
}

Expr read_expr(const Json& doc, const char* key) {
  const Json& e = field(doc, key);
  if (!e.is_string()) parse_fail(std::string("'") + key + "' must be an expression string");
  return parse_expr(e.get<std::string>());
}

Json parse_json(std::string_view text) {
  try {
    return Json::parse(text.begin(), text.end());
  } catch (const Json::parse_error& e) {
    parse_fail(e.what());
  }
}

}  // namespace

std::string_view to_string(ProblemKind kind) {
  switch (kind) {
    case ProblemKind::kGenerated:
      return "generated";
    case ProblemKind::kLinear:
      return "linear";
    case ProblemKind::kExpression:
      return "expression";
  }
  return "expression";
}

ProblemFile parse_problem(std::string_view text) {
  const Json doc = parse_json(text);
  if (!doc.is_object()) parse_fail("problem file must be an object");
  const Json& type = field(doc, "type");
  if (!type.is_string()) parse_fail("'type' must be a string");
  const std::string kind = type.get<std::string>();

  ProblemFile out;
  if (kind == "generated") {
    out.kind = ProblemKind::kGenerated;
    const LinearDims dims = read_dims(field(doc, "dims"));
    const Json& density = field(doc, "density");
    const Json& seed = field(doc, "seed");
    if (!density.is_number()) parse_fail("'density' must be a number");
    if (!seed.is_number_unsigned()) parse_fail("'seed' must be a nonnegative integer");
    out.linear = generate_instance(seed.get<std::uint64_t>(), dims, density.get<double>());
  } else if (kind == "linear") {
    out.kind = ProblemKind::kLinear;
    LinearBilevelData d;
    d.c1 = read_vector(field(doc, "c1"), "c1");
    d.c2 = read_vector(field(doc, "c2"), "c2");
    d.d2 = read_vector(field(doc, "d2"), "d2");
    d.b1 = read_vector(field(doc, "b1"), "b1");
    d.b2 = read_vector(field(doc, "b2"), "b2");
    d.lb = read_vector(field(doc, "lb"), "lb");
    d.ub = read_vector(field(doc, "ub"), "ub");
    const Eigen::Index n = d.c1.size();
    const Eigen::Index m = d.c2.size();
    d.A1 = read_matrix(field(doc, "A1"), "A1", n);
    d.A2 = read_matrix(field(doc, "A2"), "A2", n);
    d.B2 = read_matrix(field(doc, "B2"), "B2", m);
    if (const auto it = doc.find("seed"); it != doc.end() && it->is_number_unsigned()) {
      d.seed = it->get<std::uint64_t>();
    }
    if (const auto it = doc.find("retries"); it != doc.end() && it->is_number_integer()) {
      d.retries = it->get<int>();
    }
    check_linear_data(d);
    out.linear = std::move(d);
  } else if (kind == "expression") {
    out.kind = ProblemKind::kExpression;
    BilevelProblem bp;
    bp.n = read_int(field(doc, "n"), "n");
    bp.m = read_int(field(doc, "m"), "m");
    bp.upper_objective = read_expr(doc, "upper_objective");
    bp.lower_objective = read_expr(doc, "lower_objective");
    bp.upper_ineq = read_exprs(doc, "upper_ineq");
    bp.lower_ineq = read_exprs(doc, "lower_ineq");
    bp.lower_eq = read_exprs(doc, "lower_eq");
    require_valid(bp);
    out.problem = std::move(bp);
    return out;
  } else {
    parse_fail("unknown problem type '" + kind + "'");
  }
  out.problem = to_expressions(*out.linear);
  return out;
}

ProblemFile load_problem(const std::string& path) { return parse_problem(read_text(path)); }

std::string serialize_generated(std::uint64_t seed, LinearDims dims, double density) {
  Json doc;
  doc["type"] = "generated";
  doc["dims"] = {dims.n, dims.p, dims.m, dims.q};
  doc["density"] = density;
  doc["seed"] = seed;
  return doc.dump(2) + "\n";
}

std::string serialize_linear(const LinearBilevelData& d) {
  Json doc;
  doc["type"] = "linear";
  doc["seed"] = d.seed;
  doc["retries"] = d.retries;
  doc["c1"] = write_vector(d.c1);
  doc["c2"] = write_vector(d.c2);
  doc["d2"] = write_vector(d.d2);
  doc["A1"] = write_matrix(d.A1);
  doc["b1"] = write_vector(d.b1);
  doc["A2"] = write_matrix(d.A2);
  doc["B2"] = write_matrix(d.B2);
  doc["b2"] = write_vector(d.b2);
  doc["lb"] = write_vector(d.lb);
  doc["ub"] = write_vector(d.ub);
  return doc.dump(2) + "\n";
}

std::string serialize_expression(const BilevelProblem& bp) {
  auto list = [](const std::vector<Expr>& es) {
    Json out = Json::array();
    for (const Expr& e : es) out.push_back(to_string(e));
    return out;
  };
  Json doc;
  doc["type"] = "expression";
  doc["n"] = bp.n;
  doc["m"] = bp.m;
  doc["upper_objective"] = to_string(bp.upper_objective);
  doc["lower_objective"] = to_string(bp.lower_objective);
  doc["upper_ineq"] = list(bp.upper_ineq);
  doc["lower_ineq"] = list(bp.lower_ineq);
  doc["lower_eq"] = list(bp.lower_eq);
  return doc.dump(2) + "\n";
}

PointFile parse_point(std::string_view text) {
  const Json doc = parse_json(text);
  if (!doc.is_object()) parse_fail("point file must be an object");
  PointFile out;
  if (const auto it = doc.find("layout"); it != doc.end()) {
    if (!it->is_string()) parse_fail("'layout' must be a string");
    out.layout = it->get<std::string>();
  }
  if (out.layout != "xy" && out.layout != "wdp" && out.layout != "mpec") {
    parse_fail("'layout' must be one of xy, wdp, mpec");
  }
  out.values = read_vector(field(doc, "values"), "values");
  if (!out.values.allFinite()) throw Error(ErrorCode::kNonFiniteValue, "point has non-finite entries");
  return out;
}

PointFile load_point(const std::string& path) { return parse_point(read_text(path)); }

std::string serialize_point(const PointFile& point) {
  Json doc;
  doc["layout"] = point.layout;
  doc["values"] = write_vector(point.values);
  return doc.dump(2) + "\n";
}

std::string dump_nlp(const Nlp& nlp) {
  const auto& g = nlp.groups;
  auto group_of = [](int row, std::initializer_list<std::pair<const char*, Range>> groups) {
    for (const auto& [name, range] : groups) {
      if (range.contains(row)) return std::string(name);
    }
    return std::string("other");
  };
  std::string kind = "generic";
  if (nlp.kind == NlpKind::kWdp) kind = "wdp";
  if (nlp.kind == NlpKind::kMpec) kind = "mpec";
  std::ostringstream out;
  out << "kind " << kind << "\n";
  if (nlp.relaxed) out << "relaxation " << nlp.relaxation << "\n";
  out << "dim " << nlp.dim << "\n";
  for (const auto& [name, range] : nlp.layout.blocks()) {
    out << "block " << name << " " << range.begin << " " << range.size() << "\n";
  }
  out << "objective " << to_string(nlp.objective) << "\n";
  for (int i = 0; i < nlp.num_ineq(); ++i) {
    out << "ineq " << i << " "
        << group_of(i, {{"upper", g.upper},
                        {"lower_g", g.lower_g},
                        {"gap", g.gap},
                        {"u_nonneg", g.u_nonneg},
                        {"u_cap", g.u_cap},
                        {"relaxed_comp", g.relaxed_comp}})
        << " " << to_string(nlp.ineq[static_cast<std::size_t>(i)]) << "\n";
  }
  for (int j = 0; j < nlp.num_eq(); ++j) {
    out << "eq " << j << " "
        << group_of(j, {{"h", g.h},
                        {"stationarity", g.stationarity},
                        {"complementarity", g.complementarity}})
        << " " << to_string(nlp.eq[static_cast<std::size_t>(j)]) << "\n";
  }
  return out.str();
}

std::string read_text(const std::string& path) {
  std::ifstream file(path);
  if (!file) throw Error(ErrorCode::kIoError, "cannot open '" + path + "'");
  std::ostringstream buf;
  buf << file.rdbuf();
  return buf.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream file(path);
  if (!file) throw Error(ErrorCode::kIoError, "cannot open '" + path + "' for writing");
  file << text;
  file.close();
  if (!file) throw Error(ErrorCode::kIoError, "failed writing '" + path + "'");
}

}  // namespace bilevel

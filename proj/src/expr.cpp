#include "bilevel/expr.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <sstream>
#include <utility>

namespace bilevel {

struct Expr::Node {
  NodeKind kind = NodeKind::kConstant;
  double value = 0.0;
  int index = 0;  // variable index, or exponent for kPow
  std::vector<Expr> children;
  int min_dimension = 0;
  std::size_t node_count = 1;
  int depth = 1;
};

namespace {

std::string_view kind_name(NodeKind kind) {
  switch (kind) {
    case NodeKind::kConstant:
      return "const";
    case NodeKind::kVariable:
      return "var";
    case NodeKind::kAdd:
      return "add";
    case NodeKind::kSub:
      return "sub";
    case NodeKind::kMul:
      return "mul";
    case NodeKind::kDiv:
      return "div";
    case NodeKind::kPow:
      return "pow";
    case NodeKind::kExp:
      return "exp";
    case NodeKind::kNeg:
      return "neg";
  }
  return "?";
}

std::size_t arity(NodeKind kind) {
  switch (kind) {
    case NodeKind::kConstant:
    case NodeKind::kVariable:
      return 0;
    case NodeKind::kPow:
    case NodeKind::kExp:
    case NodeKind::kNeg:
      return 1;
    default:
      return 2;
  }
}

}  // namespace

Expr::Expr() : Expr(constant(0.0)) {}

Expr::Expr(std::shared_ptr<const Node> node) : node_(std::move(node)) {}

Expr Expr::make_raw(NodeKind kind, std::vector<Expr> children, double value, int index) {
  if (children.size() != arity(kind)) {
    throw Error(ErrorCode::kInvalidArgument,
                "node '" + std::string(kind_name(kind)) + "' has wrong arity");
  }
  if (kind == NodeKind::kVariable && index < 0) {
    throw Error(ErrorCode::kIndexOutOfRange, "negative variable index");
  }
  if (kind == NodeKind::kPow && index < 0) {
    throw Error(ErrorCode::kInvalidArgument, "negative integer-power exponent");
  }
  auto node = std::make_shared<Node>();
  node->kind = kind;
  node->value = value;
  node->index = index;
  if (kind == NodeKind::kVariable) {
    node->min_dimension = index + 1;
  }
  for (const auto& child : children) {
    node->min_dimension = std::max(node->min_dimension, child.node_->min_dimension);
    node->node_count += child.node_->node_count;
    node->depth = std::max(node->depth, child.node_->depth + 1);
  }
  node->children = std::move(children);
  return Expr(std::move(node));
}

Expr Expr::constant(double value) { return make_raw(NodeKind::kConstant, {}, value); }

Expr Expr::variable(int index) { return make_raw(NodeKind::kVariable, {}, 0.0, index); }

NodeKind Expr::kind() const { return node_->kind; }
double Expr::constant_value() const { return node_->value; }
int Expr::variable_index() const { return node_->index; }
int Expr::exponent() const { return node_->index; }
std::span<const Expr> Expr::children() const { return node_->children; }
int Expr::min_dimension() const { return node_->min_dimension; }
std::size_t Expr::node_count() const { return node_->node_count; }
int Expr::depth() const { return node_->depth; }

std::vector<int> Expr::variables() const {
  std::vector<int> out;
  std::vector<const Expr*> stack{this};
  while (!stack.empty()) {
    const Expr* e = stack.back();
    stack.pop_back();
    if (e->kind() == NodeKind::kVariable) {
      out.push_back(e->variable_index());
    }
    for (const auto& child : e->children()) {
      stack.push_back(&child);
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

Expr operator+(const Expr& a, const Expr& b) {
  if (a.is_constant() && b.is_constant()) {
    return Expr::constant(a.constant_value() + b.constant_value());
  }
  if (a.is_constant(0.0)) return b;
  if (b.is_constant(0.0)) return a;
  return Expr::make_raw(NodeKind::kAdd, {a, b});
}

Expr operator-(const Expr& a, const Expr& b) {
  if (a.is_constant() && b.is_constant()) {
    return Expr::constant(a.constant_value() - b.constant_value());
  }
  if (b.is_constant(0.0)) return a;
  if (a.is_constant(0.0)) return -b;
  return Expr::make_raw(NodeKind::kSub, {a, b});
}

Expr operator*(const Expr& a, const Expr& b) {
  if (a.is_constant() && b.is_constant()) {
    return Expr::constant(a.constant_value() * b.constant_value());
  }
  if (a.is_constant(0.0) || b.is_constant(0.0)) return Expr::constant(0.0);
  if (a.is_constant(1.0)) return b;
  if (b.is_constant(1.0)) return a;
  if (a.is_constant(-1.0)) return -b;
  if (b.is_constant(-1.0)) return -a;
  return Expr::make_raw(NodeKind::kMul, {a, b});
}

Expr operator/(const Expr& a, const Expr& b) {
  if (a.is_constant() && b.is_constant() && b.constant_value() != 0.0) {
    return Expr::constant(a.constant_value() / b.constant_value());
  }
  if (b.is_constant(1.0)) return a;
  return Expr::make_raw(NodeKind::kDiv, {a, b});
}

Expr operator-(const Expr& a) {
  if (a.is_constant()) return Expr::constant(-a.constant_value());
  if (a.kind() == NodeKind::kNeg) return a.children()[0];
  return Expr::make_raw(NodeKind::kNeg, {a});
}

Expr pow(const Expr& base, int exponent) {
  if (exponent < 0) {
    throw Error(ErrorCode::kInvalidArgument, "negative integer-power exponent");
  }
  if (exponent == 0) return Expr::constant(1.0);
  if (exponent == 1) return base;
  if (base.is_constant()) return Expr::constant(std::pow(base.constant_value(), exponent));
  return Expr::make_raw(NodeKind::kPow, {base}, 0.0, exponent);
}

Expr exp(const Expr& a) {
  if (a.is_constant()) return Expr::constant(std::exp(a.constant_value()));
  return Expr::make_raw(NodeKind::kExp, {a});
}

Expr linear_form(std::span<const double> coefficients, int first_index) {
  Expr out;
  for (std::size_t i = 0; i < coefficients.size(); ++i) {
    if (coefficients[i] != 0.0) {
      out += coefficients[i] * Expr::variable(first_index + static_cast<int>(i));
    }
  }
  return out;
}

Expr sum(std::span<const Expr> terms) {
  Expr out;
  for (const auto& t : terms) {
    out += t;
  }
  return out;
}

namespace {

void check_dimension(const Expr& e, const Point& p) {
  if (e.min_dimension() > p.size()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "expression references variable " + std::to_string(e.min_dimension() - 1) +
                    " but point has dimension " + std::to_string(p.size()));
  }
}

double eval_node(const Expr& e, const Point& p) {
  switch (e.kind()) {
    case NodeKind::kConstant:
      return e.constant_value();
    case NodeKind::kVariable:
      return p[e.variable_index()];
    case NodeKind::kAdd:
      return eval_node(e.children()[0], p) + eval_node(e.children()[1], p);
    case NodeKind::kSub:
      return eval_node(e.children()[0], p) - eval_node(e.children()[1], p);
    case NodeKind::kMul:
      return eval_node(e.children()[0], p) * eval_node(e.children()[1], p);
    case NodeKind::kDiv: {
      const double den = eval_node(e.children()[1], p);
      if (den == 0.0) {
        throw Error(ErrorCode::kNonFiniteValue, "division by zero");
      }
      return eval_node(e.children()[0], p) / den;
    }
    case NodeKind::kPow:
      return std::pow(eval_node(e.children()[0], p), e.exponent());
    case NodeKind::kExp:
      return std::exp(eval_node(e.children()[0], p));
    case NodeKind::kNeg:
      return -eval_node(e.children()[0], p);
  }
  return 0.0;
}

// Forward-mode value/gradient/Hessian with sparse storage.
struct Taylor {
  double value = 0.0;
  std::map<int, double> grad;
  std::map<std::pair<int, int>, double> hess;  // upper triangle, i <= j
};

void add_scaled(Taylor& out, const Taylor& in, double scale, bool with_hessian) {
  if (scale == 0.0) return;
  for (const auto& [i, g] : in.grad) out.grad[i] += scale * g;
  if (with_hessian) {
    for (const auto& [ij, h] : in.hess) out.hess[ij] += scale * h;
  }
}

// out.hess += scale * (ga gbᵀ + gb gaᵀ)
void add_outer(Taylor& out, const std::map<int, double>& ga, const std::map<int, double>& gb,
               double scale) {
  if (scale == 0.0) return;
  for (const auto& [i, a] : ga) {
    for (const auto& [j, b] : gb) {
      const auto key = std::minmax(i, j);
      const double term = scale * a * b;
      out.hess[{key.first, key.second}] += (i == j) ? 2.0 * term : term;
    }
  }
}

// out = φ(in), given φ(v), φ'(v), φ''(v).
Taylor apply_unary(const Taylor& in, double phi, double d1, double d2, bool with_hessian) {
  Taylor out;
  out.value = phi;
  add_scaled(out, in, d1, with_hessian);
  if (with_hessian && d2 != 0.0) {
    for (auto a = in.grad.begin(); a != in.grad.end(); ++a) {
      for (auto b = a; b != in.grad.end(); ++b) {
        out.hess[{a->first, b->first}] += d2 * a->second * b->second;
      }
    }
  }
  return out;
}

Taylor product(const Taylor& a, const Taylor& b, bool with_hessian) {
  Taylor out;
  out.value = a.value * b.value;
  add_scaled(out, a, b.value, with_hessian);
  add_scaled(out, b, a.value, with_hessian);
  if (with_hessian) add_outer(out, a.grad, b.grad, 1.0);
  return out;
}

Taylor forward(const Expr& e, const Point& p, bool with_hessian) {
  switch (e.kind()) {
    case NodeKind::kConstant: {
      Taylor t;
      t.value = e.constant_value();
      return t;
    }
    case NodeKind::kVariable: {
      Taylor t;
      t.value = p[e.variable_index()];
      t.grad[e.variable_index()] = 1.0;
      return t;
    }
    case NodeKind::kAdd:
    case NodeKind::kSub: {
      Taylor t = forward(e.children()[0], p, with_hessian);
      const Taylor b = forward(e.children()[1], p, with_hessian);
      const double sign = e.kind() == NodeKind::kAdd ? 1.0 : -1.0;
      t.value += sign * b.value;
      add_scaled(t, b, sign, with_hessian);
      return t;
    }
    case NodeKind::kMul:
      return product(forward(e.children()[0], p, with_hessian),
                     forward(e.children()[1], p, with_hessian), with_hessian);
    case NodeKind::kDiv: {
      const Taylor num = forward(e.children()[0], p, with_hessian);
      const Taylor den = forward(e.children()[1], p, with_hessian);
      if (den.value == 0.0) {
        throw Error(ErrorCode::kNonFiniteValue, "division by zero");
      }
      const double r = 1.0 / den.value;
      const Taylor recip = apply_unary(den, r, -r * r, 2.0 * r * r * r, with_hessian);
      return product(num, recip, with_hessian);
    }
    case NodeKind::kPow: {
      const Taylor a = forward(e.children()[0], p, with_hessian);
      const int k = e.exponent();
      const double v = a.value;
      const double d1 = k >= 1 ? k * std::pow(v, k - 1) : 0.0;
      const double d2 = k >= 2 ? k * (k - 1) * std::pow(v, k - 2) : 0.0;
      return apply_unary(a, std::pow(v, k), d1, d2, with_hessian);
    }
    case NodeKind::kExp: {
      const Taylor a = forward(e.children()[0], p, with_hessian);
      const double v = std::exp(a.value);
      return apply_unary(a, v, v, v, with_hessian);
    }
    case NodeKind::kNeg: {
      Taylor a = forward(e.children()[0], p, with_hessian);
      a.value = -a.value;
      for (auto& [i, g] : a.grad) g = -g;
      for (auto& [ij, h] : a.hess) h = -h;
      return a;
    }
  }
  return {};
}

void check_finite(double v) {
  if (!std::isfinite(v)) {
    throw Error(ErrorCode::kNonFiniteValue, "expression evaluated to a non-finite value");
  }
}

}  // namespace

double eval(const Expr& e, const Point& p) {
  check_dimension(e, p);
  const double v = eval_node(e, p);
  check_finite(v);
  return v;
}

SparseDerivatives differentiate_at(const Expr& e, const Point& p, bool with_hessian) {
  check_dimension(e, p);
  Taylor t = forward(e, p, with_hessian);
  SparseDerivatives out;
  out.value = t.value;
  check_finite(t.value);
  out.gradient.reserve(t.grad.size());
  for (const auto& [i, g] : t.grad) {
    check_finite(g);
    out.gradient.emplace_back(i, g);
  }
  out.hessian.reserve(t.hess.size());
  for (const auto& [ij, h] : t.hess) {
    check_finite(h);
    out.hessian.emplace_back(ij.first, ij.second, h);
  }
  return out;
}

Vector grad(const Expr& e, const Point& p, std::span<const int> wrt) {
  const SparseDerivatives d = differentiate_at(e, p, false);
  Vector out = Vector::Zero(static_cast<Eigen::Index>(wrt.size()));
  for (std::size_t k = 0; k < wrt.size(); ++k) {
    auto it = std::lower_bound(d.gradient.begin(), d.gradient.end(), std::make_pair(wrt[k], 0.0),
                               [](const auto& a, const auto& b) { return a.first < b.first; });
    if (it != d.gradient.end() && it->first == wrt[k]) {
      out[static_cast<Eigen::Index>(k)] = it->second;
    }
  }
  return out;
}

Matrix hess(const Expr& e, const Point& p, std::span<const int> wrt) {
  const SparseDerivatives d = differentiate_at(e, p, true);
  std::map<int, std::vector<Eigen::Index>> position;
  for (std::size_t k = 0; k < wrt.size(); ++k) {
    position[wrt[k]].push_back(static_cast<Eigen::Index>(k));
  }
  const auto n = static_cast<Eigen::Index>(wrt.size());
  Matrix out = Matrix::Zero(n, n);
  for (const auto& [i, j, h] : d.hessian) {
    auto pi = position.find(i);
    auto pj = position.find(j);
    if (pi == position.end() || pj == position.end()) continue;
    for (auto a : pi->second) {
      for (auto b : pj->second) {
        out(a, b) = h;
        out(b, a) = h;
      }
    }
  }
  return out;
}

Expr derivative(const Expr& e, int index) {
  switch (e.kind()) {
    case NodeKind::kConstant:
      return Expr::constant(0.0);
    case NodeKind::kVariable:
      return Expr::constant(e.variable_index() == index ? 1.0 : 0.0);
    default:
      break;
  }
  if (e.min_dimension() <= index) {
    return Expr::constant(0.0);
  }
  const auto c = e.children();
  switch (e.kind()) {
    case NodeKind::kAdd:
      return derivative(c[0], index) + derivative(c[1], index);
    case NodeKind::kSub:
      return derivative(c[0], index) - derivative(c[1], index);
    case NodeKind::kMul:
      return derivative(c[0], index) * c[1] + c[0] * derivative(c[1], index);
    case NodeKind::kDiv:
      return derivative(c[0], index) / c[1] -
             c[0] * derivative(c[1], index) / pow(c[1], 2);
    case NodeKind::kPow:
      if (e.exponent() == 0) return Expr::constant(0.0);
      return static_cast<double>(e.exponent()) * pow(c[0], e.exponent() - 1) *
             derivative(c[0], index);
    case NodeKind::kExp:
      return e * derivative(c[0], index);
    case NodeKind::kNeg:
      return -derivative(c[0], index);
    default:
      return Expr::constant(0.0);
  }
}

namespace {

Expr rebuild(const Expr& e, std::vector<Expr> children) {
  switch (e.kind()) {
    case NodeKind::kAdd:
      return children[0] + children[1];
    case NodeKind::kSub:
      return children[0] - children[1];
    case NodeKind::kMul:
      return children[0] * children[1];
    case NodeKind::kDiv:
      return children[0] / children[1];
    case NodeKind::kPow:
      return pow(children[0], e.exponent());
    case NodeKind::kExp:
      return exp(children[0]);
    case NodeKind::kNeg:
      return -children[0];
    default:
      return e;
  }
}

template <typename Leaf>
Expr transform(const Expr& e, const Leaf& leaf) {
  if (e.kind() == NodeKind::kVariable) return leaf(e.variable_index());
  if (e.kind() == NodeKind::kConstant) return e;
  std::vector<Expr> children;
  children.reserve(e.children().size());
  for (const auto& c : e.children()) children.push_back(transform(c, leaf));
  return rebuild(e, std::move(children));
}

}  // namespace

Expr substitute(const Expr& e, std::span<const Expr> replacement) {
  return transform(e, [&](int i) {
    return static_cast<std::size_t>(i) < replacement.size() ? replacement[i] : Expr::variable(i);
  });
}

Expr remap_variables(const Expr& e, std::span<const int> index_map) {
  return transform(e, [&](int i) {
    if (static_cast<std::size_t>(i) >= index_map.size()) {
      throw Error(ErrorCode::kIndexOutOfRange,
                  "variable " + std::to_string(i) + " has no entry in the index map");
    }
    return Expr::variable(index_map[i]);
  });
}

namespace {

std::string format_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write(std::ostringstream& os, const Expr& e) {
  switch (e.kind()) {
    case NodeKind::kConstant:
      os << format_number(e.constant_value());
      return;
    case NodeKind::kVariable:
      os << "(var " << e.variable_index() << ')';
      return;
    default:
      break;
  }
  os << '(' << kind_name(e.kind());
  for (const auto& c : e.children()) {
    os << ' ';
    write(os, c);
  }
  if (e.kind() == NodeKind::kPow) os << ' ' << e.exponent();
  os << ')';
}

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  Expr parse_all() {
    Expr e = parse();
    skip_space();
    if (pos_ != text_.size()) fail("trailing characters");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw Error(ErrorCode::kParseError, what + " at offset " + std::to_string(pos_));
  }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  std::string_view atom() {
    skip_space();
    const std::size_t start = pos_;
    while (pos_ < text_.size() && !std::isspace(static_cast<unsigned char>(text_[pos_])) &&
           text_[pos_] != '(' && text_[pos_] != ')') {
      ++pos_;
    }
    if (start == pos_) fail("expected token");
    return text_.substr(start, pos_ - start);
  }

  double number(std::string_view tok) {
    double v = 0.0;
    auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) {
      fail("bad number '" + std::string(tok) + "'");
    }
    return v;
  }

  int integer(std::string_view tok) {
    int v = 0;
    auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) {
      fail("bad integer '" + std::string(tok) + "'");
    }
    return v;
  }

  void expect(char c) {
    skip_space();
    if (pos_ >= text_.size() || text_[pos_] != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }

  Expr parse() {
    skip_space();
    if (pos_ >= text_.size()) fail("unexpected end of input");
    if (text_[pos_] != '(') return Expr::constant(number(atom()));
    ++pos_;
    const std::string_view op = atom();
    Expr out;
    if (op == "var") {
      const int index = integer(atom());
      if (index < 0) fail("negative variable index");
      out = Expr::variable(index);
    } else if (op == "const") {
      out = Expr::constant(number(atom()));
    } else if (op == "pow") {
      Expr base = parse();
      const int k = integer(atom());
      if (k < 0) fail("negative integer-power exponent");
      out = Expr::make_raw(NodeKind::kPow, {base}, 0.0, k);
    } else if (op == "exp" || op == "neg") {
      out = Expr::make_raw(op == "exp" ? NodeKind::kExp : NodeKind::kNeg, {parse()});
    } else {
      NodeKind kind;
      if (op == "add") {
        kind = NodeKind::kAdd;
      } else if (op == "sub") {
        kind = NodeKind::kSub;
      } else if (op == "mul") {
        kind = NodeKind::kMul;
      } else if (op == "div") {
        kind = NodeKind::kDiv;
      } else {
        fail("unknown operator '" + std::string(op) + "'");
      }
      Expr a = parse();
      Expr b = parse();
      out = Expr::make_raw(kind, {a, b});
    }
    expect(')');
    return out;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string to_string(const Expr& e) {
  std::ostringstream os;
  write(os, e);
  return os.str();
}

Expr parse_expr(std::string_view text) { return Parser(text).parse_all(); }

}  // namespace bilevel

#include "isurv/expr.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <memory>

namespace isurv::gp {

int arity(Op op) {
  switch (op) {
    case Op::constant:
    case Op::variable: return 0;
    case Op::lnot: return 1;
    case Op::ite: return 3;
    default: return 2;
  }
}

bool is_terminal(Op op) { return op == Op::constant || op == Op::variable; }

bool produces_bool(Op op) {
  return op == Op::lt || op == Op::ge || op == Op::land || op == Op::lor || op == Op::lnot;
}

bool needs_bool_child(Op op, int k) {
  switch (op) {
    case Op::land:
    case Op::lor:
    case Op::lnot: return k < arity(op);
    case Op::ite: return k == 0;
    default: return false;
  }
}

const char* op_name(Op op) {
  switch (op) {
    case Op::constant: return "const";
    case Op::variable: return "var";
    case Op::add: return "+";
    case Op::sub: return "-";
    case Op::mul: return "*";
    case Op::div: return "/";
    case Op::lt: return "<";
    case Op::ge: return ">=";
    case Op::land: return "and";
    case Op::lor: return "or";
    case Op::lnot: return "not";
    case Op::ite: return "If";
  }
  return "?";
}

namespace {

inline double truth(bool b) { return b ? 1.0 : 0.0; }

inline double apply_op(Op op, double a, double b, double c) {
  switch (op) {
    case Op::add: return a + b;
    case Op::sub: return a - b;
    case Op::mul: return a * b;
    case Op::div: return protected_divide(a, b);
    case Op::lt: return truth(a < b);
    case Op::ge: return truth(a >= b);
    case Op::land: return truth(a != 0.0 && b != 0.0);
    case Op::lor: return truth(a != 0.0 || b != 0.0);
    case Op::lnot: return truth(a == 0.0);
    case Op::ite: return a != 0.0 ? b : c;
    default: return 0.0;
  }
}

}  // namespace

ExprTree::ExprTree(int depth, std::vector<std::string> variables)
    : depth_(depth), variables_(std::move(variables)), nodes_(slot_count(depth)) {
  if (depth < 0) throw Error("tree depth must be non-negative");
}

std::size_t ExprTree::slot_count(int depth) {
  std::size_t total = 0, level = 1;
  for (int d = 0; d <= depth; ++d) {
    total += level;
    level *= kBranching;
  }
  return total;
}

int ExprTree::level_of(std::size_t slot) {
  int level = 0;
  std::size_t first_next = 1, width = 1;
  while (slot >= first_next) {
    width *= kBranching;
    first_next += width;
    ++level;
  }
  return level;
}

std::vector<bool> ExprTree::active_mask() const {
  std::vector<bool> active(nodes_.size(), false);
  if (nodes_.empty()) return active;
  active[0] = true;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (!active[i] || is_leaf_slot(i)) continue;
    const int a = arity(nodes_[i].op);
    for (int k = 0; k < a; ++k) active[child(i, k)] = true;
  }
  return active;
}

bool ExprTree::valid() const {
  const auto active = active_mask();
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (!active[i]) continue;
    const Node& n = nodes_[i];
    if (n.op == Op::variable && (n.var < 0 || static_cast<std::size_t>(n.var) >= variables_.size()))
      return false;
    if (!is_terminal(n.op) && is_leaf_slot(i)) return false;
    if (n.op == Op::constant && !std::isfinite(n.value)) return false;
    for (int k = 0; k < arity(n.op); ++k)
      if (needs_bool_child(n.op, k) && !produces_bool(nodes_[child(i, k)].op)) return false;
  }
  return true;
}

namespace {

double eval_scalar(const ExprTree& tree, std::size_t slot, const std::vector<double>& values) {
  const Node& n = tree.node(slot);
  switch (n.op) {
    case Op::constant: return n.value;
    case Op::variable: return values[static_cast<std::size_t>(n.var)];
    case Op::ite: {
      const double c = eval_scalar(tree, ExprTree::child(slot, 0), values);
      return c != 0.0 ? eval_scalar(tree, ExprTree::child(slot, 1), values)
                      : eval_scalar(tree, ExprTree::child(slot, 2), values);
    }
    default: break;
  }
  const double a = eval_scalar(tree, ExprTree::child(slot, 0), values);
  const double b = arity(n.op) > 1 ? eval_scalar(tree, ExprTree::child(slot, 1), values) : 0.0;
  return apply_op(n.op, a, b, 0.0);
}

}  // namespace

double eval_expr(const ExprTree& tree, const Row& row) {
  if (tree.size() == 0) throw Error("empty expression");
  std::vector<double> values(tree.variables().size(), 0.0);
  const auto active = tree.active_mask();
  for (std::size_t i = 0; i < tree.size(); ++i) {
    if (!active[i] || tree.node(i).op != Op::variable) continue;
    const auto v = static_cast<std::size_t>(tree.node(i).var);
    const auto& name = tree.variables().at(v);
    auto it = row.find(name);
    if (it == row.end()) throw Error("unknown variable '" + name + "'");
    values[v] = it->second;
  }
  return tree.intercept() + tree.slope() * eval_scalar(tree, 0, values);
}

BatchEvaluator::BatchEvaluator(const FeatureTable& data, const std::vector<std::string>& variables)
    : rows_(data.rows()) {
  columns_.reserve(variables.size());
  for (const auto& v : variables) {
    auto j = data.find(v);
    columns_.push_back(j ? data.column(*j) : std::span<const double>{});
  }
}

void BatchEvaluator::eval_slot(const ExprTree& tree, std::size_t slot, std::vector<double>& out,
                               int level) {
  const Node& n = tree.node(slot);
  out.resize(rows_);
  if (n.op == Op::constant) {
    std::fill(out.begin(), out.end(), n.value);
    return;
  }
  if (n.op == Op::variable) {
    const auto v = static_cast<std::size_t>(n.var);
    if (v >= columns_.size() || (columns_[v].empty() && rows_ > 0))
      throw Error("unknown variable '" +
                  (v < tree.variables().size() ? tree.variables()[v] : std::to_string(v)) + "'");
    std::copy(columns_[v].begin(), columns_[v].end(), out.begin());
    return;
  }
  const int a = arity(n.op);
  const auto base = static_cast<std::size_t>(level) * ExprTree::kBranching;
  for (int k = 0; k < a; ++k) eval_slot(tree, ExprTree::child(slot, k), scratch_[base + k], level + 1);
  const double* x = scratch_[base].data();
  const double* y = a > 1 ? scratch_[base + 1].data() : nullptr;
  const double* z = a > 2 ? scratch_[base + 2].data() : nullptr;
  double* o = out.data();
  const std::size_t m = rows_;
  switch (n.op) {
    case Op::add: for (std::size_t i = 0; i < m; ++i) o[i] = x[i] + y[i]; break;
    case Op::sub: for (std::size_t i = 0; i < m; ++i) o[i] = x[i] - y[i]; break;
    case Op::mul: for (std::size_t i = 0; i < m; ++i) o[i] = x[i] * y[i]; break;
    case Op::div: for (std::size_t i = 0; i < m; ++i) o[i] = protected_divide(x[i], y[i]); break;
    case Op::lt: for (std::size_t i = 0; i < m; ++i) o[i] = truth(x[i] < y[i]); break;
    case Op::ge: for (std::size_t i = 0; i < m; ++i) o[i] = truth(x[i] >= y[i]); break;
    case Op::land: for (std::size_t i = 0; i < m; ++i) o[i] = truth(x[i] != 0.0 && y[i] != 0.0); break;
    case Op::lor: for (std::size_t i = 0; i < m; ++i) o[i] = truth(x[i] != 0.0 || y[i] != 0.0); break;
    case Op::lnot: for (std::size_t i = 0; i < m; ++i) o[i] = truth(x[i] == 0.0); break;
    case Op::ite: for (std::size_t i = 0; i < m; ++i) o[i] = x[i] != 0.0 ? y[i] : z[i]; break;
    default: break;
  }
}

void BatchEvaluator::eval_core(const ExprTree& tree, std::vector<double>& out) {
  if (tree.size() == 0) throw Error("empty expression");
  // Sized before recursing: children write into references held by their parent.
  const auto need = static_cast<std::size_t>(tree.depth() + 1) * ExprTree::kBranching;
  if (scratch_.size() < need) scratch_.resize(need);
  eval_slot(tree, 0, out, 0);
}

void BatchEvaluator::eval(const ExprTree& tree, std::vector<double>& out) {
  eval_core(tree, out);
  const double a = tree.intercept(), b = tree.slope();
  for (auto& v : out) v = a + b * v;
}

std::vector<double> evaluate(const ExprTree& tree, const FeatureTable& data) {
  BatchEvaluator ev(data, tree.variables());
  std::vector<double> out;
  ev.eval(tree, out);
  return out;
}

double mean_squared_error(std::span<const double> predicted, std::span<const double> target) {
  if (predicted.size() != target.size()) throw Error("prediction and target differ in length");
  if (target.empty()) throw Error("mean squared error of empty data");
  double s = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    const double e = predicted[i] - target[i];
    s += e * e;
  }
  return s / static_cast<double>(target.size());
}

double expr_mse(const ExprTree& tree, const FeatureTable& data, std::span<const double> target) {
  if (data.rows() == 0) throw Error("empty data");
  if (data.rows() != target.size()) throw Error("data rows and target differ in length");
  return mean_squared_error(evaluate(tree, data), target);
}

// ---------------------------------------------------------------------------
// Formatting and parsing

namespace {

struct Ast {
  Op op = Op::constant;
  int var = -1;
  double value = 0.0;
  std::vector<Ast> kids;

  bool is_const() const { return op == Op::constant; }
  bool is_const(double v) const { return op == Op::constant && value == v; }
  int height() const {
    int h = 0;
    for (const auto& k : kids) h = std::max(h, k.height() + 1);
    return h;
  }
};

Ast constant(double v) { return Ast{Op::constant, -1, v, {}}; }

Ast make(Op op, std::vector<Ast> kids) { return Ast{op, -1, 0.0, std::move(kids)}; }

Ast to_ast(const ExprTree& tree, std::size_t slot) {
  const Node& n = tree.node(slot);
  Ast a{n.op, n.var, n.value, {}};
  if (!tree.is_leaf_slot(slot))
    for (int k = 0; k < arity(n.op); ++k) a.kids.push_back(to_ast(tree, ExprTree::child(slot, k)));
  return a;
}

bool const_ite(const Ast& a) {
  return a.op == Op::ite && a.kids[1].is_const() && a.kids[2].is_const();
}

Ast simplify(Ast a) {
  for (auto& k : a.kids) k = simplify(std::move(k));
  if (is_terminal(a.op)) return a;

  const bool all_const = std::all_of(a.kids.begin(), a.kids.end(), [](const Ast& k) { return k.is_const(); });
  if (all_const) {
    const double x = a.kids[0].value;
    const double y = a.kids.size() > 1 ? a.kids[1].value : 0.0;
    const double z = a.kids.size() > 2 ? a.kids[2].value : 0.0;
    return constant(apply_op(a.op, x, y, z));
  }
  auto& k = a.kids;
  switch (a.op) {
    case Op::add:
      if (k[1].is_const(0.0)) return std::move(k[0]);
      if (k[0].is_const(0.0)) return std::move(k[1]);
      if (const_ite(k[0]) && k[1].is_const()) {
        Ast ite = std::move(k[0]);
        ite.kids[1].value += k[1].value;
        ite.kids[2].value += k[1].value;
        return simplify(std::move(ite));
      }
      if (k[0].is_const() && const_ite(k[1])) {
        Ast ite = std::move(k[1]);
        ite.kids[1].value = k[0].value + ite.kids[1].value;
        ite.kids[2].value = k[0].value + ite.kids[2].value;
        return simplify(std::move(ite));
      }
      break;
    case Op::sub:
      if (k[1].is_const(0.0)) return std::move(k[0]);
      break;
    case Op::mul:
      if (k[1].is_const(1.0)) return std::move(k[0]);
      if (k[0].is_const(1.0)) return std::move(k[1]);
      if (k[0].is_const() && const_ite(k[1])) {
        Ast ite = std::move(k[1]);
        ite.kids[1].value = k[0].value * ite.kids[1].value;
        ite.kids[2].value = k[0].value * ite.kids[2].value;
        return simplify(std::move(ite));
      }
      if (const_ite(k[0]) && k[1].is_const()) {
        Ast ite = std::move(k[0]);
        ite.kids[1].value *= k[1].value;
        ite.kids[2].value *= k[1].value;
        return simplify(std::move(ite));
      }
      break;
    case Op::div:
      if (k[1].is_const(1.0)) return std::move(k[0]);
      break;
    case Op::ite:
      if (k[0].is_const()) return std::move(k[0].value != 0.0 ? k[1] : k[2]);
      if (const_ite(a) && k[1].value == k[2].value) return std::move(k[1]);
      break;
    default: break;
  }
  return a;
}

int precedence(const Ast& a) {
  switch (a.op) {
    case Op::lor: return 1;
    case Op::land: return 2;
    case Op::lnot: return 3;
    case Op::lt:
    case Op::ge: return 4;
    case Op::add:
    case Op::sub: return 5;
    case Op::mul:
    case Op::div: return 6;
    default: return 7;
  }
}

std::string format_number(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  std::string s(buf);
  if (s == "-0") s = "0";
  return s;
}

struct Printer {
  const std::vector<std::string>& vars;
  int digits;

  std::string wrap(const Ast& a, bool paren) const {
    auto s = print(a);
    return paren ? "(" + s + ")" : s;
  }

  std::string print(const Ast& a) const {
    const int p = precedence(a);
    switch (a.op) {
      case Op::constant: return format_number(a.value, digits);
      case Op::variable: return vars.at(static_cast<std::size_t>(a.var));
      case Op::ite:
        return "If(" + print(a.kids[0]) + ") Then(" + print(a.kids[1]) + ") Else(" + print(a.kids[2]) + ")";
      case Op::lnot: return "not " + wrap(a.kids[0], precedence(a.kids[0]) < p);
      case Op::lt:
      case Op::ge:
        return wrap(a.kids[0], precedence(a.kids[0]) <= p) + " " + op_name(a.op) + " " +
               wrap(a.kids[1], precedence(a.kids[1]) <= p);
      default:
        return wrap(a.kids[0], precedence(a.kids[0]) < p) + " " + op_name(a.op) + " " +
               wrap(a.kids[1], precedence(a.kids[1]) <= p);
    }
  }
};

class Parser {
 public:
  Parser(std::string_view text, std::vector<std::string>& vars) : s_(text), vars_(vars) {}

  Ast parse() {
    Ast a = parse_or();
    skip_ws();
    if (pos_ != s_.size()) fail("unexpected '" + std::string(1, s_[pos_]) + "'");
    return a;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    throw Error("expression parse error at offset " + std::to_string(pos_) + ": " + msg);
  }

  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  bool peek_word(std::string_view w) {
    skip_ws();
    if (s_.substr(pos_, w.size()) != w) return false;
    const std::size_t end = pos_ + w.size();
    return end == s_.size() || !(std::isalnum(static_cast<unsigned char>(s_[end])) || s_[end] == '_');
  }

  bool accept_word(std::string_view w) {
    if (!peek_word(w)) return false;
    pos_ += w.size();
    return true;
  }

  bool accept(std::string_view tok) {
    skip_ws();
    if (s_.substr(pos_, tok.size()) != tok) return false;
    pos_ += tok.size();
    return true;
  }

  void expect(std::string_view tok) {
    if (!accept(tok)) fail("expected '" + std::string(tok) + "'");
  }

  Ast parse_or() {
    Ast a = parse_and();
    while (accept_word("or")) a = make(Op::lor, {std::move(a), parse_and()});
    return a;
  }

  Ast parse_and() {
    Ast a = parse_not();
    while (accept_word("and")) a = make(Op::land, {std::move(a), parse_not()});
    return a;
  }

  Ast parse_not() {
    if (accept_word("not")) return make(Op::lnot, {parse_not()});
    return parse_cmp();
  }

  Ast parse_cmp() {
    Ast a = parse_add();
    if (accept(">=")) return make(Op::ge, {std::move(a), parse_add()});
    if (accept("<=")) {
      Ast b = parse_add();
      return make(Op::ge, {std::move(b), std::move(a)});
    }
    if (accept("<")) return make(Op::lt, {std::move(a), parse_add()});
    if (accept(">")) {
      Ast b = parse_add();
      return make(Op::lt, {std::move(b), std::move(a)});
    }
    return a;
  }

  Ast parse_add() {
    Ast a = parse_mul();
    for (;;) {
      if (accept("+"))
        a = make(Op::add, {std::move(a), parse_mul()});
      else if (accept("-"))
        a = make(Op::sub, {std::move(a), parse_mul()});
      else
        return a;
    }
  }

  Ast parse_mul() {
    Ast a = parse_unary();
    for (;;) {
      if (accept("*"))
        a = make(Op::mul, {std::move(a), parse_unary()});
      else if (accept("/"))
        a = make(Op::div, {std::move(a), parse_unary()});
      else
        return a;
    }
  }

  Ast parse_unary() {
    if (accept("-")) {
      Ast a = parse_unary();
      if (a.is_const()) {
        a.value = -a.value;
        return a;
      }
      return make(Op::mul, {constant(-1.0), std::move(a)});
    }
    return parse_primary();
  }

  Ast parse_primary() {
    skip_ws();
    if (pos_ >= s_.size()) fail("unexpected end of expression");
    if (accept("(")) {
      Ast a = parse_or();
      expect(")");
      return a;
    }
    if (accept_word("If") || accept_word("if")) {
      expect("(");
      Ast c = parse_or();
      expect(")");
      if (!(accept_word("Then") || accept_word("then"))) fail("expected 'Then'");
      expect("(");
      Ast t = parse_or();
      expect(")");
      if (!(accept_word("Else") || accept_word("else"))) fail("expected 'Else'");
      expect("(");
      Ast e = parse_or();
      expect(")");
      return make(Op::ite, {std::move(c), std::move(t), std::move(e)});
    }
    const char ch = s_[pos_];
    if (std::isdigit(static_cast<unsigned char>(ch)) || ch == '.') {
      const std::string rest(s_.substr(pos_));
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(rest, &used);
      } catch (const std::exception&) {
        fail("bad number");
      }
      pos_ += used;
      return constant(v);
    }
    if (std::isalpha(static_cast<unsigned char>(ch)) || ch == '_') {
      const std::size_t start = pos_;
      while (pos_ < s_.size() &&
             (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_'))
        ++pos_;
      const std::string name(s_.substr(start, pos_ - start));
      auto it = std::find(vars_.begin(), vars_.end(), name);
      if (it == vars_.end()) {
        vars_.push_back(name);
        it = vars_.end() - 1;
      }
      return Ast{Op::variable, static_cast<int>(it - vars_.begin()), 0.0, {}};
    }
    fail("unexpected '" + std::string(1, ch) + "'");
  }

  std::string_view s_;
  std::vector<std::string>& vars_;
  std::size_t pos_ = 0;
};

void place(ExprTree& tree, const Ast& a, std::size_t slot) {
  tree.node(slot) = Node{a.op, a.var, a.value};
  for (std::size_t k = 0; k < a.kids.size(); ++k) place(tree, a.kids[k], ExprTree::child(slot, static_cast<int>(k)));
}

}  // namespace

std::string format_expr(const ExprTree& tree, const FormatOptions& options) {
  if (tree.size() == 0) throw Error("empty expression");
  Ast a = to_ast(tree, 0);
  if (tree.slope() != 1.0) a = make(Op::mul, {constant(tree.slope()), std::move(a)});
  if (tree.intercept() != 0.0) a = make(Op::add, {std::move(a), constant(tree.intercept())});
  a = simplify(std::move(a));
  return Printer{tree.variables(), options.significant_digits}.print(a);
}

ExprTree parse_expr(std::string_view text, std::vector<std::string> variables) {
  Parser parser(text, variables);
  const Ast a = parser.parse();
  ExprTree tree(a.height(), std::move(variables));
  place(tree, a, 0);
  return tree;
}

}  // namespace isurv::gp

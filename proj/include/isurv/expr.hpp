#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "isurv/common.hpp"

namespace isurv::gp {

enum class Op : std::uint8_t {
  constant,
  variable,
  add,
  sub,
  mul,
  div,  // protected
  lt,
  ge,
  land,
  lor,
  lnot,
  ite,
};

int arity(Op op);
bool is_terminal(Op op);
// lt, ge, and, or, not yield 1.0 / 0.0.
bool produces_bool(Op op);
// Whether child k of op must be a boolean-producing operator.
bool needs_bool_child(Op op, int k);
const char* op_name(Op op);

struct Node {
  Op op = Op::constant;
  int var = -1;
  double value = 0.0;

  friend bool operator==(const Node&, const Node&) = default;
};

inline constexpr double kDivisionFloor = 1e-6;

// numerator / denominator with |denominator| clamped to >= 1e-6, keeping its sign (0 -> +).
inline double protected_divide(double num, double den) {
  if (den >= 0.0 && den < kDivisionFloor) den = kDivisionFloor;
  if (den < 0.0 && den > -kDivisionFloor) den = -kDivisionFloor;
  return num / den;
}

/// Fixed-depth template tree in ternary heap layout: children of slot i are
/// 3i+1, 3i+2, 3i+3. Slots beneath a terminal, or past an operator's arity,
/// are inert. The output is intercept + slope * root.
class ExprTree {
 public:
  static constexpr int kBranching = 3;

  ExprTree() = default;
  ExprTree(int depth, std::vector<std::string> variables);

  static std::size_t slot_count(int depth);
  static std::size_t child(std::size_t slot, int k) { return kBranching * slot + 1 + static_cast<std::size_t>(k); }
  static int level_of(std::size_t slot);

  int depth() const { return depth_; }
  std::size_t size() const { return nodes_.size(); }
  bool is_leaf_slot(std::size_t slot) const { return level_of(slot) == depth_; }

  const Node& node(std::size_t slot) const { return nodes_[slot]; }
  Node& node(std::size_t slot) { return nodes_[slot]; }
  std::span<const Node> nodes() const { return nodes_; }

  const std::vector<std::string>& variables() const { return variables_; }

  double intercept() const { return intercept_; }
  double slope() const { return slope_; }
  void set_scaling(double intercept, double slope) {
    intercept_ = intercept;
    slope_ = slope;
  }

  // active[i] is true when slot i contributes to the output.
  std::vector<bool> active_mask() const;
  // Structural typing on the active slots: leaves hold terminals and every
  // boolean-required slot holds a boolean-producing operator.
  bool valid() const;

  friend bool operator==(const ExprTree&, const ExprTree&) = default;

 private:
  int depth_ = 0;
  std::vector<std::string> variables_;
  std::vector<Node> nodes_;
  double intercept_ = 0.0;
  double slope_ = 1.0;
};

using Row = std::unordered_map<std::string, double>;

double eval_expr(const ExprTree& tree, const Row& row);

/// Evaluates the tree over every row of a table whose columns are matched to
/// the tree's variables by name. Reuses internal buffers across calls.
class BatchEvaluator {
 public:
  BatchEvaluator(const FeatureTable& data, const std::vector<std::string>& variables);

  std::size_t rows() const { return rows_; }
  // Root output without linear scaling.
  void eval_core(const ExprTree& tree, std::vector<double>& out);
  // Full output: intercept + slope * core.
  void eval(const ExprTree& tree, std::vector<double>& out);

 private:
  void eval_slot(const ExprTree& tree, std::size_t slot, std::vector<double>& out, int level);

  std::size_t rows_ = 0;
  std::vector<std::span<const double>> columns_;
  std::vector<std::vector<double>> scratch_;
};

std::vector<double> evaluate(const ExprTree& tree, const FeatureTable& data);

double mean_squared_error(std::span<const double> predicted, std::span<const double> target);
double expr_mse(const ExprTree& tree, const FeatureTable& data, std::span<const double> target);

struct FormatOptions {
  int significant_digits = 3;
};

// Simplified infix rendering: constant folding, identity pruning, and
// constant distribution into if-then-else branches.
std::string format_expr(const ExprTree& tree, const FormatOptions& options = {});

// Parses the format_expr grammar. Identifiers not already in `variables` are
// appended in order of appearance. The result has the smallest template
// depth that holds the parsed expression.
ExprTree parse_expr(std::string_view text, std::vector<std::string> variables = {});

}  // namespace isurv::gp

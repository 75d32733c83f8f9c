#pragma once

#include <string>
#include <vector>

#include "crbsde/errors.hpp"

namespace crbsde {

/// Tiny total arithmetic language for drivers, obstacles and terminal
/// payoffs: variables t, y, z, w, numeric literals, + - *, unary minus,
/// and the binary functions min(,) / max(,). Every expression evaluates to
/// a finite real for finite inputs.
class Expression {
 public:
  /// Throws a config error with the offending position on bad input.
  static Expression parse(const std::string& text);

  double eval(double t, double y, double z, double w) const;

  bool uses_t() const { return uses_[0]; }
  bool uses_y() const { return uses_[1]; }
  bool uses_z() const { return uses_[2]; }
  bool uses_w() const { return uses_[3]; }

  const std::string& text() const { return text_; }

 private:
  enum class Op { number, var_t, var_y, var_z, var_w, add, sub, mul, neg, min2, max2 };
  struct Node {
    Op op;
    double value = 0.0;
    int lhs = -1;
    int rhs = -1;
  };
  std::vector<Node> nodes_;
  int root_ = -1;
  bool uses_[4] = {false, false, false, false};
  std::string text_;

  double eval_node(int idx, double t, double y, double z, double w) const;
  friend class ExpressionParser;
};

}  // namespace crbsde

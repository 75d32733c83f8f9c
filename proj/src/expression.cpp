#include "crbsde/expression.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>

namespace crbsde {

class ExpressionParser {
 public:
  explicit ExpressionParser(const std::string& text) : text_(text) {}

  Expression run() {
    Expression e;
    e.text_ = text_;
    expr_ = &e;
    pos_ = 0;
    e.root_ = parse_sum();
    skip_ws();
    if (pos_ != text_.size()) fail("unexpected trailing input");
    return e;
  }

 private:
  const std::string& text_;
  size_t pos_ = 0;
  Expression* expr_ = nullptr;

  [[noreturn]] void fail(const std::string& what) const {
    throw config_error("expression parse error at position " +
                       std::to_string(pos_) + ": " + what + " in \"" + text_ + "\"");
  }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_])))
      ++pos_;
  }

  bool consume(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  int add_node(Expression::Node n) {
    expr_->nodes_.push_back(n);
    return static_cast<int>(expr_->nodes_.size()) - 1;
  }

  int parse_sum() {
    int lhs = parse_product();
    while (true) {
      if (consume('+'))
        lhs = add_node({Expression::Op::add, 0.0, lhs, parse_product()});
      else if (consume('-'))
        lhs = add_node({Expression::Op::sub, 0.0, lhs, parse_product()});
      else
        return lhs;
    }
  }

  int parse_product() {
    int lhs = parse_factor();
    while (consume('*'))
      lhs = add_node({Expression::Op::mul, 0.0, lhs, parse_factor()});
    return lhs;
  }

  int parse_factor() {
    skip_ws();
    if (pos_ >= text_.size()) fail("expected a value");
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      const int inner = parse_sum();
      if (!consume(')')) fail("expected ')'");
      return inner;
    }
    if (c == '-') {
      ++pos_;
      return add_node({Expression::Op::neg, 0.0, parse_factor(), -1});
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      char* end = nullptr;
      const double v = std::strtod(text_.c_str() + pos_, &end);
      if (end == text_.c_str() + pos_) fail("bad number");
      pos_ = static_cast<size_t>(end - text_.c_str());
      return add_node({Expression::Op::number, v, -1, -1});
    }
    if (std::isalpha(static_cast<unsigned char>(c))) {
      size_t s = pos_;
      while (pos_ < text_.size() &&
             std::isalpha(static_cast<unsigned char>(text_[pos_])))
        ++pos_;
      const std::string name = text_.substr(s, pos_ - s);
      if (name == "t") {
        expr_->uses_[0] = true;
        return add_node({Expression::Op::var_t, 0.0, -1, -1});
      }
      if (name == "y") {
        expr_->uses_[1] = true;
        return add_node({Expression::Op::var_y, 0.0, -1, -1});
      }
      if (name == "z") {
        expr_->uses_[2] = true;
        return add_node({Expression::Op::var_z, 0.0, -1, -1});
      }
      if (name == "w") {
        expr_->uses_[3] = true;
        return add_node({Expression::Op::var_w, 0.0, -1, -1});
      }
      if (name == "min" || name == "max") {
        if (!consume('(')) fail("expected '(' after " + name);
        const int a = parse_sum();
        if (!consume(',')) fail("expected ',' in " + name);
        const int b = parse_sum();
        if (!consume(')')) fail("expected ')' closing " + name);
        return add_node({name == "min" ? Expression::Op::min2 : Expression::Op::max2,
                         0.0, a, b});
      }
      pos_ = s;
      fail("unknown identifier '" + name + "'");
    }
    fail(std::string("unexpected character '") + c + "'");
  }
};

Expression Expression::parse(const std::string& text) {
  return ExpressionParser(text).run();
}

double Expression::eval_node(int idx, double t, double y, double z, double w) const {
  const Node& n = nodes_[idx];
  switch (n.op) {
    case Op::number: return n.value;
    case Op::var_t: return t;
    case Op::var_y: return y;
    case Op::var_z: return z;
    case Op::var_w: return w;
    case Op::add: return eval_node(n.lhs, t, y, z, w) + eval_node(n.rhs, t, y, z, w);
    case Op::sub: return eval_node(n.lhs, t, y, z, w) - eval_node(n.rhs, t, y, z, w);
    case Op::mul: return eval_node(n.lhs, t, y, z, w) * eval_node(n.rhs, t, y, z, w);
    case Op::neg: return -eval_node(n.lhs, t, y, z, w);
    case Op::min2:
      return std::min(eval_node(n.lhs, t, y, z, w), eval_node(n.rhs, t, y, z, w));
    case Op::max2:
      return std::max(eval_node(n.lhs, t, y, z, w), eval_node(n.rhs, t, y, z, w));
  }
  return 0.0;
}

double Expression::eval(double t, double y, double z, double w) const {
  return eval_node(root_, t, y, z, w);
}

}  // namespace crbsde

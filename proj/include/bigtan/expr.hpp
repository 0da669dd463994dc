#pragma once

#include <cmath>
#include <cstdio>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace bigtan {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& msg, std::size_t offset)
      : Error("parse error at byte " + std::to_string(offset) + ": " + msg), offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

// Variable groups of the chart (x^i, y^i, z_i).
enum class Coord { x = 0, y = 1, z = 2 };

enum class Op { num, var, add, sub, mul, div, pow, neg, sin, cos, exp, log, sqrt };

struct Node;
using NodePtr = std::shared_ptr<const Node>;

struct Node {
  Op op;
  double value = 0.0;       // num
  Coord coord = Coord::x;   // var
  int index = 0;            // var, 0-based
  int exponent = 0;         // pow
  NodePtr a, b;
};

/// Immutable expression tree over the chart variables of a fixed base dimension m.
class Expr {
 public:
  Expr() : Expr(constant(0.0, 1)) {}
  Expr(NodePtr root, int m) : root_(std::move(root)), m_(m) {}

  static Expr constant(double v, int m) {
    auto n = std::make_shared<Node>();
    n->op = Op::num;
    n->value = v;
    return Expr(n, m);
  }
  static Expr variable(Coord c, int index, int m) {
    if (index < 0 || index >= m) throw Error("variable index out of range");
    auto n = std::make_shared<Node>();
    n->op = Op::var;
    n->coord = c;
    n->index = index;
    return Expr(n, m);
  }

  const Node& root() const { return *root_; }
  const NodePtr& root_ptr() const { return root_; }
  int dim() const { return m_; }

  bool is_zero_literal() const { return root_->op == Op::num && root_->value == 0.0; }

  /// True if any variable of group c occurs.
  bool depends_on(Coord c) const { return depends(*root_, c); }

  std::string str() const { return print(*root_); }

  static std::string print(const Node& n) {
    switch (n.op) {
      case Op::num: {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", std::fabs(n.value));
        std::string s(buf);
        return n.value < 0 || std::signbit(n.value) ? "(-" + s + ")" : s;
      }
      case Op::var: {
        const char c = "xyz"[static_cast<int>(n.coord)];
        return std::string(1, c) + std::to_string(n.index + 1);
      }
      case Op::add: return "(" + print(*n.a) + "+" + print(*n.b) + ")";
      case Op::sub: return "(" + print(*n.a) + "-" + print(*n.b) + ")";
      case Op::mul: return "(" + print(*n.a) + "*" + print(*n.b) + ")";
      case Op::div: return "(" + print(*n.a) + "/" + print(*n.b) + ")";
      case Op::pow: return "(" + print(*n.a) + ")^" + std::to_string(n.exponent);
      case Op::neg: return "(-" + print(*n.a) + ")";
      default: return std::string(func_name(n.op)) + "(" + print(*n.a) + ")";
    }
  }

  static const char* func_name(Op op) {
    switch (op) {
      case Op::sin: return "sin";
      case Op::cos: return "cos";
      case Op::exp: return "exp";
      case Op::log: return "log";
      case Op::sqrt: return "sqrt";
      default: return "?";
    }
  }

 private:
  static bool depends(const Node& n, Coord c) {
    if (n.op == Op::var) return n.coord == c;
    if (n.a && depends(*n.a, c)) return true;
    if (n.b && depends(*n.b, c)) return true;
    return false;
  }

  NodePtr root_;
  int m_;
};

namespace detail {

inline NodePtr make_node(Op op, NodePtr a, NodePtr b = nullptr) {
  auto n = std::make_shared<Node>();
  n->op = op;
  n->a = std::move(a);
  n->b = std::move(b);
  return n;
}

class Parser {
 public:
  Parser(std::string_view text, int m) : s_(text), m_(m) {}

  NodePtr parse() {
    NodePtr e = expr();
    skip_ws();
    if (pos_ != s_.size()) fail("unexpected character '" + std::string(1, s_[pos_]) + "'");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, pos_); }

  void skip_ws() {
    while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t' || s_[pos_] == '\n' || s_[pos_] == '\r'))
      ++pos_;
  }
  char peek() {
    skip_ws();
    return pos_ < s_.size() ? s_[pos_] : '\0';
  }

  NodePtr expr() {
    NodePtr lhs = term();
    for (char c = peek(); c == '+' || c == '-'; c = peek()) {
      ++pos_;
      lhs = make_node(c == '+' ? Op::add : Op::sub, lhs, term());
    }
    return lhs;
  }

  NodePtr term() {
    NodePtr lhs = factor();
    for (char c = peek(); c == '*' || c == '/'; c = peek()) {
      ++pos_;
      lhs = make_node(c == '*' ? Op::mul : Op::div, lhs, factor());
    }
    return lhs;
  }

  NodePtr factor() {
    NodePtr base = atom();
    if (peek() == '^') {
      ++pos_;
      skip_ws();
      auto n = std::make_shared<Node>();
      n->op = Op::pow;
      n->a = base;
      n->exponent = integer("integer exponent");
      return n;
    }
    return base;
  }

  int integer(const char* what) {
    const std::size_t start = pos_;
    long v = 0;
    while (pos_ < s_.size() && s_[pos_] >= '0' && s_[pos_] <= '9') {
      v = v * 10 + (s_[pos_] - '0');
      if (v > 1000000) fail(std::string(what) + " too large");
      ++pos_;
    }
    if (pos_ == start) fail(std::string("expected ") + what);
    return static_cast<int>(v);
  }

  NodePtr atom() {
    const char c = peek();
    if (c == '\0') fail("unexpected end of input");
    if (c == '-') {
      ++pos_;
      return make_node(Op::neg, atom());
    }
    if (c == '(') {
      ++pos_;
      NodePtr e = expr();
      if (peek() != ')') fail("expected ')'");
      ++pos_;
      return e;
    }
    if ((c >= '0' && c <= '9') || c == '.') return number();
    if (c == 'x' || c == 'y' || c == 'z') {
      const std::size_t start = pos_;
      ++pos_;
      if (pos_ >= s_.size() || s_[pos_] < '0' || s_[pos_] > '9') fail("expected variable index");
      const int idx = integer("variable index");
      if (idx < 1 || idx > m_) {
        pos_ = start;
        fail("variable index out of range for m=" + std::to_string(m_));
      }
      auto n = std::make_shared<Node>();
      n->op = Op::var;
      n->coord = c == 'x' ? Coord::x : (c == 'y' ? Coord::y : Coord::z);
      n->index = idx - 1;
      return n;
    }
    if (c >= 'a' && c <= 'z') {
      const std::size_t start = pos_;
      while (pos_ < s_.size() && s_[pos_] >= 'a' && s_[pos_] <= 'z') ++pos_;
      const std::string_view name = s_.substr(start, pos_ - start);
      Op op;
      if (name == "sin") op = Op::sin;
      else if (name == "cos") op = Op::cos;
      else if (name == "exp") op = Op::exp;
      else if (name == "log") op = Op::log;
      else if (name == "sqrt") op = Op::sqrt;
      else {
        pos_ = start;
        fail("unknown function '" + std::string(name) + "'");
      }
      if (peek() != '(') fail("expected '(' after function name");
      ++pos_;
      NodePtr arg = expr();
      if (peek() != ')') fail("expected ')'");
      ++pos_;
      return make_node(op, arg);
    }
    fail("unexpected character '" + std::string(1, c) + "'");
  }

  NodePtr number() {
    const std::size_t start = pos_;
    bool digits = false;
    while (pos_ < s_.size() && s_[pos_] >= '0' && s_[pos_] <= '9') ++pos_, digits = true;
    if (pos_ < s_.size() && s_[pos_] == '.') {
      ++pos_;
      while (pos_ < s_.size() && s_[pos_] >= '0' && s_[pos_] <= '9') ++pos_, digits = true;
    }
    if (!digits) fail("malformed number");
    if (pos_ < s_.size() && (s_[pos_] == 'e' || s_[pos_] == 'E')) {
      std::size_t q = pos_ + 1;
      if (q < s_.size() && (s_[q] == '+' || s_[q] == '-')) ++q;
      if (q < s_.size() && s_[q] >= '0' && s_[q] <= '9') {
        pos_ = q;
        while (pos_ < s_.size() && s_[pos_] >= '0' && s_[pos_] <= '9') ++pos_;
      }
    }
    auto n = std::make_shared<Node>();
    n->op = Op::num;
    n->value = std::stod(std::string(s_.substr(start, pos_ - start)));
    return n;
  }

  std::string_view s_;
  int m_;
  std::size_t pos_ = 0;
};

}  // namespace detail

/// Parse DSL text into an expression over base dimension m.
inline Expr parse_expr(std::string_view text, int m) {
  if (m < 1) throw Error("base dimension must be >= 1");
  return Expr(detail::Parser(text, m).parse(), m);
}

}  // namespace bigtan

#pragma once

#include <cctype>
#include <cmath>
#include <memory>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>

namespace homogflow {

/// Parser/evaluator for the small coefficient grammar: numbers, pi, y1, y2,
/// sin(..), cos(..), +, -, *, parentheses and unary minus.
class Expression {
 public:
  Expression() = default;

  static Expression parse(const std::string& text) {
    Parser p{text, 0};
    Expression e;
    e.root_ = p.parse_sum();
    p.skip_ws();
    if (p.pos != text.size())
      throw std::invalid_argument("expression: trailing input at '" +
                                  text.substr(p.pos) + "'");
    e.text_ = text;
    return e;
  }

  double eval(double y1, double y2) const {
    if (!root_) throw std::logic_error("expression: empty");
    return eval_node(*root_, y1, y2);
  }

  const std::string& text() const { return text_; }

 private:
  enum class Op { constant, var_y1, var_y2, add, sub, mul, neg, sin, cos };
  struct Node {
    Op op;
    double value = 0.0;
    std::unique_ptr<Node> a, b;
  };
  using NodePtr = std::unique_ptr<Node>;

  static double eval_node(const Node& n, double y1, double y2) {
    switch (n.op) {
      case Op::constant: return n.value;
      case Op::var_y1: return y1;
      case Op::var_y2: return y2;
      case Op::add: return eval_node(*n.a, y1, y2) + eval_node(*n.b, y1, y2);
      case Op::sub: return eval_node(*n.a, y1, y2) - eval_node(*n.b, y1, y2);
      case Op::mul: return eval_node(*n.a, y1, y2) * eval_node(*n.b, y1, y2);
      case Op::neg: return -eval_node(*n.a, y1, y2);
      case Op::sin: return std::sin(eval_node(*n.a, y1, y2));
      case Op::cos: return std::cos(eval_node(*n.a, y1, y2));
    }
    return 0.0;
  }

  struct Parser {
    const std::string& s;
    size_t pos;

    void skip_ws() {
      while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos])))
        ++pos;
    }
    bool take(char c) {
      skip_ws();
      if (pos < s.size() && s[pos] == c) {
        ++pos;
        return true;
      }
      return false;
    }
    bool take_word(const char* w) {
      skip_ws();
      size_t len = std::string(w).size();
      if (s.compare(pos, len, w) == 0) {
        pos += len;
        return true;
      }
      return false;
    }

    NodePtr parse_sum() {
      NodePtr left = parse_product();
      for (;;) {
        if (take('+')) {
          NodePtr n(new Node{Op::add});
          n->a = std::move(left);
          n->b = parse_product();
          left = std::move(n);
        } else if (take('-')) {
          NodePtr n(new Node{Op::sub});
          n->a = std::move(left);
          n->b = parse_product();
          left = std::move(n);
        } else {
          return left;
        }
      }
    }

    NodePtr parse_product() {
      NodePtr left = parse_atom();
      for (;;) {
        if (take('*')) {
          NodePtr n(new Node{Op::mul});
          n->a = std::move(left);
          n->b = parse_atom();
          left = std::move(n);
        } else {
          return left;
        }
      }
    }

    NodePtr parse_atom() {
      skip_ws();
      if (take('-')) {
        NodePtr n(new Node{Op::neg});
        n->a = parse_atom();
        return n;
      }
      if (take('(')) {
        NodePtr inner = parse_sum();
        if (!take(')')) throw std::invalid_argument("expression: missing ')'");
        return inner;
      }
      if (take_word("sin") || take_word("cos")) {
        const bool is_sin = s[pos - 3] == 's' && s[pos - 2] == 'i';
        if (!take('(')) throw std::invalid_argument("expression: expected '('");
        NodePtr n(new Node{is_sin ? Op::sin : Op::cos});
        n->a = parse_sum();
        if (!take(')')) throw std::invalid_argument("expression: missing ')'");
        return n;
      }
      if (take_word("pi"))
        return NodePtr(new Node{Op::constant, std::numbers::pi});
      if (take_word("y1")) return NodePtr(new Node{Op::var_y1});
      if (take_word("y2")) return NodePtr(new Node{Op::var_y2});
      skip_ws();
      size_t end = pos;
      while (end < s.size() &&
             (std::isdigit(static_cast<unsigned char>(s[end])) || s[end] == '.' ||
              s[end] == 'e' || s[end] == 'E' ||
              ((s[end] == '+' || s[end] == '-') && end > pos &&
               (s[end - 1] == 'e' || s[end - 1] == 'E'))))
        ++end;
      if (end == pos)
        throw std::invalid_argument("expression: unexpected input at '" +
                                    s.substr(pos) + "'");
      double v = std::stod(s.substr(pos, end - pos));
      pos = end;
      return NodePtr(new Node{Op::constant, v});
    }
  };

  NodePtr root_;
  std::string text_;
};

}  // namespace homogflow

#include "synfem/expr.hpp"

#include <cctype>
#include <cmath>
#include <numbers>
#include <sstream>
#include <unordered_map>

#include "synfem/error.hpp"

namespace synfem {

Expr::Expr(double c) : node_(std::make_shared<Node>(Node{Op::Const, c, nullptr, nullptr})) {}

Expr Expr::x() { return Expr(std::make_shared<Node>(Node{Op::X, 0.0, nullptr, nullptr})); }
Expr Expr::y() { return Expr(std::make_shared<Node>(Node{Op::Y, 0.0, nullptr, nullptr})); }

Expr Expr::make(Op op, const Expr& a, const Expr& b) {
  return Expr(std::make_shared<Node>(Node{op, 0.0, a.node_, b.node_}));
}

namespace {

double apply(Expr::Op op, double a, double b) {
  switch (op) {
    case Expr::Op::Add: return a + b;
    case Expr::Op::Neg: return -a;
    case Expr::Op::Mul: return a * b;
    case Expr::Op::Div: return a / b;
    case Expr::Op::Pow: return std::pow(a, b);
    case Expr::Op::Sin: return std::sin(a);
    case Expr::Op::Cos: return std::cos(a);
    case Expr::Op::Exp: return std::exp(a);
    case Expr::Op::Log: return std::log(a);
    case Expr::Op::Sqrt: return std::sqrt(a);
    default: return 0.0;
  }
}

}  // namespace

// Light simplification: constant folding and the 0/1 identities.
Expr operator+(const Expr& a, const Expr& b) {
  if (a.is_const() && b.is_const()) return Expr(a.value() + b.value());
  if (a.is_const(0.0)) return b;
  if (b.is_const(0.0)) return a;
  return Expr::make(Expr::Op::Add, a, b);
}

Expr operator-(const Expr& a) {
  if (a.is_const()) return Expr(-a.value());
  if (a.op() == Expr::Op::Neg) return Expr(a.node_->a);
  return Expr::make(Expr::Op::Neg, a);
}

Expr operator-(const Expr& a, const Expr& b) { return a + (-b); }

Expr operator*(const Expr& a, const Expr& b) {
  if (a.is_const() && b.is_const()) return Expr(a.value() * b.value());
  if (a.is_const(0.0) || b.is_const(0.0)) return Expr(0.0);
  if (a.is_const(1.0)) return b;
  if (b.is_const(1.0)) return a;
  if (a.is_const(-1.0)) return -b;
  if (b.is_const(-1.0)) return -a;
  return Expr::make(Expr::Op::Mul, a, b);
}

Expr operator/(const Expr& a, const Expr& b) {
  if (b.is_const(0.0)) throw Error("expression: division by constant zero");
  if (a.is_const() && b.is_const()) return Expr(a.value() / b.value());
  if (a.is_const(0.0)) return Expr(0.0);
  if (b.is_const(1.0)) return a;
  return Expr::make(Expr::Op::Div, a, b);
}

Expr pow(const Expr& a, const Expr& b) {
  if (a.is_const() && b.is_const()) return Expr(std::pow(a.value(), b.value()));
  if (b.is_const(0.0)) return Expr(1.0);
  if (b.is_const(1.0)) return a;
  return Expr::make(Expr::Op::Pow, a, b);
}

#define SYNFEM_UNARY(name, OP)                                              \
  Expr name(const Expr& a) {                                                \
    if (a.is_const()) return Expr(apply(Expr::Op::OP, a.value(), 0.0));     \
    return Expr::make(Expr::Op::OP, a);                                     \
  }
SYNFEM_UNARY(sin, Sin)
SYNFEM_UNARY(cos, Cos)
SYNFEM_UNARY(exp, Exp)
SYNFEM_UNARY(log, Log)
SYNFEM_UNARY(sqrt, Sqrt)
#undef SYNFEM_UNARY

Expr Expr::diff(int var) const {
  const Expr a = node_->a ? Expr(node_->a) : Expr();
  const Expr b = node_->b ? Expr(node_->b) : Expr();
  switch (node_->op) {
    case Op::Const: return Expr(0.0);
    case Op::X: return Expr(var == 0 ? 1.0 : 0.0);
    case Op::Y: return Expr(var == 1 ? 1.0 : 0.0);
    case Op::Add: return a.diff(var) + b.diff(var);
    case Op::Neg: return -a.diff(var);
    case Op::Mul: return a.diff(var) * b + a * b.diff(var);
    case Op::Div: return (a.diff(var) * b - a * b.diff(var)) / (b * b);
    case Op::Pow:
      if (b.is_const()) return b * pow(a, Expr(b.value() - 1.0)) * a.diff(var);
      return *this * (b.diff(var) * log(a) + b * a.diff(var) / a);
    case Op::Sin: return cos(a) * a.diff(var);
    case Op::Cos: return -(sin(a) * a.diff(var));
    case Op::Exp: return *this * a.diff(var);
    case Op::Log: return a.diff(var) / a;
    case Op::Sqrt: return a.diff(var) / (Expr(2.0) * *this);
  }
  return Expr(0.0);
}

double Expr::operator()(double x, double y) const {
  switch (node_->op) {
    case Op::Const: return node_->value;
    case Op::X: return x;
    case Op::Y: return y;
    default: break;
  }
  const double va = Expr(node_->a)(x, y);
  const double vb = node_->b ? Expr(node_->b)(x, y) : 0.0;
  return apply(node_->op, va, vb);
}

std::string Expr::str() const {
  std::ostringstream os;
  os.precision(17);
  const Expr a = node_->a ? Expr(node_->a) : Expr();
  const Expr b = node_->b ? Expr(node_->b) : Expr();
  switch (node_->op) {
    case Op::Const:
      if (node_->value < 0) {
        os << "(" << node_->value << ")";
      } else {
        os << node_->value;
      }
      break;
    case Op::X: os << "x"; break;
    case Op::Y: os << "y"; break;
    case Op::Add: os << "(" << a.str() << " + " << b.str() << ")"; break;
    case Op::Neg: os << "(-" << a.str() << ")"; break;
    case Op::Mul: os << "(" << a.str() << "*" << b.str() << ")"; break;
    case Op::Div: os << "(" << a.str() << "/" << b.str() << ")"; break;
    case Op::Pow: os << "(" << a.str() << "^" << b.str() << ")"; break;
    case Op::Sin: os << "sin(" << a.str() << ")"; break;
    case Op::Cos: os << "cos(" << a.str() << ")"; break;
    case Op::Exp: os << "exp(" << a.str() << ")"; break;
    case Op::Log: os << "log(" << a.str() << ")"; break;
    case Op::Sqrt: os << "sqrt(" << a.str() << ")"; break;
  }
  return os.str();
}

namespace {

class Parser {
 public:
  explicit Parser(const std::string& s) : s_(s) {}

  Expr parse() {
    Expr e = sum();
    skip();
    if (pos_ != s_.size()) fail("unexpected '" + std::string(1, s_[pos_]) + "'");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError("expression column " + std::to_string(pos_ + 1) + ": " + what, 1);
  }
  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  bool eat(char c) {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }
  Expr sum() {
    Expr e = product();
    while (true) {
      if (eat('+')) {
        e = e + product();
      } else if (eat('-')) {
        e = e - product();
      } else {
        return e;
      }
    }
  }
  Expr product() {
    Expr e = unary();
    while (true) {
      if (eat('*')) {
        e = e * unary();
      } else if (eat('/')) {
        e = e / unary();
      } else {
        return e;
      }
    }
  }
  Expr unary() {
    if (eat('-')) return -unary();
    if (eat('+')) return unary();
    return power();
  }
  Expr power() {
    Expr base = primary();
    if (eat('^')) return pow(base, unary());  // right associative
    return base;
  }
  Expr primary() {
    skip();
    if (pos_ >= s_.size()) fail("unexpected end of expression");
    if (eat('(')) {
      Expr e = sum();
      if (!eat(')')) fail("expected ')'");
      return e;
    }
    const char c = s_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(s_.substr(pos_), &used);
      } catch (const std::exception&) {
        fail("bad number");
      }
      pos_ += used;
      return Expr(v);
    }
    if (std::isalpha(static_cast<unsigned char>(c))) {
      std::size_t start = pos_;
      while (pos_ < s_.size() && std::isalnum(static_cast<unsigned char>(s_[pos_]))) ++pos_;
      const std::string id = s_.substr(start, pos_ - start);
      if (id == "x") return Expr::x();
      if (id == "y") return Expr::y();
      if (id == "pi") return Expr(std::numbers::pi);
      if (!eat('(')) fail("expected '(' after " + id);
      Expr arg = sum();
      if (!eat(')')) fail("expected ')'");
      if (id == "sin") return sin(arg);
      if (id == "cos") return cos(arg);
      if (id == "exp") return exp(arg);
      if (id == "log") return log(arg);
      if (id == "sqrt") return sqrt(arg);
      pos_ = start;
      fail("unknown function '" + id + "'");
    }
    fail("unexpected '" + std::string(1, c) + "'");
  }

  const std::string& s_;
  std::size_t pos_ = 0;
};

}  // namespace

Expr parse_expr(const std::string& text) { return Parser(text).parse(); }

CompiledExpr::CompiledExpr(const Expr& e) {
  std::unordered_map<const Expr::Node*, int> slot;
  // Iterative post-order to avoid deep recursion on long chains.
  std::vector<std::pair<const Expr::Node*, bool>> stack{{e.node(), false}};
  while (!stack.empty()) {
    auto [n, expanded] = stack.back();
    stack.pop_back();
    if (slot.count(n)) continue;
    if (!expanded) {
      stack.push_back({n, true});
      if (n->b) stack.push_back({n->b.get(), false});
      if (n->a) stack.push_back({n->a.get(), false});
      continue;
    }
    const int a = n->a ? slot.at(n->a.get()) : -1;
    const int b = n->b ? slot.at(n->b.get()) : -1;
    slot[n] = static_cast<int>(ops_.size());
    ops_.push_back({n->op, n->value, a, b});
  }
  regs_.resize(ops_.size());
}

double CompiledExpr::operator()(double x, double y) const {
  for (std::size_t i = 0; i < ops_.size(); ++i) {
    const Instr& in = ops_[i];
    switch (in.op) {
      case Expr::Op::Const: regs_[i] = in.value; break;
      case Expr::Op::X: regs_[i] = x; break;
      case Expr::Op::Y: regs_[i] = y; break;
      default:
        regs_[i] = apply(in.op, regs_[in.a], in.b >= 0 ? regs_[in.b] : 0.0);
    }
  }
  return regs_.back();
}

}  // namespace synfem

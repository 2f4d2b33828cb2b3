#pragma once

#include <memory>
#include <string>
#include <vector>

namespace synfem {

/// Small symbolic expression tree in the variables x and y, used to derive
/// manufactured forcing terms by exact differentiation.
class Expr {
 public:
  enum class Op { Const, X, Y, Add, Neg, Mul, Div, Pow, Sin, Cos, Exp, Log, Sqrt };

  struct Node {
    Op op;
    double value = 0.0;
    std::shared_ptr<const Node> a, b;
  };

  Expr() : Expr(0.0) {}
  Expr(double c);  // NOLINT(google-explicit-constructor): numeric literals read naturally
  static Expr x();
  static Expr y();

  Op op() const { return node_->op; }
  double value() const { return node_->value; }
  bool is_const() const { return node_->op == Op::Const; }
  bool is_const(double c) const { return is_const() && node_->value == c; }
  const Node* node() const { return node_.get(); }

  double operator()(double x, double y) const;
  std::string str() const;

  friend Expr operator+(const Expr& a, const Expr& b);
  friend Expr operator-(const Expr& a, const Expr& b);
  friend Expr operator-(const Expr& a);
  friend Expr operator*(const Expr& a, const Expr& b);
  friend Expr operator/(const Expr& a, const Expr& b);
  friend Expr pow(const Expr& a, const Expr& b);
  friend Expr sin(const Expr& a);
  friend Expr cos(const Expr& a);
  friend Expr exp(const Expr& a);
  friend Expr log(const Expr& a);
  friend Expr sqrt(const Expr& a);

  /// d/dx (var = 0) or d/dy (var = 1).
  Expr diff(int var) const;

 private:
  explicit Expr(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
  static Expr make(Op op, const Expr& a, const Expr& b = Expr());

  std::shared_ptr<const Node> node_;
};

/// Parses e.g. "sin(pi*x)*y^2 - 3". Throws ParseError with the column.
Expr parse_expr(const std::string& text);

/// Flattened evaluation tape; shared subtrees are evaluated once.
class CompiledExpr {
 public:
  CompiledExpr() = default;
  explicit CompiledExpr(const Expr& e);
  double operator()(double x, double y) const;
  int size() const { return static_cast<int>(ops_.size()); }

 private:
  struct Instr {
    Expr::Op op;
    double value;
    int a, b;
  };
  std::vector<Instr> ops_;
  mutable std::vector<double> regs_;
};

}  // namespace synfem

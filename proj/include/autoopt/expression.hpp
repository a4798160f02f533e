#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <vector>

#include "autoopt/errors.hpp"

namespace autoopt {

enum class UnaryOp : std::uint8_t { Negate, Log, Exp, Sin, Cos, Tan, Sqrt, Abs };
enum class BinaryOp : std::uint8_t { Add, Sub, Mul, Div, Pow };

/// Scalable variable families: y_p (summation index p, size P) and z_q (index q, size Q).
enum class Family : std::uint8_t { Y = 0, Z = 1 };

enum class NodeKind : std::uint8_t { Constant, Variable, FamilyMember, Unary, Binary, IndexedSum };

inline const char* unaryName(UnaryOp op) {
  switch (op) {
    case UnaryOp::Negate: return "-";
    case UnaryOp::Log: return "log";
    case UnaryOp::Exp: return "exp";
    case UnaryOp::Sin: return "sin";
    case UnaryOp::Cos: return "cos";
    case UnaryOp::Tan: return "tan";
    case UnaryOp::Sqrt: return "sqrt";
    case UnaryOp::Abs: return "abs";
  }
  return "?";
}

inline char familyIndexLetter(Family f) { return f == Family::Y ? 'p' : 'q'; }

/// Where the members of each family live in a model's variable vector.
struct FamilyLayout {
  std::array<std::size_t, 2> first{0, 0};
  std::array<std::size_t, 2> size{0, 0};

  std::size_t memberIndex(Family f, std::size_t k) const {
    return first[static_cast<int>(f)] + k;
  }
  std::size_t sizeOf(Family f) const { return size[static_cast<int>(f)]; }
};

class Expr;

namespace detail {
struct Node;
}

/// Immutable expression tree. Nodes are shared, so copies are cheap and safe
/// to hand to other threads.
class Expr {
 public:
  Expr() = default;

  static Expr constant(double value);
  static Expr variable(std::size_t index);
  static Expr familyMember(Family family);
  static Expr unary(UnaryOp op, const Expr& child);
  static Expr binary(BinaryOp op, const Expr& lhs, const Expr& rhs);
  static Expr indexedSum(Family family, const Expr& body);

  bool valid() const noexcept { return node_ != nullptr; }
  NodeKind kind() const;
  double value() const;
  std::size_t index() const;
  Family family() const;
  UnaryOp unaryOp() const;
  BinaryOp binaryOp() const;
  const Expr& child() const;
  const Expr& lhs() const;
  const Expr& rhs() const;

  bool isConstant() const { return valid() && kind() == NodeKind::Constant; }
  bool isConstant(double v) const { return isConstant() && value() == v; }

  friend bool operator==(const Expr& a, const Expr& b);

 private:
  explicit Expr(std::shared_ptr<const detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<const detail::Node> node_;
};

namespace detail {
struct Node {
  NodeKind kind = NodeKind::Constant;
  double value = 0.0;
  std::size_t index = 0;
  Family family = Family::Y;
  UnaryOp uop = UnaryOp::Negate;
  BinaryOp bop = BinaryOp::Add;
  Expr a;
  Expr b;
};

inline std::optional<double> applyUnary(UnaryOp op, double x) {
  double r = 0.0;
  switch (op) {
    case UnaryOp::Negate: r = -x; break;
    case UnaryOp::Log:
      if (!(x > 0.0)) return std::nullopt;
      r = std::log(x);
      break;
    case UnaryOp::Exp: r = std::exp(x); break;
    case UnaryOp::Sin: r = std::sin(x); break;
    case UnaryOp::Cos: r = std::cos(x); break;
    case UnaryOp::Tan: r = std::tan(x); break;
    case UnaryOp::Sqrt:
      if (x < 0.0) return std::nullopt;
      r = std::sqrt(x);
      break;
    case UnaryOp::Abs: r = std::fabs(x); break;
  }
  if (!std::isfinite(r)) return std::nullopt;
  return r;
}

inline bool isIntegral(double v) { return std::isfinite(v) && v == std::nearbyint(v); }

inline std::optional<double> applyBinary(BinaryOp op, double x, double y) {
  double r = 0.0;
  switch (op) {
    case BinaryOp::Add: r = x + y; break;
    case BinaryOp::Sub: r = x - y; break;
    case BinaryOp::Mul: r = x * y; break;
    case BinaryOp::Div:
      if (y == 0.0) return std::nullopt;
      r = x / y;
      break;
    case BinaryOp::Pow:
      if (x < 0.0 && !isIntegral(y)) return std::nullopt;
      if (x == 0.0 && y < 0.0) return std::nullopt;
      r = std::pow(x, y);
      break;
  }
  if (!std::isfinite(r)) return std::nullopt;
  return r;
}

inline const char* binaryName(BinaryOp op) {
  switch (op) {
    case BinaryOp::Add: return "add";
    case BinaryOp::Sub: return "sub";
    case BinaryOp::Mul: return "mul";
    case BinaryOp::Div: return "div";
    case BinaryOp::Pow: return "pow";
  }
  return "?";
}
}  // namespace detail

inline Expr Expr::constant(double value) {
  if (!std::isfinite(value)) throw DomainFault("constant", value);
  auto n = std::make_shared<detail::Node>();
  n->kind = NodeKind::Constant;
  n->value = value;
  return Expr(std::move(n));
}

inline Expr Expr::variable(std::size_t index) {
  auto n = std::make_shared<detail::Node>();
  n->kind = NodeKind::Variable;
  n->index = index;
  return Expr(std::move(n));
}

inline Expr Expr::familyMember(Family family) {
  auto n = std::make_shared<detail::Node>();
  n->kind = NodeKind::FamilyMember;
  n->family = family;
  return Expr(std::move(n));
}

// Constant subtrees are folded whenever the folded value is finite; faulting
// constant operations are kept so that evaluation reports them.
inline Expr Expr::unary(UnaryOp op, const Expr& child) {
  if (child.isConstant()) {
    if (auto v = detail::applyUnary(op, child.value())) return constant(*v);
  }
  auto n = std::make_shared<detail::Node>();
  n->kind = NodeKind::Unary;
  n->uop = op;
  n->a = child;
  return Expr(std::move(n));
}

inline Expr Expr::binary(BinaryOp op, const Expr& lhs, const Expr& rhs) {
  if (lhs.isConstant() && rhs.isConstant()) {
    if (auto v = detail::applyBinary(op, lhs.value(), rhs.value())) return constant(*v);
  }
  auto n = std::make_shared<detail::Node>();
  n->kind = NodeKind::Binary;
  n->bop = op;
  n->a = lhs;
  n->b = rhs;
  return Expr(std::move(n));
}

inline Expr Expr::indexedSum(Family family, const Expr& body) {
  auto n = std::make_shared<detail::Node>();
  n->kind = NodeKind::IndexedSum;
  n->family = family;
  n->a = body;
  return Expr(std::move(n));
}

inline NodeKind Expr::kind() const { return node_->kind; }
inline double Expr::value() const { return node_->value; }
inline std::size_t Expr::index() const { return node_->index; }
inline Family Expr::family() const { return node_->family; }
inline UnaryOp Expr::unaryOp() const { return node_->uop; }
inline BinaryOp Expr::binaryOp() const { return node_->bop; }
inline const Expr& Expr::child() const { return node_->a; }
inline const Expr& Expr::lhs() const { return node_->a; }
inline const Expr& Expr::rhs() const { return node_->b; }

inline bool operator==(const Expr& a, const Expr& b) {
  if (a.node_ == b.node_) return true;
  if (!a.valid() || !b.valid()) return false;
  if (a.kind() != b.kind()) return false;
  switch (a.kind()) {
    case NodeKind::Constant: return a.value() == b.value();
    case NodeKind::Variable: return a.index() == b.index();
    case NodeKind::FamilyMember: return a.family() == b.family();
    case NodeKind::Unary: return a.unaryOp() == b.unaryOp() && a.child() == b.child();
    case NodeKind::Binary:
      return a.binaryOp() == b.binaryOp() && a.lhs() == b.lhs() && a.rhs() == b.rhs();
    case NodeKind::IndexedSum: return a.family() == b.family() && a.child() == b.child();
  }
  return false;
}

// Builder sugar. Mirrors the precedence of written mathematics so that
// hand-built trees match parsed ones node for node.
inline Expr operator+(const Expr& a, const Expr& b) { return Expr::binary(BinaryOp::Add, a, b); }
inline Expr operator-(const Expr& a, const Expr& b) { return Expr::binary(BinaryOp::Sub, a, b); }
inline Expr operator*(const Expr& a, const Expr& b) { return Expr::binary(BinaryOp::Mul, a, b); }
inline Expr operator/(const Expr& a, const Expr& b) { return Expr::binary(BinaryOp::Div, a, b); }
inline Expr operator-(const Expr& a) { return Expr::unary(UnaryOp::Negate, a); }
inline Expr operator+(const Expr& a, double b) { return a + Expr::constant(b); }
inline Expr operator-(const Expr& a, double b) { return a - Expr::constant(b); }
inline Expr operator*(const Expr& a, double b) { return a * Expr::constant(b); }
inline Expr operator/(const Expr& a, double b) { return a / Expr::constant(b); }
inline Expr operator+(double a, const Expr& b) { return Expr::constant(a) + b; }
inline Expr operator-(double a, const Expr& b) { return Expr::constant(a) - b; }
inline Expr operator*(double a, const Expr& b) { return Expr::constant(a) * b; }
inline Expr operator/(double a, const Expr& b) { return Expr::constant(a) / b; }
inline Expr pow(const Expr& a, const Expr& b) { return Expr::binary(BinaryOp::Pow, a, b); }
inline Expr pow(const Expr& a, double b) { return pow(a, Expr::constant(b)); }
inline Expr log(const Expr& a) { return Expr::unary(UnaryOp::Log, a); }
inline Expr exp(const Expr& a) { return Expr::unary(UnaryOp::Exp, a); }
inline Expr sin(const Expr& a) { return Expr::unary(UnaryOp::Sin, a); }
inline Expr cos(const Expr& a) { return Expr::unary(UnaryOp::Cos, a); }
inline Expr tan(const Expr& a) { return Expr::unary(UnaryOp::Tan, a); }
inline Expr sqrt(const Expr& a) { return Expr::unary(UnaryOp::Sqrt, a); }
inline Expr abs(const Expr& a) { return Expr::unary(UnaryOp::Abs, a); }
inline Expr sum(Family f, const Expr& body) { return Expr::indexedSum(f, body); }

// ---------------------------------------------------------------------------
// Tree-walking evaluation. The compiled Tape is faster; this path is the
// reference semantics and handles unexpanded families.

struct EvalContext {
  std::span<const double> point;
  FamilyLayout layout;
  /// Member bound by an enclosing sum or a quantified constraint.
  std::array<std::optional<std::size_t>, 2> bound{};
};

inline double evaluate(const Expr& e, const EvalContext& ctx) {
  switch (e.kind()) {
    case NodeKind::Constant: return e.value();
    case NodeKind::Variable:
      if (e.index() >= ctx.point.size())
        throw IndexError("variable index " + std::to_string(e.index()) + " out of range");
      return ctx.point[e.index()];
    case NodeKind::FamilyMember: {
      const auto& k = ctx.bound[static_cast<int>(e.family())];
      if (!k) throw IndexError("family member referenced outside its index binding");
      std::size_t i = ctx.layout.memberIndex(e.family(), *k);
      if (i >= ctx.point.size()) throw IndexError("family member out of range");
      return ctx.point[i];
    }
    case NodeKind::Unary: {
      double x = evaluate(e.child(), ctx);
      auto r = detail::applyUnary(e.unaryOp(), x);
      if (!r) throw DomainFault(unaryName(e.unaryOp()), x);
      return *r;
    }
    case NodeKind::Binary: {
      double x = evaluate(e.lhs(), ctx);
      double y = evaluate(e.rhs(), ctx);
      auto r = detail::applyBinary(e.binaryOp(), x, y);
      if (!r) throw DomainFault(detail::binaryName(e.binaryOp()), e.binaryOp() == BinaryOp::Div ? y : x);
      return *r;
    }
    case NodeKind::IndexedSum: {
      EvalContext inner = ctx;
      double total = 0.0;
      for (std::size_t k = 0; k < ctx.layout.sizeOf(e.family()); ++k) {
        inner.bound[static_cast<int>(e.family())] = k;
        total += evaluate(e.child(), inner);
      }
      if (!std::isfinite(total)) throw DomainFault("sum", total);
      return total;
    }
  }
  return 0.0;
}

inline double evaluate(const Expr& e, std::span<const double> point, const FamilyLayout& layout = {}) {
  return evaluate(e, EvalContext{point, layout, {}});
}

// ---------------------------------------------------------------------------
// Structural utilities

inline void collectVariables(const Expr& e, std::set<std::size_t>& out, const FamilyLayout* layout = nullptr) {
  switch (e.kind()) {
    case NodeKind::Constant: return;
    case NodeKind::Variable: out.insert(e.index()); return;
    case NodeKind::FamilyMember:
      if (layout)
        for (std::size_t k = 0; k < layout->sizeOf(e.family()); ++k)
          out.insert(layout->memberIndex(e.family(), k));
      return;
    case NodeKind::Unary: collectVariables(e.child(), out, layout); return;
    case NodeKind::Binary:
      collectVariables(e.lhs(), out, layout);
      collectVariables(e.rhs(), out, layout);
      return;
    case NodeKind::IndexedSum: collectVariables(e.child(), out, layout); return;
  }
}

inline bool containsFamily(const Expr& e, Family f) {
  switch (e.kind()) {
    case NodeKind::FamilyMember: return e.family() == f;
    case NodeKind::Unary: return containsFamily(e.child(), f);
    case NodeKind::Binary: return containsFamily(e.lhs(), f) || containsFamily(e.rhs(), f);
    case NodeKind::IndexedSum: return containsFamily(e.child(), f);
    default: return false;
  }
}

inline bool hasFamilyConstructs(const Expr& e) {
  switch (e.kind()) {
    case NodeKind::FamilyMember:
    case NodeKind::IndexedSum: return true;
    case NodeKind::Unary: return hasFamilyConstructs(e.child());
    case NodeKind::Binary: return hasFamilyConstructs(e.lhs()) || hasFamilyConstructs(e.rhs());
    default: return false;
  }
}

/// Rebuilds the tree bottom-up, letting `leaf` replace Variable/FamilyMember
/// nodes. Constant folding is re-applied on the way up.
inline Expr transform(const Expr& e, const std::function<Expr(const Expr&)>& leaf) {
  switch (e.kind()) {
    case NodeKind::Constant: return e;
    case NodeKind::Variable:
    case NodeKind::FamilyMember: return leaf(e);
    case NodeKind::Unary: {
      Expr c = transform(e.child(), leaf);
      return c == e.child() ? e : Expr::unary(e.unaryOp(), c);
    }
    case NodeKind::Binary: {
      Expr l = transform(e.lhs(), leaf);
      Expr r = transform(e.rhs(), leaf);
      return (l == e.lhs() && r == e.rhs()) ? e : Expr::binary(e.binaryOp(), l, r);
    }
    case NodeKind::IndexedSum: {
      Expr b = transform(e.child(), leaf);
      return b == e.child() ? e : Expr::indexedSum(e.family(), b);
    }
  }
  return e;
}

/// Replaces each IndexedSum by an explicit left-nested sum over the family's
/// members and, when `bind` is set, resolves free FamilyMember nodes to that
/// member. An empty family sums to 0.
inline Expr expandFamilies(const Expr& e, const FamilyLayout& layout,
                           std::array<std::optional<std::size_t>, 2> bind = {}) {
  switch (e.kind()) {
    case NodeKind::Constant:
    case NodeKind::Variable: return e;
    case NodeKind::FamilyMember: {
      const auto& k = bind[static_cast<int>(e.family())];
      if (!k) return e;
      return Expr::variable(layout.memberIndex(e.family(), *k));
    }
    case NodeKind::Unary: return Expr::unary(e.unaryOp(), expandFamilies(e.child(), layout, bind));
    case NodeKind::Binary:
      return Expr::binary(e.binaryOp(), expandFamilies(e.lhs(), layout, bind),
                          expandFamilies(e.rhs(), layout, bind));
    case NodeKind::IndexedSum: {
      std::size_t n = layout.sizeOf(e.family());
      if (n == 0) return Expr::constant(0.0);
      Expr total;
      for (std::size_t k = 0; k < n; ++k) {
        auto inner = bind;
        inner[static_cast<int>(e.family())] = k;
        Expr term = expandFamilies(e.child(), layout, inner);
        total = total.valid() ? total + term : term;
      }
      return total;
    }
  }
  return e;
}

// ---------------------------------------------------------------------------
// Linearity analysis

namespace detail {
enum class Degree { Constant = 0, Affine = 1, Nonlinear = 2 };

inline Degree degreeOf(const Expr& e, const std::set<std::size_t>& over, const FamilyLayout* layout) {
  switch (e.kind()) {
    case NodeKind::Constant: return Degree::Constant;
    case NodeKind::Variable: return over.count(e.index()) ? Degree::Affine : Degree::Constant;
    case NodeKind::FamilyMember: {
      if (!layout) return Degree::Affine;
      for (std::size_t k = 0; k < layout->sizeOf(e.family()); ++k)
        if (over.count(layout->memberIndex(e.family(), k))) return Degree::Affine;
      return Degree::Constant;
    }
    case NodeKind::Unary: {
      Degree c = degreeOf(e.child(), over, layout);
      if (e.unaryOp() == UnaryOp::Negate || c == Degree::Constant) return c;
      return Degree::Nonlinear;
    }
    case NodeKind::IndexedSum: return degreeOf(e.child(), over, layout);
    case NodeKind::Binary: {
      Degree l = degreeOf(e.lhs(), over, layout);
      Degree r = degreeOf(e.rhs(), over, layout);
      switch (e.binaryOp()) {
        case BinaryOp::Add:
        case BinaryOp::Sub: return std::max(l, r);
        case BinaryOp::Mul:
          if (l == Degree::Constant) return r;
          if (r == Degree::Constant) return l;
          return Degree::Nonlinear;
        case BinaryOp::Div: return r == Degree::Constant ? l : Degree::Nonlinear;
        case BinaryOp::Pow:
          if (l == Degree::Constant && r == Degree::Constant) return Degree::Constant;
          if (r == Degree::Constant && e.rhs().isConstant()) {
            if (e.rhs().value() == 1.0) return l;
            if (e.rhs().value() == 0.0) return Degree::Constant;
          }
          return Degree::Nonlinear;
      }
    }
  }
  return Degree::Nonlinear;
}
}  // namespace detail

/// True iff `e` is affine in the variables of `over`, all other variables
/// being treated as constants.
inline bool isLinear(const Expr& e, const std::set<std::size_t>& over, const FamilyLayout* layout = nullptr) {
  return detail::degreeOf(e, over, layout) != detail::Degree::Nonlinear;
}

inline bool isVariableFree(const Expr& e) {
  std::set<std::size_t> vars;
  collectVariables(e, vars);
  return vars.empty() && !hasFamilyConstructs(e);
}

}  // namespace autoopt

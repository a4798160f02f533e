#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "autoopt/errors.hpp"
#include "autoopt/expression.hpp"

namespace autoopt {

/// First-order forward-mode number. Running the reverse sweep over Duals
/// seeded with a unit tangent yields one Hessian column.
struct Dual {
  double v = 0.0;
  double d = 0.0;
};

inline Dual operator+(Dual a, Dual b) { return {a.v + b.v, a.d + b.d}; }
inline Dual operator-(Dual a, Dual b) { return {a.v - b.v, a.d - b.d}; }
inline Dual operator-(Dual a) { return {-a.v, -a.d}; }
inline Dual operator*(Dual a, Dual b) { return {a.v * b.v, a.d * b.v + a.v * b.d}; }
inline Dual operator/(Dual a, Dual b) { return {a.v / b.v, (a.d * b.v - a.v * b.d) / (b.v * b.v)}; }
inline Dual& operator+=(Dual& a, Dual b) { return a = a + b; }
inline Dual log(Dual a) { return {std::log(a.v), a.d / a.v}; }
inline Dual exp(Dual a) {
  double e = std::exp(a.v);
  return {e, e * a.d};
}
inline Dual sin(Dual a) { return {std::sin(a.v), std::cos(a.v) * a.d}; }
inline Dual cos(Dual a) { return {std::cos(a.v), -std::sin(a.v) * a.d}; }
inline Dual tan(Dual a) {
  double t = std::tan(a.v);
  return {t, (1.0 + t * t) * a.d};
}
inline Dual sqrt(Dual a) {
  double s = std::sqrt(a.v);
  return {s, a.d / (2.0 * s)};
}
inline Dual fabs(Dual a) { return a.v < 0.0 ? -a : a; }
inline Dual pow(Dual a, double c) {
  double p = std::pow(a.v, c);
  double dp = c == 0.0 ? 0.0 : c * std::pow(a.v, c - 1.0);
  return {p, dp * a.d};
}
inline Dual pow(Dual a, Dual b) {
  double p = std::pow(a.v, b.v);
  double da = b.v == 0.0 ? 0.0 : b.v * std::pow(a.v, b.v - 1.0);
  double db = a.v > 0.0 ? p * std::log(a.v) : 0.0;
  return {p, da * a.d + db * b.d};
}

inline double valueOf(double x) { return x; }
inline double valueOf(const Dual& x) { return x.v; }

/// Flat post-order program compiled from an expression without family
/// constructs. Provides values, exact gradients (reverse sweep) and exact
/// Hessians (forward-over-reverse).
class Tape {
 public:
  enum class Op : std::uint8_t {
    Const, Var, Neg, Log, Exp, Sin, Cos, Tan, Sqrt, Abs,
    Add, Sub, Mul, Div, Pow, PowConst
  };

  struct Instr {
    Op op = Op::Const;
    std::uint32_t a = 0;
    std::uint32_t b = 0;
    double c = 0.0;       // constant value or constant exponent
    std::uint32_t var = 0;  // local variable slot
  };

  static Tape compile(const Expr& e) {
    if (hasFamilyConstructs(e)) throw std::invalid_argument("Tape::compile: expand families first");
    Tape t;
    std::set<std::size_t> vars;
    collectVariables(e, vars);
    t.vars_.assign(vars.begin(), vars.end());
    std::unordered_map<std::size_t, std::uint32_t> slot;
    for (std::uint32_t i = 0; i < t.vars_.size(); ++i) slot[t.vars_[i]] = i;
    t.emit(e, slot);
    return t;
  }

  /// Global indices of the variables this program reads, ascending.
  const std::vector<std::size_t>& variables() const noexcept { return vars_; }
  std::size_t size() const noexcept { return code_.size(); }

  double value(std::span<const double> x) const {
    std::vector<double> vals(code_.size());
    forward<double>(vals, [&](std::uint32_t slot) { return x[vars_[slot]]; });
    return vals.back();
  }

  /// Value and gradient; `grad[k]` is the partial w.r.t. variables()[k].
  double gradient(std::span<const double> x, std::vector<double>& grad) const {
    std::vector<double> vals(code_.size());
    forward<double>(vals, [&](std::uint32_t slot) { return x[vars_[slot]]; });
    std::vector<double> adj(code_.size(), 0.0);
    grad.assign(vars_.size(), 0.0);
    reverse<double>(vals, adj, grad);
    return vals.back();
  }

  /// Dense Hessian over variables() (local ordering), with value and gradient.
  double hessian(std::span<const double> x, std::vector<double>& grad, Eigen::MatrixXd& hess) const {
    const std::size_t k = vars_.size();
    hess.setZero(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
    grad.assign(k, 0.0);
    double value = 0.0;
    std::vector<Dual> vals(code_.size());
    std::vector<Dual> adj(code_.size());
    std::vector<Dual> g(k);
    for (std::size_t dir = 0; dir < k; ++dir) {
      forward<Dual>(vals, [&](std::uint32_t slot) {
        return Dual{x[vars_[slot]], slot == dir ? 1.0 : 0.0};
      });
      std::fill(adj.begin(), adj.end(), Dual{});
      std::fill(g.begin(), g.end(), Dual{});
      reverse<Dual>(vals, adj, g);
      for (std::size_t r = 0; r < k; ++r) {
        hess(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(dir)) = g[r].d;
        if (dir == 0) grad[r] = g[r].v;
      }
      value = vals.back().v;
    }
    if (k == 0) value = this->value(x);
    // symmetrize away rounding differences between columns
    hess = 0.5 * (hess + hess.transpose()).eval();
    return value;
  }

 private:
  std::uint32_t emit(const Expr& e, const std::unordered_map<std::size_t, std::uint32_t>& slot) {
    Instr in;
    switch (e.kind()) {
      case NodeKind::Constant:
        in.op = Op::Const;
        in.c = e.value();
        break;
      case NodeKind::Variable:
        in.op = Op::Var;
        in.var = slot.at(e.index());
        break;
      case NodeKind::Unary:
        in.a = emit(e.child(), slot);
        switch (e.unaryOp()) {
          case UnaryOp::Negate: in.op = Op::Neg; break;
          case UnaryOp::Log: in.op = Op::Log; break;
          case UnaryOp::Exp: in.op = Op::Exp; break;
          case UnaryOp::Sin: in.op = Op::Sin; break;
          case UnaryOp::Cos: in.op = Op::Cos; break;
          case UnaryOp::Tan: in.op = Op::Tan; break;
          case UnaryOp::Sqrt: in.op = Op::Sqrt; break;
          case UnaryOp::Abs: in.op = Op::Abs; break;
        }
        break;
      case NodeKind::Binary:
        if (e.binaryOp() == BinaryOp::Pow && e.rhs().isConstant()) {
          in.op = Op::PowConst;
          in.a = emit(e.lhs(), slot);
          in.c = e.rhs().value();
          break;
        }
        in.a = emit(e.lhs(), slot);
        in.b = emit(e.rhs(), slot);
        switch (e.binaryOp()) {
          case BinaryOp::Add: in.op = Op::Add; break;
          case BinaryOp::Sub: in.op = Op::Sub; break;
          case BinaryOp::Mul: in.op = Op::Mul; break;
          case BinaryOp::Div: in.op = Op::Div; break;
          case BinaryOp::Pow: in.op = Op::Pow; break;
        }
        break;
      default: throw std::logic_error("unexpanded family construct");
    }
    code_.push_back(in);
    return static_cast<std::uint32_t>(code_.size() - 1);
  }

  template <class T, class VarFn>
  void forward(std::vector<T>& v, VarFn&& varValue) const {
    using std::cos;
    using std::exp;
    using std::fabs;
    using std::log;
    using std::pow;
    using std::sin;
    using std::sqrt;
    using std::tan;
    for (std::size_t i = 0; i < code_.size(); ++i) {
      const Instr& in = code_[i];
      T r{};
      switch (in.op) {
        case Op::Const: r = T{in.c}; break;
        case Op::Var: r = varValue(in.var); break;
        case Op::Neg: r = -v[in.a]; break;
        case Op::Log:
          if (!(valueOf(v[in.a]) > 0.0)) throw DomainFault("log", valueOf(v[in.a]));
          r = log(v[in.a]);
          break;
        case Op::Exp: r = exp(v[in.a]); break;
        case Op::Sin: r = sin(v[in.a]); break;
        case Op::Cos: r = cos(v[in.a]); break;
        case Op::Tan: r = tan(v[in.a]); break;
        case Op::Sqrt:
          if (valueOf(v[in.a]) < 0.0) throw DomainFault("sqrt", valueOf(v[in.a]));
          r = sqrt(v[in.a]);
          break;
        case Op::Abs: r = fabs(v[in.a]); break;
        case Op::Add: r = v[in.a] + v[in.b]; break;
        case Op::Sub: r = v[in.a] - v[in.b]; break;
        case Op::Mul: r = v[in.a] * v[in.b]; break;
        case Op::Div:
          if (valueOf(v[in.b]) == 0.0) throw DomainFault("div", 0.0);
          r = v[in.a] / v[in.b];
          break;
        case Op::PowConst: {
          double base = valueOf(v[in.a]);
          if (base < 0.0 && !detail::isIntegral(in.c)) throw DomainFault("pow", base);
          if (base == 0.0 && in.c < 0.0) throw DomainFault("pow", base);
          r = pow(v[in.a], in.c);
          break;
        }
        case Op::Pow: {
          double base = valueOf(v[in.a]);
          double ex = valueOf(v[in.b]);
          if (base < 0.0 && !detail::isIntegral(ex)) throw DomainFault("pow", base);
          if (base == 0.0 && ex < 0.0) throw DomainFault("pow", base);
          r = pow(v[in.a], v[in.b]);
          break;
        }
      }
      if (!std::isfinite(valueOf(r))) throw DomainFault("evaluation", valueOf(r));
      v[i] = r;
    }
  }

  template <class T>
  void reverse(const std::vector<T>& v, std::vector<T>& adj, std::vector<T>& grad) const {
    using std::cos;
    using std::log;
    using std::pow;
    using std::sin;
    adj.back() = T{1.0};
    for (std::size_t i = code_.size(); i-- > 0;) {
      const Instr& in = code_[i];
      const T& w = adj[i];
      switch (in.op) {
        case Op::Const: break;
        case Op::Var: grad[in.var] += w; break;
        case Op::Neg: adj[in.a] += -w; break;
        case Op::Log: adj[in.a] += w / v[in.a]; break;
        case Op::Exp: adj[in.a] += w * v[i]; break;
        case Op::Sin: adj[in.a] += w * cos(v[in.a]); break;
        case Op::Cos: adj[in.a] += -(w * sin(v[in.a])); break;
        case Op::Tan: adj[in.a] += w * (T{1.0} + v[i] * v[i]); break;
        case Op::Sqrt:
          if (valueOf(v[i]) == 0.0) throw DomainFault("sqrt'", 0.0);
          adj[in.a] += w / (T{2.0} * v[i]);
          break;
        case Op::Abs: {
          double a = valueOf(v[in.a]);
          if (a == 0.0) throw DomainFault("abs'", 0.0);
          adj[in.a] += a > 0.0 ? w : -w;
          break;
        }
        case Op::Add:
          adj[in.a] += w;
          adj[in.b] += w;
          break;
        case Op::Sub:
          adj[in.a] += w;
          adj[in.b] += -w;
          break;
        case Op::Mul:
          adj[in.a] += w * v[in.b];
          adj[in.b] += w * v[in.a];
          break;
        case Op::Div:
          adj[in.a] += w / v[in.b];
          adj[in.b] += -(w * v[in.a] / (v[in.b] * v[in.b]));
          break;
        case Op::PowConst: {
          if (in.c == 0.0) break;
          double base = valueOf(v[in.a]);
          if (base == 0.0 && in.c < 1.0) throw DomainFault("pow'", base);
          T d = T{in.c} * pow(v[in.a], in.c - 1.0);
          if (!std::isfinite(valueOf(d))) throw DomainFault("pow'", base);
          adj[in.a] += w * d;
          break;
        }
        case Op::Pow: {
          double base = valueOf(v[in.a]);
          if (!(base > 0.0)) throw DomainFault("pow'", base);
          adj[in.a] += w * v[in.b] * pow(v[in.a], v[in.b] - T{1.0});
          adj[in.b] += w * v[i] * log(v[in.a]);
          break;
        }
      }
    }
    for (const T& gk : grad)
      if (!std::isfinite(valueOf(gk))) throw DomainFault("gradient", valueOf(gk));
  }

  std::vector<Instr> code_;
  std::vector<std::size_t> vars_;
};

inline Dual operator-(Dual a, double b) { return {a.v - b, a.d}; }

/// Dense gradient of `e` at `point` over the full variable vector.
inline std::vector<double> gradient(const Expr& e, std::span<const double> point,
                                    const FamilyLayout& layout = {}) {
  Expr flat = hasFamilyConstructs(e) ? expandFamilies(e, layout) : e;
  Tape t = Tape::compile(flat);
  std::vector<double> local;
  t.gradient(point, local);
  std::vector<double> g(point.size(), 0.0);
  for (std::size_t k = 0; k < local.size(); ++k) g[t.variables()[k]] = local[k];
  return g;
}

}  // namespace autoopt

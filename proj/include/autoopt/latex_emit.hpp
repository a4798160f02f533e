#pragma once

#include <array>
#include <cctype>
#include <sstream>
#include <string>

#include "autoopt/expr_text.hpp"
#include "autoopt/model.hpp"

namespace autoopt {

namespace detail {

/// `x10` -> `x_{10}`, `alpha` -> `\alpha`, `E` -> `E`.
inline std::string latexName(const std::string& name) {
  std::size_t d = name.size();
  while (d > 0 && std::isdigit(static_cast<unsigned char>(name[d - 1]))) --d;
  std::string base = name.substr(0, d);
  std::string digits = name.substr(d);
  if (base.size() > 1) base = "\\" + base;
  return digits.empty() ? base : base + "_{" + digits + "}";
}

class LatexPrinter {
 public:
  LatexPrinter(const ModelIR& m, std::array<std::string, 2> familyBase) : m_(m), familyBase_(std::move(familyBase)) {}

  std::string print(const Expr& e) const { return render(e, 0, false); }

 private:
  static int precedence(const Expr& e) {
    switch (e.kind()) {
      case NodeKind::Constant: return e.value() < 0.0 ? 3 : 5;
      case NodeKind::Unary: return e.unaryOp() == UnaryOp::Negate ? 3 : 5;
      case NodeKind::Binary:
        switch (e.binaryOp()) {
          case BinaryOp::Add:
          case BinaryOp::Sub: return 1;
          case BinaryOp::Mul:
          case BinaryOp::Div: return 2;
          case BinaryOp::Pow: return 4;
        }
        return 0;
      case NodeKind::IndexedSum: return 2;
      default: return 5;
    }
  }

  std::string render(const Expr& e, int required, bool rightOperand) const {
    std::string s = bare(e);
    int p = precedence(e);
    if (p < required || (rightOperand && p == 3)) return "\\left(" + s + "\\right)";
    return s;
  }

  std::string bare(const Expr& e) const {
    switch (e.kind()) {
      case NodeKind::Constant: return formatNumber(e.value());
      case NodeKind::Variable: return latexName(m_.variables.at(e.index()).name);
      case NodeKind::FamilyMember: {
        int f = static_cast<int>(e.family());
        return familyBase_[f] + "_{" + familyIndexLetter(e.family()) + "}";
      }
      case NodeKind::IndexedSum: {
        bool y = e.family() == Family::Y;
        return std::string("\\sum_{") + (y ? "p" : "q") + "=1}^{" + (y ? "P" : "Q") + "} \\left(" +
               render(e.child(), 0, false) + "\\right)";
      }
      case NodeKind::Unary: {
        const Expr& c = e.child();
        switch (e.unaryOp()) {
          case UnaryOp::Negate: return "-" + render(c, 4, false);
          case UnaryOp::Sqrt: return "\\sqrt{" + render(c, 0, false) + "}";
          case UnaryOp::Abs: return "\\left|" + render(c, 0, false) + "\\right|";
          default: return std::string("\\") + unaryName(e.unaryOp()) + "\\left(" + render(c, 0, false) + "\\right)";
        }
      }
      case NodeKind::Binary: {
        const Expr& l = e.lhs();
        const Expr& r = e.rhs();
        switch (e.binaryOp()) {
          case BinaryOp::Add: return render(l, 1, false) + " + " + render(r, 2, true);
          case BinaryOp::Sub: return render(l, 1, false) + " - " + render(r, 2, true);
          case BinaryOp::Mul: return render(l, 2, false) + " \\cdot " + render(r, 3, true);
          case BinaryOp::Div: return "\\frac{" + render(l, 0, false) + "}{" + render(r, 0, false) + "}";
          case BinaryOp::Pow: return "{" + render(l, 5, false) + "}^{" + render(r, 0, false) + "}";
        }
      }
    }
    return "";
  }

  const ModelIR& m_;
  std::array<std::string, 2> familyBase_;
};

}  // namespace detail

/// Canonical LaTeX rendering of a model. Parsing the result reproduces the
/// model (given the same family sizes).
inline std::string emitLatex(const ModelIR& m) {
  std::array<std::string, 2> base{"y", "z"};
  for (const auto& v : m.variables) {
    if (v.role == FamilyRole::Scalar) continue;
    std::string b = v.name;
    while (!b.empty() && std::isdigit(static_cast<unsigned char>(b.back()))) b.pop_back();
    base[v.role == FamilyRole::MemberOfY ? 0 : 1] = b;
  }
  detail::LatexPrinter pr(m, base);
  std::ostringstream out;
  out << (m.sense == Sense::Maximize ? "\\max" : "\\min") << " \\quad & " << pr.print(m.objective) << " \\\\\n";
  out << "\\text{s.t.} \\quad";
  bool first = true;
  auto line = [&](const std::string& s) {
    out << (first ? " & " : " \\\\\n & ") << s;
    first = false;
  };
  for (const auto& c : m.constraints) {
    std::string s = pr.print(c.body) + (c.rel == Relation::Equal ? " = 0" : " \\leq 0");
    if (c.quantifier == Quantifier::ForAllP) s += ", \\forall p";
    if (c.quantifier == Quantifier::ForAllQ) s += ", \\forall q";
    line(s);
  }
  bool familyDone[2] = {false, false};
  for (const auto& v : m.variables) {
    std::string target;
    std::string suffix;
    if (v.role == FamilyRole::Scalar) {
      target = detail::latexName(v.name);
    } else {
      int f = v.role == FamilyRole::MemberOfY ? 0 : 1;
      if (familyDone[f]) continue;
      familyDone[f] = true;
      target = base[f] + "_{" + (f == 0 ? "p" : "q") + "}";
      suffix = f == 0 ? ", \\forall p" : ", \\forall q";
    }
    if (v.domain == Domain::Binary) {
      line(target + " \\in \\{0, 1\\}" + suffix);
      continue;
    }
    bool lo = std::isfinite(v.lb), hi = std::isfinite(v.ub);
    if (lo && hi)
      line(formatNumber(v.lb) + " \\leq " + target + " \\leq " + formatNumber(v.ub) + suffix);
    else if (lo)
      line(target + " \\geq " + formatNumber(v.lb) + suffix);
    else if (hi)
      line(target + " \\leq " + formatNumber(v.ub) + suffix);
    if (v.domain == Domain::Integer) line(target + " \\quad \\text{integer}" + suffix);
  }
  if (first) out << " & ";
  out << "\n";
  return out.str();
}

}  // namespace autoopt

#pragma once

#include <cctype>
#include <charconv>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "autoopt/errors.hpp"
#include "autoopt/expression.hpp"

namespace autoopt {

/// Shortest decimal text that reads back to the same double.
inline std::string formatNumber(double v) {
  if (v == 0.0) return "0";  // also folds -0
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

enum class TextStyle {
  Grammar,  ///< model-file grammar: `^` for powers
  Script    ///< modeling-script style: `**` for powers
};

/// Renders expressions with minimal parentheses, except that compound
/// numerators of a division and negative right operands are parenthesized.
class ExprPrinter {
 public:
  using NameFn = std::function<std::string(std::size_t)>;

  ExprPrinter(NameFn names, TextStyle style, std::vector<std::string> familyBase = {"y", "z"})
      : names_(std::move(names)), style_(style), familyBase_(std::move(familyBase)) {}

  std::string print(const Expr& e) const { return render(e, 0); }

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
      default: return 5;
    }
  }

  static bool negativeLed(const Expr& e) { return precedence(e) == 3; }

  std::string render(const Expr& e, int required, bool rightOperand = false) const {
    std::string s = renderBare(e);
    int p = precedence(e);
    if (p < required || (rightOperand && p == 3)) return "(" + s + ")";
    return s;
  }

  std::string renderBare(const Expr& e) const {
    switch (e.kind()) {
      case NodeKind::Constant: return formatNumber(e.value());
      case NodeKind::Variable: return names_(e.index());
      case NodeKind::FamilyMember: {
        int f = static_cast<int>(e.family());
        return familyBase_[f] + "_" + familyIndexLetter(e.family());
      }
      case NodeKind::IndexedSum:
        return std::string("sum(") + familyIndexLetter(e.family()) + ", " + render(e.child(), 0) + ")";
      case NodeKind::Unary:
        if (e.unaryOp() == UnaryOp::Negate) return "-" + render(e.child(), 4);
        return std::string(unaryName(e.unaryOp())) + "(" + render(e.child(), 0) + ")";
      case NodeKind::Binary: {
        const Expr& l = e.lhs();
        const Expr& r = e.rhs();
        switch (e.binaryOp()) {
          case BinaryOp::Add: return render(l, 1) + " + " + render(r, 2, true);
          case BinaryOp::Sub: return render(l, 1) + " - " + render(r, 2, true);
          case BinaryOp::Mul: return render(l, 2) + "*" + render(r, 3, true);
          case BinaryOp::Div: {
            bool compound = l.kind() == NodeKind::Binary && precedence(l) <= 2;
            return (compound ? "(" + renderBare(l) + ")" : render(l, 2)) + "/" + render(r, 3, true);
          }
          case BinaryOp::Pow:
            return render(l, 5) + (style_ == TextStyle::Script ? "**" : "^") + render(r, 4, true);
        }
      }
    }
    return "?";
  }

  NameFn names_;
  TextStyle style_;
  std::vector<std::string> familyBase_;
};

// ---------------------------------------------------------------------------

/// Recursive-descent reader for the plain expression grammar: identifiers,
/// decimal literals, `+ - * / ^` (also `**`), log/exp/sin/cos/tan/sqrt/abs,
/// `sum(p, expr)` and parentheses.
class ExprReader {
 public:
  /// Maps a plain identifier to a variable reference; return nullopt for
  /// unknown names. Family members are written `<base>_p` / `<base>_q`.
  using Resolver = std::function<std::optional<Expr>(const std::string&)>;

  ExprReader(std::string_view text, Resolver resolve) : text_(text), resolve_(std::move(resolve)) {}

  /// `boundFamilies` marks families whose index is bound by the context
  /// (a quantified constraint).
  Expr parse(std::array<bool, 2> boundFamilies = {false, false}) {
    bound_ = boundFamilies;
    pos_ = 0;
    Expr e = parseSum();
    skipSpace();
    if (pos_ != text_.size()) fail("unexpected trailing input");
    return e;
  }

  std::size_t position() const { return pos_; }

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError(msg + " near '" + std::string(text_.substr(pos_, 12)) + "'", {pos_, pos_ + 1});
  }

  void skipSpace() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(std::string_view tok) {
    skipSpace();
    if (text_.substr(pos_, tok.size()) == tok) {
      pos_ += tok.size();
      return true;
    }
    return false;
  }

  char peek() {
    skipSpace();
    return pos_ < text_.size() ? text_[pos_] : '\0';
  }

  Expr parseSum() {
    Expr e = parseProduct();
    for (;;) {
      if (accept("+"))
        e = e + parseProduct();
      else if (accept("-"))
        e = e - parseProduct();
      else
        return e;
    }
  }

  Expr parseProduct() {
    Expr e = parseUnary();
    for (;;) {
      skipSpace();
      if (text_.substr(pos_, 2) == "**") return e;  // handled by parsePower
      if (accept("*"))
        e = e * parseUnary();
      else if (accept("/"))
        e = e / parseUnary();
      else
        return e;
    }
  }

  Expr parseUnary() {
    if (accept("-")) return -parseUnary();
    if (accept("+")) return parseUnary();
    return parsePower();
  }

  Expr parsePower() {
    Expr base = parseAtom();
    if (accept("^") || accept("**")) return pow(base, parseUnaryExponent());
    return base;
  }

  Expr parseUnaryExponent() {
    if (accept("-")) return -parseUnaryExponent();
    return parsePower();
  }

  Expr parseAtom() {
    char c = peek();
    if (c == '(') {
      ++pos_;
      Expr e = parseSum();
      if (!accept(")")) fail("expected ')'");
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parseNumber();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::string id = parseIdentifier();
      static const std::pair<const char*, UnaryOp> funcs[] = {
          {"log", UnaryOp::Log}, {"exp", UnaryOp::Exp},   {"sin", UnaryOp::Sin}, {"cos", UnaryOp::Cos},
          {"tan", UnaryOp::Tan}, {"sqrt", UnaryOp::Sqrt}, {"abs", UnaryOp::Abs}};
      if (peek() == '(') {
        for (const auto& [name, op] : funcs) {
          if (id == name) {
            ++pos_;
            Expr arg = parseSum();
            if (!accept(")")) fail("expected ')'");
            return Expr::unary(op, arg);
          }
        }
        if (id == "sum") {
          ++pos_;
          skipSpace();
          std::string idx = parseIdentifier();
          if (idx != "p" && idx != "q") fail("sum index must be p or q");
          if (!accept(",")) fail("expected ','");
          Family f = idx == "p" ? Family::Y : Family::Z;
          auto saved = bound_;
          bound_[static_cast<int>(f)] = true;
          Expr body = parseSum();
          bound_ = saved;
          if (!accept(")")) fail("expected ')'");
          return sum(f, body);
        }
        fail("unknown function '" + id + "'");
      }
      if (id.size() > 2 && id[id.size() - 2] == '_') {
        char letter = id.back();
        if (letter == 'p' && bound_[0]) return Expr::familyMember(Family::Y);
        if (letter == 'q' && bound_[1]) return Expr::familyMember(Family::Z);
      }
      if (auto v = resolve_(id)) return *v;
      fail("unknown identifier '" + id + "'");
    }
    fail("unexpected character");
  }

  std::string parseIdentifier() {
    std::size_t start = pos_;
    while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) ++pos_;
    return std::string(text_.substr(start, pos_ - start));
  }

  Expr parseNumber() {
    double v = 0.0;
    auto res = std::from_chars(text_.data() + pos_, text_.data() + text_.size(), v);
    if (res.ec != std::errc()) fail("bad number");
    pos_ = static_cast<std::size_t>(res.ptr - text_.data());
    return Expr::constant(v);
  }

  std::string_view text_;
  Resolver resolve_;
  std::size_t pos_ = 0;
  std::array<bool, 2> bound_{false, false};
};

}  // namespace autoopt

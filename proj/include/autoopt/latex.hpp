#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "autoopt/errors.hpp"
#include "autoopt/expression.hpp"
#include "autoopt/latex_tokens.hpp"
#include "autoopt/model.hpp"

namespace autoopt {

/// Scalar variable names in order of first appearance.
class SymbolTable {
 public:
  explicit SymbolTable(bool allowNew = true) : allowNew_(allowNew) {}

  std::optional<std::size_t> find(const std::string& name) const {
    auto it = std::find(names_.begin(), names_.end(), name);
    if (it == names_.end()) return std::nullopt;
    return static_cast<std::size_t>(it - names_.begin());
  }

  /// Returns the index of `name`, registering it when allowed.
  std::optional<std::size_t> resolve(const std::string& name) {
    if (auto i = find(name)) return i;
    if (!allowNew_) return std::nullopt;
    names_.push_back(name);
    return names_.size() - 1;
  }

  const std::vector<std::string>& names() const { return names_; }
  std::size_t size() const { return names_.size(); }

 private:
  bool allowNew_;
  std::vector<std::string> names_;
};

struct ParseOptions {
  std::size_t P = 0;
  std::size_t Q = 0;
  std::string name;
};

struct ParseResult {
  ModelIR model;
  ParseDiagnostics diagnostics;
};

namespace detail {

using TokenVec = std::vector<Token>;

inline bool isGreek(std::string_view n) {
  static constexpr std::string_view greek[] = {"alpha", "beta",  "gamma", "delta", "epsilon", "varepsilon",
                                               "zeta",  "eta",   "theta", "lambda", "mu",     "nu",
                                               "xi",    "rho",   "sigma", "tau",   "phi",     "varphi",
                                               "chi",   "psi",   "omega"};
  return std::find(std::begin(greek), std::end(greek), n) != std::end(greek);
}

inline std::optional<UnaryOp> functionCommand(std::string_view n) {
  if (n == "log" || n == "ln") return UnaryOp::Log;
  if (n == "exp") return UnaryOp::Exp;
  if (n == "sin") return UnaryOp::Sin;
  if (n == "cos") return UnaryOp::Cos;
  if (n == "tan") return UnaryOp::Tan;
  return std::nullopt;
}

inline std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

inline std::string trimmed(std::string s) {
  auto notSpace = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), notSpace));
  s.erase(std::find_if(s.rbegin(), s.rend(), notSpace).base(), s.end());
  return s;
}

inline bool isOpen(const Token& t) {
  return t.isSymbol("(") || t.isSymbol("[") || t.isSymbol("{") || t.isCommand("{");
}
inline bool isClose(const Token& t) {
  return t.isSymbol(")") || t.isSymbol("]") || t.isSymbol("}") || t.isCommand("}");
}

inline std::optional<WrittenRelation> relationOf(const Token& t) {
  if (t.kind == TokenKind::Command) {
    if (t.text == "leq" || t.text == "le" || t.text == "leqslant" || t.text == "lt") return WrittenRelation::LessEqual;
    if (t.text == "geq" || t.text == "ge" || t.text == "geqslant" || t.text == "gt") return WrittenRelation::GreaterEqual;
    return std::nullopt;
  }
  if (t.isSymbol("=")) return WrittenRelation::Equal;
  if (t.isSymbol("<")) return WrittenRelation::LessEqual;
  if (t.isSymbol(">")) return WrittenRelation::GreaterEqual;
  return std::nullopt;
}

inline SourceSpan spanOf(const TokenVec& t) {
  if (t.empty()) return {};
  return {t.front().span.begin, t.back().span.end};
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

/// Drops layout-only tokens and unwraps font commands.
inline TokenVec stripDecorations(const TokenVec& in, ParseDiagnostics& diag) {
  TokenVec out;
  auto skipGroup = [&](std::size_t i) {
    // i at '{'; returns index after the matching '}'
    int depth = 0;
    for (; i < in.size(); ++i) {
      if (in[i].isSymbol("{")) ++depth;
      if (in[i].isSymbol("}") && --depth == 0) return i + 1;
    }
    return i;
  };
  std::vector<int> unwrapDepth;  // brace depths at which a font group closes
  int depth = 0;
  for (std::size_t i = 0; i < in.size(); ++i) {
    const Token& t = in[i];
    if (t.kind == TokenKind::Command) {
      const std::string& c = t.text;
      if (c == "quad" || c == "qquad" || c == "," || c == ";" || c == "!" || c == " " || c == "left" ||
          c == "right" || c == "displaystyle" || c == "nonumber" || c == "notag" || c == "limits") {
        continue;
      }
      if (c == "hspace" || c == "vspace" || c == "label") {
        if (i + 1 < in.size() && in[i + 1].isSymbol("{")) i = skipGroup(i + 1) - 1;
        continue;
      }
      if ((c == "mathrm" || c == "mathit" || c == "mathbf" || c == "boldsymbol" || c == "mathsf" ||
           c == "operatorname") &&
          i + 1 < in.size() && in[i + 1].isSymbol("{")) {
        ++i;
        ++depth;
        unwrapDepth.push_back(depth);
        continue;
      }
    }
    if (t.isSymbol("{")) {
      if (i + 1 < in.size() && in[i + 1].isSymbol("}")) {
        ++i;  // empty group
        continue;
      }
      ++depth;
    } else if (t.isSymbol("}")) {
      if (!unwrapDepth.empty() && unwrapDepth.back() == depth) {
        unwrapDepth.pop_back();
        --depth;
        continue;
      }
      --depth;
    } else if (t.kind == TokenKind::TextBlock) {
      std::string content = lower(trimmed(t.text));
      static const std::set<std::string> meaningful = {
          "s.t.", "s.t", "st", "st.", "subject to", "subject to:", "such that", "min", "max", "minimize",
          "maximize", "minimise", "maximise", "minimize:", "maximize:", "integer", "integers", "w.r.t.", "wrt",
          "w.r.t", "s.t.:", "and", "for all", ""};
      if (!meaningful.count(content)) {
        diag.warn(t.span, "ignored text '" + t.text + "'");
        continue;
      }
    }
    out.push_back(t);
  }
  return out;
}

/// Expression parser over a token slice.
class LatexExprParser {
 public:
  struct Context {
    SymbolTable* symbols = nullptr;
    std::map<char, int> indexEnv;              // concrete indices (i = 3)
    std::map<char, Family> familyEnv;          // symbolic family indices (p -> y)
    std::array<std::string, 2>* familyBase = nullptr;
  };

  LatexExprParser(TokenVec toks, Context ctx) : t_(std::move(toks)), ctx_(std::move(ctx)) {}

  Expr parseAll() {
    if (t_.empty()) throw ParseError("empty expression", {});
    Expr e = parseExpr();
    if (pos_ < t_.size()) fail("unexpected token '" + t_[pos_].text + "'");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& m) const {
    SourceSpan s = pos_ < t_.size() ? t_[pos_].span : (t_.empty() ? SourceSpan{} : SourceSpan{t_.back().span.end, t_.back().span.end});
    throw ParseError(m, s);
  }

  bool atEnd() const { return pos_ >= t_.size(); }
  const Token& cur() const { return t_[pos_]; }
  bool peekSymbol(std::string_view s) const { return !atEnd() && cur().isSymbol(s); }
  bool peekCommand(std::string_view s) const { return !atEnd() && cur().isCommand(s); }

  void expectSymbol(std::string_view s) {
    if (!peekSymbol(s)) fail("expected '" + std::string(s) + "'");
    ++pos_;
  }

  Expr parseExpr() {
    Expr e = parseTerm();
    for (;;) {
      if (peekSymbol("+")) {
        ++pos_;
        e = e + parseTerm();
      } else if (peekSymbol("-")) {
        ++pos_;
        e = e - parseTerm();
      } else {
        return e;
      }
    }
  }

  bool startsFactor() const {
    if (atEnd()) return false;
    const Token& t = cur();
    switch (t.kind) {
      case TokenKind::Number: return true;
      case TokenKind::Identifier: return !isKeyword(t.text);
      case TokenKind::Symbol: return t.text == "(" || t.text == "[" || t.text == "{";
      case TokenKind::Command:
        return t.text == "frac" || t.text == "dfrac" || t.text == "tfrac" || t.text == "sqrt" || t.text == "pi" ||
               t.text == "sum" || t.text == "{" || functionCommand(t.text) || isGreek(t.text);
      default: return false;
    }
  }

  static bool isKeyword(const std::string& s) {
    std::string l = lower(s);
    return l == "integer" || l == "integers" || l == "for" || l == "all" || l == "and";
  }

  // term := ['-'|'+'] power (('*'|'/'|'\cdot'|'\times') power | power)*
  Expr parseTerm() {
    Expr e;
    if (peekSymbol("-")) {
      ++pos_;
      e = -parsePower();
    } else if (peekSymbol("+")) {
      ++pos_;
      e = parsePower();
    } else {
      e = parsePower();
    }
    for (;;) {
      if (peekSymbol("*") || peekCommand("cdot") || peekCommand("times")) {
        ++pos_;
        e = e * parsePower();
      } else if (peekSymbol("/")) {
        ++pos_;
        e = e / parsePower();
      } else if (startsFactor()) {
        e = e * parsePower();
      } else {
        return e;
      }
    }
  }

  Expr parsePower() {
    Expr base = parsePrimary();
    if (peekSymbol("^")) {
      ++pos_;
      Expr ex = parseScript();
      return pow(base, ex);
    }
    return base;
  }

  // Superscript argument: braced group or a single token (one digit).
  Expr parseScript() {
    if (atEnd()) fail("missing exponent");
    if (peekSymbol("{")) return parseGroup();
    if (cur().kind == TokenKind::Number) {
      std::string text = cur().text;
      if (text.size() > 1) {
        t_[pos_].text = text.substr(1);
        return Expr::constant(text[0] - '0');
      }
      ++pos_;
      return Expr::constant(std::stod(text));
    }
    if (peekSymbol("-")) {
      ++pos_;
      return -parseScript();
    }
    return parsePrimary();
  }

  Expr parseGroup() {
    const Token& open = cur();
    std::string close = open.isSymbol("(") ? ")" : open.isSymbol("[") ? "]" : "}";
    bool commandBrace = open.isCommand("{");
    ++pos_;
    Expr e = parseExpr();
    if (commandBrace) {
      if (!peekCommand("}")) fail("expected '\\}'");
      ++pos_;
    } else {
      if (!peekSymbol(close)) fail("unbalanced group: expected '" + close + "'");
      ++pos_;
    }
    return e;
  }

  // Subscript text after '_': braced tokens or a single character.
  struct Subscript {
    std::string text;
    std::optional<Family> family;
  };

  Subscript parseSubscript() {
    Subscript s;
    if (atEnd()) fail("missing subscript");
    auto piece = [&](const Token& tok, bool single) {
      if (tok.kind == TokenKind::Number) {
        if (single && tok.text.size() > 1) {
          s.text += tok.text[0];
          t_[pos_].text = tok.text.substr(1);
          return false;
        }
        s.text += tok.text;
        return true;
      }
      if (tok.kind == TokenKind::Identifier) {
        std::string letters = single ? tok.text.substr(0, 1) : tok.text;
        for (char ch : letters) {
          if (auto it = ctx_.indexEnv.find(ch); it != ctx_.indexEnv.end()) {
            s.text += std::to_string(it->second);
          } else if (auto ft = ctx_.familyEnv.find(ch); ft != ctx_.familyEnv.end() && letters.size() == 1) {
            s.family = ft->second;
            s.text += ch;
          } else {
            s.text += ch;
          }
        }
        if (single && tok.text.size() > 1) {
          t_[pos_].text = tok.text.substr(1);
          return false;
        }
        return true;
      }
      fail("unsupported subscript");
    };
    if (peekSymbol("{")) {
      ++pos_;
      while (!atEnd() && !peekSymbol("}")) {
        if (!piece(cur(), false)) break;
        ++pos_;
      }
      expectSymbol("}");
    } else if (piece(cur(), true)) {
      ++pos_;
    }
    if (s.family && s.text.size() != 1) s.family.reset();
    return s;
  }

  Expr variableNamed(const std::string& name, const SourceSpan& span) {
    auto idx = ctx_.symbols->resolve(name);
    if (!idx) throw ParseError("unknown variable '" + name + "'", span);
    return Expr::variable(*idx);
  }

  Expr familyMemberOf(Family f, const std::string& base, const SourceSpan& span) {
    auto& slot = (*ctx_.familyBase)[static_cast<int>(f)];
    if (slot.empty()) slot = base;
    if (slot != base)
      throw ParseError("family index used with two bases '" + slot + "' and '" + base + "'", span);
    return Expr::familyMember(f);
  }

  // Function argument: parenthesized or braced group, else a product chain.
  Expr parseFunctionArgument() {
    if (atEnd()) fail("missing function argument");
    if (peekSymbol("(") || peekSymbol("{") || peekSymbol("[")) return parseGroup();
    return parseTerm();
  }

  Expr parseSum() {
    SourceSpan at = cur().span;
    ++pos_;  // \sum
    if (!peekSymbol("_")) fail("\\sum needs a lower limit");
    ++pos_;
    char letter = 0;
    long lo = 0;
    auto readLower = [&](bool braced) {
      if (atEnd() || cur().kind != TokenKind::Identifier || cur().text.size() != 1) fail("bad summation index");
      letter = cur().text[0];
      ++pos_;
      if (!peekSymbol("=")) {
        if (!braced) fail("bad summation lower limit");
        lo = 1;
        return;
      }
      ++pos_;
      if (atEnd() || cur().kind != TokenKind::Number) fail("summation lower limit must be a number");
      lo = std::stol(cur().text);
      ++pos_;
    };
    if (peekSymbol("{")) {
      ++pos_;
      readLower(true);
      expectSymbol("}");
    } else {
      readLower(false);
    }
    if (!peekSymbol("^")) fail("\\sum needs an upper limit");
    ++pos_;
    std::optional<long> hi;
    std::optional<Family> fam;
    auto readUpper = [&](const Token& tok) {
      if (tok.kind == TokenKind::Number) {
        hi = std::stol(tok.text);
      } else if (tok.kind == TokenKind::Identifier && (tok.text == "P" || tok.text == "Q")) {
        fam = tok.text == "P" ? Family::Y : Family::Z;
      } else {
        fail("unsupported summation upper limit");
      }
    };
    if (peekSymbol("{")) {
      ++pos_;
      if (atEnd()) fail("missing upper limit");
      readUpper(cur());
      ++pos_;
      expectSymbol("}");
    } else {
      if (atEnd()) fail("missing upper limit");
      const Token tok = cur();
      if (tok.kind == TokenKind::Number && tok.text.size() > 1 && tok.text.find('.') == std::string::npos) {
        hi = tok.text[0] - '0';
        t_[pos_].text = tok.text.substr(1);
      } else {
        readUpper(tok);
        ++pos_;
      }
    }
    if (fam) {
      if (lo != 1) throw ParseError("family sums must start at 1", at);
      auto saved = ctx_.familyEnv;
      ctx_.familyEnv[letter] = *fam;
      Expr body = parseTerm();
      ctx_.familyEnv = saved;
      return sum(*fam, body);
    }
    if (*hi < lo) return Expr::constant(0.0);
    const std::size_t bodyStart = pos_;
    auto savedTokens = t_;
    auto saved = ctx_.indexEnv;
    Expr total;
    std::size_t bodyEnd = pos_;
    for (long k = lo; k <= *hi; ++k) {
      t_ = savedTokens;
      pos_ = bodyStart;
      ctx_.indexEnv[letter] = static_cast<int>(k);
      Expr term = parseTerm();
      total = total.valid() ? total + term : term;
      bodyEnd = pos_;
    }
    ctx_.indexEnv = saved;
    pos_ = bodyEnd;
    return total;
  }

  Expr parsePrimary() {
    if (atEnd()) fail("unexpected end of expression");
    const Token tok = cur();
    switch (tok.kind) {
      case TokenKind::Number: {
        ++pos_;
        return Expr::constant(std::stod(tok.text));
      }
      case TokenKind::Identifier: {
        if (isKeyword(tok.text)) fail("unexpected keyword '" + tok.text + "'");
        std::string run = tok.text;
        if (run == "log" || run == "ln" || run == "exp" || run == "sin" || run == "cos" || run == "tan" ||
            run == "sqrt") {
          ++pos_;
          Expr arg = parseFunctionArgument();
          return run == "sqrt" ? sqrt(arg) : Expr::unary(*functionCommand(run), arg);
        }
        // Otherwise a letter run is a product of single-letter variables.
        if (run.size() > 1) {
          t_[pos_].text = run.substr(1);
          t_[pos_].span.begin += 1;
          return letterVariable(std::string(1, run[0]), {tok.span.begin, tok.span.begin + 1}, false);
        }
        ++pos_;
        return letterVariable(run, tok.span, true);
      }
      case TokenKind::Symbol:
        if (tok.text == "(" || tok.text == "[" || tok.text == "{") return parseGroup();
        if (tok.text == "|") {
          ++pos_;
          Expr e = parseExpr();
          expectSymbol("|");
          return abs(e);
        }
        fail("unexpected '" + tok.text + "'");
      case TokenKind::Command: {
        const std::string& c = tok.text;
        if (c == "{") return parseGroup();
        if (c == "pi") {
          ++pos_;
          return Expr::constant(std::numbers::pi);
        }
        if (c == "frac" || c == "dfrac" || c == "tfrac") {
          ++pos_;
          if (!peekSymbol("{")) fail("\\frac needs braced arguments");
          Expr num = parseGroup();
          if (!peekSymbol("{")) fail("\\frac needs braced arguments");
          Expr den = parseGroup();
          return num / den;
        }
        if (c == "sqrt") {
          ++pos_;
          std::optional<Expr> degree;
          if (peekSymbol("[")) degree = parseGroup();
          Expr arg = parseFunctionArgument();
          if (degree) return pow(arg, 1.0 / *degree);
          return sqrt(arg);
        }
        if (auto op = functionCommand(c)) {
          ++pos_;
          return Expr::unary(*op, parseFunctionArgument());
        }
        if (c == "sum") return parseSum();
        if (isGreek(c)) {
          ++pos_;
          return named(c, tok.span);
        }
        if (c == "lvert") {
          ++pos_;
          Expr e = parseExpr();
          if (!peekCommand("rvert")) fail("expected \\rvert");
          ++pos_;
          return abs(e);
        }
        fail("unsupported command \\" + c);
      }
      case TokenKind::AlignmentMarker:
      case TokenKind::TextBlock: fail("unexpected layout token");
    }
    fail("unexpected token");
  }

  // Variable or e^{...} for a single letter; handles an optional subscript.
  Expr letterVariable(const std::string& letter, SourceSpan span, bool consumed) {
    if (!consumed) {
      // remaining letters stay in the stream and multiply by juxtaposition
      return named(letter, span);
    }
    if (letter == "e" && peekSymbol("^")) {
      ++pos_;
      return exp(parseScript());
    }
    return named(letter, span);
  }

  Expr named(const std::string& base, SourceSpan span) {
    if (base.size() == 1 && !peekSymbol("_"))
      if (auto it = ctx_.indexEnv.find(base[0]); it != ctx_.indexEnv.end()) return Expr::constant(it->second);
    if (peekSymbol("_")) {
      ++pos_;
      Subscript s = parseSubscript();
      if (s.family) return familyMemberOf(*s.family, base, span);
      return variableNamed(base + s.text, span);
    }
    return variableNamed(base, span);
  }

  TokenVec t_;
  Context ctx_;
  std::size_t pos_ = 0;
};

// ---------------------------------------------------------------------------

class LatexModelParser {
 public:
  LatexModelParser(std::string_view src, const ParseOptions& opt) : src_(src), opt_(opt) {}

  ParseResult run() {
    TokenVec raw = tokenize(src_, &diag_);
    rejectUnsupported(raw);
    toks_ = stripDecorations(raw, diag_);
    parseStructure();
    return {assemble(), diag_};
  }

 private:
  struct ScalarInfo {
    double lb = -kInf;
    double ub = kInf;
    Domain domain = Domain::Continuous;
    bool explicitLower = false;
  };
  struct FamilyInfo {
    double lb = -kInf;
    double ub = kInf;
    Domain domain = Domain::Continuous;
    bool explicitLower = false;
  };

  [[noreturn]] void fail(const std::string& m, SourceSpan s) { throw ParseError(m, s); }

  void rejectUnsupported(const TokenVec& raw) {
    for (std::size_t i = 0; i < raw.size(); ++i) {
      const Token& t = raw[i];
      bool argPrefix = t.isCommand("arg") && i + 1 < raw.size() &&
                       (raw[i + 1].isCommand("min") || raw[i + 1].isCommand("max"));
      if (t.isCommand("argmin") || t.isCommand("argmax") || argPrefix)
        fail("unsupported model class: multi-level formulation", t.span);
      if (t.isCommand("mathbb") && i + 2 < raw.size() && raw[i + 2].is(TokenKind::Identifier, "E"))
        fail("unsupported model class: expectation (uncertainty) notation", t.span);
      if (t.isCommand("Pr")) fail("unsupported model class: probabilistic notation", t.span);
      if (t.isCommand("begin") && i + 2 < raw.size()) {
        std::string env = raw[i + 2].text;
        if (env.find("matrix") != std::string::npos || env == "array")
          fail("unsupported model class: vector or matrix form", t.span);
      }
    }
  }

  static bool isSenseWord(const std::string& w, Sense& s) {
    std::string l = lower(trimmed(w));
    if (!l.empty() && l.back() == ':') l.pop_back();
    if (l == "min" || l == "minimize" || l == "minimise") {
      s = Sense::Minimize;
      return true;
    }
    if (l == "max" || l == "maximize" || l == "maximise") {
      s = Sense::Maximize;
      return true;
    }
    return false;
  }

  bool senseAt(std::size_t i, Sense& s) const {
    const Token& t = toks_[i];
    if (t.kind == TokenKind::Command && (t.text == "min" || t.text == "max")) return isSenseWord(t.text, s);
    if (t.kind == TokenKind::TextBlock || t.kind == TokenKind::Identifier) return isSenseWord(t.text, s);
    return false;
  }

  // Length of a separator starting at i, or 0.
  std::size_t separatorAt(std::size_t i) const {
    const Token& t = toks_[i];
    if (t.kind == TokenKind::TextBlock) {
      std::string l = lower(trimmed(t.text));
      if (!l.empty() && l.back() == ':') l.pop_back();
      if (l == "s.t." || l == "s.t" || l == "st" || l == "st." || l == "subject to" || l == "such that") return 1;
      return 0;
    }
    if (t.kind != TokenKind::Identifier) return 0;
    bool lineStart = i == 0 || toks_[i - 1].kind == TokenKind::AlignmentMarker;
    if (!lineStart) return 0;
    std::string l = lower(t.text);
    if (l == "st") return 1;
    if (l == "subject" && i + 1 < toks_.size() && lower(toks_[i + 1].text) == "to") return 2;
    if (l == "s" && i + 3 < toks_.size() && toks_[i + 1].isSymbol(".") && lower(toks_[i + 2].text) == "t" &&
        toks_[i + 3].isSymbol("."))
      return 4;
    return 0;
  }

  bool wrtAt(std::size_t i) const {
    const Token& t = toks_[i];
    if (t.kind != TokenKind::TextBlock) return false;
    std::string l = lower(trimmed(t.text));
    return l == "w.r.t." || l == "wrt" || l == "w.r.t";
  }

  void parseStructure() {
    // Sense keyword.
    std::optional<std::size_t> senseIdx;
    std::size_t senseCount = 0;
    for (std::size_t i = 0; i < toks_.size(); ++i) {
      Sense s;
      if (senseAt(i, s)) {
        if (!senseIdx) {
          senseIdx = i;
          sense_ = s;
        }
        ++senseCount;
      }
    }
    if (!senseIdx) fail("no objective: missing min/max keyword", spanOf(toks_));
    if (senseCount > 1) fail("unsupported model class: multiple objectives or levels", toks_[*senseIdx].span);
    std::size_t i = *senseIdx + 1;
    if (toks_[*senseIdx].kind == TokenKind::Command && i < toks_.size() && toks_[i].isSymbol("_")) {
      ++i;
      if (i < toks_.size() && toks_[i].isSymbol("{")) {
        int depth = 0;
        for (; i < toks_.size(); ++i) {
          if (toks_[i].isSymbol("{")) ++depth;
          if (toks_[i].isSymbol("}") && --depth == 0) break;
        }
      }
      ++i;
    }
    // Objective runs up to the separator.
    TokenVec objective;
    std::size_t sepLen = 0;
    for (; i < toks_.size(); ++i) {
      if ((sepLen = separatorAt(i)) != 0) break;
      if (wrtAt(i)) {
        while (i + 1 < toks_.size() && !toks_[i + 1].is(TokenKind::AlignmentMarker, "\\\\") && !separatorAt(i + 1))
          ++i;
        continue;
      }
      if (toks_[i].kind == TokenKind::AlignmentMarker) continue;
      objective.push_back(toks_[i]);
    }
    stripTrailingPunctuation(objective);
    stripFunctionPrefix(objective, false);
    if (objective.empty()) fail("no objective expression", toks_[*senseIdx].span);
    rejectMultiObjective(objective);
    objective_ = parseExpression(objective, {}, {});

    // Constraint statements.
    std::vector<TokenVec> statements;
    TokenVec current;
    int depth = 0;
    auto flush = [&] {
      stripTrailingPunctuation(current);
      if (!current.empty()) statements.push_back(current);
      current.clear();
    };
    for (i += sepLen; i < toks_.size(); ++i) {
      const Token& t = toks_[i];
      if (isOpen(t)) ++depth;
      if (isClose(t)) --depth;
      if (depth <= 0 && (t.is(TokenKind::AlignmentMarker, "\\\\") || t.isSymbol(";"))) {
        flush();
        depth = 0;
        continue;
      }
      if (t.kind == TokenKind::AlignmentMarker) continue;
      current.push_back(t);
    }
    flush();
    for (auto& st : statements) processStatement(st);
  }

  void rejectMultiObjective(const TokenVec& obj) {
    int depth = 0;
    for (const auto& t : obj) {
      if (isOpen(t)) ++depth;
      if (isClose(t)) --depth;
      if (t.isSymbol(",") && depth <= 1 && (depth == 0 || isOpen(obj.front())))
        fail("unsupported model class: multi-objective", t.span);
    }
  }

  static void stripTrailingPunctuation(TokenVec& t) {
    while (!t.empty() && (t.back().isSymbol(".") || t.back().isSymbol(",") || t.back().isSymbol(":"))) t.pop_back();
    while (!t.empty() && (t.front().isSymbol(",") || t.front().isSymbol(":"))) t.erase(t.begin());
  }

  // Removes `f(x_1, x_2) =` / `g_1(x) =` / `F(x)=` prefixes.
  static void stripFunctionPrefix(TokenVec& t, bool requireMoreRelations) {
    std::size_t i = 0;
    if (t.size() < 5 || t[0].kind != TokenKind::Identifier || t[0].text.size() != 1) return;
    i = 1;
    if (t[i].isSymbol("_")) {
      ++i;
      if (i < t.size() && t[i].isSymbol("{")) {
        while (i < t.size() && !t[i].isSymbol("}")) ++i;
      }
      ++i;
    }
    if (i >= t.size() || !t[i].isSymbol("(")) return;
    std::size_t j = i + 1;
    for (; j < t.size() && !t[j].isSymbol(")"); ++j) {
      const Token& a = t[j];
      bool ok = a.kind == TokenKind::Identifier || a.kind == TokenKind::Number || a.isSymbol(",") ||
                a.isSymbol("_") || a.isSymbol("{") || a.isSymbol("}");
      if (!ok) return;
    }
    if (j + 1 >= t.size() || !t[j + 1].isSymbol("=")) return;
    if (requireMoreRelations) {
      bool more = false;
      for (std::size_t k = j + 2; k < t.size(); ++k)
        if (relationOf(t[k])) more = true;
      if (!more) return;
    }
    t.erase(t.begin(), t.begin() + static_cast<std::ptrdiff_t>(j + 2));
  }

  Expr parseExpression(const TokenVec& t, const std::map<char, int>& env, const std::map<char, Family>& fam) {
    LatexExprParser::Context ctx;
    ctx.symbols = &symbols_;
    ctx.indexEnv = env;
    ctx.familyEnv = fam;
    ctx.familyBase = &familyBase_;
    return LatexExprParser(t, ctx).parseAll();
  }

  struct IndexRange {
    char letter = 0;
    std::vector<int> values;
  };

  // Finds and removes a trailing index specification such as
  // `(i = 1, \ldots, 6)` or `, i = 1, 2`.
  std::optional<IndexRange> extractIndexRange(TokenVec& t) {
    for (std::size_t k = 0; k + 2 < t.size(); ++k) {
      const Token& id = t[k];
      if (id.kind != TokenKind::Identifier || id.text.size() != 1 || !t[k + 1].isSymbol("=")) continue;
      char letter = id.text[0];
      if (letter != 'i' && letter != 'j' && letter != 'k') continue;
      bool paren = k > 0 && t[k - 1].isSymbol("(");
      std::size_t end = k + 2;
      std::vector<std::string> items;
      for (; end < t.size(); ++end) {
        const Token& a = t[end];
        if (a.kind == TokenKind::Number) {
          items.push_back(a.text);
        } else if (a.isCommand("ldots") || a.isCommand("dots") || a.isCommand("cdots")) {
          items.push_back("...");
        } else if (a.isSymbol(",")) {
          continue;
        } else {
          break;
        }
      }
      if (paren) {
        if (end >= t.size() || !t[end].isSymbol(")") || end + 1 != t.size()) continue;
      } else if (end != t.size()) {
        continue;
      }
      if (items.empty()) continue;
      IndexRange r;
      r.letter = letter;
      for (std::size_t m = 0; m < items.size(); ++m) {
        if (items[m] == "...") {
          if (m == 0 || m + 1 >= items.size()) fail("malformed index range", id.span);
          int from = std::stoi(items[m - 1]) + 1;
          int to = std::stoi(items[m + 1]);
          for (int v = from; v < to; ++v) r.values.push_back(v);
        } else {
          r.values.push_back(std::stoi(items[m]));
        }
      }
      std::size_t cut = paren ? k - 1 : k;
      if (!paren && cut > 0 && t[cut - 1].isSymbol(",")) --cut;
      t.erase(t.begin() + static_cast<std::ptrdiff_t>(cut), t.end());
      stripTrailingPunctuation(t);
      return r;
    }
    return std::nullopt;
  }

  std::optional<std::pair<char, Family>> extractQuantifier(TokenVec& t) {
    for (std::size_t k = 0; k + 1 < t.size(); ++k) {
      if (!t[k].isCommand("forall")) continue;
      const Token& v = t[k + 1];
      if (v.kind != TokenKind::Identifier || v.text.size() != 1)
        fail("\\forall must name a family index", t[k].span);
      char letter = v.text[0];
      Family f;
      if (letter == 'p')
        f = Family::Y;
      else if (letter == 'q')
        f = Family::Z;
      else
        fail("\\forall index must be p or q", v.span);
      std::size_t cut = k;
      if (cut > 0 && t[cut - 1].isSymbol(",")) --cut;
      t.erase(t.begin() + static_cast<std::ptrdiff_t>(cut), t.end());
      stripTrailingPunctuation(t);
      return std::make_pair(letter, f);
    }
    return std::nullopt;
  }

  static std::vector<TokenVec> splitTopLevel(const TokenVec& t, const std::function<bool(const Token&)>& isSep,
                                             std::vector<Token>* seps = nullptr) {
    std::vector<TokenVec> parts(1);
    int depth = 0;
    for (const auto& tok : t) {
      if (isOpen(tok)) ++depth;
      if (isClose(tok)) --depth;
      if (depth == 0 && isSep(tok)) {
        if (seps) seps->push_back(tok);
        parts.emplace_back();
        continue;
      }
      parts.back().push_back(tok);
    }
    return parts;
  }

  void processStatement(TokenVec st) {
    SourceSpan span = spanOf(st);
    stripFunctionPrefix(st, true);
    auto quant = extractQuantifier(st);
    auto range = extractIndexRange(st);
    std::map<char, Family> fam;
    Quantifier q = Quantifier::None;
    if (quant) {
      fam[quant->first] = quant->second;
      q = quant->second == Family::Y ? Quantifier::ForAllP : Quantifier::ForAllQ;
    }
    if (range) {
      for (int v : range->values) processSingle(st, {{range->letter, v}}, fam, q, true, span);
    } else {
      processSingle(st, {}, fam, q, false, span);
    }
  }

  struct Target {
    std::optional<std::size_t> scalar;
    std::optional<Family> family;
  };

  std::optional<std::vector<Target>> asVariableList(const std::vector<Expr>& items) {
    std::vector<Target> out;
    for (const auto& e : items) {
      if (e.kind() == NodeKind::Variable)
        out.push_back({e.index(), std::nullopt});
      else if (e.kind() == NodeKind::FamilyMember)
        out.push_back({std::nullopt, e.family()});
      else
        return std::nullopt;
    }
    return out;
  }

  void applyBound(const Target& tg, std::optional<double> lo, std::optional<double> hi) {
    auto apply = [&](auto& info) {
      if (lo) {
        info.lb = std::max(info.lb, *lo);
        info.explicitLower = true;
      }
      if (hi) info.ub = std::min(info.ub, *hi);
    };
    if (tg.scalar) {
      scalarInfo(*tg.scalar);
      apply(scalars_[*tg.scalar]);
    } else {
      apply(families_[static_cast<int>(*tg.family)]);
    }
  }

  void applyDomain(const Target& tg, Domain d) {
    auto apply = [&](auto& info) {
      info.domain = d;
      if (d == Domain::Binary) {
        info.lb = std::max(info.lb, 0.0);
        info.ub = std::min(info.ub, 1.0);
        info.explicitLower = true;
      }
    };
    if (tg.scalar) {
      scalarInfo(*tg.scalar);
      apply(scalars_[*tg.scalar]);
    } else {
      apply(families_[static_cast<int>(*tg.family)]);
    }
  }

  ScalarInfo& scalarInfo(std::size_t i) {
    if (scalars_.size() <= i) scalars_.resize(i + 1);
    return scalars_[i];
  }

  std::vector<Expr> parseList(const TokenVec& side, const std::map<char, int>& env,
                              const std::map<char, Family>& fam) {
    std::vector<Expr> items;
    for (auto& part : splitTopLevel(side, [](const Token& t) { return t.isSymbol(","); })) {
      if (part.empty()) fail("empty list element", spanOf(side));
      items.push_back(parseExpression(part, env, fam));
    }
    return items;
  }

  void processSingle(TokenVec st, const std::map<char, int>& env, const std::map<char, Family>& fam, Quantifier q,
                     bool indexed, SourceSpan span) {
    // Domain annotations.
    for (std::size_t k = 0; k < st.size(); ++k) {
      std::string l = lower(trimmed(st[k].text));
      bool integerWord = (st[k].kind == TokenKind::TextBlock || st[k].kind == TokenKind::Identifier) &&
                         (l == "integer" || l == "integers");
      if (integerWord) {
        TokenVec vars(st.begin(), st.begin() + static_cast<std::ptrdiff_t>(k));
        if (!vars.empty() && vars.back().isSymbol(",")) vars.pop_back();
        if (vars.empty()) fail("'integer' without variables", span);
        // `x >= 0, integer`: apply the bound, then the domain to its variable side.
        std::vector<Token> rels;
        auto sides = splitTopLevel(vars, [](const Token& t) { return relationOf(t).has_value(); }, &rels);
        if (!rels.empty()) {
          processSingle(vars, env, fam, q, indexed, span);
          for (const auto& side : sides) {
            if (side.empty()) continue;
            if (auto list = asVariableList(parseList(side, env, fam))) {
              for (const auto& tg : *list) applyDomain(tg, Domain::Integer);
              return;
            }
          }
          fail("'integer' must follow a variable list", span);
        }
        auto list = asVariableList(parseList(vars, env, fam));
        if (!list) fail("'integer' must follow a variable list", span);
        for (const auto& tg : *list) applyDomain(tg, Domain::Integer);
        return;
      }
      if (st[k].isCommand("in")) {
        TokenVec vars(st.begin(), st.begin() + static_cast<std::ptrdiff_t>(k));
        TokenVec set(st.begin() + static_cast<std::ptrdiff_t>(k) + 1, st.end());
        auto list = asVariableList(parseList(vars, env, fam));
        if (!list) fail("set membership must follow a variable list", span);
        std::string setText;
        for (const auto& t : set) setText += t.text;
        Domain d;
        if (setText == "{0,1}")
          d = Domain::Binary;
        else if (setText == "mathbbZ" || setText == "mathbb{Z}")
          d = Domain::Integer;
        else if (setText == "mathbbR" || setText == "mathbb{R}")
          return;
        else
          fail("unsupported set '" + setText + "'", span);
        for (const auto& tg : *list) applyDomain(tg, d);
        return;
      }
    }
    std::vector<Token> rels;
    auto parts = splitTopLevel(st, [](const Token& t) { return relationOf(t).has_value(); }, &rels);
    if (rels.empty()) fail("statement without a relation", span);
    for (const auto& p : parts)
      if (p.empty()) fail("relation without both sides", span);
    std::vector<std::vector<Expr>> sides;
    for (const auto& p : parts) sides.push_back(parseList(p, env, fam));

    auto constantOf = [&](const std::vector<Expr>& s) -> std::optional<double> {
      if (s.size() != 1 || !isVariableFree(s[0])) return std::nullopt;
      return evaluate(s[0], std::span<const double>{});
    };

    // Two-sided bound chain: a <= vars <= b.
    if (rels.size() == 2) {
      auto r1 = *relationOf(rels[0]);
      auto r2 = *relationOf(rels[1]);
      auto a = constantOf(sides[0]);
      auto b = constantOf(sides[2]);
      auto vars = asVariableList(sides[1]);
      if (a && b && vars && r1 == r2 && r1 != WrittenRelation::Equal) {
        for (const auto& tg : *vars) {
          if (r1 == WrittenRelation::LessEqual)
            applyBound(tg, a, b);
          else
            applyBound(tg, b, a);
        }
        return;
      }
    }
    for (std::size_t k = 0; k < rels.size(); ++k) {
      WrittenRelation r = *relationOf(rels[k]);
      const auto& L = sides[k];
      const auto& R = sides[k + 1];
      if (r != WrittenRelation::Equal) {
        auto lc = constantOf(L);
        auto rc = constantOf(R);
        auto lv = asVariableList(L);
        auto rv = asVariableList(R);
        bool upper = (lv && rc && r == WrittenRelation::LessEqual) || (rv && lc && r == WrittenRelation::GreaterEqual);
        bool lowerB = (lv && rc && r == WrittenRelation::GreaterEqual) || (rv && lc && r == WrittenRelation::LessEqual);
        bool forcedConstraint = indexed && rels.size() == 1 && upper;
        if ((upper || lowerB) && !forcedConstraint) {
          const auto& vars = lv && rc ? *lv : *rv;
          double c = lv && rc ? *rc : *lc;
          for (const auto& tg : vars) {
            if (upper)
              applyBound(tg, std::nullopt, c);
            else
              applyBound(tg, c, std::nullopt);
          }
          continue;
        }
      }
      if (L.size() != 1 || R.size() != 1) fail("variable list inside a constraint", span);
      constraints_.push_back(makeConstraint(L[0], r, R[0], q));
    }
  }

  // log(v) / sqrt(v) with a bare variable argument implies v >= 0.
  void inferLogDomains(const Expr& e) {
    switch (e.kind()) {
      case NodeKind::Unary: {
        const Expr& c = e.child();
        if (e.unaryOp() == UnaryOp::Log || e.unaryOp() == UnaryOp::Sqrt) {
          const char* fn = e.unaryOp() == UnaryOp::Log ? "log" : "sqrt";
          if (c.kind() == NodeKind::Variable) {
            auto& info = scalarInfo(c.index());
            if (!info.explicitLower && info.lb < 0.0) {
              info.lb = 0.0;
              diag_.warn({}, "lower bound 0 inferred for " + symbols_.names()[c.index()] + " from " + fn);
            }
          } else if (c.kind() == NodeKind::FamilyMember) {
            auto& info = families_[static_cast<int>(c.family())];
            if (!info.explicitLower && info.lb < 0.0) info.lb = 0.0;
          }
        }
        inferLogDomains(c);
        break;
      }
      case NodeKind::Binary:
        inferLogDomains(e.lhs());
        inferLogDomains(e.rhs());
        break;
      case NodeKind::IndexedSum: inferLogDomains(e.child()); break;
      default: break;
    }
  }

  ModelIR assemble() {
    ModelIR m;
    m.name = opt_.name;
    m.sense = sense_;
    if (scalars_.size() < symbols_.size()) scalars_.resize(symbols_.size());
    inferLogDomains(objective_);
    for (const auto& c : constraints_) inferLogDomains(c.body);
    for (std::size_t i = 0; i < symbols_.size(); ++i) {
      const auto& s = scalars_[i];
      if (s.lb > s.ub) fail("empty bound interval for " + symbols_.names()[i], {});
      m.variables.push_back({symbols_.names()[i], s.lb, s.ub, s.domain, FamilyRole::Scalar});
    }
    const std::array<std::size_t, 2> sizes{opt_.P, opt_.Q};
    for (int f = 0; f < 2; ++f) {
      bool used = !familyBase_[f].empty();
      if (!used) continue;
      const auto& info = families_[f];
      for (std::size_t k = 0; k < sizes[f]; ++k) {
        std::string name = familyBase_[f] + std::to_string(k + 1);
        if (symbols_.find(name)) fail("family member " + name + " collides with a scalar variable", {});
        m.variables.push_back({name, info.lb, info.ub, info.domain,
                               f == 0 ? FamilyRole::MemberOfY : FamilyRole::MemberOfZ});
      }
      (f == 0 ? m.P : m.Q) = sizes[f];
    }
    m.objective = objective_;
    m.constraints = constraints_;
    char hash[17];
    std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(fnv1a(src_)));
    m.sourceHash = hash;
    return m;
  }

  std::string_view src_;
  ParseOptions opt_;
  ParseDiagnostics diag_;
  TokenVec toks_;
  SymbolTable symbols_;
  std::vector<ScalarInfo> scalars_;
  std::array<FamilyInfo, 2> families_{};
  std::array<std::string, 2> familyBase_{};
  Sense sense_ = Sense::Minimize;
  Expr objective_;
  std::vector<ConstraintDef> constraints_;
};

}  // namespace detail

/// Parses a LaTeX formulation into a model. Throws ParseError on failure;
/// warnings are returned alongside the model.
inline ParseResult parseModel(std::string_view latex, const ParseOptions& options = {}) {
  return detail::LatexModelParser(latex, options).run();
}

/// Parses a single LaTeX expression fragment against a symbol table.
inline Expr parseExpression(std::string_view latex, SymbolTable& symbols) {
  ParseDiagnostics diag;
  auto toks = detail::stripDecorations(tokenize(latex, &diag), diag);
  std::array<std::string, 2> bases{};
  detail::LatexExprParser::Context ctx;
  ctx.symbols = &symbols;
  ctx.familyBase = &bases;
  return detail::LatexExprParser(std::move(toks), ctx).parseAll();
}

}  // namespace autoopt

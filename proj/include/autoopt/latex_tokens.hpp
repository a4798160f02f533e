#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <string>
#include <string_view>
#include <vector>

#include "autoopt/errors.hpp"

namespace autoopt {

enum class TokenKind { Command, Identifier, Number, Symbol, AlignmentMarker, TextBlock };

struct Token {
  TokenKind kind = TokenKind::Symbol;
  std::string text;  // command name without backslash, identifier run, digits, symbol, or \text content
  SourceSpan span;

  bool is(TokenKind k, std::string_view t) const { return kind == k && text == t; }
  bool isSymbol(std::string_view t) const { return is(TokenKind::Symbol, t); }
  bool isCommand(std::string_view t) const { return is(TokenKind::Command, t); }
};

struct Diagnostic {
  SourceSpan span;
  std::string message;
};

struct ParseDiagnostics {
  std::vector<Diagnostic> warnings;
  std::vector<Diagnostic> errors;

  bool ok() const { return errors.empty(); }
  void warn(SourceSpan s, std::string m) { warnings.push_back({s, std::move(m)}); }
};

namespace detail {

inline bool isKnownCommand(std::string_view name) {
  static constexpr std::string_view known[] = {
      "min",     "max",       "text",     "textrm",    "textit",   "textbf",   "mbox",     "quad",     "qquad",
      "frac",    "dfrac",     "tfrac",    "sum",       "sqrt",     "log",      "ln",       "exp",      "sin",
      "cos",     "tan",       "leq",      "le",        "geq",      "ge",       "leqslant", "geqslant", "in",
      "forall",  "ldots",     "dots",     "cdots",     "cdot",     "times",    "pi",       "left",     "right",
      "mathrm",  "mathit",    "mathbf",   "boldsymbol","mathsf",   "hspace",   "vspace",   "displaystyle",
      "label",   "nonumber",  "notag",    "argmin",    "argmax",   "begin",    "end",      "mathbb",   "lt",
      "gt",      "neq",       "infty",    "prod",      "lvert",    "rvert",    "operatorname", "alpha", "beta",
      "gamma",   "delta",     "epsilon",  "varepsilon","zeta",     "eta",      "theta",    "lambda",   "mu",
      "nu",      "xi",        "rho",      "sigma",     "tau",      "phi",      "varphi",   "chi",      "psi",
      "omega",   "Pr",        "mathcal",  "limits",    ",",        ";",        "!",        " ",        "{",
      "}",       "|",
  };
  return std::find(std::begin(known), std::end(known), name) != std::end(known);
}

inline bool isSymbolChar(char c) {
  static constexpr std::string_view symbols = "+-*/^_=()[]{},.;<>|:!'";
  return symbols.find(c) != std::string_view::npos;
}

}  // namespace detail

/// Splits LaTeX source into tokens. Never fails: unknown commands and
/// characters are kept as tokens and reported as warnings.
inline std::vector<Token> tokenize(std::string_view src, ParseDiagnostics* diag = nullptr) {
  std::vector<Token> out;
  auto warn = [&](SourceSpan s, const std::string& m) {
    if (diag) diag->warn(s, m);
  };
  std::size_t i = 0;
  const std::size_t n = src.size();
  auto isAlpha = [](char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; };
  auto isDigit = [](char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; };
  while (i < n) {
    char c = src[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    std::size_t start = i;
    if (c == '%') {
      while (i < n && src[i] != '\n') ++i;
      continue;
    }
    if (c == '\\') {
      if (i + 1 < n && src[i + 1] == '\\') {
        out.push_back({TokenKind::AlignmentMarker, "\\\\", {start, i + 2}});
        i += 2;
        continue;
      }
      ++i;
      if (i < n && isAlpha(src[i])) {
        while (i < n && isAlpha(src[i])) ++i;
        std::string name(src.substr(start + 1, i - start - 1));
        bool textLike = name == "text" || name == "textrm" || name == "textit" || name == "textbf" || name == "mbox";
        std::size_t j = i;
        while (j < n && std::isspace(static_cast<unsigned char>(src[j]))) ++j;
        if (textLike && j < n && src[j] == '{') {
          int depth = 0;
          std::size_t k = j;
          for (; k < n; ++k) {
            if (src[k] == '{') ++depth;
            if (src[k] == '}' && --depth == 0) break;
          }
          std::string content(src.substr(j + 1, std::min(k, n) - j - 1));
          i = std::min(k + 1, n);
          out.push_back({TokenKind::TextBlock, std::move(content), {start, i}});
          continue;
        }
        if (!detail::isKnownCommand(name)) warn({start, i}, "unknown command \\" + name);
        out.push_back({TokenKind::Command, std::move(name), {start, i}});
        continue;
      }
      if (i < n) {
        std::string name(1, src[i]);
        ++i;
        if (!detail::isKnownCommand(name)) warn({start, i}, "unknown command \\" + name);
        out.push_back({TokenKind::Command, std::move(name), {start, i}});
      } else {
        warn({start, i}, "dangling backslash");
        out.push_back({TokenKind::Symbol, "\\", {start, i}});
      }
      continue;
    }
    if (isDigit(c) || (c == '.' && i + 1 < n && isDigit(src[i + 1]))) {
      while (i < n && isDigit(src[i])) ++i;
      if (i + 1 < n && src[i] == '.' && isDigit(src[i + 1])) {
        ++i;
        while (i < n && isDigit(src[i])) ++i;
      }
      out.push_back({TokenKind::Number, std::string(src.substr(start, i - start)), {start, i}});
      continue;
    }
    if (isAlpha(c)) {
      while (i < n && isAlpha(src[i])) ++i;
      out.push_back({TokenKind::Identifier, std::string(src.substr(start, i - start)), {start, i}});
      continue;
    }
    if (c == '&') {
      out.push_back({TokenKind::AlignmentMarker, "&", {start, i + 1}});
      ++i;
      continue;
    }
    if (detail::isSymbolChar(c)) {
      out.push_back({TokenKind::Symbol, std::string(1, c), {start, i + 1}});
      ++i;
      continue;
    }
    // Multi-byte UTF-8 sequence or stray byte.
    std::size_t len = 1;
    auto u = static_cast<unsigned char>(c);
    if (u >= 0xF0)
      len = 4;
    else if (u >= 0xE0)
      len = 3;
    else if (u >= 0xC0)
      len = 2;
    len = std::min(len, n - i);
    std::string seq(src.substr(i, len));
    i += len;
    if (seq == "≤") {
      out.push_back({TokenKind::Command, "leq", {start, i}});
    } else if (seq == "≥") {
      out.push_back({TokenKind::Command, "geq", {start, i}});
    } else if (seq == "−") {
      out.push_back({TokenKind::Symbol, "-", {start, i}});
    } else {
      warn({start, i}, "unexpected character '" + seq + "'");
      out.push_back({TokenKind::Symbol, std::move(seq), {start, i}});
    }
  }
  return out;
}

}  // namespace autoopt

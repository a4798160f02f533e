#pragma once

#include <cctype>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include "autoopt/errors.hpp"
#include "autoopt/expr_text.hpp"
#include "autoopt/model.hpp"

namespace autoopt {

/// Renders an expression in modeling-script syntax (`**` powers, explicit
/// `*`). `names` maps variable indices to identifiers.
inline std::string emitExpression(const Expr& e, const ExprPrinter::NameFn& names) {
  return ExprPrinter(names, TextStyle::Script).print(e);
}

inline std::string emitExpression(const Expr& e) {
  return emitExpression(e, [](std::size_t i) { return "x" + std::to_string(i + 1); });
}

namespace detail {

inline std::string varDeclaration(const VariableDef& v) {
  if (v.domain == Domain::Binary) return "Var(domain=Binary)";
  std::vector<std::string> args;
  bool lo = std::isfinite(v.lb), hi = std::isfinite(v.ub);
  if (lo && hi)
    args.push_back("bounds=(" + formatNumber(v.lb) + "," + formatNumber(v.ub) + ")");
  else if (lo && v.lb == 0.0)
    args.push_back("within=NonNegativeReals");
  else if (lo)
    args.push_back("bounds=(" + formatNumber(v.lb) + ",None)");
  else if (hi)
    args.push_back("bounds=(None," + formatNumber(v.ub) + ")");
  if (v.domain == Domain::Integer) args.push_back("domain=Integers");
  std::string out = "Var(";
  for (std::size_t i = 0; i < args.size(); ++i) out += (i ? ", " : "") + args[i];
  return out + ")";
}

// Written form with a trailing constant moved to the right-hand side:
// `a - 7 <= 0` is displayed as `a <= 7`.
inline std::pair<Expr, Expr> displaySides(const ConstraintDef& c) {
  Expr lhs = c.hasWrittenForm() ? c.lhs : c.body;
  Expr rhs = c.hasWrittenForm() ? c.rhs : Expr::constant(0.0);
  if (rhs.isConstant(0.0) && lhs.kind() == NodeKind::Binary &&
      (lhs.binaryOp() == BinaryOp::Add || lhs.binaryOp() == BinaryOp::Sub) && lhs.rhs().isConstant() &&
      !lhs.lhs().isConstant()) {
    double k = lhs.rhs().value();
    return {lhs.lhs(), Expr::constant(lhs.binaryOp() == BinaryOp::Sub ? k : -k)};
  }
  return {lhs, rhs};
}

}  // namespace detail

/// Modeling-script text for a model without family constructs.
inline std::string emitScript(const ModelIR& m) {
  if (m.hasFamilyConstructs()) throw EmitError("emitScript: expand families before emission");
  auto names = [&m](std::size_t i) { return m.variables.at(i).name; };
  std::ostringstream out;
  for (const auto& v : m.variables) out << "model." << v.name << " = " << detail::varDeclaration(v) << "\n";
  out << "def objective_function(model):\n";
  out << "    return " << emitExpression(m.objective, names) << "\n";
  out << "model.obj = Objective(rule=objective_function, sense="
      << (m.sense == Sense::Maximize ? "maximize" : "minimize") << ")\n";
  std::size_t k = 0;
  for (const auto& c : m.constraints) {
    auto [lhs, rhs] = detail::displaySides(c);
    const char* rel = "<=";
    if (c.hasWrittenForm())
      rel = c.written == WrittenRelation::Equal ? "==" : c.written == WrittenRelation::GreaterEqual ? ">=" : "<=";
    else if (c.rel == Relation::Equal)
      rel = "==";
    out << "model.Constraint" << ++k << " = Constraint(expr = " << emitExpression(lhs, names) << " " << rel << " "
        << emitExpression(rhs, names) << ")\n";
  }
  return out.str();
}

/// Normal form used to compare scripts with dataset labels: escaped line
/// breaks become real ones, wrapped lines are joined, whitespace is
/// dropped except between two word characters, and objective/rule names
/// and `PositiveReals` are canonicalized.
inline std::vector<std::string> normalizeScript(std::string text) {
  // Labels with escaped line breaks use physical newlines only for wrapping.
  if (text.find("\\n") != std::string::npos) {
    for (char& c : text)
      if (c == '\n' || c == '\r') c = ' ';
    text = std::regex_replace(text, std::regex(R"(\\\\n|\\n)"), "\n");
  }
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  auto word = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; };
  while (std::getline(in, line)) {
    std::string out;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (!std::isspace(static_cast<unsigned char>(line[i]))) {
        out += line[i];
        continue;
      }
      std::size_t j = i;
      while (j < line.size() && std::isspace(static_cast<unsigned char>(line[j]))) ++j;
      if (!out.empty() && j < line.size() && word(out.back()) && word(line[j])) out += ' ';
      i = j - 1;
    }
    if (!out.empty()) lines.push_back(out);
  }
  std::string rule;
  std::smatch m;
  for (const auto& l : lines)
    if (std::regex_match(l, m, std::regex(R"(def (\w+)\(model\):)"))) rule = m[1];
  for (auto& l : lines) {
    if (!rule.empty()) l = std::regex_replace(l, std::regex("\\b" + rule + "\\b"), "objective_function");
    l = std::regex_replace(l, std::regex(R"(^model\.\w+=Objective\()"), "model.obj=Objective(");
    l = std::regex_replace(l, std::regex(R"(\bPositiveReals\b)"), "NonNegativeReals");
  }
  return lines;
}

}  // namespace autoopt

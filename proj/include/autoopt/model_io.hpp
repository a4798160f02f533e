#pragma once

#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "autoopt/errors.hpp"
#include "autoopt/expr_text.hpp"
#include "autoopt/model.hpp"

namespace autoopt {

namespace detail {

inline std::string familyBaseName(const ModelIR& m, FamilyRole role) {
  for (const auto& v : m.variables) {
    if (v.role != role) continue;
    std::string base = v.name;
    while (!base.empty() && std::isdigit(static_cast<unsigned char>(base.back()))) base.pop_back();
    return base;
  }
  return role == FamilyRole::MemberOfY ? "y" : "z";
}

inline ExprPrinter grammarPrinter(const ModelIR& m, TextStyle style = TextStyle::Grammar) {
  return ExprPrinter([&m](std::size_t i) { return m.variables.at(i).name; }, style,
                     {familyBaseName(m, FamilyRole::MemberOfY), familyBaseName(m, FamilyRole::MemberOfZ)});
}

inline const char* domainName(Domain d) {
  switch (d) {
    case Domain::Continuous: return "continuous";
    case Domain::Integer: return "integer";
    case Domain::Binary: return "binary";
  }
  return "continuous";
}

inline const char* familyName(FamilyRole r) {
  switch (r) {
    case FamilyRole::Scalar: return "";
    case FamilyRole::MemberOfY: return "y";
    case FamilyRole::MemberOfZ: return "z";
  }
  return "";
}

inline const char* relName(WrittenRelation r) {
  switch (r) {
    case WrittenRelation::LessEqual: return "<=";
    case WrittenRelation::Equal: return "=";
    case WrittenRelation::GreaterEqual: return ">=";
  }
  return "<=";
}

inline std::pair<std::size_t, std::size_t> lineColumn(std::string_view text, std::size_t offset) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < offset && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

}  // namespace detail

/// Canonical text form of a model: a JSON document with the fields name,
/// sense, P, Q, variables, objective and constraints. Infinite bounds are
/// written as null.
inline std::string serializeModel(const ModelIR& m) {
  using nlohmann::ordered_json;
  auto printer = detail::grammarPrinter(m);
  ordered_json doc;
  doc["name"] = m.name;
  doc["sense"] = m.sense == Sense::Minimize ? "min" : "max";
  doc["P"] = m.P;
  doc["Q"] = m.Q;
  ordered_json vars = ordered_json::array();
  for (const auto& v : m.variables) {
    ordered_json jv;
    jv["name"] = v.name;
    jv["lb"] = std::isfinite(v.lb) ? ordered_json(v.lb) : ordered_json(nullptr);
    jv["ub"] = std::isfinite(v.ub) ? ordered_json(v.ub) : ordered_json(nullptr);
    jv["domain"] = detail::domainName(v.domain);
    jv["family"] = detail::familyName(v.role);
    vars.push_back(std::move(jv));
  }
  doc["variables"] = std::move(vars);
  doc["objective"] = printer.print(m.objective);
  ordered_json cons = ordered_json::array();
  for (const auto& c : m.constraints) {
    ordered_json jc;
    jc["expr"] = printer.print(c.body);
    jc["rel"] = c.rel == Relation::Equal ? "=" : "<=";
    jc["forall"] = c.quantifier == Quantifier::None ? "" : (c.quantifier == Quantifier::ForAllP ? "p" : "q");
    if (c.hasWrittenForm()) {
      jc["lhs"] = printer.print(c.lhs);
      jc["written"] = detail::relName(c.written);
      jc["rhs"] = printer.print(c.rhs);
    }
    cons.push_back(std::move(jc));
  }
  doc["constraints"] = std::move(cons);
  if (!m.sourceHash.empty()) doc["source_hash"] = m.sourceHash;
  return doc.dump(2) + "\n";
}

/// Reads the canonical form (and hand-edited variants: `rel` may be ">=",
/// optional fields may be omitted).
inline ModelIR parseModelFile(std::string_view text) {
  using nlohmann::json;
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    auto [line, col] = detail::lineColumn(text, e.byte > 0 ? e.byte - 1 : 0);
    throw FormatError(e.what(), line, col);
  }
  // Locates a string value in the source for error reporting.
  auto where = [&](const std::string& needle, std::size_t offsetInValue) {
    std::string quoted = json(needle).dump();
    std::size_t at = text.find(quoted);
    if (at == std::string_view::npos) return std::pair<std::size_t, std::size_t>{0, 0};
    return detail::lineColumn(text, at + 1 + offsetInValue);
  };
  auto fail = [](const std::string& msg) -> void { throw FormatError(msg, 0, 0); };
  if (!doc.is_object()) fail("model document must be an object");

  ModelIR m;
  try {
    m.name = doc.value("name", "");
    std::string sense = doc.value("sense", "min");
    if (sense == "min" || sense == "minimize")
      m.sense = Sense::Minimize;
    else if (sense == "max" || sense == "maximize")
      m.sense = Sense::Maximize;
    else
      fail("sense must be \"min\" or \"max\"");
    m.P = doc.value("P", std::size_t{0});
    m.Q = doc.value("Q", std::size_t{0});
    m.sourceHash = doc.value("source_hash", "");
    for (const auto& jv : doc.at("variables")) {
      VariableDef v;
      v.name = jv.at("name").get<std::string>();
      v.lb = jv.contains("lb") && !jv["lb"].is_null() ? jv["lb"].get<double>() : -kInf;
      v.ub = jv.contains("ub") && !jv["ub"].is_null() ? jv["ub"].get<double>() : kInf;
      std::string d = jv.value("domain", "continuous");
      if (d == "continuous")
        v.domain = Domain::Continuous;
      else if (d == "integer")
        v.domain = Domain::Integer;
      else if (d == "binary")
        v.domain = Domain::Binary;
      else
        fail("unknown domain '" + d + "' for " + v.name);
      std::string fam = jv.value("family", "");
      if (fam.empty())
        v.role = FamilyRole::Scalar;
      else if (fam == "y")
        v.role = FamilyRole::MemberOfY;
      else if (fam == "z")
        v.role = FamilyRole::MemberOfZ;
      else
        fail("unknown family '" + fam + "' for " + v.name);
      m.variables.push_back(std::move(v));
    }
  } catch (const json::exception& e) {
    throw FormatError(e.what(), 0, 0);
  }

  auto resolve = [&m](const std::string& id) -> std::optional<Expr> {
    if (auto i = m.find(id)) return Expr::variable(*i);
    return std::nullopt;
  };
  auto readExpr = [&](const std::string& src, std::array<bool, 2> bound) {
    try {
      return ExprReader(src, resolve).parse(bound);
    } catch (const ParseError& e) {
      auto [line, col] = where(src, e.span().begin);
      throw FormatError(e.what(), line, col);
    }
  };

  try {
    m.objective = readExpr(doc.at("objective").get<std::string>(), {false, false});
    for (const auto& jc : doc.value("constraints", json::array())) {
      std::string forall = jc.value("forall", "");
      Quantifier q = Quantifier::None;
      if (forall == "p")
        q = Quantifier::ForAllP;
      else if (forall == "q")
        q = Quantifier::ForAllQ;
      else if (!forall.empty())
        fail("forall must be \"\", \"p\" or \"q\"");
      std::array<bool, 2> bound{q == Quantifier::ForAllP, q == Quantifier::ForAllQ};
      auto relOf = [&](const std::string& r) {
        if (r == "<=") return WrittenRelation::LessEqual;
        if (r == "=" || r == "==") return WrittenRelation::Equal;
        if (r == ">=") return WrittenRelation::GreaterEqual;
        fail("unknown relation '" + r + "'");
        return WrittenRelation::LessEqual;
      };
      ConstraintDef c;
      if (jc.contains("lhs") && jc.contains("rhs")) {
        c = makeConstraint(readExpr(jc["lhs"].get<std::string>(), bound),
                           relOf(jc.value("written", jc.value("rel", "<="))),
                           readExpr(jc["rhs"].get<std::string>(), bound), q);
      } else {
        Expr body = readExpr(jc.at("expr").get<std::string>(), bound);
        c = makeConstraint(body, relOf(jc.value("rel", "<=")), Expr::constant(0.0), q);
        c.lhs = Expr();
        c.rhs = Expr();
      }
      m.constraints.push_back(std::move(c));
    }
  } catch (const json::exception& e) {
    throw FormatError(e.what(), 0, 0);
  }
  try {
    m.validate();
  } catch (const std::invalid_argument& e) {
    throw FormatError(e.what(), 0, 0);
  }
  return m;
}

}  // namespace autoopt

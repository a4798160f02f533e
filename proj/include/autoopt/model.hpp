#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "autoopt/expression.hpp"
#include "autoopt/tape.hpp"

namespace autoopt {

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kConstraintTolerance = 1e-4;

enum class Sense { Minimize, Maximize };
enum class Domain { Continuous, Integer, Binary };
enum class FamilyRole { Scalar, MemberOfY, MemberOfZ };
enum class Relation { LessEqual, Equal };
/// Relation as written by the author; >= is only kept for presentation.
enum class WrittenRelation { LessEqual, Equal, GreaterEqual };
enum class Quantifier { None, ForAllP, ForAllQ };

inline Family familyOf(Quantifier q) { return q == Quantifier::ForAllQ ? Family::Z : Family::Y; }
inline Family familyOf(FamilyRole r) { return r == FamilyRole::MemberOfZ ? Family::Z : Family::Y; }

struct VariableDef {
  std::string name;
  double lb = -kInf;
  double ub = kInf;
  Domain domain = Domain::Continuous;
  FamilyRole role = FamilyRole::Scalar;

  friend bool operator==(const VariableDef&, const VariableDef&) = default;
};

/// Canonical form: body <= 0 or body = 0. The written sides are retained
/// only so that emitters can reproduce the author's layout.
struct ConstraintDef {
  Expr body;
  Relation rel = Relation::LessEqual;
  Quantifier quantifier = Quantifier::None;
  Expr lhs;
  Expr rhs;
  WrittenRelation written = WrittenRelation::LessEqual;

  bool hasWrittenForm() const { return lhs.valid() && rhs.valid(); }
};

/// Builds the canonical constraint for `lhs written rhs`.
inline ConstraintDef makeConstraint(const Expr& lhs, WrittenRelation written, const Expr& rhs,
                                    Quantifier q = Quantifier::None) {
  ConstraintDef c;
  c.quantifier = q;
  c.lhs = lhs;
  c.rhs = rhs;
  c.written = written;
  switch (written) {
    case WrittenRelation::LessEqual:
    case WrittenRelation::Equal:
      c.rel = written == WrittenRelation::Equal ? Relation::Equal : Relation::LessEqual;
      c.body = rhs.isConstant(0.0) ? lhs : lhs - rhs;
      break;
    case WrittenRelation::GreaterEqual:
      c.rel = Relation::LessEqual;
      if (rhs.isConstant(0.0))
        c.body = -lhs;
      else if (lhs.isConstant(0.0))
        c.body = rhs;
      else
        c.body = rhs - lhs;
      break;
  }
  return c;
}

struct ModelIR {
  std::string name;
  Sense sense = Sense::Minimize;
  Expr objective = Expr::constant(0.0);
  std::vector<VariableDef> variables;
  std::vector<ConstraintDef> constraints;
  std::size_t P = 0;
  std::size_t Q = 0;
  std::string sourceHash;
  /// Largest violation among constraints that became variable-free after
  /// fixing variables; > 0 flags an infeasible reduced model.
  double fixedViolation = 0.0;

  std::size_t size() const { return variables.size(); }

  FamilyLayout layout() const {
    FamilyLayout l;
    for (int f = 0; f < 2; ++f) {
      FamilyRole role = f == 0 ? FamilyRole::MemberOfY : FamilyRole::MemberOfZ;
      bool seen = false;
      for (std::size_t i = 0; i < variables.size(); ++i) {
        if (variables[i].role != role) continue;
        if (!seen) l.first[f] = i;
        seen = true;
        ++l.size[f];
      }
    }
    return l;
  }

  std::optional<std::size_t> find(const std::string& varName) const {
    for (std::size_t i = 0; i < variables.size(); ++i)
      if (variables[i].name == varName) return i;
    return std::nullopt;
  }

  bool hasFamilyConstructs() const {
    if (autoopt::hasFamilyConstructs(objective)) return true;
    for (const auto& c : constraints)
      if (c.quantifier != Quantifier::None || autoopt::hasFamilyConstructs(c.body)) return true;
    return false;
  }

  /// Checks the representation invariants; throws std::invalid_argument.
  void validate() const {
    auto fail = [](const std::string& m) { throw std::invalid_argument("invalid model: " + m); };
    for (const auto& v : variables) {
      if (std::isnan(v.lb) || std::isnan(v.ub) || v.lb > v.ub) fail("bounds of " + v.name);
      if (v.domain == Domain::Binary && (v.lb < 0.0 || v.ub > 1.0)) fail("binary bounds of " + v.name);
    }
    FamilyLayout l = layout();
    for (int f = 0; f < 2; ++f) {
      FamilyRole role = f == 0 ? FamilyRole::MemberOfY : FamilyRole::MemberOfZ;
      for (std::size_t k = 0; k < l.size[f]; ++k)
        if (variables[l.first[f] + k].role != role) fail("family members not contiguous");
    }
    if (l.size[0] != P || l.size[1] != Q) fail("family sizes disagree with member counts");
    auto checkRefs = [&](const Expr& e) {
      std::set<std::size_t> vars;
      collectVariables(e, vars);
      if (!vars.empty() && *vars.rbegin() >= variables.size()) fail("variable reference out of range");
    };
    checkRefs(objective);
    for (const auto& c : constraints) {
      checkRefs(c.body);
      if (c.quantifier == Quantifier::ForAllP && containsFamily(c.body, Family::Z))
        fail("forall-p constraint references z");
      if (c.quantifier == Quantifier::ForAllQ && containsFamily(c.body, Family::Y))
        fail("forall-q constraint references y");
    }
  }
};

// ---------------------------------------------------------------------------

/// Objective value in the model's own sense.
inline double evaluateObjective(const ModelIR& m, std::span<const double> x) {
  return evaluate(m.objective, x, m.layout());
}

/// Largest violation over constraints (max(0, body) for <=, |body| for =),
/// variable bounds and the fixed-variable infeasibility record.
inline double maxViolation(const ModelIR& m, std::span<const double> x) {
  if (x.size() != m.variables.size()) throw std::invalid_argument("maxViolation: point size mismatch");
  double worst = m.fixedViolation;
  for (std::size_t i = 0; i < x.size(); ++i) {
    worst = std::max(worst, m.variables[i].lb - x[i]);
    worst = std::max(worst, x[i] - m.variables[i].ub);
  }
  const FamilyLayout layout = m.layout();
  for (const auto& c : m.constraints) {
    auto one = [&](const EvalContext& ctx) {
      double v = evaluate(c.body, ctx);
      worst = std::max(worst, c.rel == Relation::Equal ? std::fabs(v) : v);
    };
    EvalContext ctx{x, layout, {}};
    if (c.quantifier == Quantifier::None) {
      one(ctx);
    } else {
      Family f = familyOf(c.quantifier);
      for (std::size_t k = 0; k < layout.sizeOf(f); ++k) {
        ctx.bound[static_cast<int>(f)] = k;
        one(ctx);
      }
    }
  }
  return std::max(worst, 0.0);
}

/// Same model with every IndexedSum written out and every quantified
/// constraint replicated per family member.
inline ModelIR expandModel(const ModelIR& m) {
  if (!m.hasFamilyConstructs()) return m;
  ModelIR out = m;
  const FamilyLayout layout = m.layout();
  out.objective = expandFamilies(m.objective, layout);
  out.constraints.clear();
  auto expandOne = [&](const ConstraintDef& c, std::array<std::optional<std::size_t>, 2> bind) {
    ConstraintDef d = c;
    d.quantifier = Quantifier::None;
    d.body = expandFamilies(c.body, layout, bind);
    if (c.hasWrittenForm()) {
      d.lhs = expandFamilies(c.lhs, layout, bind);
      d.rhs = expandFamilies(c.rhs, layout, bind);
    }
    out.constraints.push_back(std::move(d));
  };
  for (const auto& c : m.constraints) {
    if (c.quantifier == Quantifier::None) {
      expandOne(c, {});
      continue;
    }
    Family f = familyOf(c.quantifier);
    for (std::size_t k = 0; k < layout.sizeOf(f); ++k) {
      std::array<std::optional<std::size_t>, 2> bind{};
      bind[static_cast<int>(f)] = k;
      expandOne(c, bind);
    }
  }
  return out;
}

struct Substitution {
  ModelIR model;
  /// Original index of each variable of the reduced model.
  std::vector<std::size_t> freeIndices;
  std::vector<std::string> warnings;
};

/// Fixes the variables that have a value in `fixed` (indexed like the
/// model's variables) and returns the model over the remaining ones.
/// Out-of-bound fixed values are clamped with a warning.
inline Substitution substituteFixed(const ModelIR& model, const std::vector<std::optional<double>>& fixed) {
  if (fixed.size() != model.variables.size())
    throw std::invalid_argument("substituteFixed: assignment size mismatch");
  const ModelIR m = expandModel(model);
  Substitution s;
  std::vector<std::optional<std::size_t>> newIndex(m.variables.size());
  std::vector<double> values(m.variables.size(), 0.0);
  s.model.name = m.name;
  s.model.sense = m.sense;
  s.model.sourceHash = m.sourceHash;
  s.model.fixedViolation = m.fixedViolation;
  for (std::size_t i = 0; i < m.variables.size(); ++i) {
    const auto& v = m.variables[i];
    if (fixed[i]) {
      double val = *fixed[i];
      if (val < v.lb || val > v.ub) {
        double clamped = std::clamp(val, v.lb, v.ub);
        s.warnings.push_back("fixed value " + std::to_string(val) + " of " + v.name + " clamped to " +
                             std::to_string(clamped));
        val = clamped;
      }
      values[i] = val;
    } else {
      newIndex[i] = s.model.variables.size();
      s.freeIndices.push_back(i);
      s.model.variables.push_back(v);
      if (v.role == FamilyRole::MemberOfY) ++s.model.P;
      if (v.role == FamilyRole::MemberOfZ) ++s.model.Q;
    }
  }
  auto leaf = [&](const Expr& e) -> Expr {
    std::size_t i = e.index();
    return newIndex[i] ? Expr::variable(*newIndex[i]) : Expr::constant(values[i]);
  };
  auto substitute = [&](const Expr& e) { return transform(e, leaf); };
  s.model.objective = substitute(m.objective);
  for (const auto& c : m.constraints) {
    ConstraintDef d;
    d.rel = c.rel;
    d.body = substitute(c.body);
    if (isVariableFree(d.body)) {
      double viol;
      try {
        double v = evaluate(d.body, std::span<const double>{});
        viol = c.rel == Relation::Equal ? std::fabs(v) : std::max(v, 0.0);
      } catch (const DomainFault&) {
        viol = kInf;
      }
      s.model.fixedViolation = std::max(s.model.fixedViolation, viol);
      continue;
    }
    s.model.constraints.push_back(std::move(d));
  }
  return s;
}

/// Convenience: fixes index -> value pairs.
inline Substitution substituteFixed(const ModelIR& model, const std::map<std::size_t, double>& fixed) {
  std::vector<std::optional<double>> a(model.variables.size());
  for (const auto& [i, v] : fixed) {
    if (i >= a.size()) throw IndexError("substituteFixed: index out of range");
    a[i] = v;
  }
  return substituteFixed(model, a);
}

/// Structural comparison with variables matched by name; when `sameOrder`
/// the variable lists must also coincide position by position.
inline bool structurallyEqual(const ModelIR& a, const ModelIR& b, bool sameOrder = false,
                              std::string* why = nullptr) {
  auto no = [&](const std::string& m) {
    if (why) *why = m;
    return false;
  };
  if (a.sense != b.sense) return no("sense differs");
  if (a.P != b.P || a.Q != b.Q) return no("family sizes differ");
  if (a.variables.size() != b.variables.size()) return no("variable counts differ");
  std::vector<std::size_t> bToA(b.variables.size());
  for (std::size_t j = 0; j < b.variables.size(); ++j) {
    auto i = a.find(b.variables[j].name);
    if (!i) return no("variable " + b.variables[j].name + " missing");
    if (sameOrder && *i != j) return no("variable order differs at " + b.variables[j].name);
    if (!(a.variables[*i] == b.variables[j])) return no("variable " + b.variables[j].name + " differs");
    bToA[j] = *i;
  }
  auto remap = [&](const Expr& e) {
    return transform(e, [&](const Expr& leaf) {
      return leaf.kind() == NodeKind::Variable ? Expr::variable(bToA[leaf.index()]) : leaf;
    });
  };
  if (!(a.objective == remap(b.objective))) return no("objective differs");
  if (a.constraints.size() != b.constraints.size()) return no("constraint counts differ");
  for (std::size_t k = 0; k < a.constraints.size(); ++k) {
    const auto& ca = a.constraints[k];
    const auto& cb = b.constraints[k];
    if (ca.rel != cb.rel || ca.quantifier != cb.quantifier || !(ca.body == remap(cb.body)))
      return no("constraint " + std::to_string(k + 1) + " differs");
  }
  return true;
}

// ---------------------------------------------------------------------------

/// Flattened, tape-compiled form of a model used by the solvers. Objective
/// is minimization-oriented (negated for maximize).
struct CompiledModel {
  std::size_t n = 0;
  double senseSign = 1.0;
  Tape objective;
  std::vector<Tape> inequalities;
  std::vector<Tape> equalities;
  std::vector<double> lb;
  std::vector<double> ub;
  double fixedViolation = 0.0;

  static CompiledModel compile(const ModelIR& model) {
    const ModelIR m = expandModel(model);
    CompiledModel c;
    c.n = m.variables.size();
    c.senseSign = m.sense == Sense::Maximize ? -1.0 : 1.0;
    c.objective = Tape::compile(m.objective);
    for (const auto& con : m.constraints)
      (con.rel == Relation::Equal ? c.equalities : c.inequalities).push_back(Tape::compile(con.body));
    for (const auto& v : m.variables) {
      c.lb.push_back(v.lb);
      c.ub.push_back(v.ub);
    }
    c.fixedViolation = m.fixedViolation;
    return c;
  }

  /// Minimization-oriented objective.
  double objectiveMin(std::span<const double> x) const { return senseSign * objective.value(x); }

  double maxViolation(std::span<const double> x) const {
    double worst = fixedViolation;
    for (std::size_t i = 0; i < n; ++i) worst = std::max({worst, lb[i] - x[i], x[i] - ub[i]});
    for (const auto& t : inequalities) worst = std::max(worst, t.value(x));
    for (const auto& t : equalities) worst = std::max(worst, std::fabs(t.value(x)));
    return std::max(worst, 0.0);
  }
};

}  // namespace autoopt

#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "autoopt/errors.hpp"
#include "autoopt/ga_ops.hpp"
#include "autoopt/local_solver.hpp"
#include "autoopt/model.hpp"

namespace autoopt {

/// Level tag per variable: 0 = upper (sampled by the GA), 1 = lower
/// (completed by the local solver).
using LevelConfiguration = std::vector<int>;

/// A model with families written out, plus its compiled form.
struct Problem {
  ModelIR model;
  CompiledModel compiled;

  explicit Problem(const ModelIR& m) : model(expandModel(m)), compiled(CompiledModel::compile(model)) {}

  std::size_t size() const { return compiled.n; }
};

/// Objective (minimization-oriented) and violation of a full point.
inline Individual evaluateIndividual(const Problem& problem, std::vector<double> point) {
  Individual ind;
  ind.point = std::move(point);
  ind.evaluations = 1;
  try {
    ind.objective = problem.compiled.objectiveMin(ind.point);
    if (std::isnan(ind.objective)) ind.objective = kInf;
  } catch (const DomainFault&) {
    ind.objective = kInf;
  }
  try {
    ind.violation = problem.compiled.maxViolation(ind.point);
    if (std::isnan(ind.violation)) ind.violation = kInf;
  } catch (const DomainFault&) {
    ind.violation = kInf;
  }
  return ind;
}

namespace detail {

inline void roundIntegers(const ModelIR& m, std::vector<double>& x) {
  for (std::size_t j = 0; j < x.size(); ++j) {
    const auto& v = m.variables[j];
    if (v.domain == Domain::Continuous) continue;
    x[j] = std::clamp(std::round(x[j]), std::ceil(v.lb), std::floor(v.ub));
  }
}

}  // namespace detail

/// Fixes the upper-tagged variables of `point`, solves the lower problem
/// from the lower coordinates of `point`, and evaluates the assembled
/// point. Integer variables are relaxed during the solve and rounded after.
inline Individual completeIndividual(const Problem& problem, const LevelConfiguration& lc,
                                     const std::vector<double>& point, double tol = kConstraintTolerance) {
  const std::size_t n = problem.size();
  if (lc.size() != n || point.size() != n) throw ConfigError("completeIndividual: size mismatch");
  std::vector<std::optional<double>> fixed(n);
  for (std::size_t j = 0; j < n; ++j)
    if (lc[j] == 0) fixed[j] = point[j];
  Substitution sub = substituteFixed(problem.model, fixed);

  std::vector<double> full = point;
  for (std::size_t j = 0; j < n; ++j) full[j] = std::clamp(full[j], problem.compiled.lb[j], problem.compiled.ub[j]);
  LocalStatus status = LocalStatus::Converged;
  std::size_t evaluations = 0;
  if (!sub.freeIndices.empty()) {
    std::vector<double> start;
    for (std::size_t j : sub.freeIndices) start.push_back(full[j]);
    LocalSolveResult r = solveLocal(sub.model, start, tol);
    status = r.status;
    evaluations = r.evaluations;
    if (r.point.size() == sub.freeIndices.size())
      for (std::size_t k = 0; k < sub.freeIndices.size(); ++k) full[sub.freeIndices[k]] = r.point[k];
  }
  detail::roundIntegers(problem.model, full);
  Individual ind = evaluateIndividual(problem, std::move(full));
  ind.lowerSolveStatus = status;
  ind.evaluations += evaluations;
  return ind;
}

/// Variant taking values for the upper-tagged variables only (in variable
/// order) and a start point for the lower ones.
inline Individual completeIndividual(const Problem& problem, const LevelConfiguration& lc,
                                     const std::vector<double>& upperValues, const std::vector<double>& startPoint,
                                     double tol = kConstraintTolerance) {
  std::vector<double> point = startPoint;
  std::size_t k = 0;
  for (std::size_t j = 0; j < lc.size() && j < point.size(); ++j) {
    if (lc[j] != 0) continue;
    if (k >= upperValues.size()) throw ConfigError("completeIndividual: too few upper values");
    point[j] = upperValues[k++];
  }
  if (k != upperValues.size()) throw ConfigError("completeIndividual: too many upper values");
  return completeIndividual(problem, lc, point, tol);
}

}  // namespace autoopt

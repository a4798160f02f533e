#pragma once

#include <set>
#include <vector>

#include "autoopt/barrier.hpp"
#include "autoopt/local_result.hpp"
#include "autoopt/lp.hpp"
#include "autoopt/model.hpp"

namespace autoopt {

/// True when the objective and every constraint are affine in all variables.
inline bool isLinearModel(const ModelIR& model) {
  const ModelIR m = expandModel(model);
  std::set<std::size_t> all;
  for (std::size_t i = 0; i < m.variables.size(); ++i) all.insert(i);
  if (!isLinear(m.objective, all)) return false;
  for (const auto& c : m.constraints)
    if (!isLinear(c.body, all)) return false;
  return true;
}

/// Local solve with integers relaxed: simplex for linear models, barrier
/// method otherwise.
inline LocalSolveResult solveLocal(const ModelIR& model, const std::vector<double>& start,
                                   double tol = kConstraintTolerance) {
  if (isLinearModel(model)) return solveLP(model, start, tol);
  return solveBarrier(model, start, tol);
}

}  // namespace autoopt

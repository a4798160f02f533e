#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace autoopt {

enum class LocalStatus { Converged, IterationLimit, InfeasibleDetected, DomainFaultAbort };

inline const char* statusName(LocalStatus s) {
  switch (s) {
    case LocalStatus::Converged: return "converged";
    case LocalStatus::IterationLimit: return "iteration_limit";
    case LocalStatus::InfeasibleDetected: return "infeasible";
    case LocalStatus::DomainFaultAbort: return "domain_fault";
  }
  return "unknown";
}

/// Outcome of a local solve. `objective` is in the model's own sense.
struct LocalSolveResult {
  std::vector<double> point;
  double objective = 0.0;
  double maxViolation = 0.0;
  LocalStatus status = LocalStatus::IterationLimit;
  std::size_t iterations = 0;
  /// Model evaluations in function-value equivalents (a gradient and
  /// Hessian pass over k variables counts as k + 1).
  std::size_t evaluations = 0;
  bool usedLP = false;
  std::string diagnostic;
};

}  // namespace autoopt

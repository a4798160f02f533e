#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "autoopt/completion.hpp"
#include "autoopt/errors.hpp"
#include "autoopt/ga_ops.hpp"
#include "autoopt/local_solver.hpp"
#include "autoopt/lrvcm.hpp"
#include "autoopt/parallel.hpp"

namespace autoopt {

struct GaConfig {
  std::size_t populationSize = 200;
  double crossoverProbability = 0.9;
  /// Per-gene mutation probability.
  double mutationProbability = 0.1;
  std::size_t offspringPerGeneration = 2;
  std::size_t tournamentSize = 2;
  double sbxDistributionIndex = 15.0;
  double mutationDistributionIndex = 20.0;
  /// Generations between classifier refits.
  std::size_t reclassificationPeriod = 10;
  std::size_t maxGenerations = 200;
  std::size_t stallWindow = 25;
  double stallRelTol = 1e-6;
  double constraintTolerance = kConstraintTolerance;
  std::uint64_t seed = 0;
  /// Most recent labelled configurations kept for refits.
  std::size_t sampleWindow = 400;
  /// Configurations labelled per refit; 0 means populationSize / 5.
  std::size_t refitBatch = 0;
  double significance = 0.05;
  bool signAwareClassification = true;
  /// Wall-clock limit in seconds; 0 disables it.
  double timeBudgetSeconds = 0.0;
  /// Limit on model evaluations; 0 disables it.
  std::size_t maxEvaluations = 0;
  std::size_t threads = 1;

  void validate() const {
    auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (populationSize < 2) throw ConfigError("populationSize must be at least 2");
    if (!prob(crossoverProbability) || !prob(mutationProbability)) throw ConfigError("probabilities must lie in [0, 1]");
    if (reclassificationPeriod < 1) throw ConfigError("reclassificationPeriod must be at least 1");
    if (offspringPerGeneration < 1) throw ConfigError("offspringPerGeneration must be at least 1");
    if (tournamentSize < 1) throw ConfigError("tournamentSize must be at least 1");
    if (!(sbxDistributionIndex >= 0.0) || !(mutationDistributionIndex >= 0.0))
      throw ConfigError("distribution indices must be non-negative");
    if (!(constraintTolerance >= 0.0)) throw ConfigError("constraintTolerance must be non-negative");
    if (sampleWindow < 2) throw ConfigError("sampleWindow must be at least 2");
    if (!(timeBudgetSeconds >= 0.0)) throw ConfigError("timeBudgetSeconds must be non-negative");
  }
};

struct SolveReport {
  std::string method;
  std::vector<double> bestPoint;
  /// In the model's own sense.
  double bestObjective = kInf;
  double maxViolation = kInf;
  bool feasible = false;
  std::size_t generations = 0;
  std::size_t lowerSolveCount = 0;
  std::size_t functionEvaluations = 0;
  double wallTimeSeconds = 0.0;
  /// Minimization-oriented objective of the best feasible member after each
  /// generation (index 0 is the initial population); +inf while none is
  /// feasible.
  std::vector<double> history;
  std::vector<LevelConfiguration> levelConfigurationsUsed;
  std::string termination;
  std::string diagnostic;
};

namespace detail {

using Clock = std::chrono::steady_clock;

inline double secondsSince(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

inline std::size_t bestIndex(const std::vector<Individual>& pop, double tol) {
  std::size_t b = 0;
  for (std::size_t i = 1; i < pop.size(); ++i)
    if (betterThan(pop[i], pop[b], tol)) b = i;
  return b;
}

inline std::size_t worstIndex(const std::vector<Individual>& pop, double tol) {
  std::size_t w = 0;
  for (std::size_t i = 1; i < pop.size(); ++i)
    if (betterThan(pop[w], pop[i], tol)) w = i;
  return w;
}

inline double bestFeasibleObjective(const std::vector<Individual>& pop, double tol) {
  const Individual& b = pop[bestIndex(pop, tol)];
  return isFeasible(b, tol) ? b.objective : kInf;
}

inline std::vector<double> randomPoint(const Problem& p, Rng& rng) {
  std::vector<double> x(p.size());
  for (std::size_t j = 0; j < x.size(); ++j) x[j] = sampleGene(p.compiled.lb[j], p.compiled.ub[j], rng);
  roundIntegers(p.model, x);
  return x;
}

/// Stall test on the feasibility-first best over the last `window`
/// generations.
class StallMonitor {
 public:
  StallMonitor(std::size_t window, double relTol, double tol) : window_(window), relTol_(relTol), tol_(tol) {}

  bool update(const Individual& best) {
    trail_.push_back(best);
    if (window_ == 0 || trail_.size() <= window_) return false;
    const Individual& old = trail_.front();
    trail_.pop_front();
    bool fo = isFeasible(old, tol_), fn = isFeasible(best, tol_);
    if (fo != fn) return false;
    double a = fn ? old.objective : old.violation;
    double b = fn ? best.objective : best.violation;
    if (!std::isfinite(a) || !std::isfinite(b)) return a == b;
    return a - b <= relTol_ * (1.0 + std::fabs(b));
  }

 private:
  std::size_t window_;
  double relTol_;
  double tol_;
  std::deque<Individual> trail_;
};

inline void replaceWorst(std::vector<Individual>& pop, Individual child, double tol) {
  std::size_t w = worstIndex(pop, tol);
  if (betterThan(child, pop[w], tol)) pop[w] = std::move(child);
}

inline SolveReport finishReport(SolveReport r, const std::vector<Individual>& pop, const Problem& p, double tol,
                                Clock::time_point t0) {
  const Individual& b = pop[bestIndex(pop, tol)];
  r.bestPoint = b.point;
  r.bestObjective = p.compiled.senseSign * b.objective;
  r.maxViolation = b.violation;
  r.feasible = isFeasible(b, tol);
  if (!r.feasible && r.diagnostic.empty()) r.diagnostic = "no feasible point found";
  r.wallTimeSeconds = secondsSince(t0);
  return r;
}

// Labelled configurations with raw improvements, oldest dropped first.
class SampleWindow {
 public:
  explicit SampleWindow(std::size_t capacity) : capacity_(capacity) {}

  void add(LevelConfiguration tags, double delta) {
    entries_.push_back({std::move(tags), delta});
    while (entries_.size() > capacity_) entries_.pop_front();
  }

  /// Classifier from the current window, or nothing when the labels do not
  /// contain both classes or the fit fails.
  std::optional<LevelConfiguration> classify(double alpha, bool signAware) const {
    std::vector<double> deltas;
    for (const auto& e : entries_) deltas.push_back(e.delta);
    std::vector<int> labels = labelByMedian(deltas);
    std::vector<LcSample> samples;
    bool has0 = false, has1 = false;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      samples.push_back({entries_[i].tags, labels[i]});
      has0 |= labels[i] == 0;
      has1 |= labels[i] == 1;
    }
    if (!has0 || !has1) return std::nullopt;
    try {
      LogisticFit fit = fitLogistic(samples, defaultRidge(samples.size()));
      return autoopt::classify(fit, alpha, signAware);
    } catch (const SingularFit&) {
      return std::nullopt;
    }
  }

 private:
  struct Entry {
    LevelConfiguration tags;
    double delta;
  };
  std::size_t capacity_;
  std::deque<Entry> entries_;
};

}  // namespace detail

/// Bilevel decomposition search: a steady-state GA over the variables the
/// classifier puts in the upper level, with every individual completed by
/// a local solve over the remaining ones. The classifier is refitted every
/// `reclassificationPeriod` generations from freshly labelled
/// configurations.
inline SolveReport bobdSolve(const ModelIR& model, const GaConfig& cfg, Rng& rng) {
  cfg.validate();
  const auto t0 = detail::Clock::now();
  const Problem problem(model);
  const std::size_t n = problem.size();
  if (n < 2) throw ConfigError("bobdSolve: the model needs at least two variables");
  const double tol = cfg.constraintTolerance;
  const std::size_t batch = cfg.refitBatch ? cfg.refitBatch : std::max<std::size_t>(2, cfg.populationSize / 5);

  SolveReport report;
  report.method = "bobd";
  std::vector<Individual> pop;
  for (std::size_t i = 0; i < cfg.populationSize; ++i) pop.push_back(evaluateIndividual(problem, detail::randomPoint(problem, rng)));
  report.functionEvaluations += pop.size();

  // Labels configurations on chosen members; improved points replace them.
  detail::SampleWindow window(cfg.sampleWindow);
  auto label = [&](const std::vector<std::size_t>& members) {
    std::vector<LevelConfiguration> lcs = sampleConfigurations(n, members.size(), rng);
    std::vector<ImprovementOutcome> out(members.size());
    parallelFor(members.size(), cfg.threads,
                [&](std::size_t k) { out[k] = labelImprovement(problem, pop[members[k]], lcs[k], tol); });
    for (std::size_t k = 0; k < members.size(); ++k) {
      report.lowerSolveCount += 1;
      report.functionEvaluations += out[k].after.evaluations;
      window.add(lcs[k], out[k].delta);
      if (betterThan(out[k].after, pop[members[k]], tol)) pop[members[k]] = std::move(out[k].after);
    }
  };
  auto refit = [&](LevelConfiguration current) {
    auto next = window.classify(cfg.significance, cfg.signAwareClassification);
    return next ? *next : current;
  };

  std::vector<std::size_t> everyone(pop.size());
  for (std::size_t i = 0; i < everyone.size(); ++i) everyone[i] = i;
  label(everyone);
  LevelConfiguration lc = refit(sampleConfigurations(n, 1, rng).front());
  report.levelConfigurationsUsed.push_back(lc);

  // Complete the initial population under the first decomposition.
  {
    std::vector<Individual> done(pop.size());
    parallelFor(pop.size(), cfg.threads, [&](std::size_t i) { done[i] = completeIndividual(problem, lc, pop[i].point, tol); });
    for (std::size_t i = 0; i < pop.size(); ++i) {
      report.lowerSolveCount += 1;
      report.functionEvaluations += done[i].evaluations;
      if (betterThan(done[i], pop[i], tol)) pop[i] = std::move(done[i]);
    }
  }
  report.history.push_back(detail::bestFeasibleObjective(pop, tol));

  detail::StallMonitor stall(cfg.stallWindow, cfg.stallRelTol, tol);
  stall.update(pop[detail::bestIndex(pop, tol)]);
  report.termination = "max_generations";
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t g = 1; g <= cfg.maxGenerations; ++g) {
    if (cfg.timeBudgetSeconds > 0.0 && detail::secondsSince(t0) >= cfg.timeBudgetSeconds) {
      report.termination = "time_budget";
      break;
    }
    if (cfg.maxEvaluations > 0 && report.functionEvaluations >= cfg.maxEvaluations) {
      report.termination = "evaluation_budget";
      break;
    }
    if (g % cfg.reclassificationPeriod == 0) {
      std::vector<std::size_t> members(pop.size());
      for (std::size_t i = 0; i < members.size(); ++i) members[i] = i;
      std::shuffle(members.begin(), members.end(), rng);
      members.resize(std::min(batch, members.size()));
      label(members);
      LevelConfiguration next = refit(lc);
      if (next != lc) report.levelConfigurationsUsed.push_back(next);
      lc = std::move(next);
    }

    // Offspring: crossover and mutation act on the upper coordinates; the
    // lower coordinates start from the better parent.
    std::vector<std::vector<double>> children;
    while (children.size() < cfg.offspringPerGeneration) {
      const Individual& a = pop[tournamentSelect(pop, rng, cfg.tournamentSize, tol)];
      const Individual& b = pop[tournamentSelect(pop, rng, cfg.tournamentSize, tol)];
      const Individual& warm = betterThan(b, a, tol) ? b : a;
      std::pair<std::vector<double>, std::vector<double>> kids{a.point, b.point};
      if (unit(rng) < cfg.crossoverProbability)
        kids = sbxCrossover(a.point, b.point, problem.compiled.lb, problem.compiled.ub, cfg.sbxDistributionIndex, rng);
      for (auto* kid : {&kids.first, &kids.second}) {
        if (children.size() >= cfg.offspringPerGeneration) break;
        std::vector<double> x = polynomialMutation(*kid, problem.compiled.lb, problem.compiled.ub,
                                                   cfg.mutationProbability, cfg.mutationDistributionIndex, rng);
        for (std::size_t j = 0; j < n; ++j)
          if (lc[j] == 1) x[j] = warm.point[j];
        detail::roundIntegers(problem.model, x);
        children.push_back(std::move(x));
      }
    }
    std::vector<Individual> done(children.size());
    parallelFor(children.size(), cfg.threads,
                [&](std::size_t k) { done[k] = completeIndividual(problem, lc, children[k], tol); });
    for (auto& child : done) {
      report.lowerSolveCount += 1;
      report.functionEvaluations += child.evaluations;
      detail::replaceWorst(pop, std::move(child), tol);
    }

    report.generations = g;
    report.history.push_back(detail::bestFeasibleObjective(pop, tol));
    if (stall.update(pop[detail::bestIndex(pop, tol)])) {
      report.termination = "stall";
      break;
    }
  }
  return detail::finishReport(std::move(report), pop, problem, tol, t0);
}

inline SolveReport bobdSolve(const ModelIR& model, const GaConfig& cfg) {
  Rng rng(cfg.seed);
  return bobdSolve(model, cfg, rng);
}

/// Plain steady-state GA over all variables with direct evaluation. Stops
/// at the wall-clock budget or the evaluation budget, whichever comes first.
inline SolveReport gaSolve(const ModelIR& model, const GaConfig& cfg, Rng& rng, double timeBudgetSeconds) {
  cfg.validate();
  if (!(timeBudgetSeconds > 0.0) && cfg.maxEvaluations == 0)
    throw ConfigError("gaSolve: a positive time budget or evaluation budget is required");
  const auto t0 = detail::Clock::now();
  const Problem problem(model);
  const double tol = cfg.constraintTolerance;
  SolveReport report;
  report.method = "ga";
  auto outOfBudget = [&] {
    if (cfg.maxEvaluations > 0 && report.functionEvaluations >= cfg.maxEvaluations) {
      report.termination = "evaluation_budget";
      return true;
    }
    if (timeBudgetSeconds > 0.0 && detail::secondsSince(t0) >= timeBudgetSeconds) {
      report.termination = "time_budget";
      return true;
    }
    return false;
  };

  std::vector<Individual> pop;
  for (std::size_t i = 0; i < cfg.populationSize; ++i) pop.push_back(evaluateIndividual(problem, detail::randomPoint(problem, rng)));
  report.functionEvaluations += pop.size();
  report.history.push_back(detail::bestFeasibleObjective(pop, tol));

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t g = 1; !outOfBudget(); ++g) {
    std::size_t made = 0;
    while (made < cfg.offspringPerGeneration) {
      const Individual& a = pop[tournamentSelect(pop, rng, cfg.tournamentSize, tol)];
      const Individual& b = pop[tournamentSelect(pop, rng, cfg.tournamentSize, tol)];
      std::pair<std::vector<double>, std::vector<double>> kids{a.point, b.point};
      if (unit(rng) < cfg.crossoverProbability)
        kids = sbxCrossover(a.point, b.point, problem.compiled.lb, problem.compiled.ub, cfg.sbxDistributionIndex, rng);
      for (auto* kid : {&kids.first, &kids.second}) {
        if (made >= cfg.offspringPerGeneration) break;
        std::vector<double> x = polynomialMutation(*kid, problem.compiled.lb, problem.compiled.ub,
                                                   cfg.mutationProbability, cfg.mutationDistributionIndex, rng);
        detail::roundIntegers(problem.model, x);
        detail::replaceWorst(pop, evaluateIndividual(problem, std::move(x)), tol);
        ++report.functionEvaluations;
        ++made;
      }
    }
    report.generations = g;
    report.history.push_back(detail::bestFeasibleObjective(pop, tol));
  }
  return detail::finishReport(std::move(report), pop, problem, tol, t0);
}

/// One barrier solve from the midpoint of the bound box.
inline SolveReport ipSolve(const ModelIR& model, double tol = kConstraintTolerance) {
  const auto t0 = detail::Clock::now();
  const ModelIR m = expandModel(model);
  LocalSolveResult r = solveBarrier(m, boxMidpoint(m), tol);
  SolveReport report;
  report.method = "ip";
  report.bestPoint = r.point;
  report.bestObjective = r.objective;
  report.maxViolation = r.maxViolation;
  report.feasible = r.maxViolation <= tol && std::isfinite(r.objective);
  report.lowerSolveCount = 1;
  report.functionEvaluations = r.evaluations;
  report.generations = r.iterations;
  report.termination = statusName(r.status);
  report.diagnostic = r.diagnostic;
  report.wallTimeSeconds = detail::secondsSince(t0);
  return report;
}

}  // namespace autoopt

#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <span>
#include <tuple>
#include <utility>
#include <vector>

#include "autoopt/errors.hpp"
#include "autoopt/local_result.hpp"
#include "autoopt/model.hpp"

namespace autoopt {

using Rng = std::mt19937_64;

/// One population member. `objective` is minimization-oriented; +inf
/// stands in for points where the objective cannot be evaluated.
struct Individual {
  std::vector<double> point;
  double objective = kInf;
  double violation = kInf;
  LocalStatus lowerSolveStatus = LocalStatus::Converged;
  /// Model evaluations spent producing this individual.
  std::size_t evaluations = 0;
};

/// Feasibility-first ordering: feasible points by objective, infeasible
/// points by violation (then objective), and every feasible point ahead of
/// every infeasible one.
inline bool betterThan(const Individual& a, const Individual& b, double tol = kConstraintTolerance) {
  auto key = [tol](const Individual& i) {
    double f = std::isnan(i.objective) ? kInf : i.objective;
    double v = std::isnan(i.violation) ? kInf : i.violation;
    bool feasible = v <= tol;
    return std::tuple(feasible ? 0 : 1, feasible ? 0.0 : v, f);
  };
  return key(a) < key(b);
}

inline bool isFeasible(const Individual& i, double tol = kConstraintTolerance) { return i.violation <= tol; }

/// Width used to scale perturbations of a gene; half-open and free genes
/// get a nominal range.
inline double geneRange(double lb, double ub) {
  bool lo = std::isfinite(lb), hi = std::isfinite(ub);
  if (lo && hi) return ub - lb;
  if (lo) return std::max(10.0, std::fabs(lb));
  if (hi) return std::max(10.0, std::fabs(ub));
  return 20.0;
}

/// Uniform draw from the sampling box of a gene.
inline double sampleGene(double lb, double ub, Rng& rng) {
  bool lo = std::isfinite(lb), hi = std::isfinite(ub);
  double a = lo ? lb : (hi ? ub - geneRange(lb, ub) : -10.0);
  double b = hi ? ub : (lo ? lb + geneRange(lb, ub) : 10.0);
  if (a == b) return a;
  return std::uniform_real_distribution<double>(a, b)(rng);
}

namespace detail {

inline double unit(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

// Spread factor for an unbounded gene.
inline double sbxBeta(double u, double eta) {
  if (u <= 0.5) return std::pow(2.0 * u, 1.0 / (eta + 1.0));
  return std::pow(1.0 / (2.0 * (1.0 - u)), 1.0 / (eta + 1.0));
}

// Spread factor with the probability mass beyond a bound folded back in.
inline double sbxBoundedBeta(double u, double eta, double beta) {
  double alpha = 2.0 - std::pow(beta, -(eta + 1.0));
  if (u <= 1.0 / alpha) return std::pow(u * alpha, 1.0 / (eta + 1.0));
  return std::pow(1.0 / (2.0 - u * alpha), 1.0 / (eta + 1.0));
}

}  // namespace detail

/// Simulated binary crossover. Each gene is recombined with probability
/// `geneProbability`; children are clipped to the bounds.
inline std::pair<std::vector<double>, std::vector<double>> sbxCrossover(std::span<const double> p1,
                                                                        std::span<const double> p2,
                                                                        std::span<const double> lb,
                                                                        std::span<const double> ub, double etaC,
                                                                        Rng& rng, double geneProbability = 0.5) {
  std::vector<double> c1(p1.begin(), p1.end()), c2(p2.begin(), p2.end());
  for (std::size_t j = 0; j < c1.size(); ++j) {
    if (detail::unit(rng) > geneProbability) continue;
    double y1 = std::min(p1[j], p2[j]), y2 = std::max(p1[j], p2[j]);
    if (y2 - y1 <= 1e-14 * (1.0 + std::fabs(y1))) continue;
    const double u = detail::unit(rng);
    double a, b;
    if (std::isfinite(lb[j]) || std::isfinite(ub[j])) {
      double betaLo = std::isfinite(lb[j]) ? 1.0 + 2.0 * (y1 - lb[j]) / (y2 - y1) : kInf;
      double betaHi = std::isfinite(ub[j]) ? 1.0 + 2.0 * (ub[j] - y2) / (y2 - y1) : kInf;
      double bq1 = std::isfinite(betaLo) ? detail::sbxBoundedBeta(u, etaC, betaLo) : detail::sbxBeta(u, etaC);
      double bq2 = std::isfinite(betaHi) ? detail::sbxBoundedBeta(u, etaC, betaHi) : detail::sbxBeta(u, etaC);
      a = 0.5 * ((y1 + y2) - bq1 * (y2 - y1));
      b = 0.5 * ((y1 + y2) + bq2 * (y2 - y1));
    } else {
      const double bq = detail::sbxBeta(u, etaC);
      a = 0.5 * ((y1 + y2) - bq * (y2 - y1));
      b = (y1 + y2) - a;
    }
    a = std::clamp(a, lb[j], ub[j]);
    b = std::clamp(b, lb[j], ub[j]);
    if (detail::unit(rng) < 0.5) std::swap(a, b);
    c1[j] = a;
    c2[j] = b;
  }
  return {std::move(c1), std::move(c2)};
}

/// Bounded polynomial mutation applied gene-wise with probability `pm`.
inline std::vector<double> polynomialMutation(std::span<const double> x, std::span<const double> lb,
                                              std::span<const double> ub, double pm, double etaM, Rng& rng) {
  std::vector<double> y(x.begin(), x.end());
  const double power = 1.0 / (etaM + 1.0);
  for (std::size_t j = 0; j < y.size(); ++j) {
    if (pm <= 0.0 || detail::unit(rng) >= pm) continue;
    const double range = geneRange(lb[j], ub[j]);
    if (range <= 0.0) continue;
    const double u = detail::unit(rng);
    // Distance to each bound relative to the range; open sides never limit.
    double d1 = std::isfinite(lb[j]) ? std::clamp((y[j] - lb[j]) / range, 0.0, 1.0) : 1.0;
    double d2 = std::isfinite(ub[j]) ? std::clamp((ub[j] - y[j]) / range, 0.0, 1.0) : 1.0;
    double dq;
    if (u < 0.5) {
      double v = 2.0 * u + (1.0 - 2.0 * u) * std::pow(1.0 - d1, etaM + 1.0);
      dq = std::pow(v, power) - 1.0;
    } else {
      double v = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * std::pow(1.0 - d2, etaM + 1.0);
      dq = 1.0 - std::pow(v, power);
    }
    y[j] = std::clamp(y[j] + dq * range, lb[j], ub[j]);
  }
  return y;
}

/// Index of the winner among `size` members drawn uniformly with
/// replacement.
inline std::size_t tournamentSelect(const std::vector<Individual>& population, Rng& rng, std::size_t size = 2,
                                    double tol = kConstraintTolerance) {
  if (population.empty()) throw ConfigError("tournamentSelect: empty population");
  std::uniform_int_distribution<std::size_t> pick(0, population.size() - 1);
  std::size_t best = pick(rng);
  for (std::size_t k = 1; k < size; ++k) {
    std::size_t c = pick(rng);
    if (betterThan(population[c], population[best], tol)) best = c;
  }
  return best;
}

}  // namespace autoopt

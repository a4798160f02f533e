#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "autoopt/completion.hpp"
#include "autoopt/errors.hpp"
#include "autoopt/ga_ops.hpp"

namespace autoopt {

/// One training example: a level configuration and its binary label
/// (1 = notable improvement).
struct LcSample {
  LevelConfiguration tags;
  int label = 0;
};

struct LogisticFit {
  double intercept = 0.0;
  std::vector<double> coefficients;
  std::vector<double> standardErrors;
  std::vector<double> pValues;
  bool converged = false;
  double ridge = 0.0;
  std::size_t iterations = 0;
  /// Infinity norm of the penalized log-likelihood gradient at the result.
  double gradientNorm = 0.0;
};

/// Fair-coin level configurations; draws with a single level are redrawn.
inline std::vector<LevelConfiguration> sampleConfigurations(std::size_t nVars, std::size_t count, Rng& rng) {
  if (nVars < 2) throw ConfigError("sampleConfigurations: need at least two variables");
  if (count < 1) throw ConfigError("sampleConfigurations: count must be positive");
  std::bernoulli_distribution coin(0.5);
  std::vector<LevelConfiguration> out;
  out.reserve(count);
  while (out.size() < count) {
    LevelConfiguration lc(nVars);
    std::size_t lower = 0;
    for (auto& t : lc) lower += static_cast<std::size_t>(t = coin(rng) ? 1 : 0);
    if (lower == 0 || lower == nVars) continue;
    out.push_back(std::move(lc));
  }
  return out;
}

/// Result of solving an individual's lower problem under one LC.
struct ImprovementOutcome {
  /// Improvement from `before` to `after`; +inf when the solve restores
  /// feasibility.
  double delta = 0.0;
  Individual after;
};

/// Improvement measure between two evaluations of the same model.
/// Feasible to feasible: objective decrease. Infeasible to feasible: +inf.
/// Infeasible to infeasible: violation decrease. Feasible to infeasible: 0.
inline double improvement(const Individual& before, const Individual& after, double tol = kConstraintTolerance) {
  bool fb = isFeasible(before, tol), fa = isFeasible(after, tol);
  if (fb && fa) return std::isfinite(before.objective - after.objective) ? before.objective - after.objective : 0.0;
  if (!fb && fa) return kInf;
  if (!fb && !fa) return std::isfinite(before.violation - after.violation) ? before.violation - after.violation : 0.0;
  return 0.0;
}

/// Solves the lower problem defined by `lc` from the individual's current
/// point and measures the improvement. Failed solves count as no
/// improvement.
inline ImprovementOutcome labelImprovement(const Problem& problem, const Individual& individual,
                                           const LevelConfiguration& lc, double tol = kConstraintTolerance) {
  ImprovementOutcome out;
  out.after = completeIndividual(problem, lc, individual.point, tol);
  const LocalStatus s = out.after.lowerSolveStatus;
  bool failed = s == LocalStatus::DomainFaultAbort || s == LocalStatus::InfeasibleDetected ||
                (s == LocalStatus::IterationLimit && !isFeasible(out.after, tol));
  out.delta = failed ? 0.0 : improvement(individual, out.after, tol);
  return out;
}

/// Binary labels from raw improvements: 1 iff the value exceeds the median,
/// falling back to "at least the median" when nothing exceeds it.
inline std::vector<int> labelByMedian(const std::vector<double>& deltas) {
  std::vector<int> labels(deltas.size(), 0);
  if (deltas.empty()) return labels;
  std::vector<double> s = deltas;
  std::sort(s.begin(), s.end());
  const std::size_t h = s.size() / 2;
  const double median = s.size() % 2 ? s[h] : (s[h - 1] == s[h] ? s[h] : 0.5 * (s[h - 1] + s[h]));
  bool any = false;
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    labels[i] = deltas[i] > median ? 1 : 0;
    any = any || labels[i];
  }
  if (!any)
    for (std::size_t i = 0; i < deltas.size(); ++i) labels[i] = deltas[i] >= median && deltas[i] > s.front();
  return labels;
}

namespace detail {

// log(1 + exp(t)) without overflow.
inline double softplus(double t) { return std::max(t, 0.0) + std::log1p(std::exp(-std::fabs(t))); }

inline double sigmoid(double t) {
  if (t >= 0) return 1.0 / (1.0 + std::exp(-t));
  double e = std::exp(t);
  return e / (1.0 + e);
}

}  // namespace detail

/// Ridge-penalized logistic regression of labels on tags by iteratively
/// reweighted least squares. The intercept is penalized as well, so
/// separable batches still have a finite maximizer. Standard errors
/// come from the inverse penalized information; p-values are two-sided Wald.
inline LogisticFit fitLogistic(const std::vector<LcSample>& samples, double ridge) {
  if (samples.size() < 2) throw ConfigError("fitLogistic: need at least two samples");
  const std::size_t nv = samples.front().tags.size();
  if (nv == 0) throw ConfigError("fitLogistic: empty feature vector");
  bool has0 = false, has1 = false;
  for (const auto& s : samples) {
    if (s.tags.size() != nv) throw ConfigError("fitLogistic: inconsistent tag lengths");
    has0 |= s.label == 0;
    has1 |= s.label != 0;
  }
  if (!has0 || !has1) throw ConfigError("fitLogistic: both label classes are required");

  const auto m = static_cast<Eigen::Index>(samples.size());
  const auto d = static_cast<Eigen::Index>(nv + 1);
  Eigen::MatrixXd X(m, d);
  Eigen::VectorXd y(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto& s = samples[static_cast<std::size_t>(i)];
    X(i, 0) = 1.0;
    for (std::size_t j = 0; j < nv; ++j) X(i, static_cast<Eigen::Index>(j + 1)) = s.tags[j] ? 1.0 : 0.0;
    y(i) = s.label ? 1.0 : 0.0;
  }
  const Eigen::VectorXd penalty = Eigen::VectorXd::Constant(d, ridge);

  auto objective = [&](const Eigen::VectorXd& w) {
    Eigen::VectorXd eta = X * w;
    double ll = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) ll += y(i) * eta(i) - detail::softplus(eta(i));
    return ll - 0.5 * w.dot(penalty.asDiagonal() * w);
  };
  auto information = [&](const Eigen::VectorXd& w, Eigen::VectorXd& grad) {
    Eigen::VectorXd eta = X * w;
    Eigen::VectorXd p(m), wt(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      p(i) = detail::sigmoid(eta(i));
      wt(i) = p(i) * (1.0 - p(i));
    }
    grad = X.transpose() * (y - p) - penalty.cwiseProduct(w);
    Eigen::MatrixXd info = X.transpose() * wt.asDiagonal() * X;
    info.diagonal() += penalty;
    return info;
  };

  LogisticFit fit;
  fit.ridge = ridge;
  Eigen::VectorXd w = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd g;
  double f = objective(w);
  for (; fit.iterations < 200; ++fit.iterations) {
    Eigen::MatrixXd info = information(w, g);
    if (g.lpNorm<Eigen::Infinity>() <= 1e-10) break;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) throw SingularFit("fitLogistic: singular information matrix");
    Eigen::VectorXd step = ldlt.solve(g);
    if (!step.allFinite()) throw SingularFit("fitLogistic: singular information matrix");
    bool accepted = false;
    double t = 1.0;
    for (int ls = 0; ls < 50 && !accepted; ++ls, t *= 0.5) {
      Eigen::VectorXd trial = w + t * step;
      double ft = objective(trial);
      if (ft >= f) {
        w = trial;
        f = ft;
        accepted = true;
      }
    }
    if (!accepted) break;
  }
  Eigen::MatrixXd info = information(w, g);
  fit.gradientNorm = g.lpNorm<Eigen::Infinity>();
  fit.converged = fit.gradientNorm <= 1e-6;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) throw SingularFit("fitLogistic: singular information matrix");
  Eigen::MatrixXd cov = ldlt.solve(Eigen::MatrixXd::Identity(d, d));
  if (!cov.allFinite()) throw SingularFit("fitLogistic: singular information matrix");

  fit.intercept = w(0);
  for (std::size_t j = 0; j < nv; ++j) {
    auto k = static_cast<Eigen::Index>(j + 1);
    double se = std::sqrt(std::max(cov(k, k), 0.0));
    double z = se > 0.0 ? w(k) / se : 0.0;
    fit.coefficients.push_back(w(k));
    fit.standardErrors.push_back(se);
    fit.pValues.push_back(std::clamp(std::erfc(std::fabs(z) / std::sqrt(2.0)), 0.0, 1.0));
  }
  return fit;
}

/// Default ridge strength for a batch of `sampleCount` samples.
inline double defaultRidge(std::size_t sampleCount) { return 1e-6 * static_cast<double>(sampleCount); }

/// Level configuration from a fit: a variable goes to the lower level when
/// its coefficient is significant at `alpha` (and positive when
/// `signAware`). A single-level result is repaired by moving the variable
/// with the most (resp. least) favorable coefficient.
inline LevelConfiguration classify(const LogisticFit& fit, double alpha = 0.05, bool signAware = true) {
  const std::size_t n = fit.coefficients.size();
  if (n < 2) throw ConfigError("classify: need at least two variables");
  LevelConfiguration lc(n, 0);
  std::size_t lower = 0;
  for (std::size_t j = 0; j < n; ++j) {
    bool significant = fit.pValues[j] < alpha;
    if (significant && (!signAware || fit.coefficients[j] > 0.0)) {
      lc[j] = 1;
      ++lower;
    }
  }
  const auto& c = fit.coefficients;
  if (lower == 0) lc[static_cast<std::size_t>(std::max_element(c.begin(), c.end()) - c.begin())] = 1;
  if (lower == n) lc[static_cast<std::size_t>(std::min_element(c.begin(), c.end()) - c.begin())] = 0;
  return lc;
}

}  // namespace autoopt

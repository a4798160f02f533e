#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "autoopt/errors.hpp"
#include "autoopt/local_result.hpp"
#include "autoopt/model.hpp"

namespace autoopt {

struct BarrierOptions {
  double mu0 = 1.0;
  double muFactor = 0.2;
  double muMin = 1e-8;
  double rho0 = 10.0;
  double rhoFactor = 10.0;
  double rhoMax = 1e8;
  std::size_t maxOuter = 50;
  std::size_t maxInner = 200;
};

/// Default start for a bounded box: midpoint of finite boxes, one unit
/// inside a single finite bound, zero for free variables.
inline std::vector<double> boxMidpoint(const ModelIR& model) {
  const ModelIR m = expandModel(model);
  std::vector<double> x;
  for (const auto& v : m.variables) {
    bool lo = std::isfinite(v.lb), hi = std::isfinite(v.ub);
    x.push_back(lo && hi ? 0.5 * (v.lb + v.ub) : lo ? v.lb + 1.0 : hi ? v.ub - 1.0 : 0.0);
  }
  return x;
}

namespace detail {

/// Log barrier on bounds and strictly satisfied inequalities, PHR
/// augmented Lagrangian on equalities and the remaining inequalities.
class BarrierSolver {
 public:
  BarrierSolver(const CompiledModel& cm, double tol, BarrierOptions opt, bool penaltyOnly)
      : cm_(cm), tol_(tol), opt_(opt), n_(cm_.n), penaltyOnly_(penaltyOnly) {
    for (std::size_t j = 0; j < n_; ++j)
      if (!(cm_.lb[j] == cm_.ub[j])) free_.push_back(j);
  }

  LocalSolveResult solve(std::vector<double> x) {
    LocalSolveResult res;
    x.resize(n_, 0.0);
    for (std::size_t j = 0; j < n_; ++j) {
      if (std::isnan(x[j])) x[j] = 0.0;
      x[j] = std::clamp(x[j], cm_.lb[j], cm_.ub[j]);
      if (cm_.lb[j] == cm_.ub[j]) continue;
      double lo = cm_.lb[j], hi = cm_.ub[j];
      double width = hi - lo;
      double mlo = 1e-2 * (1.0 + std::fabs(lo)), mhi = 1e-2 * (1.0 + std::fabs(hi));
      if (std::isfinite(width)) {
        mlo = std::min(mlo, 0.25 * width);
        mhi = std::min(mhi, 0.25 * width);
      }
      if (std::isfinite(lo) && x[j] < lo + mlo) x[j] = lo + mlo;
      if (std::isfinite(hi) && x[j] > hi - mhi) x[j] = hi - mhi;
    }

    std::vector<double> gvals;
    if (!constraintValues(x, gvals) || !std::isfinite(safeObjective(x))) {
      res.point = x;
      res.status = LocalStatus::DomainFaultAbort;
      res.diagnostic = "model cannot be evaluated at the start point";
      res.objective = std::numeric_limits<double>::quiet_NaN();
      res.maxViolation = kInf;
      return res;
    }
    inBarrier_.assign(cm_.inequalities.size(), false);
    lambda_.assign(cm_.inequalities.size(), 0.0);
    nu_.assign(cm_.equalities.size(), 0.0);
    for (std::size_t i = 0; i < cm_.inequalities.size(); ++i) inBarrier_[i] = !penaltyOnly_ && gvals[i] < -1e-10;
    {
      std::vector<double> g;
      cm_.objective.gradient(x, g);
      double gmax = 0.0;
      for (double v : g) gmax = std::max(gmax, std::fabs(v));
      startGradNorm_ = std::isfinite(gmax) ? gmax : 0.0;
    }

    mu_ = opt_.mu0;
    rho_ = opt_.rho0;
    double prevAl = kInf;
    std::vector<double> best = x;
    double bestF = safeObjective(x), bestV = cm_.maxViolation(x);
    auto consider = [&](const std::vector<double>& p) {
      double v = cm_.maxViolation(p);
      double f = safeObjective(p);
      if (!std::isfinite(f)) return;
      bool better = (v <= tol_ && (bestV > tol_ || f < bestF)) || (bestV > tol_ && v < bestV);
      if (better) {
        best = p;
        bestF = f;
        bestV = v;
      }
    };

    std::size_t faultStreak = 0;
    bool aborted = false;
    for (std::size_t outer = 0; outer < opt_.maxOuter; ++outer) {
      bool faulted = innerNewton(x, res.iterations);
      faultStreak = faulted ? faultStreak + 1 : 0;
      if (faultStreak >= 3) {
        aborted = true;
        break;
      }
      if (!constraintValues(x, gvals)) {
        aborted = true;
        break;
      }
      double al = 0.0;
      for (std::size_t i = 0; i < cm_.inequalities.size(); ++i) {
        if (inBarrier_[i]) continue;
        al = std::max(al, std::max(gvals[i], -lambda_[i] / rho_));
        lambda_[i] = std::max(0.0, lambda_[i] + rho_ * gvals[i]);
      }
      for (std::size_t k = 0; k < cm_.equalities.size(); ++k) {
        double h = gvals[cm_.inequalities.size() + k];
        al = std::max(al, std::fabs(h));
        nu_[k] += rho_ * h;
      }
      for (std::size_t i = 0; i < cm_.inequalities.size(); ++i)
        if (!penaltyOnly_ && !inBarrier_[i] && lambda_[i] == 0.0 && gvals[i] < -1e-6) inBarrier_[i] = true;
      bool stalled = rho_ >= opt_.rhoMax && al > 0.0 && al >= 0.99 * prevAl;
      if (al > 0.25 * prevAl) rho_ = std::min(rho_ * opt_.rhoFactor, opt_.rhoMax);
      prevAl = al;
      consider(x);
      bool muDone = mu_ <= opt_.muMin;
      if (muDone && cm_.maxViolation(x) <= 0.1 * tol_) break;
      if (muDone && stalled) break;
      if (!muDone) mu_ *= opt_.muFactor;
    }

    // The final iterate is the most accurate one unless it lost ground.
    if (!aborted) {
      double v = cm_.maxViolation(x), f = safeObjective(x);
      if (v <= tol_ && std::isfinite(f) && f <= bestF + tol_ * (1.0 + std::fabs(bestF))) {
        best = x;
        bestF = f;
        bestV = v;
      }
    }
    res.point = best;
    res.maxViolation = bestV;
    res.objective = cm_.senseSign * bestF;
    res.evaluations = evaluations_;
    if (aborted && bestV > tol_) {
      res.status = LocalStatus::DomainFaultAbort;
      res.diagnostic = "persistent domain faults during line search";
    } else if (bestV > tol_) {
      res.status = rho_ >= opt_.rhoMax ? LocalStatus::InfeasibleDetected : LocalStatus::IterationLimit;
      res.diagnostic = "constraint violation above tolerance";
    } else if (kktResidual(best) <= 1e-4 * (1.0 + startGradNorm_)) {
      res.status = LocalStatus::Converged;
    } else {
      res.status = LocalStatus::IterationLimit;
      res.diagnostic = "stationarity tolerance not reached";
    }
    return res;
  }

 private:
  double safeObjective(const std::vector<double>& x) const {
    try {
      double f = cm_.objectiveMin(x);
      return std::isfinite(f) ? f : kInf;
    } catch (const DomainFault&) {
      return kInf;
    }
  }

  // Inequality values followed by equality values; false on a fault.
  bool constraintValues(const std::vector<double>& x, std::vector<double>& out) const {
    out.clear();
    try {
      for (const auto& t : cm_.inequalities) out.push_back(t.value(x));
      for (const auto& t : cm_.equalities) out.push_back(t.value(x));
    } catch (const DomainFault&) {
      return false;
    }
    for (double v : out)
      if (!std::isfinite(v)) return false;
    return true;
  }

  // Merit value; +inf outside the barrier domain or on a fault.
  double phi(const std::vector<double>& x) {
    ++evaluations_;
    try {
      double v = cm_.objectiveMin(x);
      for (std::size_t j : free_) {
        if (std::isfinite(cm_.lb[j])) {
          double s = x[j] - cm_.lb[j];
          if (s <= 0.0) return kInf;
          v -= mu_ * std::log(s);
        }
        if (std::isfinite(cm_.ub[j])) {
          double s = cm_.ub[j] - x[j];
          if (s <= 0.0) return kInf;
          v -= mu_ * std::log(s);
        }
      }
      for (std::size_t i = 0; i < cm_.inequalities.size(); ++i) {
        double g = cm_.inequalities[i].value(x);
        if (inBarrier_[i]) {
          if (!(g < 0.0)) return kInf;
          v -= mu_ * std::log(-g);
        } else {
          double t = std::max(0.0, lambda_[i] + rho_ * g);
          v += (t * t - lambda_[i] * lambda_[i]) / (2.0 * rho_);
        }
      }
      for (std::size_t k = 0; k < cm_.equalities.size(); ++k) {
        double h = cm_.equalities[k].value(x);
        v += nu_[k] * h + 0.5 * rho_ * h * h;
      }
      return std::isfinite(v) ? v : kInf;
    } catch (const DomainFault&) {
      return kInf;
    }
  }

  // Accumulates w*grad and w*hess of a tape plus c*grad*grad^T.
  void accumulate(const Tape& t, const std::vector<double>& x, double w, double c, Eigen::VectorXd& G,
                  Eigen::MatrixXd& H, double* value) {
    std::vector<double> g;
    Eigen::MatrixXd h;
    double v = t.hessian(x, g, h);
    if (value) *value = v;
    const auto& vars = t.variables();
    for (std::size_t a = 0; a < vars.size(); ++a) {
      auto ia = static_cast<Eigen::Index>(vars[a]);
      G(ia) += w * g[a];
      for (std::size_t b = 0; b < vars.size(); ++b) {
        auto ib = static_cast<Eigen::Index>(vars[b]);
        H(ia, ib) += w * h(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) + c * g[a] * g[b];
      }
    }
  }

  // Gradient and Hessian of the merit function; false on a fault.
  bool derivatives(const std::vector<double>& x, Eigen::VectorXd& G, Eigen::MatrixXd& H) {
    const auto n = static_cast<Eigen::Index>(n_);
    G.setZero(n);
    H.setZero(n, n);
    // Second derivatives cost about one sweep per variable.
    evaluations_ += free_.size() + 1;
    try {
      accumulate(cm_.objective, x, cm_.senseSign, 0.0, G, H, nullptr);
      for (std::size_t j : free_) {
        auto ij = static_cast<Eigen::Index>(j);
        if (std::isfinite(cm_.lb[j])) {
          double s = x[j] - cm_.lb[j];
          G(ij) -= mu_ / s;
          H(ij, ij) += mu_ / (s * s);
        }
        if (std::isfinite(cm_.ub[j])) {
          double s = cm_.ub[j] - x[j];
          G(ij) += mu_ / s;
          H(ij, ij) += mu_ / (s * s);
        }
      }
      for (std::size_t i = 0; i < cm_.inequalities.size(); ++i) {
        const Tape& t = cm_.inequalities[i];
        double g = t.value(x);
        if (inBarrier_[i]) {
          accumulate(t, x, mu_ / -g, mu_ / (g * g), G, H, nullptr);
        } else {
          double m = lambda_[i] + rho_ * g;
          if (m > 0.0) accumulate(t, x, m, rho_, G, H, nullptr);
        }
      }
      for (std::size_t k = 0; k < cm_.equalities.size(); ++k) {
        const Tape& t = cm_.equalities[k];
        double h = t.value(x);
        accumulate(t, x, nu_[k] + rho_ * h, rho_, G, H, nullptr);
      }
    } catch (const DomainFault&) {
      return false;
    }
    return G.allFinite() && H.allFinite();
  }

  // Modified Newton on the merit function. Returns true when a domain
  // fault stopped progress.
  bool innerNewton(std::vector<double>& x, std::size_t& iterations) {
    const auto nf = static_cast<Eigen::Index>(free_.size());
    if (nf == 0) return false;
    Eigen::VectorXd G;
    Eigen::MatrixXd H;
    const double innerTol = std::max(1e-10, std::min(0.1 * mu_, 1e-6)) * (1.0 + startGradNorm_);
    double f0 = phi(x);
    if (!std::isfinite(f0)) return true;
    for (std::size_t it = 0; it < opt_.maxInner; ++it) {
      if (!derivatives(x, G, H)) return true;
      Eigen::VectorXd g(nf);
      Eigen::MatrixXd h(nf, nf);
      for (Eigen::Index a = 0; a < nf; ++a) {
        auto ia = static_cast<Eigen::Index>(free_[static_cast<std::size_t>(a)]);
        g(a) = G(ia);
        for (Eigen::Index b = 0; b < nf; ++b) h(a, b) = H(ia, static_cast<Eigen::Index>(free_[static_cast<std::size_t>(b)]));
      }
      if (g.lpNorm<Eigen::Infinity>() <= innerTol) return false;
      ++iterations;

      // Shift scaled by the diagonal so one badly scaled variable does not
      // freeze the others.
      Eigen::VectorXd d;
      double tau = 0.0;
      const Eigen::VectorXd shift = (h.diagonal().cwiseAbs().array() + 1.0).matrix();
      for (int attempt = 0; attempt < 40; ++attempt) {
        Eigen::MatrixXd m = h;
        m.diagonal() += tau * shift;
        Eigen::LLT<Eigen::MatrixXd> llt(m);
        if (llt.info() == Eigen::Success) {
          d = llt.solve(-g);
          if (d.allFinite() && g.dot(d) < 0.0) break;
        }
        tau = tau == 0.0 ? 1e-10 : tau * 10.0;
        d.resize(0);
      }
      if (d.size() == 0) d = -g;

      double alpha = 1.0;
      for (Eigen::Index a = 0; a < nf; ++a) {
        std::size_t j = free_[static_cast<std::size_t>(a)];
        if (d(a) < 0.0 && std::isfinite(cm_.lb[j])) alpha = std::min(alpha, 0.995 * (x[j] - cm_.lb[j]) / -d(a));
        if (d(a) > 0.0 && std::isfinite(cm_.ub[j])) alpha = std::min(alpha, 0.995 * (cm_.ub[j] - x[j]) / d(a));
      }
      const double slope = g.dot(d);
      std::vector<double> trial = x;
      bool accepted = false;
      bool sawFault = false;
      for (int ls = 0; ls < 60; ++ls) {
        for (Eigen::Index a = 0; a < nf; ++a) {
          std::size_t j = free_[static_cast<std::size_t>(a)];
          trial[j] = x[j] + alpha * d(a);
        }
        double ft = phi(trial);
        if (!std::isfinite(ft)) sawFault = true;
        if (std::isfinite(ft) && ft <= f0 + 1e-4 * alpha * slope) {
          f0 = ft;
          accepted = true;
          break;
        }
        alpha *= 0.5;
      }
      if (!accepted) return sawFault && alpha * d.lpNorm<Eigen::Infinity>() > 1e-12;
      double stepNorm = alpha * d.lpNorm<Eigen::Infinity>();
      x = trial;
      double xNorm = 0.0;
      for (double v : x) xNorm = std::max(xNorm, std::fabs(v));
      if (stepNorm <= 1e-14 * (1.0 + xNorm)) return false;
    }
    return false;
  }

  // Projected Lagrangian gradient with current multiplier estimates.
  double kktResidual(const std::vector<double>& x) {
    const auto n = static_cast<Eigen::Index>(n_);
    Eigen::VectorXd r = Eigen::VectorXd::Zero(n);
    auto add = [&](const Tape& t, double w) {
      if (w == 0.0) return;
      std::vector<double> g;
      t.gradient(x, g);
      for (std::size_t a = 0; a < g.size(); ++a) r(static_cast<Eigen::Index>(t.variables()[a])) += w * g[a];
    };
    try {
      add(cm_.objective, cm_.senseSign);
      for (std::size_t i = 0; i < cm_.inequalities.size(); ++i) {
        double w = lambda_[i];
        if (inBarrier_[i]) {
          double g = cm_.inequalities[i].value(x);
          w = g < 0.0 ? mu_ / -g : 0.0;
        }
        add(cm_.inequalities[i], w);
      }
      for (std::size_t k = 0; k < cm_.equalities.size(); ++k) add(cm_.equalities[k], nu_[k]);
    } catch (const DomainFault&) {
      return kInf;
    }
    double worst = 0.0;
    for (std::size_t j : free_) {
      double v = r(static_cast<Eigen::Index>(j));
      bool atLower = std::isfinite(cm_.lb[j]) && x[j] - cm_.lb[j] <= 1e-5 * (1.0 + std::fabs(cm_.lb[j]));
      bool atUpper = std::isfinite(cm_.ub[j]) && cm_.ub[j] - x[j] <= 1e-5 * (1.0 + std::fabs(cm_.ub[j]));
      if ((atLower && v > 0.0) || (atUpper && v < 0.0)) continue;
      worst = std::max(worst, std::fabs(v));
    }
    return std::isfinite(worst) ? worst : kInf;
  }

  const CompiledModel& cm_;
  double tol_;
  BarrierOptions opt_;
  std::size_t n_;
  bool penaltyOnly_;
  std::vector<std::size_t> free_;
  std::vector<bool> inBarrier_;
  std::vector<double> lambda_;
  std::vector<double> nu_;
  double mu_ = 1.0;
  double rho_ = 10.0;
  double startGradNorm_ = 0.0;
  std::size_t evaluations_ = 0;
};

}  // namespace detail

/// Interior-point style local solve of a continuous model from `start`.
/// Strictly satisfied inequalities get a log barrier; when that does not
/// converge, the solve is repeated with every inequality on the augmented
/// Lagrangian and the better outcome is kept. A feasible start is returned
/// unchanged if neither solve improves on it.
inline LocalSolveResult solveBarrier(const ModelIR& model, const std::vector<double>& start,
                                     double tol = kConstraintTolerance, BarrierOptions opt = {}) {
  const CompiledModel cm = CompiledModel::compile(model);
  auto better = [&](const LocalSolveResult& a, const LocalSolveResult& b) {
    bool fa = a.maxViolation <= tol && std::isfinite(a.objective);
    bool fb = b.maxViolation <= tol && std::isfinite(b.objective);
    if (fa != fb) return fa;
    if (!fa) return a.maxViolation < b.maxViolation;
    bool ca = a.status == LocalStatus::Converged, cb = b.status == LocalStatus::Converged;
    if (ca != cb) return ca;
    return cm.senseSign * a.objective < cm.senseSign * b.objective;
  };

  LocalSolveResult res = detail::BarrierSolver(cm, tol, opt, false).solve(start);
  if (res.status != LocalStatus::Converged) {
    LocalSolveResult second = detail::BarrierSolver(cm, tol, opt, true).solve(start);
    std::size_t iterations = res.iterations + second.iterations;
    std::size_t evaluations = res.evaluations + second.evaluations;
    if (better(second, res)) res = std::move(second);
    res.iterations = iterations;
    res.evaluations = evaluations;
  }

  std::vector<double> x0 = start;
  x0.resize(cm.n, 0.0);
  for (std::size_t j = 0; j < cm.n; ++j) x0[j] = std::clamp(x0[j], cm.lb[j], cm.ub[j]);
  double v0 = kInf, f0 = kInf;
  try {
    v0 = cm.maxViolation(x0);
    f0 = cm.objectiveMin(x0);
  } catch (const DomainFault&) {
  }
  if (v0 <= tol && std::isfinite(f0)) {
    bool worse = res.maxViolation > tol || !(cm.senseSign * res.objective <= f0 + tol * (1.0 + std::fabs(f0)));
    if (worse) {
      res.point = x0;
      res.objective = cm.senseSign * f0;
      res.maxViolation = v0;
      if (res.status == LocalStatus::Converged) res.status = LocalStatus::IterationLimit;
      res.diagnostic = "no improvement over the feasible start";
    }
  }
  return res;
}

}  // namespace autoopt

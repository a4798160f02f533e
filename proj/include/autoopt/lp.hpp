#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "autoopt/local_result.hpp"
#include "autoopt/model.hpp"

namespace autoopt {

/// Affine data of a linear model: minimize c.x + c0 subject to
/// A x + a0 <= 0, E x + e0 = 0, lb <= x <= ub (minimization-oriented).
struct LinearData {
  Eigen::VectorXd c;
  double c0 = 0.0;
  Eigen::MatrixXd A;
  Eigen::VectorXd a0;
  Eigen::MatrixXd E;
  Eigen::VectorXd e0;
  std::vector<double> lb;
  std::vector<double> ub;
};

namespace detail {

inline void affineRow(const Tape& t, std::size_t n, Eigen::Ref<Eigen::VectorXd> row, double& constant) {
  std::vector<double> zero(n, 0.0);
  std::vector<double> g;
  constant = t.gradient(zero, g);
  row.setZero();
  for (std::size_t k = 0; k < g.size(); ++k) row(static_cast<Eigen::Index>(t.variables()[k])) = g[k];
}

/// Dense tableau simplex with Bland's rule. Column `cols` holds the
/// right-hand side and row `rows` the reduced costs.
class Tableau {
 public:
  Tableau(Eigen::Index rows, Eigen::Index cols) : t_(Eigen::MatrixXd::Zero(rows + 1, cols + 1)), basis_(rows, -1) {}

  Eigen::MatrixXd& data() { return t_; }
  std::vector<Eigen::Index>& basis() { return basis_; }
  Eigen::Index rows() const { return t_.rows() - 1; }
  Eigen::Index cols() const { return t_.cols() - 1; }
  double rhs(Eigen::Index r) const { return t_(r, cols()); }

  void pivot(Eigen::Index r, Eigen::Index c) {
    t_.row(r) /= t_(r, c);
    for (Eigen::Index i = 0; i < t_.rows(); ++i)
      if (i != r && t_(i, c) != 0.0) t_.row(i) -= t_(i, c) * t_.row(r);
    basis_[static_cast<std::size_t>(r)] = c;
  }

  enum class Outcome { Optimal, Unbounded, IterationLimit };

  /// Runs simplex iterations; only columns below `allowed` may enter.
  Outcome run(Eigen::Index allowed, std::size_t& iterations, std::size_t maxIterations) {
    constexpr double eps = 1e-10;
    const Eigen::Index m = rows();
    while (iterations < maxIterations) {
      Eigen::Index enter = -1;
      for (Eigen::Index j = 0; j < allowed; ++j)
        if (t_(m, j) < -eps) {
          enter = j;
          break;
        }
      if (enter < 0) return Outcome::Optimal;
      Eigen::Index leave = -1;
      double best = 0.0;
      for (Eigen::Index i = 0; i < m; ++i) {
        double a = t_(i, enter);
        if (a <= eps) continue;
        double ratio = rhs(i) / a;
        if (leave < 0 || ratio < best - eps ||
            (ratio <= best + eps && basis_[static_cast<std::size_t>(i)] < basis_[static_cast<std::size_t>(leave)])) {
          leave = i;
          best = ratio;
        }
      }
      if (leave < 0) return Outcome::Unbounded;
      pivot(leave, enter);
      ++iterations;
    }
    return Outcome::IterationLimit;
  }

 private:
  Eigen::MatrixXd t_;
  std::vector<Eigen::Index> basis_;
};

}  // namespace detail

/// Extracts affine coefficients. The model must be linear in all variables.
inline LinearData linearData(const ModelIR& model) {
  const CompiledModel cm = CompiledModel::compile(model);
  const auto n = static_cast<Eigen::Index>(cm.n);
  LinearData d;
  d.c.resize(n);
  detail::affineRow(cm.objective, cm.n, d.c, d.c0);
  d.c *= cm.senseSign;
  d.c0 *= cm.senseSign;
  d.A.resize(static_cast<Eigen::Index>(cm.inequalities.size()), n);
  d.a0.resize(d.A.rows());
  for (Eigen::Index i = 0; i < d.A.rows(); ++i) {
    Eigen::VectorXd row(n);
    detail::affineRow(cm.inequalities[static_cast<std::size_t>(i)], cm.n, row, d.a0(i));
    d.A.row(i) = row.transpose();
  }
  d.E.resize(static_cast<Eigen::Index>(cm.equalities.size()), n);
  d.e0.resize(d.E.rows());
  for (Eigen::Index i = 0; i < d.E.rows(); ++i) {
    Eigen::VectorXd row(n);
    detail::affineRow(cm.equalities[static_cast<std::size_t>(i)], cm.n, row, d.e0(i));
    d.E.row(i) = row.transpose();
  }
  d.lb = cm.lb;
  d.ub = cm.ub;
  return d;
}

/// Two-phase simplex on the affine data. Result point is in the original
/// variables; objective is minimization-oriented (c.x + c0).
inline LocalSolveResult solveLinear(const LinearData& d, double tol = kConstraintTolerance) {
  using Eigen::Index;
  const Index n = d.c.size();
  LocalSolveResult res;
  res.usedLP = true;

  // x = offset + S s with s >= 0.
  Eigen::VectorXd offset = Eigen::VectorXd::Zero(n);
  std::vector<std::pair<Index, double>> columns;  // (variable, sign)
  std::vector<std::pair<Index, double>> upperRows;  // (column, width)
  for (Index j = 0; j < n; ++j) {
    double lo = d.lb[static_cast<std::size_t>(j)], hi = d.ub[static_cast<std::size_t>(j)];
    if (std::isfinite(lo) && lo == hi) {
      offset(j) = lo;
    } else if (std::isfinite(lo)) {
      offset(j) = lo;
      columns.push_back({j, 1.0});
      if (std::isfinite(hi)) upperRows.push_back({static_cast<Index>(columns.size()) - 1, hi - lo});
    } else if (std::isfinite(hi)) {
      offset(j) = hi;
      columns.push_back({j, -1.0});
    } else {
      columns.push_back({j, 1.0});
      columns.push_back({j, -1.0});
    }
  }
  const Index ns = static_cast<Index>(columns.size());
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(n, ns);
  for (Index k = 0; k < ns; ++k) S(columns[static_cast<std::size_t>(k)].first, k) = columns[static_cast<std::size_t>(k)].second;

  // Inequality rows: general constraints then finite widths.
  const Index mi = d.A.rows() + static_cast<Index>(upperRows.size());
  const Index me = d.E.rows();
  Eigen::MatrixXd Ai(mi, ns);
  Eigen::VectorXd bi(mi);
  if (d.A.rows() > 0) {
    Ai.topRows(d.A.rows()) = d.A * S;
    bi.head(d.A.rows()) = -d.a0 - d.A * offset;
  }
  for (std::size_t k = 0; k < upperRows.size(); ++k) {
    Index r = d.A.rows() + static_cast<Index>(k);
    Ai.row(r).setZero();
    Ai(r, upperRows[k].first) = 1.0;
    bi(r) = upperRows[k].second;
  }
  Eigen::MatrixXd Ae = me > 0 ? Eigen::MatrixXd(d.E * S) : Eigen::MatrixXd(0, ns);
  Eigen::VectorXd be = me > 0 ? Eigen::VectorXd(-d.e0 - d.E * offset) : Eigen::VectorXd(0);

  const Index m = mi + me;
  std::vector<Index> artificialRows;
  for (Index i = 0; i < mi; ++i)
    if (bi(i) < 0.0) artificialRows.push_back(i);
  for (Index i = 0; i < me; ++i) artificialRows.push_back(mi + i);
  const Index na = static_cast<Index>(artificialRows.size());
  const Index artStart = ns + mi;
  detail::Tableau tb(m, ns + mi + na);
  auto& T = tb.data();
  const Index rhsCol = tb.cols();
  for (Index i = 0; i < mi; ++i) {
    double sgn = bi(i) < 0.0 ? -1.0 : 1.0;
    T.row(i).head(ns) = sgn * Ai.row(i);
    T(i, ns + i) = sgn;
    T(i, rhsCol) = sgn * bi(i);
    tb.basis()[static_cast<std::size_t>(i)] = ns + i;
  }
  for (Index i = 0; i < me; ++i) {
    double sgn = be(i) < 0.0 ? -1.0 : 1.0;
    T.row(mi + i).head(ns) = sgn * Ae.row(i);
    T(mi + i, rhsCol) = sgn * be(i);
  }
  for (Index k = 0; k < na; ++k) {
    Index r = artificialRows[static_cast<std::size_t>(k)];
    T(r, artStart + k) = 1.0;
    tb.basis()[static_cast<std::size_t>(r)] = artStart + k;
  }
  const double bnorm = (na > 0 || m > 0) ? T.col(rhsCol).head(m).lpNorm<1>() : 0.0;
  const std::size_t maxIter = static_cast<std::size_t>(50 * (m + ns + na + 1));

  auto finish = [&](LocalStatus st, const std::string& diag) {
    Eigen::VectorXd s = Eigen::VectorXd::Zero(ns);
    for (Index i = 0; i < m; ++i) {
      Index b = tb.basis()[static_cast<std::size_t>(i)];
      if (b < ns) s(b) = T(i, rhsCol);
    }
    Eigen::VectorXd x = offset + S * s;
    res.point.assign(x.data(), x.data() + n);
    res.objective = d.c.dot(x) + d.c0;
    double viol = 0.0;
    for (Index j = 0; j < n; ++j)
      viol = std::max({viol, d.lb[static_cast<std::size_t>(j)] - x(j), x(j) - d.ub[static_cast<std::size_t>(j)]});
    if (d.A.rows() > 0) viol = std::max(viol, (d.A * x + d.a0).maxCoeff());
    if (me > 0) viol = std::max(viol, (d.E * x + d.e0).cwiseAbs().maxCoeff());
    res.maxViolation = std::max(viol, 0.0);
    res.status = st;
    res.diagnostic = diag;
    return res;
  };

  // Phase 1.
  if (na > 0) {
    for (Index r : artificialRows) T.row(m) -= T.row(r);
    auto out = tb.run(artStart, res.iterations, maxIter);
    if (out == detail::Tableau::Outcome::IterationLimit) return finish(LocalStatus::IterationLimit, "phase 1 iteration limit");
    if (-T(m, rhsCol) > 1e-9 * (1.0 + bnorm)) return finish(LocalStatus::InfeasibleDetected, "linear constraints are infeasible");
    for (Index i = 0; i < m; ++i) {
      if (tb.basis()[static_cast<std::size_t>(i)] < artStart) continue;
      for (Index j = 0; j < artStart; ++j)
        if (std::fabs(T(i, j)) > 1e-9) {
          tb.pivot(i, j);
          break;
        }
    }
  }

  // Phase 2.
  T.row(m).setZero();
  Eigen::VectorXd cs = S.transpose() * d.c;
  T.row(m).head(ns) = cs.transpose();
  for (Index i = 0; i < m; ++i) {
    Index b = tb.basis()[static_cast<std::size_t>(i)];
    if (b < ns && cs(b) != 0.0) T.row(m) -= cs(b) * T.row(i);
  }
  auto out = tb.run(artStart, res.iterations, maxIter);
  if (out == detail::Tableau::Outcome::Unbounded) return finish(LocalStatus::IterationLimit, "linear program is unbounded");
  if (out == detail::Tableau::Outcome::IterationLimit) return finish(LocalStatus::IterationLimit, "phase 2 iteration limit");
  finish(LocalStatus::Converged, "");
  if (res.maxViolation > std::max(tol, 1e-4 * (1.0 + bnorm))) res.status = LocalStatus::InfeasibleDetected;
  return res;
}

/// Solves a model whose objective and constraints are affine. The start
/// point is not needed by the simplex method; it is accepted for interface
/// symmetry with the barrier solver and returned on a domain fault.
inline LocalSolveResult solveLP(const ModelIR& model, const std::vector<double>& start = {},
                                double tol = kConstraintTolerance) {
  LinearData d;
  try {
    d = linearData(model);
  } catch (const DomainFault& e) {
    // Affine bodies only fault in constant subterms, so nowhere is defined.
    LocalSolveResult r;
    r.point = start;
    r.point.resize(model.size(), 0.0);
    r.status = LocalStatus::DomainFaultAbort;
    r.objective = std::numeric_limits<double>::quiet_NaN();
    r.maxViolation = kInf;
    r.diagnostic = e.what();
    return r;
  }
  LocalSolveResult r = solveLinear(d, tol);
  if (model.sense == Sense::Maximize) r.objective = -r.objective;
  r.evaluations = 1 + static_cast<std::size_t>(d.A.rows() + d.E.rows());
  return r;
}

}  // namespace autoopt

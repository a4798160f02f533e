#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <Eigen/Dense>

#include "autoopt/latex.hpp"
#include "autoopt/local_solver.hpp"
#include "oracles.hpp"

using namespace autoopt;
using namespace autoopt::oracle;

namespace {

ModelIR parse(const std::string& text) { return parseModel(text, {}).model; }

std::string readFixture(const std::string& name) {
  std::ifstream in(std::filesystem::path(AUTOOPT_FIXTURE_DIR) / name);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<double> midpoint(const ModelIR& m) { return boxMidpoint(m); }

}  // namespace

TEST(LocalSolver, SingleBoundedVariable) {
  ModelIR m;
  m.variables = {{"x", 0.0, 10.0, Domain::Continuous, FamilyRole::Scalar}};
  m.objective = Expr::variable(0);
  m.constraints.push_back(
      makeConstraint(Expr::variable(0), WrittenRelation::GreaterEqual, Expr::constant(1.0), Quantifier::None));
  auto r = solveLocal(m, midpoint(m));
  EXPECT_EQ(r.status, LocalStatus::Converged);
  EXPECT_NEAR(r.point[0], 1.0, 1e-6);
  EXPECT_NEAR(r.objective, 1.0, 1e-6);
  auto viaBarrier = solveBarrier(m, midpoint(m));
  EXPECT_NEAR(viaBarrier.point[0], 1.0, 1e-5);
}

TEST(LocalSolver, TwoVariableLpMatchesVertexOracle) {
  ModelIR m = parse(R"(\max \quad 3p + 2r \\ \text{s.t.} \quad p + r \leq 4; \quad p \leq 2; \quad p, r \geq 0)");
  auto r = solveLocal(m, midpoint(m));
  EXPECT_TRUE(r.usedLP);
  EXPECT_EQ(r.status, LocalStatus::Converged);
  EXPECT_NEAR(r.objective, 10.0, 1e-9);
  std::size_t p = *m.find("p"), q = *m.find("r");
  EXPECT_NEAR(r.point[p], 2.0, 1e-9);
  EXPECT_NEAR(r.point[q], 2.0, 1e-9);

  auto viaBarrier = solveBarrier(m, midpoint(m));
  EXPECT_NEAR(viaBarrier.objective, 10.0, 1e-5);
}

TEST(LocalSolver, SymmetricQuadraticWithEquality) {
  ModelIR m = parse(R"(\min \quad x_1^2 + x_2^2 \\ \text{s.t.} \quad x_1 + x_2 = 1)");
  auto r = solveLocal(m, {0.0, 0.0});
  EXPECT_FALSE(r.usedLP);
  EXPECT_EQ(r.status, LocalStatus::Converged);
  EXPECT_NEAR(r.point[0], 0.5, 1e-5);
  EXPECT_NEAR(r.point[1], 0.5, 1e-5);
}

TEST(LocalSolver, ShiftedSquare) {
  ModelIR m = parse(R"(\min \quad (x - 2)^2 \\ \text{s.t.} \quad x \geq 0)");
  auto r = solveBarrier(m, midpoint(m));
  EXPECT_EQ(r.status, LocalStatus::Converged);
  EXPECT_LE(std::fabs(r.point[0] - 2.0), 1e-6);
}

TEST(LocalSolver, EqualityOnly) {
  ModelIR m = parse(R"(\min \quad x_1 \\ \text{s.t.} \quad x_1 - x_2 = 0; \quad x_2 = 3)");
  auto r = solveBarrier(m, {0.0, 0.0});
  EXPECT_EQ(r.status, LocalStatus::Converged);
  EXPECT_NEAR(r.point[0], 3.0, 1e-5);
  EXPECT_NEAR(r.point[1], 3.0, 1e-5);
}

TEST(LocalSolver, InfeasiblePair) {
  ModelIR m;
  m.variables = {{"x", -kInf, kInf, Domain::Continuous, FamilyRole::Scalar}};
  Expr x = Expr::variable(0);
  m.objective = x;
  m.constraints.push_back(makeConstraint(x, WrittenRelation::LessEqual, Expr::constant(-1.0), Quantifier::None));
  m.constraints.push_back(makeConstraint(x, WrittenRelation::GreaterEqual, Expr::constant(0.0), Quantifier::None));
  auto r = solveLocal(m, {0.0});
  EXPECT_TRUE(r.usedLP);
  EXPECT_EQ(r.status, LocalStatus::InfeasibleDetected);
}

TEST(LocalSolver, UnboundedLpReportsIterationLimit) {
  ModelIR m = parse(R"(\min \quad -x \\ \text{s.t.} \quad x \geq 0)");
  auto r = solveLP(m, {0.0});
  EXPECT_EQ(r.status, LocalStatus::IterationLimit);
  EXPECT_FALSE(r.diagnostic.empty());
}

TEST(LocalSolver, FixingOneVariableLinearizes) {
  // Bilinear in (q, a, b); with q fixed the rest is a linear program.
  ModelIR m = parse(R"(\min \quad q \cdot a - b \\ \text{s.t.} \quad a + q \cdot b \leq 4; \quad a - b \geq -1; \quad 0 \leq a, b \leq 5; \quad 1 \leq q \leq 3)");
  EXPECT_FALSE(isLinearModel(m));
  auto sub = substituteFixed(m, std::map<std::size_t, double>{{*m.find("q"), 2.0}});
  ASSERT_TRUE(isLinearModel(sub.model));
  auto r = solveLocal(sub.model, midpoint(sub.model));
  EXPECT_TRUE(r.usedLP);
  EXPECT_EQ(r.status, LocalStatus::Converged);
  // min 2a - b s.t. a + 2b <= 4, b <= a + 1, a >= 0: vertex (0, 1).
  EXPECT_NEAR(r.objective, -1.0, 1e-9);
}

TEST(LocalSolver, Tp1WithLeadingVariablesFixedTakesLpPath) {
  ModelIR tp1 = parseModel(readFixture("tp1.tex"), {}).model;
  std::map<std::size_t, double> fixed{{*tp1.find("x1"), 0.5}, {*tp1.find("x2"), 4.17}, {*tp1.find("x3"), 11.33}};
  auto sub = substituteFixed(tp1, fixed);
  EXPECT_EQ(sub.model.variables.size(), 3u);
  EXPECT_TRUE(isLinearModel(sub.model));
  auto r = solveLocal(sub.model, midpoint(sub.model));
  EXPECT_TRUE(r.usedLP);
}

TEST(LocalSolver, Tp2FromMidpointIsFeasible) {
  ModelIR tp2 = parseModel(readFixture("tp2.tex"), {}).model;
  auto r = solveBarrier(tp2, midpoint(tp2));
  EXPECT_LE(r.maxViolation, kConstraintTolerance);
  EXPECT_NEAR(r.objective, 193.785, 1e-2);
}

TEST(LocalSolver, RandomLpsAgreeAcrossMethods) {
  std::mt19937_64 rng(20240611);
  for (int trial = 0; trial < 50; ++trial) {
    RandomLp lp = randomLp(rng);
    const double oracle = vertexOracle(lp);
    auto simplex = solveLP(lp.model, midpoint(lp.model));
    auto barrier = solveBarrier(lp.model, midpoint(lp.model));
    ASSERT_EQ(simplex.status, LocalStatus::Converged) << "trial " << trial;
    EXPECT_NEAR(simplex.objective, oracle, 1e-9 * (1.0 + std::fabs(oracle))) << "trial " << trial;
    EXPECT_LE(std::fabs(barrier.objective - simplex.objective), 1e-5 * (1.0 + std::fabs(simplex.objective)))
        << "trial " << trial;
    EXPECT_LE(barrier.maxViolation, kConstraintTolerance);
  }
}

TEST(LocalSolver, NoWorseThanFeasibleStart) {
  ModelIR tp = parseModel(readFixture("tp3.tex"), {}).model;
  auto first = solveBarrier(tp, midpoint(tp));
  ASSERT_LE(first.maxViolation, kConstraintTolerance);
  auto again = solveBarrier(tp, first.point);
  EXPECT_LE(again.objective, first.objective + kConstraintTolerance * (1.0 + std::fabs(first.objective)));
}

TEST(LocalSolver, Deterministic) {
  ModelIR tp = parseModel(readFixture("tp8.tex"), {2, 2, ""}).model;
  auto a = solveLocal(tp, midpoint(tp));
  auto b = solveLocal(tp, midpoint(tp));
  EXPECT_EQ(a.point, b.point);
  EXPECT_EQ(a.objective, b.objective);
  EXPECT_EQ(a.iterations, b.iterations);
}

TEST(LocalSolver, StartOutsideBoundsIsClamped) {
  ModelIR m = parse(R"(\min \quad (x - 2)^2 \\ \text{s.t.} \quad 0 \leq x \leq 1)");
  auto r = solveLocal(m, {50.0});
  EXPECT_LE(r.maxViolation, kConstraintTolerance);
  EXPECT_NEAR(r.point[0], 1.0, 1e-5);
}

TEST(LocalSolver, ObjectiveFaultAtStartIsReported) {
  ModelIR m = parse(R"(\min \quad -\log(x_1 - x_2) \\ \text{s.t.} \quad x_1 + x_2 \leq 4; \quad 0 \leq x_1 \leq 4; \quad 0 \leq x_2 \leq 4)");
  LocalSolveResult r;
  ASSERT_NO_THROW(r = solveBarrier(m, {1.0, 3.0}));
  EXPECT_EQ(r.status, LocalStatus::DomainFaultAbort);
  ASSERT_NO_THROW(r = solveLocal(m, {1.0, 3.0}));
  EXPECT_EQ(r.status, LocalStatus::DomainFaultAbort);
}

TEST(LocalSolver, FaultingConstantInLinearModelIsReported) {
  ModelIR m;
  m.variables = {{"x", 0.0, 1.0, Domain::Continuous, FamilyRole::Scalar}};
  m.objective = Expr::variable(0) + Expr::unary(UnaryOp::Log, Expr::constant(-1.0));
  LocalSolveResult r;
  ASSERT_NO_THROW(r = solveLocal(m, {0.5}));
  EXPECT_EQ(r.status, LocalStatus::DomainFaultAbort);
  EXPECT_EQ(r.point.size(), 1u);
}

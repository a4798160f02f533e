#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "autoopt/latex.hpp"
#include "autoopt/test_problems.hpp"

using namespace autoopt;

namespace {

std::string readFixture(const std::string& name) {
  std::ifstream in(std::filesystem::path(AUTOOPT_FIXTURE_DIR) / name);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::size_t count(const ModelIR& m, Relation rel) {
  std::size_t n = 0;
  for (const auto& c : m.constraints) n += c.rel == rel;
  return n;
}

}  // namespace

TEST(TestProblems, EmbeddedLatexMatchesFixtureFiles) {
  for (int tp = 1; tp <= kTestProblemCount; ++tp)
    EXPECT_EQ(tpLatex(tp), readFixture("tp" + std::to_string(tp) + ".tex")) << "tp" << tp;
}

TEST(TestProblems, BuildersMatchParserAtEveryScale) {
  for (int tp = 1; tp <= kTestProblemCount; ++tp) {
    for (std::size_t scale : {0, 20, 50}) {
      if (tp <= 3 && scale > 0) continue;
      auto [p, q] = tpFamilySizes(tp, scale);
      ModelIR parsed = parseModel(tpLatex(tp), {p, q, ""}).model;
      std::string why;
      EXPECT_TRUE(structurallyEqual(buildTp(tp, scale), parsed, false, &why)) << "tp" << tp << " scale " << scale
                                                                             << ": " << why;
    }
  }
}

TEST(TestProblems, ComparisonDetectsPerturbedCoefficient) {
  ModelIR parsed = parseModel(tpLatex(1), {}).model;
  ModelIR built = buildTp(1, 0);
  built.objective = built.objective + Expr::constant(1e-12) * Expr::variable(0);
  EXPECT_FALSE(structurallyEqual(built, parsed));
  built = buildTp(1, 0);
  built.variables[0].ub = 3.5;
  EXPECT_FALSE(structurallyEqual(built, parsed));
  built = buildTp(1, 0);
  built.constraints.pop_back();
  EXPECT_FALSE(structurallyEqual(built, parsed));
}

TEST(TestProblems, Tp1Shape) {
  ModelIR m = buildTp(1, 0);
  EXPECT_EQ(m.size(), 6u);
  EXPECT_EQ(count(m, Relation::Equal), 3u);
  EXPECT_EQ(count(m, Relation::LessEqual), 3u);
  std::size_t upper = 0;
  for (const auto& v : m.variables) {
    EXPECT_EQ(v.lb, 0.0);
    upper += std::isfinite(v.ub);
  }
  EXPECT_EQ(upper, 3u);
}

TEST(TestProblems, Tp4ScaleTwentyHasTwentyQuantifiedRows) {
  ModelIR m = buildTp(4, 20);
  EXPECT_EQ(m.size(), 26u);
  EXPECT_EQ(m.P, 20u);
  EXPECT_EQ(m.Q, 0u);
  ModelIR e = expandModel(m);
  std::size_t plain = 0;
  for (const auto& c : m.constraints) plain += c.quantifier == Quantifier::None;
  EXPECT_EQ(plain, 5u);
  EXPECT_EQ(e.constraints.size(), plain + 20);
}

TEST(TestProblems, FamilySplit) {
  ModelIR m = buildTp(6, 50);
  EXPECT_EQ(m.P, 25u);
  EXPECT_EQ(m.Q, 25u);
  EXPECT_EQ(tpFamilySizes(7, 21), (std::pair<std::size_t, std::size_t>{11, 10}));
  EXPECT_EQ(tpFamilySizes(10, 20), (std::pair<std::size_t, std::size_t>{10, 10}));
  for (int tp : {4, 5, 8, 9}) EXPECT_EQ(tpFamilySizes(tp, 20), (std::pair<std::size_t, std::size_t>{20, 0}));
}

TEST(TestProblems, InvalidRequestsThrow) {
  EXPECT_THROW(buildTp(1, 20), SpecError);
  EXPECT_THROW(buildTp(3, 50), SpecError);
  EXPECT_THROW(buildTp(0, 0), SpecError);
  EXPECT_THROW(buildTp(11, 0), SpecError);
  EXPECT_THROW(tpLatex(11), SpecError);
}

TEST(TestProblems, ModelsValidate) {
  for (int tp = 1; tp <= kTestProblemCount; ++tp)
    for (std::size_t scale : {0, 20}) {
      if (tp <= 3 && scale > 0) continue;
      EXPECT_NO_THROW(buildTp(tp, scale).validate());
    }
}

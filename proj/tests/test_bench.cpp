#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "autoopt/bench.hpp"
#include "autoopt/registry.hpp"

using namespace autoopt;

namespace {

// Independent quantile: order statistics located with nth_element, then
// blended by the fractional rank.
double oracleQuantile(std::vector<double> v, double p) {
  const double h = (static_cast<double>(v.size()) - 1.0) * p;
  const auto k = static_cast<std::ptrdiff_t>(h);
  std::nth_element(v.begin(), v.begin() + k, v.end());
  const double lo = v[static_cast<std::size_t>(k)];
  if (static_cast<std::size_t>(k) + 1 >= v.size()) return lo;
  const double hi = *std::min_element(v.begin() + k + 1, v.end());
  return lo * (1.0 - (h - static_cast<double>(k))) + hi * (h - static_cast<double>(k));
}

ExperimentSpec quickSpec() {
  ExperimentSpec s;
  s.tp = 1;
  s.runs = 2;
  s.baseSeed = 100;
  s.config.populationSize = 20;
  s.config.maxGenerations = 10;
  return s;
}

std::vector<std::string> lines(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::filesystem::path tempDir(const std::string& name) {
  auto d = std::filesystem::temp_directory_path() / ("autoopt_test_" + name);
  std::filesystem::remove_all(d);
  return d;
}

ReferenceEntry tp1Entry() {
  SolveReport ip = ipSolve(buildTp(1, 0));
  ReferenceEntry e;
  e.tp = 1;
  e.method = "ip";
  e.objective = ip.bestObjective;
  e.maxViolation = ip.maxViolation;
  e.point = ip.bestPoint;
  return e;
}

}  // namespace

TEST(Statistics, KnownQuartiles) {
  std::vector<double> v{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  EXPECT_DOUBLE_EQ(quantile(v, 0.25), 3.25);
  EXPECT_DOUBLE_EQ(quantile(v, 0.5), 5.5);
  EXPECT_DOUBLE_EQ(quantile(v, 0.75), 7.75);
  EXPECT_DOUBLE_EQ(median({7.0}), 7.0);
  EXPECT_DOUBLE_EQ(median({3.0, 1.0}), 2.0);
  EXPECT_THROW(quantile({}, 0.5), ConfigError);
}

TEST(Statistics, QuartilesMatchOracle) {
  std::mt19937_64 rng(77);
  std::lognormal_distribution<double> dist(0.0, 2.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> v(1 + rng() % 40);
    for (auto& x : v) x = dist(rng);
    BoxStats b = boxStats(v);
    EXPECT_NEAR(b.q1, oracleQuantile(v, 0.25), 1e-9 * (1 + b.q1));
    EXPECT_NEAR(b.median, oracleQuantile(v, 0.5), 1e-9 * (1 + b.median));
    EXPECT_NEAR(b.q3, oracleQuantile(v, 0.75), 1e-9 * (1 + b.q3));
    EXPECT_EQ(b.min, *std::min_element(v.begin(), v.end()));
    EXPECT_EQ(b.max, *std::max_element(v.begin(), v.end()));
    EXPECT_LE(b.lowerWhisker, b.q1);
    EXPECT_GE(b.upperWhisker, b.q3);
  }
}

TEST(Statistics, WhiskersExcludeOutliers) {
  BoxStats b = boxStats({1, 2, 3, 4, 100});
  EXPECT_DOUBLE_EQ(b.q1, 2);
  EXPECT_DOUBLE_EQ(b.q3, 4);
  EXPECT_DOUBLE_EQ(b.lowerWhisker, 1);
  EXPECT_DOUBLE_EQ(b.upperWhisker, 4);
  EXPECT_DOUBLE_EQ(b.max, 100);
}

TEST(Experiment, SpecValidation) {
  ExperimentSpec s = quickSpec();
  s.methods.clear();
  EXPECT_THROW(runExperiment(s), ConfigError);
  s = quickSpec();
  s.scale = 20;
  EXPECT_THROW(runExperiment(s), SpecError);
  s = quickSpec();
  s.tp = 4;
  s.scale = 7;
  EXPECT_THROW(runExperiment(s), SpecError);
  s = quickSpec();
  s.runs = 0;
  EXPECT_THROW(runExperiment(s), ConfigError);
}

TEST(Experiment, RowsFollowProtocol) {
  ExperimentSpec s = quickSpec();
  auto rows = runExperiment(s);
  ASSERT_EQ(rows.size(), 6u);
  for (std::size_t r = 0; r < 2; ++r) {
    const ResultRow& bobd = rows[3 * r];
    const ResultRow& ga = rows[3 * r + 1];
    const ResultRow& ip = rows[3 * r + 2];
    EXPECT_EQ(bobd.method, "bobd");
    EXPECT_EQ(ga.method, "ga");
    EXPECT_EQ(ip.method, "ip");
    for (const auto* row : {&bobd, &ga, &ip}) {
      EXPECT_EQ(row->run, r);
      EXPECT_EQ(row->seed, 100 + r);
      EXPECT_FALSE(row->absDeviation.has_value());
    }
    EXPECT_LE(ga.evaluations, 2 * bobd.evaluations + s.config.offspringPerGeneration);
    EXPECT_GE(ga.evaluations, 2 * bobd.evaluations);
  }
  EXPECT_EQ(rows[2].objective, rows[5].objective);
}

TEST(Experiment, WallTimeBudgetPairsWithBobd) {
  ExperimentSpec s = quickSpec();
  s.methods = {Method::Bobd, Method::Ga};
  s.gaBudget = GaBudget::WallTime;
  auto rows = runExperiment(s);
  ASSERT_EQ(rows.size(), 4u);
  for (std::size_t r = 0; r < 2; ++r) EXPECT_LE(rows[2 * r + 1].timeSeconds, 2 * rows[2 * r].timeSeconds + 0.25);
}

TEST(Experiment, GaWithoutBobdUsesFallbackBudget) {
  ExperimentSpec s = quickSpec();
  s.methods = {Method::Ga};
  s.gaFallbackEvaluations = 3000;
  auto rows = runExperiment(s);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_GE(rows[0].evaluations, 3000u);
  EXPECT_LE(rows[0].evaluations, 3002u);
}

TEST(Experiment, DeviationUsesReference) {
  ReferenceRegistry reg;
  ReferenceEntry e = tp1Entry();
  reg.offer(e);
  ExperimentSpec s = quickSpec();
  s.methods = {Method::Ip};
  auto rows = runExperiment(s, &reg);
  ASSERT_TRUE(rows[0].absDeviation.has_value());
  EXPECT_DOUBLE_EQ(*rows[0].absDeviation, std::fabs(rows[0].objective - e.objective));
}

TEST(Experiment, ThreadedRunsMatchSequential) {
  ExperimentSpec s = quickSpec();
  auto a = runExperiment(s);
  s.threads = 2;
  auto b = runExperiment(s);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].objective, b[i].objective);
    EXPECT_EQ(a[i].evaluations, b[i].evaluations);
  }
}

TEST(Report, WritesThreeFiles) {
  ExperimentSpec s = quickSpec();
  s.runs = 11;
  s.config.maxGenerations = 2;
  auto rows = runExperiment(s);
  ASSERT_EQ(rows.size(), 33u);
  auto dir = tempDir("report");
  reportResults(rows, dir);
  auto results = lines(dir / "results.csv");
  ASSERT_EQ(results.size(), 34u);
  EXPECT_EQ(results[0], kResultsHeader);
  auto summary = lines(dir / "summary.csv");
  EXPECT_EQ(summary.size(), 4u);
  EXPECT_TRUE(std::filesystem::exists(dir / "boxplot.csv"));
  std::filesystem::remove_all(dir);
}

TEST(Report, BoxplotRowsFromDeviations) {
  std::vector<ResultRow> rows;
  for (int i = 0; i < 5; ++i) {
    ResultRow r;
    r.tp = 2;
    r.method = "bobd";
    r.run = static_cast<std::size_t>(i);
    r.objective = 10.0 + i;
    r.maxViolation = 0;
    r.feasible = true;
    r.absDeviation = static_cast<double>(i);
    rows.push_back(r);
  }
  auto dir = tempDir("box");
  reportResults(rows, dir);
  auto box = lines(dir / "boxplot.csv");
  ASSERT_EQ(box.size(), 2u);
  EXPECT_EQ(box[1], "2,0,bobd,5,0,0,1,2,3,4,4");
  auto summary = lines(dir / "summary.csv");
  EXPECT_EQ(summary[1], "2,0,bobd,5,5,2,0,4,12,10,0");
  std::filesystem::remove_all(dir);
}

TEST(Report, RejectsEmptyInput) { EXPECT_THROW(reportResults({}, tempDir("empty")), ConfigError); }

TEST(Report, CsvLineFormat) {
  ResultRow r;
  r.tp = 3;
  r.method = "ga";
  r.run = 4;
  r.seed = 11;
  r.objective = -1.5;
  r.maxViolation = 2e-5;
  r.feasible = true;
  r.timeSeconds = 0.25;
  EXPECT_EQ(resultsCsvLine(r), "3,0,ga,4,11,-1.5,2e-05,true,0.25,");
}

TEST(Registry, MissingEntryThrows) {
  ReferenceRegistry reg;
  EXPECT_THROW(reg.referenceValue(1, 0), MissingReference);
  EXPECT_THROW(ReferenceRegistry::load("/nonexistent/reference.json"), MissingReference);
}

TEST(Registry, OfferKeepsLowerObjective) {
  ReferenceRegistry reg;
  ReferenceEntry e = tp1Entry();
  EXPECT_TRUE(reg.offer(e));
  ReferenceEntry worse = e;
  worse.objective += 1.0;
  EXPECT_FALSE(reg.offer(worse));
  EXPECT_DOUBLE_EQ(reg.referenceValue(1, 0), e.objective);
}

TEST(Registry, JsonRoundTripAndRevalidation) {
  ReferenceRegistry reg;
  reg.metadata["runs"] = 21;
  reg.offer(tp1Entry());
  auto path = tempDir("registry") / "reference.json";
  reg.save(path);
  ReferenceRegistry back = ReferenceRegistry::load(path);
  EXPECT_EQ(back.toJson(), reg.toJson());
  std::filesystem::remove_all(path.parent_path());
}

TEST(Registry, RevalidationRejectsBadEntries) {
  ReferenceEntry e = tp1Entry();
  ReferenceRegistry wrongObjective;
  ReferenceEntry w = e;
  w.objective -= 1.0;
  wrongObjective.offer(w);
  EXPECT_THROW(wrongObjective.revalidate(), FormatError);

  ReferenceRegistry infeasible;
  ReferenceEntry bad = e;
  bad.point.assign(bad.point.size(), 5.0);
  bad.objective = evaluateObjective(buildTp(1, 0), bad.point);
  infeasible.offer(bad);
  EXPECT_THROW(infeasible.revalidate(), FormatError);

  ReferenceRegistry shortPoint;
  ReferenceEntry s = e;
  s.point.pop_back();
  shortPoint.offer(s);
  EXPECT_THROW(shortPoint.revalidate(), FormatError);
}

TEST(Registry, MalformedJsonIsFormatError) {
  EXPECT_THROW(ReferenceRegistry::fromJson(nlohmann::ordered_json::parse(R"({"entries":[{"tp":1}]})")), FormatError);
}

TEST(Registry, CommittedFileCoversEveryProblem) {
  ReferenceRegistry reg = ReferenceRegistry::load(std::filesystem::path(AUTOOPT_DATA_DIR) / "reference.json");
  for (int tp = 1; tp <= kTestProblemCount; ++tp) {
    const ReferenceEntry* e = reg.find(tp, 0);
    ASSERT_NE(e, nullptr) << "TP" << tp;
    EXPECT_LE(maxViolation(expandModel(buildTp(tp, 0)), e->point), kConstraintTolerance);
  }
  EXPECT_TRUE(reg.metadata.contains("seeds"));
}

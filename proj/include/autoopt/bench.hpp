#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "autoopt/bobd.hpp"
#include "autoopt/errors.hpp"
#include "autoopt/expr_text.hpp"
#include "autoopt/parallel.hpp"
#include "autoopt/registry.hpp"
#include "autoopt/test_problems.hpp"

namespace autoopt {

enum class Method { Bobd, Ga, Ip };

inline const char* methodName(Method m) {
  switch (m) {
    case Method::Bobd: return "bobd";
    case Method::Ga: return "ga";
    case Method::Ip: return "ip";
  }
  return "unknown";
}

inline Method parseMethod(const std::string& s) {
  if (s == "bobd") return Method::Bobd;
  if (s == "ga") return Method::Ga;
  if (s == "ip") return Method::Ip;
  throw ConfigError("unknown method '" + s + "'");
}

/// How the GA baseline's budget is tied to the paired BOBD run.
enum class GaBudget {
  /// Twice the BOBD run's model evaluations; reproducible.
  Evaluations,
  /// Twice the BOBD run's wall-clock time.
  WallTime
};

struct ExperimentSpec {
  int tp = 1;
  std::size_t scale = 0;
  std::vector<Method> methods = {Method::Bobd, Method::Ga, Method::Ip};
  std::size_t runs = 11;
  std::uint64_t baseSeed = 0;
  GaConfig config;
  GaBudget gaBudget = GaBudget::Evaluations;
  /// GA budget when BOBD is not part of the experiment.
  double gaFallbackSeconds = 5.0;
  std::size_t gaFallbackEvaluations = 1'000'000;
  /// Runs executed concurrently.
  std::size_t threads = 1;

  void validate() const {
    tpFamilySizes(tp, scale);
    if (scale != 0 && scale != 20 && scale != 50) throw SpecError("scale must be 0, 20 or 50");
    if (methods.empty()) throw ConfigError("at least one method is required");
    if (runs < 1) throw ConfigError("runs must be positive");
    config.validate();
  }
};

struct ResultRow {
  int tp = 0;
  std::size_t scale = 0;
  std::string method;
  std::size_t run = 0;
  std::uint64_t seed = 0;
  double objective = kInf;
  double maxViolation = kInf;
  bool feasible = false;
  double timeSeconds = 0.0;
  /// |objective - reference| for feasible rows with a known reference.
  std::optional<double> absDeviation;
  std::size_t evaluations = 0;
  std::string note;
};

namespace detail {

inline ResultRow rowFrom(const ExperimentSpec& spec, Method m, std::size_t run, std::uint64_t seed,
                         const SolveReport& r, std::optional<double> reference) {
  ResultRow row;
  row.tp = spec.tp;
  row.scale = spec.scale;
  row.method = methodName(m);
  row.run = run;
  row.seed = seed;
  row.objective = r.bestObjective;
  row.maxViolation = r.maxViolation;
  row.feasible = r.feasible;
  row.timeSeconds = r.wallTimeSeconds;
  row.evaluations = r.functionEvaluations;
  if (row.feasible && reference) row.absDeviation = std::fabs(row.objective - *reference);
  if (!reference) row.note = "no reference";
  return row;
}

inline ResultRow failedRow(const ExperimentSpec& spec, Method m, std::size_t run, std::uint64_t seed,
                           const std::string& what) {
  ResultRow row;
  row.tp = spec.tp;
  row.scale = spec.scale;
  row.method = methodName(m);
  row.run = run;
  row.seed = seed;
  row.objective = std::nan("");
  row.note = what;
  return row;
}

}  // namespace detail

/// Runs the comparison protocol: for run r the seed is baseSeed + r, BOBD
/// runs first and sets the GA budget, and the deterministic IP solve is
/// done once and repeated on every run. Rows are ordered by run, then by
/// the order of `spec.methods`. Solver failures become infeasible rows.
inline std::vector<ResultRow> runExperiment(const ExperimentSpec& spec, const ReferenceRegistry* registry = nullptr) {
  spec.validate();
  const ModelIR model = buildTp(spec.tp, spec.scale);
  std::optional<double> reference;
  if (registry)
    if (const ReferenceEntry* e = registry->find(spec.tp, spec.scale)) reference = e->objective;

  auto wants = [&](Method m) { return std::find(spec.methods.begin(), spec.methods.end(), m) != spec.methods.end(); };
  std::optional<SolveReport> ip;
  std::string ipError;
  if (wants(Method::Ip)) {
    try {
      ip = ipSolve(model, spec.config.constraintTolerance);
    } catch (const std::exception& ex) {
      ipError = ex.what();
    }
  }

  std::vector<std::vector<ResultRow>> perRun(spec.runs);
  parallelFor(spec.runs, spec.threads, [&](std::size_t r) {
    const std::uint64_t seed = spec.baseSeed + r;
    std::map<Method, ResultRow> rows;
    std::optional<SolveReport> bobd;
    if (wants(Method::Bobd)) {
      GaConfig cfg = spec.config;
      cfg.seed = seed;
      try {
        bobd = bobdSolve(model, cfg);
        rows[Method::Bobd] = detail::rowFrom(spec, Method::Bobd, r, seed, *bobd, reference);
      } catch (const std::exception& ex) {
        rows[Method::Bobd] = detail::failedRow(spec, Method::Bobd, r, seed, ex.what());
      }
    }
    if (wants(Method::Ga)) {
      GaConfig cfg = spec.config;
      cfg.seed = seed;
      double seconds = 0.0;
      if (spec.gaBudget == GaBudget::Evaluations)
        cfg.maxEvaluations = bobd ? 2 * bobd->functionEvaluations : spec.gaFallbackEvaluations;
      else
        seconds = 2.0 * (bobd ? bobd->wallTimeSeconds : spec.gaFallbackSeconds);
      try {
        Rng rng(seed);
        rows[Method::Ga] = detail::rowFrom(spec, Method::Ga, r, seed, gaSolve(model, cfg, rng, seconds), reference);
      } catch (const std::exception& ex) {
        rows[Method::Ga] = detail::failedRow(spec, Method::Ga, r, seed, ex.what());
      }
    }
    if (wants(Method::Ip))
      rows[Method::Ip] = ip ? detail::rowFrom(spec, Method::Ip, r, seed, *ip, reference)
                            : detail::failedRow(spec, Method::Ip, r, seed, ipError);
    for (Method m : spec.methods) perRun[r].push_back(rows.at(m));
  });

  std::vector<ResultRow> out;
  for (auto& rows : perRun) out.insert(out.end(), rows.begin(), rows.end());
  return out;
}

// ---------------------------------------------------------------------------
// Statistics

/// Linearly interpolated quantile of sorted data at position p·(n-1).
inline double quantile(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) throw ConfigError("quantile of empty data");
  const double pos = std::clamp(p, 0.0, 1.0) * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return quantile(v, 0.5);
}

/// Box-plot summary with whiskers at the most extreme points within 1.5
/// interquartile ranges of the box, never inside the box itself.
struct BoxStats {
  std::size_t count = 0;
  double min = 0, lowerWhisker = 0, q1 = 0, median = 0, q3 = 0, upperWhisker = 0, max = 0;
};

inline BoxStats boxStats(std::vector<double> v) {
  if (v.empty()) throw ConfigError("box statistics of empty data");
  std::sort(v.begin(), v.end());
  BoxStats b;
  b.count = v.size();
  b.min = v.front();
  b.max = v.back();
  b.q1 = quantile(v, 0.25);
  b.median = quantile(v, 0.5);
  b.q3 = quantile(v, 0.75);
  const double iqr = b.q3 - b.q1;
  b.lowerWhisker = std::min(b.q1, *std::lower_bound(v.begin(), v.end(), b.q1 - 1.5 * iqr));
  b.upperWhisker = std::max(b.q3, *(std::upper_bound(v.begin(), v.end(), b.q3 + 1.5 * iqr) - 1));
  return b;
}

// ---------------------------------------------------------------------------
// Reporting

inline const char* kResultsHeader = "tp,scale,method,run,seed,objective,max_violation,feasible,time_s,abs_deviation";

namespace detail {

inline std::string csvNumber(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return formatNumber(v);
}

inline std::string csvOptional(const std::optional<double>& v) { return v ? csvNumber(*v) : ""; }

using GroupKey = std::tuple<int, std::size_t, std::string>;

inline std::map<GroupKey, std::vector<const ResultRow*>> groupRows(const std::vector<ResultRow>& rows) {
  std::map<GroupKey, std::vector<const ResultRow*>> g;
  for (const auto& r : rows) g[{r.tp, r.scale, r.method}].push_back(&r);
  return g;
}

inline std::ofstream openCsv(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  return out;
}

}  // namespace detail

inline std::string resultsCsvLine(const ResultRow& r) {
  return std::to_string(r.tp) + ',' + std::to_string(r.scale) + ',' + r.method + ',' + std::to_string(r.run) + ',' +
         std::to_string(r.seed) + ',' + detail::csvNumber(r.objective) + ',' + detail::csvNumber(r.maxViolation) +
         ',' + (r.feasible ? "true" : "false") + ',' + detail::csvNumber(r.timeSeconds) + ',' +
         detail::csvOptional(r.absDeviation);
}

/// Writes results.csv, summary.csv (one line per tp/scale/method) and
/// boxplot.csv (deviation box statistics per group) into `dir`.
inline void reportResults(const std::vector<ResultRow>& rows, const std::filesystem::path& dir) {
  if (rows.empty()) throw ConfigError("no result rows to report");
  std::filesystem::create_directories(dir);

  auto results = detail::openCsv(dir / "results.csv");
  results << kResultsHeader << '\n';
  for (const auto& r : rows) results << resultsCsvLine(r) << '\n';

  auto summary = detail::openCsv(dir / "summary.csv");
  summary << "tp,scale,method,runs,feasible_runs,median_abs_deviation,min_abs_deviation,max_abs_deviation,"
             "median_objective,best_objective,mean_time_s\n";
  auto box = detail::openCsv(dir / "boxplot.csv");
  box << "tp,scale,method,n,min,lower_whisker,q1,median,q3,upper_whisker,max\n";

  for (const auto& [key, group] : detail::groupRows(rows)) {
    const auto& [tp, scale, method] = key;
    std::vector<double> dev, obj;
    double time = 0.0;
    std::size_t feasible = 0;
    for (const ResultRow* r : group) {
      time += r->timeSeconds;
      if (!r->feasible) continue;
      ++feasible;
      obj.push_back(r->objective);
      if (r->absDeviation) dev.push_back(*r->absDeviation);
    }
    const std::string prefix = std::to_string(tp) + ',' + std::to_string(scale) + ',' + method + ',';
    std::optional<double> medDev, minDev, maxDev, medObj, bestObj;
    if (!dev.empty()) {
      medDev = median(dev);
      minDev = *std::min_element(dev.begin(), dev.end());
      maxDev = *std::max_element(dev.begin(), dev.end());
    }
    if (!obj.empty()) {
      medObj = median(obj);
      bestObj = *std::min_element(obj.begin(), obj.end());
    }
    summary << prefix << group.size() << ',' << feasible << ',' << detail::csvOptional(medDev) << ','
            << detail::csvOptional(minDev) << ',' << detail::csvOptional(maxDev) << ',' << detail::csvOptional(medObj)
            << ',' << detail::csvOptional(bestObj) << ',' << detail::csvNumber(time / static_cast<double>(group.size()))
            << '\n';
    if (!dev.empty()) {
      BoxStats b = boxStats(dev);
      box << prefix << b.count << ',' << detail::csvNumber(b.min) << ',' << detail::csvNumber(b.lowerWhisker) << ','
          << detail::csvNumber(b.q1) << ',' << detail::csvNumber(b.median) << ',' << detail::csvNumber(b.q3) << ','
          << detail::csvNumber(b.upperWhisker) << ',' << detail::csvNumber(b.max) << '\n';
    }
  }
}

}  // namespace autoopt

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "autoopt/bench.hpp"
#include "autoopt/bobd.hpp"
#include "autoopt/latex.hpp"
#include "autoopt/model_io.hpp"
#include "autoopt/registry.hpp"
#include "autoopt/script.hpp"
#include "autoopt/test_problems.hpp"

using namespace autoopt;
namespace fs = std::filesystem;

namespace {

std::string readFile(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

void writeFile(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << text;
}

std::vector<int> parseTpList(const std::string& s) {
  std::vector<int> out;
  if (s == "all") {
    for (int i = 1; i <= kTestProblemCount; ++i) out.push_back(i);
    return out;
  }
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) {
    try {
      out.push_back(std::stoi(item));
    } catch (const std::exception&) {
      throw ConfigError("bad test problem id '" + item + "'");
    }
    tpFamilySizes(out.back(), 0);
  }
  if (out.empty()) throw ConfigError("empty test problem list");
  return out;
}

std::vector<Method> parseMethods(const std::string& s) {
  std::vector<Method> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) out.push_back(parseMethod(item));
  return out;
}

nlohmann::ordered_json reportJson(const SolveReport& r, const ModelIR& m) {
  const ModelIR e = expandModel(m);
  nlohmann::ordered_json j;
  j["method"] = r.method;
  j["termination"] = r.termination;
  j["feasible"] = r.feasible;
  j["best_objective"] = r.bestObjective;
  j["max_violation"] = r.maxViolation;
  nlohmann::ordered_json point = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < r.bestPoint.size() && i < e.size(); ++i) point[e.variables[i].name] = r.bestPoint[i];
  j["best_point"] = point;
  j["generations"] = r.generations;
  j["lower_solve_count"] = r.lowerSolveCount;
  j["function_evaluations"] = r.functionEvaluations;
  j["wall_time_s"] = r.wallTimeSeconds;
  j["history"] = r.history;
  j["level_configurations"] = r.levelConfigurationsUsed;
  if (!r.diagnostic.empty()) j["diagnostic"] = r.diagnostic;
  return j;
}

void printReport(const SolveReport& r, const ModelIR& m) {
  const ModelIR e = expandModel(m);
  std::cout << "method:          " << r.method << "\n"
            << "termination:     " << r.termination << "\n"
            << "feasible:        " << (r.feasible ? "yes" : "no") << "\n"
            << "objective:       " << formatNumber(r.bestObjective) << "\n"
            << "max violation:   " << formatNumber(r.maxViolation) << "\n"
            << "generations:     " << r.generations << "\n"
            << "lower solves:    " << r.lowerSolveCount << "\n"
            << "evaluations:     " << r.functionEvaluations << "\n"
            << "wall time (s):   " << formatNumber(r.wallTimeSeconds) << "\n";
  if (!r.diagnostic.empty()) std::cout << "diagnostic:      " << r.diagnostic << "\n";
  std::cout << "point:\n";
  for (std::size_t i = 0; i < r.bestPoint.size() && i < e.size(); ++i)
    std::cout << "  " << e.variables[i].name << " = " << formatNumber(r.bestPoint[i]) << "\n";
}

std::string utcDate() {
  std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%d", std::gmtime(&t));
  return buf;
}

// --- subcommands -----------------------------------------------------------

int runParse(const std::string& input, std::size_t P, std::size_t Q, const std::string& output) {
  const std::string text = readFile(input);
  try {
    ParseResult r = parseModel(text, {P, Q, fs::path(input).stem().string()});
    for (const auto& w : r.diagnostics.warnings) std::cerr << input << ": warning: " << w.message << "\n";
    writeFile(output, serializeModel(r.model));
  } catch (const ParseError& e) {
    std::cerr << input << ": " << e.what() << "\n";
    return 2;
  }
  return 0;
}

int runEmit(const std::string& input, const std::string& output) {
  ModelIR m = parseModelFile(readFile(input));
  writeFile(output, emitScript(expandModel(m)));
  return 0;
}

struct SolveOptions {
  std::string method = "bobd";
  std::uint64_t seed = 0;
  double tol = kConstraintTolerance;
  std::size_t maxGen = 200;
  double timeBudget = 0.0;
  std::size_t maxEvals = 0;
  bool json = false;
};

int runSolve(const std::string& input, const SolveOptions& o) {
  ModelIR m = parseModelFile(readFile(input));
  GaConfig cfg;
  cfg.seed = o.seed;
  cfg.constraintTolerance = o.tol;
  cfg.maxGenerations = o.maxGen;
  cfg.maxEvaluations = o.maxEvals;
  cfg.threads = threadsFromEnvironment();
  SolveReport r;
  switch (parseMethod(o.method)) {
    case Method::Bobd:
      cfg.timeBudgetSeconds = o.timeBudget;
      r = bobdSolve(m, cfg);
      break;
    case Method::Ga: {
      Rng rng(o.seed);
      double budget = o.timeBudget > 0.0 || o.maxEvals > 0 ? o.timeBudget : 10.0;
      r = gaSolve(m, cfg, rng, budget);
      break;
    }
    case Method::Ip:
      r = ipSolve(m, o.tol);
      break;
  }
  if (o.json)
    std::cout << reportJson(r, m).dump(2) << "\n";
  else
    printReport(r, m);
  return 0;
}

struct BenchOptions {
  std::string tp = "all";
  std::size_t scale = 0;
  std::size_t runs = 11;
  std::uint64_t seed = 0;
  std::string out = "bench_out";
  std::string methods = "bobd,ga,ip";
  std::string gaBudget = "evals";
  std::string reference;
};

int runBench(const BenchOptions& o) {
  std::vector<int> tps = parseTpList(o.tp);
  const bool all = o.tp == "all";
  ReferenceRegistry registry;
  const fs::path refPath = o.reference.empty() ? defaultReferencePath() : fs::path(o.reference);
  bool haveRegistry = false;
  try {
    registry = ReferenceRegistry::load(refPath);
    haveRegistry = true;
  } catch (const MissingReference& e) {
    std::cerr << "warning: " << e.what() << "; deviations are left blank\n";
  }

  std::vector<ResultRow> rows;
  for (int tp : tps) {
    if (all && tp <= 3 && o.scale > 0) continue;
    ExperimentSpec spec;
    spec.tp = tp;
    spec.scale = o.scale;
    spec.runs = o.runs;
    spec.baseSeed = o.seed;
    spec.methods = parseMethods(o.methods);
    if (o.gaBudget == "time")
      spec.gaBudget = GaBudget::WallTime;
    else if (o.gaBudget != "evals")
      throw ConfigError("--ga-budget must be 'evals' or 'time'");
    spec.threads = threadsFromEnvironment();
    if (haveRegistry && !registry.find(tp, o.scale))
      std::cerr << "warning: no reference for TP" << tp << " at scale " << o.scale << "\n";
    std::cerr << "TP" << tp << " scale " << o.scale << ": " << o.runs << " runs\n";
    auto part = runExperiment(spec, haveRegistry ? &registry : nullptr);
    rows.insert(rows.end(), part.begin(), part.end());
  }
  reportResults(rows, o.out);
  std::cout << readFile(fs::path(o.out) / "summary.csv");
  return 0;
}

int runFixturesVerify(const std::string& dir) {
  bool ok = true;
  for (int tp = 1; tp <= kTestProblemCount; ++tp) {
    const fs::path file = fs::path(dir) / ("tp" + std::to_string(tp) + ".tex");
    for (std::size_t scale : {0, 20, 50}) {
      if (tp <= 3 && scale > 0) continue;
      auto [P, Q] = tpFamilySizes(tp, scale);
      std::string why;
      bool same = false;
      try {
        same = structurallyEqual(buildTp(tp, scale), parseModel(readFile(file), {P, Q, ""}).model, false, &why);
      } catch (const std::exception& e) {
        why = e.what();
      }
      ok = ok && same;
      std::cout << "tp" << tp << " scale " << scale << ": " << (same ? "ok" : "MISMATCH " + why) << "\n";
    }
  }
  std::size_t matched = 0, total = 0;
  std::vector<fs::path> samples;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.path().extension() == ".tex" && entry.path().stem().string().rfind("table", 0) == 0)
      samples.push_back(entry.path());
  std::sort(samples.begin(), samples.end());
  for (const fs::path& tex : samples) {
    std::string status;
    try {
      ModelIR m = parseModel(readFile(tex), {}).model;
      status = "parsed";
      const fs::path label = fs::path(tex).replace_extension(".pyomo");
      if (fs::exists(label)) {
        ++total;
        bool same = normalizeScript(emitScript(expandModel(m))) == normalizeScript(readFile(label));
        matched += same;
        status += same ? ", script matches label" : ", script differs from label";
      }
    } catch (const std::exception& e) {
      ok = false;
      status = std::string("PARSE FAILED ") + e.what();
    }
    std::cout << tex.filename().string() << ": " << status << "\n";
  }
  std::cout << "script labels matched: " << matched << "/" << total << "\n";
  return ok ? 0 : 1;
}

struct CampaignOptions {
  std::string tp = "all";
  std::vector<std::size_t> scales = {0};
  std::size_t seeds = 21;
  std::uint64_t seed = 0;
  std::size_t factor = 5;
  std::string out = "data/reference.json";
  bool merge = false;
};

// Best feasible point per (tp, scale) over BOBD, GA and IP with extended
// budgets, each candidate then polished by a barrier solve from it.
int runCampaign(const CampaignOptions& o) {
  ReferenceRegistry reg;
  if (o.merge && fs::exists(o.out)) reg = ReferenceRegistry::load(o.out);
  const std::size_t threads = threadsFromEnvironment();
  GaConfig base;
  GaConfig extended = base;
  extended.maxGenerations = base.maxGenerations * o.factor;
  extended.stallWindow = base.stallWindow * o.factor;

  auto save = [&] {
    reg.metadata = nlohmann::ordered_json::object();
    reg.metadata["generated"] = utcDate();
    reg.metadata["rule"] = "best feasible objective over all campaign runs";
    reg.metadata["methods"] = {"bobd", "ga", "ip"};
    reg.metadata["seeds"] = {o.seed, o.seed + o.seeds - 1};
    reg.metadata["budget_factor"] = o.factor;
    reg.metadata["bobd_max_generations"] = extended.maxGenerations;
    reg.metadata["bobd_stall_window"] = extended.stallWindow;
    reg.metadata["ga_budget"] = "2x paired BOBD wall time";
    reg.metadata["polish"] = "barrier solve from each run's best point";
    reg.metadata["constraint_tolerance"] = base.constraintTolerance;
    reg.revalidate();
    reg.save(o.out);
  };

  for (int tp : parseTpList(o.tp)) {
    for (std::size_t scale : o.scales) {
      if (tp <= 3 && scale > 0) continue;
      const ModelIR model = buildTp(tp, scale);
      const ModelIR flat = expandModel(model);
      const auto t0 = std::chrono::steady_clock::now();
      std::mutex m;
      auto offer = [&](const SolveReport& r, const std::string& method, std::uint64_t seed) {
        std::vector<std::pair<std::string, std::vector<double>>> candidates;
        if (r.feasible) candidates.emplace_back(method, r.bestPoint);
        if (!r.bestPoint.empty()) {
          try {
            LocalSolveResult p = solveBarrier(flat, r.bestPoint, base.constraintTolerance);
            candidates.emplace_back(method + "+polish", p.point);
          } catch (const std::exception&) {
            // An unusable start leaves only the unpolished candidate.
          }
        }
        std::lock_guard lock(m);
        for (const auto& [name, x] : candidates) {
          try {
            const double v = maxViolation(flat, x);
            if (!(v <= base.constraintTolerance)) continue;
            reg.offer({tp, scale, evaluateObjective(flat, x), v, name, seed, x});
          } catch (const DomainFault&) {
          }
        }
      };
      offer(ipSolve(model, base.constraintTolerance), "ip", 0);
      parallelFor(o.seeds, threads, [&](std::size_t k) {
        const std::uint64_t seed = o.seed + k;
        GaConfig cfg = extended;
        cfg.seed = seed;
        SolveReport b = bobdSolve(model, cfg);
        offer(b, "bobd", seed);
        Rng rng(seed);
        offer(gaSolve(model, cfg, rng, 2.0 * b.wallTimeSeconds), "ga", seed);
      });
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      const ReferenceEntry* best = reg.find(tp, scale);
      std::cerr << "TP" << tp << " scale " << scale << ": "
                << (best ? formatNumber(best->objective) + " (" + best->method + ")" : std::string("no feasible point"))
                << " in " << formatNumber(std::round(secs)) << " s\n";
      save();
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Optimization model toolkit: LaTeX parsing, script emission and bilevel decomposition search"};
  app.require_subcommand(1);

  std::string input, output;
  std::size_t P = 0, Q = 0;
  auto* parse = app.add_subcommand("parse", "Parse a LaTeX model into a model file");
  parse->add_option("input", input, "LaTeX source")->required()->check(CLI::ExistingFile);
  parse->add_option("-P", P, "Size of the y family");
  parse->add_option("-Q", Q, "Size of the z family");
  parse->add_option("-o,--output", output, "Model file to write")->required();

  auto* emit = app.add_subcommand("emit", "Write the modeling script for a model file");
  emit->add_option("model", input, "Model file")->required()->check(CLI::ExistingFile);
  emit->add_option("-o,--output", output, "Script file to write")->required();

  SolveOptions so;
  auto* solve = app.add_subcommand("solve", "Solve a model file");
  solve->add_option("model", input, "Model file")->required()->check(CLI::ExistingFile);
  solve->add_option("--method", so.method, "bobd, ga or ip")->check(CLI::IsMember({"bobd", "ga", "ip"}));
  solve->add_option("--seed", so.seed, "Random seed");
  solve->add_option("--tol", so.tol, "Constraint tolerance");
  solve->add_option("--max-gen", so.maxGen, "Generation limit (bobd)");
  solve->add_option("--time-budget", so.timeBudget, "Wall-clock budget in seconds");
  solve->add_option("--max-evals", so.maxEvals, "Model evaluation budget");
  solve->add_flag("--json", so.json, "Print the report as JSON");

  BenchOptions bo;
  auto* bench = app.add_subcommand("bench", "Run the comparison protocol on the built-in test problems");
  bench->add_option("--tp", bo.tp, "Comma-separated problem ids or 'all'");
  bench->add_option("--scale", bo.scale, "|y| + |z|")->check(CLI::IsMember({0, 20, 50}));
  bench->add_option("--runs", bo.runs, "Seeded runs per method");
  bench->add_option("--seed", bo.seed, "Base seed");
  bench->add_option("--out", bo.out, "Output directory");
  bench->add_option("--methods", bo.methods, "Comma-separated subset of bobd,ga,ip");
  bench->add_option("--ga-budget", bo.gaBudget, "GA budget: 'evals' (2x BOBD evaluations) or 'time' (2x BOBD time)");
  bench->add_option("--reference", bo.reference, "Reference registry file");

  auto* fixtures = app.add_subcommand("fixtures", "Fixture checks");
  fixtures->require_subcommand(1);
  std::string fixtureDir = AUTOOPT_FIXTURE_DIR;
  auto* verify = fixtures->add_subcommand("verify", "Compare parsed fixtures with the built-in models and labels");
  verify->add_option("--dir", fixtureDir, "Fixture directory");

  CampaignOptions co;
  auto* campaign = app.add_subcommand("campaign", "Build the reference registry from extended-budget runs");
  campaign->add_option("--tp", co.tp, "Comma-separated problem ids or 'all'");
  campaign->add_option("--scales", co.scales, "Scales to cover")->delimiter(',');
  campaign->add_option("--seeds", co.seeds, "Seeds per problem");
  campaign->add_option("--seed", co.seed, "First seed");
  campaign->add_option("--budget-factor", co.factor, "Budget multiplier over the defaults");
  campaign->add_option("--out", co.out, "Registry file to write");
  campaign->add_flag("--merge", co.merge, "Keep better entries already in the output file");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*parse) return runParse(input, P, Q, output);
    if (*emit) return runEmit(input, output);
    if (*solve) return runSolve(input, so);
    if (*bench) return runBench(bo);
    if (*verify) return runFixturesVerify(fixtureDir);
    if (*campaign) return runCampaign(co);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

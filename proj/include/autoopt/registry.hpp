#pragma once

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "autoopt/errors.hpp"
#include "autoopt/model.hpp"
#include "autoopt/test_problems.hpp"

namespace autoopt {

/// Best known feasible point of one test problem at one scale.
struct ReferenceEntry {
  int tp = 0;
  std::size_t scale = 0;
  double objective = kInf;
  double maxViolation = kInf;
  std::string method;
  std::uint64_t seed = 0;
  std::vector<double> point;
};

/// Reference values keyed by (tp, scale), with the metadata of the
/// campaign that produced them.
class ReferenceRegistry {
 public:
  using Key = std::pair<int, std::size_t>;

  nlohmann::ordered_json metadata = nlohmann::ordered_json::object();

  const ReferenceEntry* find(int tp, std::size_t scale) const {
    auto it = entries_.find({tp, scale});
    return it == entries_.end() ? nullptr : &it->second;
  }

  double referenceValue(int tp, std::size_t scale) const {
    if (const ReferenceEntry* e = find(tp, scale)) return e->objective;
    throw MissingReference("no reference value for TP" + std::to_string(tp) + " at scale " + std::to_string(scale));
  }

  /// Keeps `e` if no entry exists yet or it has a lower objective.
  bool offer(const ReferenceEntry& e) {
    auto it = entries_.find({e.tp, e.scale});
    if (it != entries_.end() && !(e.objective < it->second.objective)) return false;
    entries_[{e.tp, e.scale}] = e;
    return true;
  }

  const std::map<Key, ReferenceEntry>& entries() const { return entries_; }

  /// Re-evaluates every stored point on a freshly built model. Throws
  /// FormatError when a point is infeasible beyond `tol` or its objective
  /// does not reproduce.
  void revalidate(double tol = kConstraintTolerance) const {
    for (const auto& [key, e] : entries_) {
      const std::string where = "reference TP" + std::to_string(e.tp) + " scale " + std::to_string(e.scale);
      const ModelIR m = expandModel(buildTp(e.tp, e.scale));
      if (e.point.size() != m.size()) throw FormatError(where + ": point has the wrong dimension");
      const double v = maxViolation(m, e.point);
      const double f = evaluateObjective(m, e.point);
      if (!(v <= tol)) throw FormatError(where + ": stored point violates constraints by " + std::to_string(v));
      if (!(std::fabs(f - e.objective) <= 1e-9 * (1.0 + std::fabs(f))))
        throw FormatError(where + ": stored objective does not match its point");
    }
  }

  nlohmann::ordered_json toJson() const {
    nlohmann::ordered_json j;
    j["metadata"] = metadata;
    j["entries"] = nlohmann::ordered_json::array();
    for (const auto& [key, e] : entries_) {
      nlohmann::ordered_json r;
      r["tp"] = e.tp;
      r["scale"] = e.scale;
      r["objective"] = e.objective;
      r["max_violation"] = e.maxViolation;
      r["method"] = e.method;
      r["seed"] = e.seed;
      r["point"] = e.point;
      j["entries"].push_back(std::move(r));
    }
    return j;
  }

  static ReferenceRegistry fromJson(const nlohmann::ordered_json& j) {
    ReferenceRegistry reg;
    try {
      if (j.contains("metadata")) reg.metadata = j.at("metadata");
      for (const auto& r : j.at("entries")) {
        ReferenceEntry e;
        e.tp = r.at("tp").get<int>();
        e.scale = r.at("scale").get<std::size_t>();
        e.objective = r.at("objective").get<double>();
        e.maxViolation = r.at("max_violation").get<double>();
        e.method = r.at("method").get<std::string>();
        e.seed = r.at("seed").get<std::uint64_t>();
        e.point = r.at("point").get<std::vector<double>>();
        reg.entries_[{e.tp, e.scale}] = std::move(e);
      }
    } catch (const nlohmann::json::exception& ex) {
      throw FormatError(std::string("malformed reference registry: ") + ex.what());
    }
    return reg;
  }

  /// Loads and revalidates a registry file.
  static ReferenceRegistry load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw MissingReference("cannot open reference registry " + path.string());
    nlohmann::ordered_json j;
    try {
      j = nlohmann::ordered_json::parse(in);
    } catch (const nlohmann::json::exception& ex) {
      throw FormatError("reference registry " + path.string() + ": " + ex.what());
    }
    ReferenceRegistry reg = fromJson(j);
    reg.revalidate();
    return reg;
  }

  void save(const std::filesystem::path& path) const {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write " + path.string());
    out << toJson().dump(2) << '\n';
  }

 private:
  std::map<Key, ReferenceEntry> entries_;
};

/// Registry location: $AUTOOPT_REFERENCE if set, else the file installed
/// with the sources.
inline std::filesystem::path defaultReferencePath() {
  if (const char* p = std::getenv("AUTOOPT_REFERENCE"); p && *p) return p;
#ifdef AUTOOPT_DATA_DIR
  return std::filesystem::path(AUTOOPT_DATA_DIR) / "reference.json";
#else
  return "data/reference.json";
#endif
}

}  // namespace autoopt

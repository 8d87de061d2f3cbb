#include "crda/cache.hpp"

#include "crda/error.hpp"

#include <spdlog/spdlog.h>

#include <cstdio>
#include <fstream>

namespace crda {

namespace fs = std::filesystem;

namespace {

std::optional<nlohmann::json> read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) return std::nullopt;
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    spdlog::warn("ignoring unreadable cache file {}: {}", path.string(), e.what());
    return std::nullopt;
  }
}

// Write to a sibling temp file then rename, so readers never see partial files.
void write_json(const fs::path& path, const nlohmann::json& doc) {
  fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw ModelError("cannot write " + tmp.string());
    out << doc.dump() << "\n";
  }
  fs::rename(tmp, path);
}

std::string threshold_tag(double threshold) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", threshold);
  return buf;
}

}  // namespace

fs::path ArtifactCache::worst_gains_path(const GridCase& grid) const {
  return dir_ / (case_hash(grid).substr(0, 16) + "-attack.json");
}

fs::path ArtifactCache::table_path(const GridCase& grid, int samples, double threshold) const {
  return dir_ / (case_hash(grid).substr(0, 16) + "-table-n" + std::to_string(samples) + "-t" + threshold_tag(threshold) +
                 ".json");
}

std::map<int, WorstCaseGains> ArtifactCache::worst_gains(const GridCase& grid) {
  const fs::path path = worst_gains_path(grid);
  const std::string hash = case_hash(grid);
  if (!rebuild_) {
    if (auto doc = read_json(path)) {
      try {
        auto worst = worst_gains_from_json(*doc, hash);
        if (worst.size() == grid.num_scenarios()) {
          spdlog::info("reusing worst-case gains from {}", path.string());
          touched_.emplace_back(path, true);
          return worst;
        }
      } catch (const ModelError& e) {
        spdlog::warn("stale attack-gain cache {}: {}", path.string(), e.what());
      }
    }
  }
  spdlog::info("computing worst-case gains for {} scenarios", grid.num_scenarios());
  auto worst = all_worst_case_gains(grid);
  write_json(path, worst_gains_to_json(worst, hash));
  touched_.emplace_back(path, false);
  return worst;
}

SensitivityTable ArtifactCache::table(const GridCase& grid, const std::map<int, WorstCaseGains>& worst, int samples,
                                      double threshold) {
  const fs::path path = table_path(grid, samples, threshold);
  const std::string hash = case_hash(grid);
  if (!rebuild_) {
    if (auto doc = read_json(path)) {
      try {
        SensitivityTable t = table_from_json(*doc, hash);
        if (t.samples == samples && t.threshold == threshold && t.scenarios.size() == grid.num_scenarios()) {
          spdlog::info("reusing sensitivity tables from {}", path.string());
          touched_.emplace_back(path, true);
          return t;
        }
      } catch (const ModelError& e) {
        spdlog::warn("stale table cache {}: {}", path.string(), e.what());
      }
    }
  }
  spdlog::info("building sensitivity tables, N={} threshold={}", samples, threshold);
  TableOptions opts;
  opts.spectral = {grid.planner.residual_tol, grid.planner.degeneracy_tol};
  SensitivityTable t = generate_sensitivity_tables(grid, gain_vectors(worst), samples, threshold, opts);
  write_json(path, table_to_json(t, hash));
  touched_.emplace_back(path, false);
  return t;
}

PlanningInputs ArtifactCache::inputs(const GridCase& grid, int samples, double threshold) {
  PlanningInputs in;
  in.worst = worst_gains(grid);
  in.table = table(grid, in.worst, samples, threshold);
  return in;
}

}  // namespace crda

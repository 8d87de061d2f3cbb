#pragma once

#include "crda/adversary.hpp"
#include "crda/planning.hpp"
#include "crda/sampling.hpp"

#include <filesystem>

namespace crda {

/// On-disk store for worst-case gains and sensitivity tables, keyed by the
/// case hash (tables also by N and threshold).
class ArtifactCache {
 public:
  ArtifactCache(std::filesystem::path dir, bool rebuild) : dir_(std::move(dir)), rebuild_(rebuild) {}

  std::map<int, WorstCaseGains> worst_gains(const GridCase& grid);
  SensitivityTable table(const GridCase& grid, const std::map<int, WorstCaseGains>& worst, int samples,
                         double threshold);
  PlanningInputs inputs(const GridCase& grid, int samples, double threshold);

  std::filesystem::path worst_gains_path(const GridCase& grid) const;
  std::filesystem::path table_path(const GridCase& grid, int samples, double threshold) const;

  /// Paths read or written so far, and whether each was reused.
  const std::vector<std::pair<std::filesystem::path, bool>>& touched() const { return touched_; }

 private:
  std::filesystem::path dir_;
  bool rebuild_;
  std::vector<std::pair<std::filesystem::path, bool>> touched_;
};

}  // namespace crda

#pragma once

#include "crda/grid_model.hpp"

#include <map>
#include <vector>

namespace crda {

/// Availability vector Z over compromised buses (1 = repaired) and its
/// scenario number m = sum_i (1 - Z_i) 2^i, bit i for the i-th attacked bus.
int scenario_index(const std::vector<int>& availability);
std::vector<int> index_to_availability(int scenario, std::size_t buses);

/// Attack gains with repaired positions zeroed.
std::vector<double> mask_gains(const std::vector<double>& gains, int scenario);

struct WorstCaseGains {
  int scenario = 0;
  std::vector<double> gains;  // aligned with attack.buses
  double abscissa = 0.0;      // at zero droop
  int iterations = 0;
  bool converged = true;
};

struct AdversaryOptions {
  int max_iterations = 200;
  double min_step = 1e-6;
  int extra_starts = 3;     // best oracle lattice points used as ascent seeds
  int oracle_budget = 12;   // max unrepaired buses for the lattice oracle
};

/// Best point of the {0, bound/2, bound} lattice over unrepaired buses
/// (corners and midpoints), by exact spectral abscissa at zero droop. Uses
/// corners plus the box centre only when the full lattice exceeds 1e5 points.
WorstCaseGains corner_oracle(const GridCase& grid, int scenario, const AdversaryOptions& options = {});

/// Projected gradient ascent on the spectral abscissa over [0, bound] for the
/// unrepaired buses, multi-started from the oracle's best lattice points.
WorstCaseGains worst_case_gains(const GridCase& grid, int scenario, const AdversaryOptions& options = {});

/// worst_case_gains for every scenario 0 .. 2^|A| - 1.
std::map<int, WorstCaseGains> all_worst_case_gains(const GridCase& grid, const AdversaryOptions& options = {});

std::map<int, std::vector<double>> gain_vectors(const std::map<int, WorstCaseGains>& worst);

nlohmann::json worst_gains_to_json(const std::map<int, WorstCaseGains>& worst, const std::string& case_hash);
std::map<int, WorstCaseGains> worst_gains_from_json(const nlohmann::json& doc, const std::string& expected_hash);

}  // namespace crda

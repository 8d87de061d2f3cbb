#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace crda {

using BusId = int;
/// Gain assignment keyed by bus id (attack gains on compromised buses,
/// droop gains on IBR buses).
using GainMap = std::map<BusId, double>;

struct Generator {
  BusId bus = 0;
  double inertia = 0.0;  // M, p.u.*s
  double damping = 0.0;  // D_G
  double kp = 0.0;
  double ki = 0.0;
};

struct Load {
  BusId bus = 0;
  double damping = 0.0;              // D_L, must be positive
  double secure_load = 0.0;          // P_LS
  double max_vulnerable_load = 0.0;  // upper limit of the attacker-controlled part
};

struct Line {
  BusId from = 0;
  BusId to = 0;
  double reactance = 0.0;
};

struct AttackedBus {
  BusId bus = 0;
  BusId sensor = 0;  // generator bus whose frequency drives the attack
  std::optional<double> gain_bound;
};

struct AttackConfig {
  /// Order defines the scenario bit positions (first entry = bit 0).
  std::vector<AttackedBus> buses;
  double omega_max = 0.04;
  double alpha_max = 0.04;  // kept for load-sensor attacks, unused here
};

struct IbrUnit {
  BusId bus = 0;
  BusId sensor = 0;
  std::optional<double> gain_min;
  std::optional<double> gain_max;
  double p_ref = 0.0;
  double p_max = 0.0;
};

struct IbrConfig {
  std::vector<IbrUnit> units;
  double power_margin = 0.0;  // keeps P_C* - K*omega_max strictly positive
};

/// Repair crew. Travel times are indexed over the routing nodes
/// [compromised buses in attack order..., start depot, end depot].
struct Crew {
  std::string name;
  std::vector<double> repair_times;  // per compromised bus, in steps
  Eigen::MatrixXd travel_times;      // steps
};

struct CrewConfig {
  std::string start_depot = "st";
  std::string end_depot = "en";
  std::vector<Crew> crews;
  /// Lets a crew go straight from the start to the end depot.
  bool allow_idle_crews = false;
};

struct PlannerConfig {
  int horizon = 20;
  double step_minutes = 30.0;
  int samples = 4;
  double big_m = 1e4;
  double epsilon = 1e-4;
  double stability_margin = 0.1;
  double estimation_threshold = 0.1;
  std::vector<double> weights;  // per compromised bus
  double droop_cost_rate = 254.0;
  double residual_tol = 1e-8;
  double degeneracy_tol = 1e-12;
  double time_limit = 1800.0;
  double mip_gap = 1e-9;
  bool tighten_big_m = true;
};

struct GridCase {
  std::string name;
  std::vector<Generator> generators;  // ascending bus id
  std::vector<Load> loads;            // ascending bus id
  std::vector<Line> lines;
  AttackConfig attack;
  IbrConfig ibr;
  CrewConfig crews;
  PlannerConfig planner;
  nlohmann::json source;  // canonical input document, used for hashing

  std::size_t num_generators() const { return generators.size(); }
  std::size_t num_loads() const { return loads.size(); }
  std::size_t state_dim() const { return 2 * generators.size() + loads.size(); }
  std::size_t num_compromised() const { return attack.buses.size(); }
  std::size_t num_ibr() const { return ibr.units.size(); }
  std::size_t num_scenarios() const { return std::size_t{1} << attack.buses.size(); }

  int generator_index(BusId bus) const;  // -1 when absent
  int load_index(BusId bus) const;

  /// State ordering [delta; theta; omega].
  int delta_row(BusId gen) const;
  int theta_row(BusId load) const;
  int omega_row(BusId gen) const;
};

struct AdmittanceBlocks {
  Eigen::MatrixXd gg, gl, lg, ll;
  Eigen::MatrixXd full;  // ordered [generators; loads]
};

struct SystemMatrix {
  Eigen::MatrixXd state;          // dimension 2|G|+|L|
  Eigen::VectorXd forcing;        // zeta
  Eigen::MatrixXd attack_gains;   // |L| x |G|
  Eigen::MatrixXd droop_gains;    // |L| x |G|
};

GridCase load_case(const std::filesystem::path& path);
GridCase parse_case(const nlohmann::json& doc);

/// SHA-256 over the canonical dump of the case document.
std::string case_hash(const GridCase& grid);

AdmittanceBlocks build_admittance_blocks(const GridCase& grid);

SystemMatrix assemble_system_matrix(const GridCase& grid, const GainMap& attack_gains,
                                    const GainMap& droop_gains);

/// Same as above with gains aligned to attack.buses / ibr.units order.
SystemMatrix assemble_system_matrix(const GridCase& grid, const std::vector<double>& attack_gains,
                                    const std::vector<double>& droop_gains);

GainMap attack_gain_bounds(const GridCase& grid);
std::vector<double> attack_gain_bound_vector(const GridCase& grid);

struct GainRange {
  double lower = 0.0;
  double upper = 0.0;
};
std::map<BusId, GainRange> droop_gain_bounds(const GridCase& grid);
std::vector<GainRange> droop_gain_range_vector(const GridCase& grid);

/// Entry of the state matrix touched by a gain on `load` sensing `gen`, and
/// its derivative with respect to that gain (attack: +1/D_L, droop: -1/D_L).
struct GainEntry {
  int row = 0;
  int col = 0;
  double derivative = 0.0;
};
GainEntry attack_gain_entry(const GridCase& grid, std::size_t attacked_index);
GainEntry droop_gain_entry(const GridCase& grid, std::size_t ibr_index);

}  // namespace crda

#pragma once

#include "crda/adversary.hpp"
#include "crda/grid_model.hpp"
#include "crda/milp.hpp"
#include "crda/sampling.hpp"

#include <optional>
#include <string>
#include <vector>

namespace crda {

/// Precomputed adversary gains and sensitivity tables for one case.
struct PlanningInputs {
  std::map<int, WorstCaseGains> worst;
  SensitivityTable table;

  std::map<int, std::vector<double>> attack_gains() const { return gain_vectors(worst); }
};

PlanningInputs compute_inputs(const GridCase& grid, int samples, double threshold);

/// Routing variables. Node numbering: 0..nc-1 compromised buses (attack
/// order), nc = start depot, nc+1 = end depot.
struct RcrHandles {
  std::vector<std::vector<std::vector<milp::VarId>>> x;  // [crew][from][to], invalid if absent
  std::vector<std::vector<milp::VarId>> y;               // [crew][bus]
  std::vector<std::vector<milp::VarId>> arrival;         // [crew][bus]
  std::vector<std::vector<milp::VarId>> flag;            // [bus][t]
  std::vector<std::vector<milp::LinearExpr>> availability;  // [bus][t]
};

RcrHandles emit_rcr(milp::Model& model, const GridCase& grid);

struct DgasHandles {
  std::vector<std::vector<milp::VarId>> gains;     // [t][ibr]
  std::vector<std::vector<milp::VarId>> scenario;  // [t][m]
  std::vector<std::vector<milp::VarId>> combo;     // [t][j]
  std::vector<std::vector<std::vector<milp::VarId>>> segment;  // [t][ibr][l-1]
  std::size_t stability_rows = 0;  // per step, after pruning
  std::size_t pruned_rows = 0;     // per step
  double largest_big_m = 0.0;
};

/// Scenario selection, segment indicators, combo match and conditional
/// stability rows for every step. `availability` is [bus][t]; constants are
/// allowed (fixed routing).
DgasHandles emit_dgas(milp::Model& model, const GridCase& grid, const SensitivityTable& table,
                      const std::vector<std::vector<milp::LinearExpr>>& availability);

struct CrewRoute {
  std::string crew;
  std::vector<BusId> buses;
  std::vector<double> arrival;
};

struct PlanStep {
  int t = 0;
  int scenario = 0;
  int combo = 0;
  std::vector<double> gains;
  double estimated_abscissa = 0.0;
  double exact_abscissa = 0.0;
};

struct RecoveryPlan {
  std::string method;
  milp::Status status = milp::Status::Error;
  double objective = 0.0;     // sum gains - sum beta Z
  double gain_total = 0.0;
  double availability_reward = 0.0;
  std::vector<BusId> buses;   // compromised buses, attack order
  std::vector<CrewRoute> routes;
  std::vector<int> repair_step;   // per bus
  Eigen::MatrixXi flags;          // F [bus][t]
  Eigen::MatrixXi availability;   // Z [bus][t]
  std::vector<PlanStep> steps;
  bool audit_passed = false;
  double solve_seconds = 0.0;
  long long nodes = -1;
  std::size_t variables = 0;
  std::size_t constraints = 0;
  std::size_t stability_rows = 0;
  std::string backend;
};

struct SolveOptions {
  milp::SolveLimits limits;
  std::string backend;  // empty: environment / default
  /// Replaces the recovery weights (e.g. all zero to drop the second objective).
  std::optional<std::vector<double>> weights;
};

/// Default limits from the planner section.
SolveOptions default_solve_options(const GridCase& grid);

/// Full joint model, used by solve_joint and for LP export.
milp::Model build_joint_model(const GridCase& grid, const PlanningInputs& inputs, const SolveOptions& options,
                              RcrHandles* rcr = nullptr, DgasHandles* dgas = nullptr);
/// Routing-only model of the decoupled benchmark's first stage.
milp::Model build_routing_model(const GridCase& grid, const SolveOptions& options, RcrHandles* rcr = nullptr);

RecoveryPlan solve_joint(const GridCase& grid, const PlanningInputs& inputs, const SolveOptions& options);
RecoveryPlan solve_decoupled(const GridCase& grid, const PlanningInputs& inputs, const SolveOptions& options);

struct PlanReport {
  double gain_total = 0.0;    // sum over steps and IBRs
  double droop_cost = 0.0;    // rate * gain_total
  int gain_reset_step = 0;    // first t with all gains zero from t on; horizon if never
  int full_repair_step = -1;  // first t with every bus available; -1 if never
};

PlanReport plan_report(const RecoveryPlan& plan, const PlannerConfig& planner);
/// decoupled cost - joint cost
double savings(const PlanReport& joint, const PlanReport& decoupled);

nlohmann::json plan_to_json(const RecoveryPlan& plan, const GridCase& grid);
void write_plan_csv(const RecoveryPlan& plan, const GridCase& grid, const std::string& path);

}  // namespace crda

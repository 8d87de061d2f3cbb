#pragma once

#include "crda/grid_model.hpp"
#include "crda/sampling.hpp"

#include <Eigen/Dense>

#include <functional>
#include <map>
#include <optional>
#include <vector>

namespace crda {

/// One crew-routing plan with its repair timeline, computed by direct
/// travel/repair arithmetic.
struct RoutePlan {
  std::vector<std::vector<int>> routes;  // per crew, positions in attack.buses
  std::vector<double> arrival;           // per compromised bus
  std::vector<double> completion;        // arrival + repair time
  std::vector<int> repair_step;          // ceil(completion), -1 if past the horizon
  Eigen::MatrixXi flags;                 // F, buses x horizon
  Eigen::MatrixXi availability;          // Z, buses x horizon
  bool within_horizon = true;

  int scenario_at(int t) const;
};

struct EnumerationBudget {
  std::size_t max_buses = 8;
  std::size_t max_crews = 2;
};

/// Every assignment of compromised buses to crews times every visiting order.
/// Crews with no bus are skipped unless crews.allow_idle_crews is set.
std::vector<RoutePlan> enumerate_route_plans(const GridCase& grid, const EnumerationBudget& budget = {});

/// Timeline of explicit routes (positions in attack.buses per crew).
RoutePlan evaluate_routes(const GridCase& grid, const std::vector<std::vector<int>>& routes);

/// Minimum of sum(k) under the linearised stability rows of one scenario's
/// table, over all sampling combos, by vertex enumeration of each combo's
/// polytope. Independent of any LP/MILP solver.
struct LinearizedGains {
  bool feasible = false;
  double total = 0.0;
  std::vector<double> gains;
  int combo = -1;
};
LinearizedGains minimal_linearized_gains(const SensitivityTable& table, int scenario, double limit);

/// Exact-eigenvalue search: smallest sum of gains on a `resolution`-point
/// lattice per IBR, then a x10 refinement around the incumbent, subject to
/// spectral abscissa < -margin.
struct StabilizingGains {
  bool feasible = false;
  std::vector<double> gains;
  double abscissa = 0.0;
  double refined_step = 0.0;  // largest refined lattice spacing
};
StabilizingGains minimal_stabilizing_gains(const GridCase& grid, const std::vector<double>& attack_gains,
                                           int resolution, double margin = 0.0);

enum class StabilityModel { Linearized, Exact };

struct OracleResult {
  bool feasible = false;
  double objective = 0.0;
  double gain_total = 0.0;
  RoutePlan plan;
  std::size_t plans = 0;
  std::size_t feasible_plans = 0;
  std::map<int, double> scenario_gain;  // minimal per-step gain sum per scenario visited
};

/// Minimum over enumerated plans of sum_t G(m(t)) - sum_t sum_i beta_i Z(i,t),
/// with G the minimal per-step gain sum of the scenario active at t.
OracleResult oracle_optimum(const GridCase& grid, const SensitivityTable& table,
                            const std::map<int, std::vector<double>>& worst_gains, StabilityModel model,
                            int exact_resolution = 16, const EnumerationBudget& budget = {});

struct Trajectory {
  std::vector<double> time;
  Eigen::MatrixXd states;  // rows follow `time`, columns [delta; theta; omega]
  bool diverged = false;
  double divergence_time = -1.0;
  double max_abs_omega = 0.0;  // deviation from equilibrium
  int substeps = 1;
};

struct SimulationOptions {
  double omega_max = 0.04;
  /// Measure growth against the equilibrium -B^{-1} zeta instead of the origin.
  bool relative_to_equilibrium = true;
  /// RK4 stability limit used to choose internal substeps (h * rho <= limit).
  double stability_limit = 2.0;
  bool stop_on_divergence = false;
};

Eigen::VectorXd equilibrium(const SystemMatrix& system);

/// Fixed-step classical RK4 of x' = Bx + zeta, sampled every `step` seconds.
Trajectory simulate(const SystemMatrix& system, const Eigen::VectorXd& x0, double horizon, double step,
                    const SimulationOptions& options = {});

/// Equilibrium plus `size` on the frequency state of generator `gen_bus`.
Eigen::VectorXd perturbed_equilibrium(const GridCase& grid, const SystemMatrix& system, BusId gen_bus, double size);

void write_trajectory_csv(const Trajectory& trajectory, const GridCase& grid, const std::string& path);

}  // namespace crda

#include "crda/oracle_sim.hpp"

#include "crda/adversary.hpp"
#include "crda/error.hpp"
#include "crda/spectral.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

namespace crda {

int RoutePlan::scenario_at(int t) const {
  std::vector<int> z(static_cast<std::size_t>(availability.rows()));
  for (Eigen::Index i = 0; i < availability.rows(); ++i) z[static_cast<std::size_t>(i)] = availability(i, t);
  return scenario_index(z);
}

RoutePlan evaluate_routes(const GridCase& grid, const std::vector<std::vector<int>>& routes) {
  const std::size_t nc = grid.num_compromised();
  const int horizon = grid.planner.horizon;
  const int st = static_cast<int>(nc);
  RoutePlan plan;
  plan.routes = routes;
  plan.arrival.assign(nc, 0.0);
  plan.completion.assign(nc, 0.0);
  plan.repair_step.assign(nc, -1);
  plan.flags = Eigen::MatrixXi::Zero(static_cast<Eigen::Index>(nc), horizon);
  plan.availability = Eigen::MatrixXi::Zero(static_cast<Eigen::Index>(nc), horizon);
  std::vector<char> seen(nc, 0);
  for (std::size_t c = 0; c < routes.size(); ++c) {
    const Crew& crew = grid.crews.crews.at(c);
    int at = st;
    double clock = 0.0;
    for (int bus : routes[c]) {
      if (bus < 0 || bus >= static_cast<int>(nc) || seen[static_cast<std::size_t>(bus)]) {
        throw ModelError("route visits an unknown or repeated bus");
      }
      seen[static_cast<std::size_t>(bus)] = 1;
      clock += crew.travel_times(at, bus);
      plan.arrival[static_cast<std::size_t>(bus)] = clock;
      clock += crew.repair_times[static_cast<std::size_t>(bus)];
      plan.completion[static_cast<std::size_t>(bus)] = clock;
      at = bus;
    }
  }
  for (std::size_t i = 0; i < nc; ++i) {
    if (!seen[i]) throw ModelError("route plan leaves a compromised bus unvisited");
    // Repair flag at the first whole step not before completion.
    const int step = static_cast<int>(std::ceil(plan.completion[i]));
    if (step > horizon - 1) {
      plan.within_horizon = false;
      continue;
    }
    plan.repair_step[i] = step;
    plan.flags(static_cast<Eigen::Index>(i), step) = 1;
    for (int t = step + 1; t < horizon; ++t) plan.availability(static_cast<Eigen::Index>(i), t) = 1;
  }
  return plan;
}

std::vector<RoutePlan> enumerate_route_plans(const GridCase& grid, const EnumerationBudget& budget) {
  const std::size_t nc = grid.num_compromised();
  const std::size_t ncrews = grid.crews.crews.size();
  if (nc > budget.max_buses || ncrews > budget.max_crews) {
    throw BudgetError("route enumeration limited to " + std::to_string(budget.max_buses) + " buses and " +
                      std::to_string(budget.max_crews) + " crews");
  }
  std::vector<RoutePlan> plans;
  if (ncrews == 0) {
    if (nc == 0) plans.push_back(evaluate_routes(grid, {}));
    return plans;
  }
  std::size_t assignments = 1;
  for (std::size_t i = 0; i < nc; ++i) assignments *= ncrews;
  for (std::size_t code = 0; code < assignments; ++code) {
    std::vector<std::vector<int>> groups(ncrews);
    std::size_t c = code;
    for (std::size_t i = 0; i < nc; ++i) {
      groups[c % ncrews].push_back(static_cast<int>(i));
      c /= ncrews;
    }
    if (!grid.crews.allow_idle_crews &&
        std::any_of(groups.begin(), groups.end(), [](const auto& g) { return g.empty(); })) {
      continue;
    }
    // Cartesian product of the permutations of every crew's group.
    std::function<void(std::size_t, std::vector<std::vector<int>>&)> recurse =
        [&](std::size_t k, std::vector<std::vector<int>>& routes) {
          if (k == ncrews) {
            plans.push_back(evaluate_routes(grid, routes));
            return;
          }
          std::vector<int> perm = groups[k];
          do {
            routes[k] = perm;
            recurse(k + 1, routes);
          } while (std::next_permutation(perm.begin(), perm.end()));
        };
    std::vector<std::vector<int>> routes(ncrews);
    recurse(0, routes);
  }
  return plans;
}

namespace {

// min 1'k s.t. A k <= b over a bounded polytope, by enumerating vertices.
struct VertexResult {
  bool feasible = false;
  double value = 0.0;
  Eigen::VectorXd point;
};

VertexResult vertex_minimum(const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
  const auto rows = a.rows();
  const auto d = a.cols();
  VertexResult best;
  if (d == 0) {
    best.feasible = (b.array() >= -1e-9).all();
    best.point = Eigen::VectorXd();
    return best;
  }
  std::vector<int> pick(static_cast<std::size_t>(d));
  std::iota(pick.begin(), pick.end(), 0);
  const double scale = std::max(1.0, b.cwiseAbs().maxCoeff());
  while (true) {
    Eigen::MatrixXd m(d, d);
    Eigen::VectorXd r(d);
    for (Eigen::Index k = 0; k < d; ++k) {
      m.row(k) = a.row(pick[static_cast<std::size_t>(k)]);
      r(k) = b(pick[static_cast<std::size_t>(k)]);
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(m);
    if (lu.isInvertible()) {
      const Eigen::VectorXd x = lu.solve(r);
      const Eigen::VectorXd slack = a * x - b;
      if (slack.maxCoeff() <= 1e-9 * scale) {
        const double v = x.sum();
        if (!best.feasible || v < best.value - 1e-12 ||
            (std::abs(v - best.value) <= 1e-12 &&
             std::lexicographical_compare(x.data(), x.data() + d, best.point.data(), best.point.data() + d))) {
          best.feasible = true;
          best.value = v;
          best.point = x;
        }
      }
    }
    // Next combination of d rows out of `rows`.
    Eigen::Index k = d - 1;
    while (k >= 0 && pick[static_cast<std::size_t>(k)] == rows - d + k) --k;
    if (k < 0) break;
    ++pick[static_cast<std::size_t>(k)];
    for (Eigen::Index q = k + 1; q < d; ++q) pick[static_cast<std::size_t>(q)] = pick[static_cast<std::size_t>(q - 1)] + 1;
  }
  return best;
}

}  // namespace

LinearizedGains minimal_linearized_gains(const SensitivityTable& table, int scenario, double limit) {
  const ScenarioTable& st = table.scenarios.at(scenario);
  const auto d = static_cast<Eigen::Index>(table.grid.dims());
  LinearizedGains out;
  for (Eigen::Index j = 0; j < table.order.cols(); ++j) {
    const Eigen::Index rows = 2 * d + st.modes;
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(rows, d);
    Eigen::VectorXd b(rows);
    for (Eigen::Index i = 0; i < d; ++i) {
      const GainRange box = table.grid.milp_box(static_cast<std::size_t>(i), table.order(i, j));
      a(2 * i, i) = -1.0;
      b(2 * i) = -box.lower;
      a(2 * i + 1, i) = 1.0;
      b(2 * i + 1) = box.upper;
    }
    for (int n = 0; n < st.modes; ++n) {
      const SensitivityRecord& rec = st.record(n, static_cast<int>(j));
      double rhs = limit - rec.lambda0.real();
      for (Eigen::Index i = 0; i < d; ++i) {
        const double g = rec.gradient[static_cast<std::size_t>(i)].real();
        a(2 * d + n, i) = g;
        rhs += g * rec.k0[static_cast<std::size_t>(i)];
      }
      b(2 * d + n) = rhs;
    }
    const VertexResult v = vertex_minimum(a, b);
    if (v.feasible && (!out.feasible || v.value < out.total - 1e-12)) {
      out.feasible = true;
      out.total = v.value;
      out.gains.assign(v.point.data(), v.point.data() + d);
      out.combo = static_cast<int>(j);
    }
  }
  return out;
}

StabilizingGains minimal_stabilizing_gains(const GridCase& grid, const std::vector<double>& attack_gains,
                                           int resolution, double margin) {
  if (resolution < 2) throw ModelError("lattice resolution must be at least 2");
  const auto ranges = droop_gain_range_vector(grid);
  const std::size_t d = ranges.size();
  StabilizingGains best;
  auto consider = [&](const std::vector<double>& k) {
    const double total = std::accumulate(k.begin(), k.end(), 0.0);
    const double best_total = std::accumulate(best.gains.begin(), best.gains.end(), 0.0);
    if (best.feasible && total > best_total + 1e-12) return;
    const double a = spectral_abscissa(assemble_system_matrix(grid, attack_gains, k).state);
    if (!(a < -margin)) return;
    if (best.feasible && std::abs(total - best_total) <= 1e-12 && !(k < best.gains)) return;
    best.feasible = true;
    best.gains = k;
    best.abscissa = a;
  };
  auto sweep = [&](const std::vector<double>& lo, const std::vector<double>& step, const std::vector<int>& count) {
    std::vector<int> idx(d, 0);
    while (true) {
      std::vector<double> k(d);
      for (std::size_t i = 0; i < d; ++i) {
        k[i] = std::clamp(lo[i] + idx[i] * step[i], ranges[i].lower, ranges[i].upper);
      }
      consider(k);
      std::size_t i = 0;
      while (i < d && ++idx[i] >= count[i]) idx[i++] = 0;
      if (i == d) break;
    }
  };
  std::vector<double> lo(d), step(d);
  std::vector<int> count(d, resolution);
  for (std::size_t i = 0; i < d; ++i) {
    lo[i] = ranges[i].lower;
    step[i] = (ranges[i].upper - ranges[i].lower) / (resolution - 1);
  }
  sweep(lo, step, count);
  if (!best.feasible) return best;
  // Refine by 10 within one coarse step of the incumbent.
  std::vector<double> rlo(d), rstep(d);
  std::vector<int> rcount(d, 21);
  for (std::size_t i = 0; i < d; ++i) {
    rstep[i] = step[i] / 10.0;
    rlo[i] = best.gains[i] - step[i];
    best.refined_step = std::max(best.refined_step, rstep[i]);
  }
  sweep(rlo, rstep, rcount);
  return best;
}

OracleResult oracle_optimum(const GridCase& grid, const SensitivityTable& table,
                            const std::map<int, std::vector<double>>& worst_gains, StabilityModel model,
                            int exact_resolution, const EnumerationBudget& budget) {
  OracleResult result;
  const double limit = -(grid.planner.epsilon + grid.planner.stability_margin);
  std::map<int, std::optional<double>> gain_of;
  auto scenario_gain = [&](int m) -> std::optional<double> {
    auto it = gain_of.find(m);
    if (it != gain_of.end()) return it->second;
    std::optional<double> g;
    if (model == StabilityModel::Linearized) {
      const auto lin = minimal_linearized_gains(table, m, limit);
      if (lin.feasible) g = lin.total;
    } else {
      const auto ex = minimal_stabilizing_gains(grid, worst_gains.at(m), exact_resolution, 0.0);
      if (ex.feasible) g = std::accumulate(ex.gains.begin(), ex.gains.end(), 0.0);
    }
    gain_of.emplace(m, g);
    return g;
  };

  const auto plans = enumerate_route_plans(grid, budget);
  result.plans = plans.size();
  const auto& beta = grid.planner.weights;
  for (const RoutePlan& plan : plans) {
    if (!plan.within_horizon) continue;
    double gains = 0.0, reward = 0.0;
    bool ok = true;
    for (int t = 0; t < grid.planner.horizon && ok; ++t) {
      const auto g = scenario_gain(plan.scenario_at(t));
      if (!g) {
        ok = false;
        break;
      }
      gains += *g;
      for (std::size_t i = 0; i < grid.num_compromised(); ++i) reward += beta[i] * plan.availability(static_cast<Eigen::Index>(i), t);
    }
    if (!ok) continue;
    ++result.feasible_plans;
    const double objective = gains - reward;
    if (!result.feasible || objective < result.objective - 1e-12) {
      result.feasible = true;
      result.objective = objective;
      result.gain_total = gains;
      result.plan = plan;
    }
  }
  for (const auto& [m, g] : gain_of) {
    if (g) result.scenario_gain.emplace(m, *g);
  }
  return result;
}

Eigen::VectorXd equilibrium(const SystemMatrix& system) {
  Eigen::FullPivLU<Eigen::MatrixXd> lu(system.state);
  if (!lu.isInvertible()) return Eigen::VectorXd::Zero(system.state.rows());
  return -lu.solve(system.forcing);
}

Trajectory simulate(const SystemMatrix& system, const Eigen::VectorXd& x0, double horizon, double step,
                    const SimulationOptions& options) {
  const Eigen::MatrixXd& b = system.state;
  const Eigen::VectorXd& zeta = system.forcing;
  const auto n = b.rows();
  if (x0.size() != n) throw ModelError("initial state has the wrong dimension");
  if (!(step > 0.0) || !(horizon > 0.0)) throw ModelError("step and horizon must be positive");
  // Frequency states are the last |G| entries.
  const auto num_gen = system.attack_gains.cols();

  const Eigen::VectorXd ref = options.relative_to_equilibrium ? equilibrium(system) : Eigen::VectorXd::Zero(n);
  const Eigen::VectorXcd eig = b.eigenvalues();
  const double rho = eig.cwiseAbs().maxCoeff();
  Trajectory traj;
  traj.substeps = std::max(1, static_cast<int>(std::ceil(step * rho / options.stability_limit)));
  const double h = step / traj.substeps;

  const auto steps = static_cast<Eigen::Index>(std::llround(horizon / step));
  traj.time.reserve(static_cast<std::size_t>(steps + 1));
  traj.states.resize(steps + 1, n);

  const double start_norm = std::max((x0 - ref).cwiseAbs().maxCoeff(), 1e-300);
  Eigen::VectorXd x = x0;
  auto f = [&](const Eigen::VectorXd& y) -> Eigen::VectorXd { return b * y + zeta; };
  auto record = [&](Eigen::Index k) {
    traj.time.push_back(static_cast<double>(k) * step);
    traj.states.row(k) = x.transpose();
    const Eigen::VectorXd dev = x - ref;
    const double w = dev.tail(num_gen).cwiseAbs().maxCoeff();
    traj.max_abs_omega = std::max(traj.max_abs_omega, w);
    const bool blown = !dev.allFinite() || dev.cwiseAbs().maxCoeff() > 10.0 * start_norm || w > options.omega_max;
    if (blown && !traj.diverged) {
      traj.diverged = true;
      traj.divergence_time = traj.time.back();
    }
  };
  record(0);
  Eigen::Index k = 1;
  for (; k <= steps; ++k) {
    for (int s = 0; s < traj.substeps; ++s) {
      const Eigen::VectorXd k1 = f(x);
      const Eigen::VectorXd k2 = f(x + 0.5 * h * k1);
      const Eigen::VectorXd k3 = f(x + 0.5 * h * k2);
      const Eigen::VectorXd k4 = f(x + h * k3);
      x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    record(k);
    if (traj.diverged && options.stop_on_divergence) break;
  }
  if (k <= steps) traj.states.conservativeResize(static_cast<Eigen::Index>(traj.time.size()), n);
  return traj;
}

Eigen::VectorXd perturbed_equilibrium(const GridCase& grid, const SystemMatrix& system, BusId gen_bus, double size) {
  Eigen::VectorXd x = equilibrium(system);
  const int row = grid.omega_row(gen_bus);
  if (row < 0) throw ModelError("bus " + std::to_string(gen_bus) + " is not a generator");
  x(row) += size;
  return x;
}

void write_trajectory_csv(const Trajectory& trajectory, const GridCase& grid, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ModelError("cannot write " + path);
  out << "t";
  for (const auto& g : grid.generators) out << ",delta_" << g.bus;
  for (const auto& l : grid.loads) out << ",theta_" << l.bus;
  for (const auto& g : grid.generators) out << ",omega_" << g.bus;
  out << "\n";
  out.precision(10);
  for (std::size_t k = 0; k < trajectory.time.size(); ++k) {
    out << trajectory.time[k];
    for (Eigen::Index c = 0; c < trajectory.states.cols(); ++c) out << "," << trajectory.states(static_cast<Eigen::Index>(k), c);
    out << "\n";
  }
}

}  // namespace crda

#include "crda/adversary.hpp"
#include "crda/error.hpp"
#include "crda/oracle_sim.hpp"
#include "crda/planning.hpp"
#include "crda/spectral.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

using namespace crda;
using crda::testing::CrewSpec;
using crda::testing::fixture;

namespace {

std::vector<std::vector<double>> uniform_travel(std::size_t buses, double leg) {
  const std::size_t n = buses + 2;
  std::vector<std::vector<double>> t(n, std::vector<double>(n, leg));
  for (std::size_t i = 0; i < n; ++i) t[i][i] = 0.0;
  return t;
}

GridCase toy_with(const std::vector<int>& buses, std::size_t crews, int horizon, double bound = 12.0) {
  std::vector<CrewSpec> specs;
  for (std::size_t c = 0; c < crews; ++c) {
    std::vector<double> repair;
    for (std::size_t i = 0; i < buses.size(); ++i) repair.push_back(1.0 + 0.5 * static_cast<double>(i + c));
    specs.push_back({repair, uniform_travel(buses.size(), 1.0 + 0.25 * static_cast<double>(c))});
  }
  const std::vector<double> bounds(buses.size(), bound);
  return parse_case(crda::testing::with_attack(crda::testing::toy_grid(), buses, bounds, specs, horizon));
}

}  // namespace

TEST(Enumeration, Counts) {
  EXPECT_EQ(enumerate_route_plans(toy_with({3, 4}, 1, 12)).size(), 2u);
  GridCase g = toy_with({3, 4, 5}, 2, 12);
  EXPECT_EQ(enumerate_route_plans(g).size(), 12u);
  g.crews.allow_idle_crews = true;
  EXPECT_EQ(enumerate_route_plans(g).size(), 24u);
}

TEST(Enumeration, Budget) {
  EnumerationBudget b;
  b.max_buses = 2;
  EXPECT_THROW(enumerate_route_plans(toy_with({3, 4, 5}, 1, 12), b), BudgetError);
}

TEST(Enumeration, TimelineArithmetic) {
  // Crew 0: travel 1 per leg, repairs 1.0 / 1.5 at positions 0 / 1.
  const RoutePlan p = evaluate_routes(toy_with({3, 4}, 1, 8), {{1, 0}});
  EXPECT_DOUBLE_EQ(p.arrival[1], 1.0);
  EXPECT_DOUBLE_EQ(p.completion[1], 2.5);
  EXPECT_DOUBLE_EQ(p.arrival[0], 3.5);
  EXPECT_DOUBLE_EQ(p.completion[0], 4.5);
  EXPECT_EQ(p.repair_step, (std::vector<int>{5, 3}));
  EXPECT_EQ(p.availability(1, 3), 0);
  EXPECT_EQ(p.availability(1, 4), 1);
  EXPECT_EQ(p.scenario_at(0), 3);
  EXPECT_EQ(p.scenario_at(4), 1);
  EXPECT_EQ(p.scenario_at(7), 0);
}

TEST(Enumeration, TimelinesMatchRoutingConstraints) {
  GridCase g = toy_with({3, 4, 5}, 2, 14);
  g.crews.allow_idle_crews = true;
  const std::size_t nc = g.num_compromised();
  const int st = static_cast<int>(nc), en = st + 1;
  auto backend = milp::make_backend();
  for (const RoutePlan& plan : enumerate_route_plans(g)) {
    ASSERT_TRUE(plan.within_horizon);
    RcrHandles h;
    milp::Model m = build_routing_model(g, default_solve_options(g), &h);
    for (std::size_t c = 0; c < plan.routes.size(); ++c) {
      std::vector<std::vector<int>> used(nc + 2, std::vector<int>(nc + 2, 0));
      int prev = st;
      for (int b : plan.routes[c]) {
        used[static_cast<std::size_t>(prev)][static_cast<std::size_t>(b)] = 1;
        prev = b;
      }
      used[static_cast<std::size_t>(prev)][static_cast<std::size_t>(en)] = 1;
      for (std::size_t i = 0; i < nc + 2; ++i) {
        for (std::size_t j = 0; j < nc + 2; ++j) {
          const milp::VarId v = h.x[c][i][j];
          if (!v.valid()) {
            ASSERT_EQ(used[i][j], 0) << "route uses a missing arc";
            continue;
          }
          m.add_constraint("fix_" + std::to_string(c) + "_" + std::to_string(i) + "_" + std::to_string(j),
                           milp::LinearExpr(v), milp::Sense::Equal, used[i][j]);
        }
      }
    }
    const milp::Solution s = milp::solve(m, *backend);
    ASSERT_EQ(s.status, milp::Status::Optimal);
    for (std::size_t i = 0; i < nc; ++i) {
      for (int t = 0; t < g.planner.horizon; ++t) {
        const auto ti = static_cast<std::size_t>(t);
        const auto ii = static_cast<Eigen::Index>(i);
        EXPECT_EQ(std::lround(s.value(h.flag[i][ti])), plan.flags(ii, t));
        EXPECT_EQ(std::lround(h.availability[i][ti].evaluate(s.values)), plan.availability(ii, t));
      }
    }
  }
}

TEST(StabilizingGains, AllRepairedNeedsNone) {
  const GridCase g = load_case(fixture("mini3.json"));
  const StabilizingGains s = minimal_stabilizing_gains(g, std::vector<double>(3, 0.0), 8);
  ASSERT_TRUE(s.feasible);
  EXPECT_EQ(s.gains, (std::vector<double>{0.0, 0.0}));
}

TEST(StabilizingGains, OneDimensionalBisection) {
  const GridCase g = toy_with({3}, 1, 8);
  const std::vector<double> attack{12.0};
  auto abscissa = [&](double k) { return spectral_abscissa(assemble_system_matrix(g, attack, {k}).state); };
  ASSERT_GT(abscissa(0.0), 0.0);
  ASSERT_LT(abscissa(10.0), 0.0);
  double lo = 0.0, hi = 10.0;
  for (int i = 0; i < 80; ++i) {
    const double mid = 0.5 * (lo + hi);
    (abscissa(mid) < 0.0 ? hi : lo) = mid;
  }
  const StabilizingGains s = minimal_stabilizing_gains(g, attack, 16);
  ASSERT_TRUE(s.feasible);
  EXPECT_LT(s.abscissa, 0.0);
  EXPECT_GE(s.gains[0], hi - 1e-12);
  EXPECT_LE(s.gains[0] - hi, s.refined_step + 1e-12);
}

TEST(StabilizingGains, FixtureFullCompromise) {
  const GridCase g = load_case(fixture("ieee39.json"));
  const WorstCaseGains w = worst_case_gains(g, 63);
  const StabilizingGains s = minimal_stabilizing_gains(g, w.gains, 16);
  ASSERT_TRUE(s.feasible);
  EXPECT_LT(spectral_abscissa(assemble_system_matrix(g, w.gains, s.gains).state), 0.0);
}

TEST(Oracle, ZeroAttack) {
  // Bound 5 never destabilises the toy grid, so every scenario needs no gains.
  GridCase g = toy_with({3, 4}, 1, 10, 5.0);
  g.planner.weights = {0.0, 0.0};
  const auto worst = all_worst_case_gains(g);
  for (const auto& [m, w] : worst) EXPECT_EQ(w.gains, std::vector<double>(2, 0.0));
  const SensitivityTable table = generate_sensitivity_tables(g, gain_vectors(worst), 3, 0.1);
  const OracleResult r = oracle_optimum(g, table, gain_vectors(worst), StabilityModel::Linearized);
  ASSERT_TRUE(r.feasible);
  EXPECT_NEAR(r.objective, 0.0, 1e-12);
  EXPECT_EQ(r.plans, 2u);
}

TEST(Oracle, BoundsDecoupledAndMatchesJoint) {
  const GridCase g = load_case(fixture("mini3.json"));
  const PlanningInputs inputs = compute_inputs(g, g.planner.samples, g.planner.estimation_threshold);
  const OracleResult r = oracle_optimum(g, inputs.table, inputs.attack_gains(), StabilityModel::Linearized);
  ASSERT_TRUE(r.feasible);
  const RecoveryPlan joint = solve_joint(g, inputs, default_solve_options(g));
  const RecoveryPlan decoupled = solve_decoupled(g, inputs, default_solve_options(g));
  EXPECT_NEAR(joint.objective, r.objective, 1e-6);
  EXPECT_GE(decoupled.objective, r.objective - 1e-6);
}

TEST(Simulate, ExponentialDecay) {
  SystemMatrix s;
  s.state = -Eigen::MatrixXd::Identity(3, 3);
  s.forcing = Eigen::VectorXd::Zero(3);
  s.attack_gains = Eigen::MatrixXd::Zero(1, 1);
  s.droop_gains = Eigen::MatrixXd::Zero(1, 1);
  SimulationOptions o;
  o.omega_max = 10.0;
  const Trajectory tr = simulate(s, Eigen::VectorXd::Ones(3), 5.0, 0.01, o);
  ASSERT_EQ(tr.time.size(), 501u);
  EXPECT_FALSE(tr.diverged);
  for (std::size_t k = 0; k < tr.time.size(); ++k) {
    if (k > 0) EXPECT_GT(tr.time[k], tr.time[k - 1]);
    for (Eigen::Index i = 0; i < 3; ++i) {
      EXPECT_NEAR(tr.states(static_cast<Eigen::Index>(k), i), std::exp(-tr.time[k]), 1e-6);
    }
  }
}

TEST(Simulate, Growth) {
  SystemMatrix s;
  s.state = 0.5 * Eigen::MatrixXd::Identity(2, 2);
  s.forcing = Eigen::VectorXd::Zero(2);
  s.attack_gains = Eigen::MatrixXd::Zero(1, 1);
  s.droop_gains = Eigen::MatrixXd::Zero(1, 1);
  SimulationOptions o;
  o.omega_max = 1e9;
  const Trajectory tr = simulate(s, Eigen::VectorXd::Ones(2), 10.0, 0.01, o);
  ASSERT_TRUE(tr.diverged);
  // 10x growth at ln(10)/0.5.
  EXPECT_NEAR(tr.divergence_time, std::log(10.0) / 0.5, 0.011);
}

TEST(Simulate, FixtureWorstAttackDiverges) {
  const GridCase g = load_case(fixture("ieee39.json"));
  const WorstCaseGains w = worst_case_gains(g, 63);
  ASSERT_GT(w.abscissa, 0.0);
  const SystemMatrix sys = assemble_system_matrix(g, w.gains, std::vector<double>(2, 0.0));
  const Trajectory tr = simulate(sys, perturbed_equilibrium(g, sys, g.generators.front().bus, 0.01), 30.0, 0.01);
  EXPECT_TRUE(tr.diverged);
  EXPECT_EQ(tr.states.cols(), sys.state.rows());
}

TEST(Simulate, DivergenceMatchesAbscissaSign) {
  const GridCase g = load_case(fixture("ieee39.json"));
  const auto bounds = attack_gain_bound_vector(g);
  const auto ranges = droop_gain_range_vector(g);
  std::mt19937 rng(2024);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  int checked = 0, unstable = 0;
  while (checked < 20) {
    std::vector<double> attack, droop;
    // Strong attacks and weak droop so both signs of the abscissa occur.
    for (double b : bounds) attack.push_back(b * (0.6 + 0.4 * unit(rng)));
    for (const auto& r : ranges) droop.push_back(r.lower + 0.25 * (r.upper - r.lower) * unit(rng));
    const SystemMatrix sys = assemble_system_matrix(g, attack, droop);
    const double a = spectral_abscissa(sys.state);
    if (std::abs(a) <= 1e-3) continue;
    ++checked;
    unstable += a > 0.0;
    // Long enough for a 1e4 change at rate |a|.
    const double horizon = std::max(30.0, std::log(1e4) / std::abs(a));
    SimulationOptions o;
    o.stop_on_divergence = true;
    const Trajectory tr =
        simulate(sys, perturbed_equilibrium(g, sys, g.generators.front().bus, 0.01), horizon, 0.02, o);
    EXPECT_EQ(tr.diverged, a > 0.0) << "abscissa " << a;
  }
  EXPECT_GT(unstable, 0);
  EXPECT_LT(unstable, 20);
}

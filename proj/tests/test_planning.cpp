#include "crda/error.hpp"
#include "crda/planning.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

using namespace crda;
using crda::testing::CrewSpec;
using crda::testing::fixture;

namespace {

// One bus (load 3) repaired by one crew; travel 1 step on every leg. The
// attack bound destabilises the toy grid but the IBR can still recover it.
GridCase single_bus(double repair, int horizon) {
  return parse_case(crda::testing::with_attack(crda::testing::toy_grid(), {3}, {12.0},
                                               {CrewSpec{{repair}, {{0, 1, 1}, {1, 0, 1}, {1, 1, 0}}}}, horizon));
}

struct RoutingResult {
  std::vector<int> flags;
  std::vector<int> availability;
};

RoutingResult solve_routing(const GridCase& g) {
  RcrHandles h;
  const milp::Model m = build_routing_model(g, default_solve_options(g), &h);
  auto backend = milp::make_backend();
  const milp::Solution s = milp::solve(m, *backend);
  EXPECT_EQ(s.status, milp::Status::Optimal);
  RoutingResult r;
  for (int t = 0; t < g.planner.horizon; ++t) {
    r.flags.push_back(static_cast<int>(std::lround(s.value(h.flag[0][static_cast<std::size_t>(t)]))));
    r.availability.push_back(static_cast<int>(std::lround(h.availability[0][static_cast<std::size_t>(t)].evaluate(s.values))));
  }
  return r;
}

}  // namespace

TEST(Routing, RepairCompletionStep) {
  // Arrival at 1, repair 3.5 -> finished at 4.5, flagged at step 5.
  const RoutingResult r = solve_routing(single_bus(3.5, 10));
  EXPECT_EQ(r.flags, (std::vector<int>{0, 0, 0, 0, 0, 1, 0, 0, 0, 0}));
  EXPECT_EQ(r.availability, (std::vector<int>{0, 0, 0, 0, 0, 0, 1, 1, 1, 1}));
}

TEST(Routing, HalfStepRepairTimeline) {
  const RoutingResult r = solve_routing(single_bus(0.5, 6));
  const std::vector<int> f(r.flags.begin() + 1, r.flags.end());
  const std::vector<int> z(r.availability.begin() + 1, r.availability.end());
  EXPECT_EQ(f, (std::vector<int>{0, 1, 0, 0, 0}));
  EXPECT_EQ(z, (std::vector<int>{0, 0, 1, 1, 1}));
}

TEST(Routing, CompletionOnStepBoundary) {
  // Finished exactly at 4: flagged at 4, available from 5.
  const RoutingResult r = solve_routing(single_bus(3.0, 8));
  EXPECT_EQ(r.flags, (std::vector<int>{0, 0, 0, 0, 1, 0, 0, 0}));
  EXPECT_EQ(r.availability, (std::vector<int>{0, 0, 0, 0, 0, 1, 1, 1}));
}

TEST(Routing, HorizonTooShortIsInfeasible) {
  GridCase g = load_case(fixture("mini3.json"));
  g.planner.horizon = 10;
  const PlanningInputs inputs = compute_inputs(g, 3, 0.1);
  try {
    solve_joint(g, inputs, default_solve_options(g));
    FAIL() << "expected InfeasibleError";
  } catch (const InfeasibleError& e) {
    EXPECT_EQ(e.first_failing_step(), 10);
  }
  EXPECT_THROW(solve_decoupled(g, inputs, default_solve_options(g)), InfeasibleError);
}

TEST(Planning, UnstabilisableFullScenarioFailsAtStepZero) {
  GridCase g = load_case(fixture("mini3.json"));
  for (auto& u : g.ibr.units) u.gain_max = 0.01;
  const PlanningInputs inputs = compute_inputs(g, 2, 0.1);
  try {
    solve_joint(g, inputs, default_solve_options(g));
    FAIL() << "expected InfeasibleError";
  } catch (const InfeasibleError& e) {
    EXPECT_EQ(e.first_failing_step(), 0);
  }
}

TEST(Planning, NoCompromisedBuses) {
  GridCase g = parse_case(crda::testing::with_attack(crda::testing::toy_grid(), {}, {}, {}, 6));
  const PlanningInputs inputs = compute_inputs(g, 3, 0.1);
  const RecoveryPlan p = solve_joint(g, inputs, default_solve_options(g));
  EXPECT_NEAR(p.objective, 0.0, 1e-9);
  EXPECT_TRUE(p.routes.empty() || std::all_of(p.routes.begin(), p.routes.end(),
                                              [](const CrewRoute& r) { return r.buses.size() <= 2; }));
  EXPECT_TRUE(p.audit_passed);
}

TEST(Planning, ReportArithmetic) {
  PlannerConfig planner;
  planner.horizon = 3;
  RecoveryPlan p;
  p.buses = {3};
  p.availability = Eigen::MatrixXi::Zero(1, 3);
  for (int t = 0; t < 3; ++t) p.steps.push_back(PlanStep{t, 1, 0, {0.0}, 0.0, 0.0});
  PlanReport r = plan_report(p, planner);
  EXPECT_DOUBLE_EQ(r.droop_cost, 0.0);
  EXPECT_EQ(r.gain_reset_step, 0);
  EXPECT_EQ(r.full_repair_step, -1);

  p.steps[0].gains = {7.126};
  p.availability(0, 2) = 1;
  r = plan_report(p, planner);
  EXPECT_NEAR(r.gain_total, 7.126, 1e-12);
  EXPECT_NEAR(r.droop_cost, 1810.004, 1e-9);
  EXPECT_EQ(r.gain_reset_step, 1);
  EXPECT_EQ(r.full_repair_step, 2);

  PlanReport other = r;
  other.droop_cost = 2000.0;
  EXPECT_NEAR(savings(r, other), 189.996, 1e-9);
}

class Mini3Plans : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    grid_ = new GridCase(load_case(fixture("mini3.json")));
    inputs_ = new PlanningInputs(compute_inputs(*grid_, grid_->planner.samples, grid_->planner.estimation_threshold));
    joint_ = new RecoveryPlan(solve_joint(*grid_, *inputs_, default_solve_options(*grid_)));
    decoupled_ = new RecoveryPlan(solve_decoupled(*grid_, *inputs_, default_solve_options(*grid_)));
  }
  static void TearDownTestSuite() {
    delete decoupled_;
    delete joint_;
    delete inputs_;
    delete grid_;
  }
  static GridCase* grid_;
  static PlanningInputs* inputs_;
  static RecoveryPlan* joint_;
  static RecoveryPlan* decoupled_;
};
GridCase* Mini3Plans::grid_ = nullptr;
PlanningInputs* Mini3Plans::inputs_ = nullptr;
RecoveryPlan* Mini3Plans::joint_ = nullptr;
RecoveryPlan* Mini3Plans::decoupled_ = nullptr;

TEST_F(Mini3Plans, Optimal) {
  EXPECT_EQ(joint_->status, milp::Status::Optimal);
  EXPECT_EQ(decoupled_->status, milp::Status::Optimal);
  EXPECT_TRUE(joint_->audit_passed);
  EXPECT_TRUE(decoupled_->audit_passed);
  EXPECT_NEAR(joint_->objective, joint_->gain_total - joint_->availability_reward, 1e-6);
}

TEST_F(Mini3Plans, RoutesAreDepotPaths) {
  std::vector<int> visits(grid_->num_compromised(), 0);
  for (const RecoveryPlan* p : {joint_, decoupled_}) {
    std::fill(visits.begin(), visits.end(), 0);
    for (const CrewRoute& r : p->routes) {
      for (std::size_t k = 0; k < r.buses.size(); ++k) {
        const auto it = std::find_if(grid_->attack.buses.begin(), grid_->attack.buses.end(),
                                     [&](const AttackedBus& b) { return b.bus == r.buses[k]; });
        ASSERT_NE(it, grid_->attack.buses.end());
        visits[static_cast<std::size_t>(it - grid_->attack.buses.begin())]++;
        if (k > 0) EXPECT_GT(r.arrival[k], r.arrival[k - 1]);
      }
    }
    for (int v : visits) EXPECT_EQ(v, 1);
  }
}

TEST_F(Mini3Plans, AvailabilityMonotoneAndConsistent) {
  const RecoveryPlan& p = *joint_;
  const int h = grid_->planner.horizon;
  for (Eigen::Index i = 0; i < p.availability.rows(); ++i) {
    EXPECT_EQ(p.flags.row(i).sum(), 1);
    EXPECT_EQ(p.availability(i, 0), 0);
    for (int t = 1; t < h; ++t) {
      EXPECT_GE(p.availability(i, t), p.availability(i, t - 1));
      EXPECT_EQ(p.availability(i, t), p.availability(i, t - 1) + p.flags(i, t - 1));
    }
  }
  for (int t = 0; t < h; ++t) {
    std::vector<int> z;
    for (Eigen::Index i = 0; i < p.availability.rows(); ++i) z.push_back(p.availability(i, t));
    EXPECT_EQ(p.steps[static_cast<std::size_t>(t)].scenario, scenario_index(z));
  }
}

TEST_F(Mini3Plans, StepsStable) {
  for (const RecoveryPlan* p : {joint_, decoupled_}) {
    for (const PlanStep& s : p->steps) {
      EXPECT_LE(s.estimated_abscissa, -grid_->planner.stability_margin + 1e-6) << "t=" << s.t;
      EXPECT_LT(s.exact_abscissa, 0.0) << "t=" << s.t;
      for (std::size_t j = 0; j < s.gains.size(); ++j) {
        EXPECT_GE(s.gains[j], *grid_->ibr.units[j].gain_min - 1e-9);
        EXPECT_LE(s.gains[j], *grid_->ibr.units[j].gain_max + 1e-9);
      }
    }
  }
}

TEST_F(Mini3Plans, FullyRepairedNeedsNoGains) {
  // The nominal grid meets the margin with zero droop gains.
  const auto nominal = assemble_system_matrix(*grid_, GainMap{}, GainMap{});
  ASSERT_LT(spectral_abscissa(nominal.state), -grid_->planner.stability_margin);
  for (const PlanStep& s : joint_->steps) {
    if (s.scenario != 0) continue;
    for (double k : s.gains) EXPECT_NEAR(k, 0.0, 1e-6);
  }
}

TEST_F(Mini3Plans, DecoupledNeverBeatsJoint) {
  EXPECT_GE(decoupled_->objective, joint_->objective - 1e-6);
  const PlanReport a = plan_report(*joint_, grid_->planner);
  const PlanReport b = plan_report(*decoupled_, grid_->planner);
  EXPECT_GE(savings(a, b), -1e-6 * grid_->planner.droop_cost_rate);
}

TEST_F(Mini3Plans, ZeroWeightsBoundGains) {
  SolveOptions o = default_solve_options(*grid_);
  o.weights = std::vector<double>(grid_->num_compromised(), 0.0);
  const RecoveryPlan g0 = solve_joint(*grid_, *inputs_, o);
  const double beta_total = std::accumulate(grid_->planner.weights.begin(), grid_->planner.weights.end(), 0.0);
  EXPECT_LE(g0.gain_total, joint_->gain_total + 1e-6);
  EXPECT_LE(joint_->gain_total, g0.gain_total + beta_total * grid_->planner.horizon + 1e-6);
}

TEST_F(Mini3Plans, IndicatorColumnsSumToOne) {
  RcrHandles rcr;
  DgasHandles dgas;
  const milp::Model m = build_joint_model(*grid_, *inputs_, default_solve_options(*grid_), &rcr, &dgas);
  auto backend = milp::make_backend();
  const milp::Solution s = milp::solve(m, *backend);
  ASSERT_EQ(s.status, milp::Status::Optimal);
  EXPECT_NEAR(s.objective, joint_->objective, 1e-6);
  const auto sum = [&](const std::vector<milp::VarId>& vs) {
    double total = 0.0;
    for (const auto& v : vs) total += s.value(v);
    return total;
  };
  for (std::size_t t = 0; t < dgas.scenario.size(); ++t) {
    EXPECT_NEAR(sum(dgas.scenario[t]), 1.0, 1e-6);
    EXPECT_NEAR(sum(dgas.combo[t]), 1.0, 1e-6);
    for (const auto& seg : dgas.segment[t]) EXPECT_NEAR(sum(seg), 1.0, 1e-6);
  }
}

TEST_F(Mini3Plans, ForcedScenarioAndSegment) {
  // Buses 0 and 2 compromised, bus 1 repaired: scenario 5 at every step.
  milp::Model m;
  const int h = grid_->planner.horizon;
  std::vector<std::vector<milp::LinearExpr>> z(3, std::vector<milp::LinearExpr>(static_cast<std::size_t>(h)));
  for (auto& row : z) std::fill(row.begin(), row.end(), milp::LinearExpr(0.0));
  std::fill(z[1].begin(), z[1].end(), milp::LinearExpr(1.0));
  const DgasHandles d = emit_dgas(m, *grid_, inputs_->table, z);
  m.add_constraint("pin", milp::LinearExpr(d.gains[0][0]), milp::Sense::Equal, 5.0);
  milp::LinearExpr total;
  for (const auto& row : d.gains) {
    for (const auto& v : row) total.add(v, 1.0);
  }
  m.set_objective(total);
  auto backend = milp::make_backend();
  const milp::Solution s = milp::solve(m, *backend);
  ASSERT_EQ(s.status, milp::Status::Optimal);
  for (int t = 0; t < h; ++t) EXPECT_NEAR(s.value(d.scenario[static_cast<std::size_t>(t)][5]), 1.0, 1e-6);
  // Range [0, 15] with 4 samples: segment 2 covers [2.5, 7.5).
  EXPECT_NEAR(s.value(d.segment[0][0][1]), 1.0, 1e-6);
}

TEST(Planning, SingleBusMethodsAgree) {
  const GridCase g = single_bus(2.0, 8);
  const PlanningInputs inputs = compute_inputs(g, 3, 0.1);
  const RecoveryPlan a = solve_joint(g, inputs, default_solve_options(g));
  const RecoveryPlan b = solve_decoupled(g, inputs, default_solve_options(g));
  EXPECT_NEAR(a.objective, b.objective, 1e-6);
  EXPECT_EQ(a.repair_step, b.repair_step);
}

TEST(Planning, JsonShape) {
  const GridCase g = single_bus(2.0, 8);
  const PlanningInputs inputs = compute_inputs(g, 3, 0.1);
  const RecoveryPlan p = solve_joint(g, inputs, default_solve_options(g));
  const nlohmann::json j = plan_to_json(p, g);
  EXPECT_EQ(j.at("method"), "joint");
  EXPECT_EQ(j.at("steps").size(), 8u);
  ASSERT_EQ(j.at("routes").size(), 1u);
  EXPECT_EQ(j.at("routes")[0].at("route").front(), "st");
  EXPECT_EQ(j.at("routes")[0].at("route").back(), "en");
  EXPECT_EQ(j.at("buses")[0].at("repair_step"), 3);
}

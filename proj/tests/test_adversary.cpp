#include "crda/adversary.hpp"
#include "crda/error.hpp"
#include "crda/spectral.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

using namespace crda;
using crda::testing::fixture;

TEST(Scenario, IndexExamples) {
  EXPECT_EQ(scenario_index({1, 1, 1, 1, 1, 1}), 0);
  EXPECT_EQ(scenario_index({0, 0, 0, 0, 0, 0}), 63);
  EXPECT_EQ(scenario_index({1, 0, 0, 0, 0, 0}), 62);
  EXPECT_EQ(scenario_index({}), 0);
}

TEST(Scenario, RoundTrip) {
  for (int m = 0; m < 64; ++m) EXPECT_EQ(scenario_index(index_to_availability(m, 6)), m);
}

TEST(Scenario, MaskGains) {
  EXPECT_EQ(mask_gains({1.0, 2.0, 3.0}, 5), (std::vector<double>{1.0, 0.0, 3.0}));
  EXPECT_EQ(mask_gains({1.0, 2.0, 3.0}, 0), (std::vector<double>{0.0, 0.0, 0.0}));
}

TEST(WorstCase, AllRepairedGivesZeroGains) {
  const GridCase g = load_case(fixture("mini3.json"));
  const WorstCaseGains w = worst_case_gains(g, 0);
  EXPECT_EQ(w.gains, std::vector<double>(3, 0.0));
  EXPECT_NEAR(w.abscissa, spectral_abscissa(assemble_system_matrix(g, GainMap{}, GainMap{}).state), 1e-12);
}

TEST(WorstCase, OneDimensionalSweep) {
  auto doc = crda::testing::with_attack(crda::testing::toy_grid(), {3}, {20.0},
                                         {{{1.0}, {{0, 1, 1}, {1, 0, 1}, {1, 1, 0}}}}, 10);
  const GridCase g = parse_case(doc);
  double best = -1e300, arg = 0.0;
  for (int i = 0; i <= 200; ++i) {
    const double k = 20.0 * i / 200.0;
    const double a = spectral_abscissa(assemble_system_matrix(g, {k}, {0.0}).state);
    if (a > best) {
      best = a;
      arg = k;
    }
  }
  const WorstCaseGains w = worst_case_gains(g, 1);
  EXPECT_GE(w.abscissa, best - 1e-9);
  EXPECT_NEAR(w.gains[0], arg, 20.0 / 200.0 + 1e-9);
  EXPECT_EQ(w.gains.size(), 1u);
}

TEST(WorstCase, RepairedPositionsStayZero) {
  const GridCase g = load_case(fixture("mini3.json"));
  const auto bounds = attack_gain_bound_vector(g);
  for (int m = 0; m < 8; ++m) {
    const WorstCaseGains w = worst_case_gains(g, m);
    const auto z = index_to_availability(m, 3);
    for (std::size_t i = 0; i < 3; ++i) {
      if (z[i]) EXPECT_EQ(w.gains[i], 0.0);
      EXPECT_GE(w.gains[i], 0.0);
      EXPECT_LE(w.gains[i], bounds[i]);
    }
  }
}

TEST(CornerOracle, EmptyAndSingle) {
  const GridCase g = load_case(fixture("mini3.json"));
  EXPECT_EQ(corner_oracle(g, 0).gains, std::vector<double>(3, 0.0));
  auto doc = crda::testing::with_attack(crda::testing::toy_grid(), {3}, {20.0},
                                         {{{1.0}, {{0, 1, 1}, {1, 0, 1}, {1, 1, 0}}}}, 10);
  const GridCase toy = parse_case(doc);
  const double at_bound = spectral_abscissa(assemble_system_matrix(toy, {20.0}, {0.0}).state);
  const double at_zero = spectral_abscissa(assemble_system_matrix(toy, {0.0}, {0.0}).state);
  ASSERT_GT(at_bound, at_zero);
  EXPECT_DOUBLE_EQ(corner_oracle(toy, 1).gains[0], 20.0);
}

TEST(CornerOracle, FixtureCrossCheck) {
  const GridCase g = load_case(fixture("ieee39.json"));
  const WorstCaseGains oracle = corner_oracle(g, 63);
  const WorstCaseGains ascent = worst_case_gains(g, 63);
  EXPECT_LE(oracle.abscissa, ascent.abscissa + 1e-6);
}

TEST(CornerOracle, BudgetExceeded) {
  const GridCase g = load_case(fixture("ieee39.json"));
  AdversaryOptions o;
  o.oracle_budget = 4;
  EXPECT_THROW(corner_oracle(g, 63, o), BudgetError);
}

TEST(WorstCase, JsonRoundTrip) {
  const GridCase g = load_case(fixture("mini3.json"));
  const auto worst = all_worst_case_gains(g);
  ASSERT_EQ(worst.size(), 8u);
  const auto back = worst_gains_from_json(worst_gains_to_json(worst, "h"), "h");
  for (const auto& [m, w] : worst) {
    EXPECT_EQ(back.at(m).gains, w.gains);
    EXPECT_EQ(back.at(m).abscissa, w.abscissa);
  }
  EXPECT_THROW(worst_gains_from_json(worst_gains_to_json(worst, "h"), "x"), ModelError);
}

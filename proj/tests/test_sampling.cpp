#include "crda/adversary.hpp"
#include "crda/error.hpp"
#include "crda/sampling.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <limits>
#include <set>

using namespace crda;
using crda::testing::fixture;

namespace {

std::vector<std::vector<int>> columns(const OrderMatrix& o) {
  std::vector<std::vector<int>> out;
  for (Eigen::Index j = 0; j < o.cols(); ++j) {
    std::vector<int> c;
    for (Eigen::Index i = 0; i < o.rows(); ++i) c.push_back(o(i, j));
    out.push_back(c);
  }
  return out;
}

SegmentGrid paper_grid(int n = 4) { return make_segment_grid({{0.0, 15.0}}, n, 1e-4); }

}  // namespace

TEST(OrderMatrix, SmallExamples) {
  EXPECT_EQ(columns(order_matrix(2, 1)), (std::vector<std::vector<int>>{{1}, {2}}));
  EXPECT_EQ(columns(order_matrix(2, 2)), (std::vector<std::vector<int>>{{1, 1}, {2, 1}, {2, 2}, {1, 2}}));
  EXPECT_EQ(columns(order_matrix(3, 2)), (std::vector<std::vector<int>>{
                                             {1, 1}, {2, 1}, {3, 1}, {3, 2}, {2, 2}, {1, 2}, {1, 3}, {2, 3}, {3, 3}}));
}

TEST(OrderMatrix, PermutationAndAdjacency) {
  for (int n : {2, 3, 4, 6, 8}) {
    for (int d : {1, 2, 3}) {
      const OrderMatrix o = order_matrix(n, d);
      const auto cols = columns(o);
      std::set<std::vector<int>> unique(cols.begin(), cols.end());
      long expected = 1;
      for (int i = 0; i < d; ++i) expected *= n;
      EXPECT_EQ(static_cast<long>(unique.size()), expected);
      for (const auto& c : cols) {
        for (int v : c) EXPECT_TRUE(v >= 1 && v <= n);
      }
      for (std::size_t j = 1; j < cols.size(); ++j) {
        int changed = 0, step = 0;
        for (int i = 0; i < d; ++i) {
          if (cols[j][i] != cols[j - 1][i]) {
            ++changed;
            step = std::abs(cols[j][i] - cols[j - 1][i]);
          }
        }
        EXPECT_EQ(changed, 1);
        EXPECT_EQ(step, 1);
      }
    }
  }
}

TEST(OrderMatrix, Budget) { EXPECT_THROW(order_matrix(1000, 4), BudgetError); }

TEST(Segments, IndexToGains) {
  const SegmentGrid g = paper_grid();
  EXPECT_DOUBLE_EQ(g.sample(0, 1), 0.0);
  EXPECT_DOUBLE_EQ(g.sample(0, 3), 10.0);
  EXPECT_DOUBLE_EQ(g.sample(0, 4), 15.0);
  Eigen::VectorXi col(1);
  col << 3;
  EXPECT_EQ(index_to_gains(col, g), std::vector<double>{10.0});
}

TEST(Segments, MidpointBounds) {
  const SegmentGrid g = paper_grid();
  EXPECT_DOUBLE_EQ(g.lower(0, 1), 0.0);
  EXPECT_DOUBLE_EQ(g.upper(0, 1), 2.5);
  EXPECT_DOUBLE_EQ(g.lower(0, 2), 2.5);
  EXPECT_DOUBLE_EQ(g.upper(0, 2), 7.5);
  EXPECT_DOUBLE_EQ(g.lower(0, 4), 12.5);
  EXPECT_DOUBLE_EQ(g.upper(0, 4), 15.0);
  const SegmentBounds b = segment_bounds(g);
  EXPECT_EQ(b.lower[0], (std::vector<double>{0.0, 2.5, 7.5, 12.5}));
  EXPECT_EQ(b.upper[0], (std::vector<double>{2.5, 7.5, 12.5, 15.0}));
}

TEST(Segments, HalfOpenPartition) {
  const SegmentGrid g = paper_grid();
  EXPECT_EQ(g.segment_of(0, 0.0), 1);
  EXPECT_EQ(g.segment_of(0, 2.4999), 1);
  EXPECT_EQ(g.segment_of(0, 2.5), 2);
  EXPECT_EQ(g.segment_of(0, 5.0), 2);
  EXPECT_EQ(g.segment_of(0, 12.5), 4);
  EXPECT_EQ(g.segment_of(0, 15.0), 4);
  for (int l = 1; l < 4; ++l) EXPECT_DOUBLE_EQ(g.upper(0, l), g.lower(0, l + 1));
  EXPECT_DOUBLE_EQ(g.milp_box(0, 2).upper, 7.5 - 1e-4);
  EXPECT_DOUBLE_EQ(g.milp_box(0, 4).upper, 15.0);
}

TEST(Segments, ComboOf) {
  const OrderMatrix o = order_matrix(4, 2);
  for (Eigen::Index j = 0; j < o.cols(); ++j) EXPECT_EQ(combo_of(o, {o(0, j), o(1, j)}), j);
}

class FixtureTables : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    grid_ = new GridCase(load_case(fixture("mini3.json")));
    const int full = static_cast<int>(grid_->num_scenarios()) - 1;
    worst_ = new std::vector<double>(worst_case_gains(*grid_, full).gains);
  }
  static void TearDownTestSuite() {
    delete grid_;
    delete worst_;
  }
  static GridCase* grid_;
  static std::vector<double>* worst_;
};
GridCase* FixtureTables::grid_ = nullptr;
std::vector<double>* FixtureTables::worst_ = nullptr;

TEST_F(FixtureTables, InfiniteThresholdNeverRefreshes) {
  const auto t = generate_sensitivity_tables(*grid_, {{7, *worst_}}, 4, std::numeric_limits<double>::infinity());
  const ScenarioTable& s = t.scenarios.at(7);
  for (int n = 0; n < s.modes; ++n) EXPECT_EQ(s.refresh_count(n), 1);
  EXPECT_EQ(s.refreshed_combos(), 1);
}

TEST_F(FixtureTables, ZeroThresholdAlwaysRefreshes) {
  const auto t = generate_sensitivity_tables(*grid_, {{7, *worst_}}, 3, 0.0);
  const ScenarioTable& s = t.scenarios.at(7);
  for (int n = 0; n < s.modes; ++n) EXPECT_EQ(s.refresh_count(n), 9);
  EXPECT_EQ(s.refreshed_combos(), 9);
}

TEST_F(FixtureTables, ErrorWithinThresholdAtEverySample) {
  const auto t = generate_sensitivity_tables(*grid_, {{7, *worst_}}, 4, 0.1);
  EXPECT_LE(max_sample_error(t), 0.1);
  const ScenarioTable& s = t.scenarios.at(7);
  // refreshed records are exact at their own sample
  for (int n = 0; n < s.modes; ++n) {
    const auto& r = s.record(n, 0);
    EXPECT_EQ(r.lambda0, s.exact(n, 0));
    EXPECT_EQ(r.k0, (std::vector<double>{0.0, 0.0}));
  }
}

TEST_F(FixtureTables, JsonRoundTrip) {
  const auto t = generate_sensitivity_tables(*grid_, {{7, *worst_}, {0, std::vector<double>(3, 0.0)}}, 3, 0.1);
  const std::string hash = case_hash(*grid_);
  const SensitivityTable back = table_from_json(nlohmann::json::parse(table_to_json(t, hash).dump()), hash);
  EXPECT_EQ(back.samples, 3);
  EXPECT_EQ(back.total_records(), t.total_records());
  const std::vector<double> k{4.0, 11.0};
  for (int n = 0; n < 5; ++n) EXPECT_EQ(back.estimate(7, n, k), t.estimate(7, n, k));
  EXPECT_THROW(table_from_json(table_to_json(t, hash), "other"), ModelError);
}

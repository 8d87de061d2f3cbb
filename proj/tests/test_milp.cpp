#include "crda/error.hpp"
#include "crda/milp.hpp"

#include <Highs.h>
#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace crda::milp;

namespace {

std::string golden(const std::string& name) {
  std::ifstream in(std::string(CRDA_GOLDEN_DIR) + "/" + name);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Model knapsack() {
  Model m("knapsack");
  const double v[] = {6, 10, 12}, w[] = {1, 2, 3};
  LinearExpr value, weight;
  for (int i = 0; i < 3; ++i) {
    const VarId x = m.add_binary("x" + std::to_string(i + 1));
    value.add(x, v[i]);
    weight.add(x, w[i]);
  }
  m.add_constraint("capacity", weight, Sense::LessEqual, 5);
  m.set_objective(value, ObjectiveSense::Maximize);
  return m;
}

double enumerate_knapsack() {
  const double v[] = {6, 10, 12}, w[] = {1, 2, 3};
  double best = 0.0;
  for (int mask = 0; mask < 8; ++mask) {
    double tv = 0, tw = 0;
    for (int i = 0; i < 3; ++i) {
      if (mask >> i & 1) {
        tv += v[i];
        tw += w[i];
      }
    }
    if (tw <= 5) best = std::max(best, tv);
  }
  return best;
}

}  // namespace

TEST(Milp, EmptyModel) {
  Model m;
  auto backend = make_backend();
  const Solution s = solve(m, *backend);
  EXPECT_EQ(s.status, Status::Optimal);
  EXPECT_DOUBLE_EQ(s.objective, 0.0);
}

TEST(Milp, SingleContinuous) {
  Model m;
  const VarId x = m.add_continuous("x", 0.0, 1.0);
  m.set_objective(LinearExpr(x, -1.0));
  auto backend = make_backend();
  const Solution s = solve(m, *backend);
  ASSERT_EQ(s.status, Status::Optimal);
  EXPECT_NEAR(s.value(x), 1.0, 1e-9);
  EXPECT_NEAR(s.objective, -1.0, 1e-9);
}

TEST(Milp, KnapsackMatchesEnumeration) {
  ASSERT_EQ(enumerate_knapsack(), 22.0);
  auto backend = make_backend();
  const Model m = knapsack();
  const Solution s = solve(m, *backend);
  ASSERT_EQ(s.status, Status::Optimal);
  EXPECT_NEAR(s.objective * m.objective_scale(), 22.0, 1e-9);
  EXPECT_NEAR(s.values[0], 0.0, 1e-9);
  EXPECT_NEAR(s.values[1], 1.0, 1e-9);
  EXPECT_NEAR(s.values[2], 1.0, 1e-9);
}

TEST(Milp, Infeasible) {
  Model m;
  const VarId x = m.add_continuous("x", -10.0, 10.0);
  m.add_constraint("lo", LinearExpr(x), Sense::GreaterEqual, 1.0);
  m.add_constraint("hi", LinearExpr(x), Sense::LessEqual, 0.0);
  auto backend = make_backend();
  EXPECT_EQ(solve(m, *backend).status, Status::Infeasible);
}

TEST(Milp, BuilderErrors) {
  Model m;
  const VarId x = m.add_continuous("x");
  EXPECT_THROW(m.add_continuous("x"), crda::ModelError);
  EXPECT_THROW(m.add_constraint("c", LinearExpr(x, std::nan("")), Sense::LessEqual, 1.0), crda::ModelError);
  m.add_constraint("c", LinearExpr(x), Sense::LessEqual, 1.0);
  EXPECT_THROW(m.add_constraint("c", LinearExpr(x), Sense::LessEqual, 2.0), crda::ModelError);
  EXPECT_THROW(m.add_constraint("d", LinearExpr(VarId{7}), Sense::LessEqual, 2.0), crda::ModelError);
}

TEST(Milp, ConstantsMoveToRhs) {
  Model m;
  const VarId x = m.add_continuous("x", 0.0, 10.0);
  m.add_constraint("c", LinearExpr(x) + LinearExpr(3.0), Sense::LessEqual, 5.0);
  EXPECT_DOUBLE_EQ(m.constraints()[0].rhs, 2.0);
  m.set_objective(LinearExpr(x, -1.0));
  auto backend = make_backend();
  EXPECT_NEAR(solve(m, *backend).value(x), 2.0, 1e-9);
}

TEST(Milp, VerifierCatchesViolations) {
  const Model m = knapsack();
  EXPECT_TRUE(verify_solution(m, {1, 1, 0}).empty());
  EXPECT_FALSE(verify_solution(m, {1, 1, 1}).empty());
  EXPECT_FALSE(verify_solution(m, {0.5, 0, 0}).empty());
  EXPECT_FALSE(verify_solution(m, {2, 0, 0}).empty());
}

TEST(Milp, UnknownBackend) {
  EXPECT_THROW(make_backend("nonexistent"), crda::BackendError);
  const auto names = available_backends();
  EXPECT_NE(std::find(names.begin(), names.end(), "highs"), names.end());
}

TEST(LpExport, SingleVariableGolden) {
  Model m("one");
  const VarId x = m.add_continuous("x", 0.0, 1.0);
  m.set_objective(LinearExpr(x, -1.0));
  EXPECT_EQ(export_lp(m), golden("one_var.lp"));
}

TEST(LpExport, KnapsackGolden) { EXPECT_EQ(export_lp(knapsack()), golden("knapsack.lp")); }

TEST(LpExport, Deterministic) { EXPECT_EQ(export_lp(knapsack()), export_lp(knapsack())); }

TEST(LpExport, SanitizesNames) {
  EXPECT_EQ(sanitize_name("bus 9"), "bus_9");
  EXPECT_EQ(sanitize_name("9a"), "_9a");
  EXPECT_EQ(sanitize_name("e12"), "_e12");
  Model m;
  const VarId a = m.add_continuous("a b", 0.0, 1.0);
  const VarId b = m.add_continuous("a_b", 0.0, 1.0);
  m.set_objective(LinearExpr(a) + LinearExpr(b));
  const std::string text = export_lp(m);
  EXPECT_NE(text.find("a_b~2"), std::string::npos) << text;
  EXPECT_EQ(text, export_lp(m));
}

TEST(LpExport, RoundTripThroughSolverReader) {
  const std::string path = (std::filesystem::temp_directory_path() / "crda_knapsack_roundtrip.lp").string();
  {
    std::ofstream out(path);
    out << export_lp(knapsack());
  }
  Highs h;
  h.setOptionValue("output_flag", false);
  ASSERT_EQ(h.readModel(path), HighsStatus::kOk);
  ASSERT_EQ(h.run(), HighsStatus::kOk);
  // Exported in minimisation form: -22.
  EXPECT_NEAR(h.getInfo().objective_function_value, -22.0, 1e-9);
  EXPECT_EQ(h.getNumCol(), 3);
  EXPECT_EQ(h.getNumRow(), 1);
  std::remove(path.c_str());
}

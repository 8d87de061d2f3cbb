#include "crda/error.hpp"
#include "crda/grid_model.hpp"
#include "crda/spectral.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

using namespace crda;
using crda::testing::fixture;
using crda::testing::toy_grid;

namespace {

nlohmann::json two_bus() {
  nlohmann::json doc;
  doc["buses"] = {1, 2};
  doc["generators"] = {{{"bus", 1}, {"inertia", 1.0}, {"damping", 1.0}, {"kp", 1.0}, {"ki", 1.0}}};
  doc["loads"] = {{{"bus", 2}, {"damping", 1.0}}};
  doc["lines"] = {{{"from", 1}, {"to", 2}, {"reactance", 0.5}}};
  return doc;
}

std::string error_of(const nlohmann::json& doc) {
  try {
    parse_case(doc);
  } catch (const CaseError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(GridModel, FixtureBusCounts) {
  const GridCase g = load_case(fixture("ieee39.json"));
  EXPECT_EQ(g.num_generators(), 10u);
  EXPECT_EQ(g.num_loads(), 29u);
  EXPECT_EQ(g.state_dim(), 49u);
  EXPECT_EQ(g.num_compromised(), 6u);
  EXPECT_EQ(g.num_scenarios(), 64u);
}

TEST(GridModel, RejectsZeroLoadDamping) {
  auto doc = toy_grid();
  doc["loads"][0]["damping"] = 0.0;
  EXPECT_NE(error_of(doc).find("damping must be positive"), std::string::npos);
  EXPECT_NE(error_of(doc).find("/loads/0/damping"), std::string::npos);
}

TEST(GridModel, RejectsUndeclaredLineEndpoint) {
  auto doc = toy_grid();
  doc["lines"].push_back({{"from", 3}, {"to", 99}, {"reactance", 0.1}});
  const std::string msg = error_of(doc);
  EXPECT_NE(msg.find("unknown bus 99"), std::string::npos) << msg;
  EXPECT_NE(msg.find("/lines/5/to"), std::string::npos) << msg;
}

TEST(GridModel, RejectsBadReferences) {
  auto doc = toy_grid();
  doc["attack"]["buses"] = {{{"bus", 1}, {"sensor", 2}}};
  EXPECT_NE(error_of(doc).find("not a load bus"), std::string::npos);
  doc = toy_grid();
  doc["ibr"]["units"][0]["sensor"] = 3;
  EXPECT_NE(error_of(doc).find("not a generator bus"), std::string::npos);
  doc = toy_grid();
  doc["lines"][0]["reactance"] = 0.0;
  EXPECT_NE(error_of(doc).find("zero reactance"), std::string::npos);
  doc = toy_grid();
  doc["generators"][0]["inertia"] = -1.0;
  EXPECT_NE(error_of(doc).find("inertia must be positive"), std::string::npos);
}

TEST(GridModel, RejectsDisconnectedNetwork) {
  auto doc = toy_grid();
  doc["lines"] = {{{"from", 1}, {"to", 3}, {"reactance", 0.1}}, {{"from", 2}, {"to", 4}, {"reactance", 0.1}},
                  {{"from", 4}, {"to", 5}, {"reactance", 0.1}}};
  EXPECT_FALSE(error_of(doc).empty());
}

TEST(GridModel, TwoBusLaplacian) {
  const GridCase g = parse_case(two_bus());
  const AdmittanceBlocks h = build_admittance_blocks(g);
  Eigen::Matrix2d expected;
  expected << 2, -2, -2, 2;
  EXPECT_TRUE(h.full.isApprox(expected, 1e-12));
  EXPECT_DOUBLE_EQ(h.gg(0, 0), 2.0);
  EXPECT_DOUBLE_EQ(h.gl(0, 0), -2.0);
  EXPECT_DOUBLE_EQ(h.ll(0, 0), 2.0);
}

TEST(GridModel, ParallelLinesAdd) {
  auto doc = two_bus();
  doc["lines"].push_back({{"from", 2}, {"to", 1}, {"reactance", 0.25}});
  const AdmittanceBlocks h = build_admittance_blocks(parse_case(doc));
  EXPECT_NEAR(h.full(0, 0), 6.0, 1e-12);
  EXPECT_NEAR(h.full(0, 1), -6.0, 1e-12);
}

TEST(GridModel, FixtureLaplacianSymmetricZeroRowSums) {
  const GridCase g = load_case(fixture("ieee39.json"));
  const AdmittanceBlocks h = build_admittance_blocks(g);
  ASSERT_EQ(h.full.rows(), 39);
  EXPECT_LE((h.full - h.full.transpose()).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LE(h.full.rowwise().sum().cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_TRUE(h.gl.isApprox(h.lg.transpose()));
}

TEST(GridModel, NominalMatrixShapeAndStability) {
  const GridCase g = load_case(fixture("ieee39.json"));
  const SystemMatrix s = assemble_system_matrix(g, GainMap{}, GainMap{});
  ASSERT_EQ(s.state.rows(), 49);
  ASSERT_EQ(s.state.cols(), 49);
  // delta rows: [0 0 I]
  const int ng = 10, nl = 29;
  EXPECT_TRUE(s.state.block(0, 0, ng, ng + nl).isZero());
  EXPECT_TRUE(s.state.block(0, ng + nl, ng, ng).isIdentity());
  EXPECT_LT(spectral_abscissa(s.state), 0.0);
}

TEST(GridModel, DroopGainChangesOneEntry) {
  const GridCase g = load_case(fixture("ieee39.json"));
  const double delta = 2.5;
  const SystemMatrix a = assemble_system_matrix(g, GainMap{}, GainMap{});
  const SystemMatrix b = assemble_system_matrix(g, GainMap{}, GainMap{{8, delta}});
  const Eigen::MatrixXd diff = b.state - a.state;
  const int row = g.theta_row(8), col = g.omega_row(39);
  const double dl = g.loads[static_cast<std::size_t>(g.load_index(8))].damping;
  EXPECT_NEAR(diff(row, col), -delta / dl, 1e-12);
  EXPECT_EQ((diff.array().abs() > 1e-15).count(), 1);
}

TEST(GridModel, AttackGainEntrySign) {
  const GridCase g = load_case(fixture("ieee39.json"));
  const SystemMatrix a = assemble_system_matrix(g, GainMap{}, GainMap{});
  const SystemMatrix b = assemble_system_matrix(g, GainMap{{9, 3.0}}, GainMap{});
  const GainEntry e = attack_gain_entry(g, 1);
  EXPECT_EQ(e.row, g.theta_row(9));
  EXPECT_EQ(e.col, g.omega_row(39));
  EXPECT_NEAR((b.state - a.state)(e.row, e.col), 3.0 * e.derivative, 1e-12);
  EXPECT_GT(e.derivative, 0.0);
}

TEST(GridModel, LinearityOnDisjointBuses) {
  const GridCase g = load_case(fixture("ieee39.json"));
  const SystemMatrix b0 = assemble_system_matrix(g, GainMap{}, GainMap{});
  const SystemMatrix b1 = assemble_system_matrix(g, GainMap{{1, 4.0}}, GainMap{{8, 3.0}});
  const SystemMatrix b2 = assemble_system_matrix(g, GainMap{{20, 2.0}}, GainMap{{29, 7.0}});
  const SystemMatrix b12 = assemble_system_matrix(g, GainMap{{1, 4.0}, {20, 2.0}}, GainMap{{8, 3.0}, {29, 7.0}});
  EXPECT_LE((b12.state - (b1.state + b2.state - b0.state)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(GridModel, NominalIndependentOfAttackAndIbrConfig) {
  auto doc = toy_grid();
  const GridCase a = parse_case(doc);
  doc["attack"]["buses"] = {{{"bus", 3}, {"sensor", 2}, {"gain_bound", 5.0}}};
  doc["ibr"]["units"][0]["gain_max"] = 3.0;
  doc["crews"]["crews"] = {{{"repair_times", {1.0}}, {"travel_times", {{0, 1, 1}, {1, 0, 1}, {1, 1, 0}}}}};
  doc["planner"]["weights"] = {0.01};
  const GridCase b = parse_case(doc);
  EXPECT_TRUE(assemble_system_matrix(a, GainMap{}, GainMap{}).state.isApprox(assemble_system_matrix(b, GainMap{}, GainMap{}).state));
}

TEST(GridModel, ForcingVector) {
  const GridCase g = parse_case(toy_grid());
  const SystemMatrix s = assemble_system_matrix(g, GainMap{}, GainMap{});
  // load block = (p_ref - p_LS) / D_L, other blocks zero; toy IBR has p_ref 0
  EXPECT_DOUBLE_EQ(s.forcing(0), 0.0);
  EXPECT_DOUBLE_EQ(s.forcing(2), -1.0);
  EXPECT_DOUBLE_EQ(s.forcing(3), -0.8);
  EXPECT_DOUBLE_EQ(s.forcing(4), -0.6);
  EXPECT_DOUBLE_EQ(s.forcing(5), 0.0);
}

TEST(GridModel, RejectsGainOutsideRangeOrBus) {
  const GridCase g = load_case(fixture("ieee39.json"));
  EXPECT_THROW(assemble_system_matrix(g, GainMap{{2, 1.0}}, GainMap{}), ModelError);
  EXPECT_THROW(assemble_system_matrix(g, GainMap{}, GainMap{{9, 1.0}}), ModelError);
  EXPECT_THROW(assemble_system_matrix(g, GainMap{{1, 11.5}}, GainMap{}), ModelError);
  EXPECT_THROW(assemble_system_matrix(g, GainMap{}, GainMap{{8, 15.5}}), ModelError);
}

TEST(GridModel, AttackBoundFormulaAndOverride) {
  auto doc = toy_grid();
  doc["loads"][0]["max_vulnerable_load"] = 0.84;
  doc["loads"][2]["max_vulnerable_load"] = 0.0;
  doc["attack"] = {{"omega_max", 2.0 / 50.0},
                   {"buses", {{{"bus", 3}, {"sensor", 1}}, {{"bus", 4}, {"sensor", 2}, {"gain_bound", 9.0}}, {{"bus", 5}, {"sensor", 1}}}}};
  doc["planner"]["weights"] = {0.01, 0.01, 0.01};
  const GainMap b = attack_gain_bounds(parse_case(doc));
  EXPECT_NEAR(b.at(3), 10.5, 1e-12);
  EXPECT_DOUBLE_EQ(b.at(4), 9.0);
  EXPECT_DOUBLE_EQ(b.at(5), 0.0);
}

TEST(GridModel, FixtureBoundsVerbatim) {
  const GridCase g = load_case(fixture("ieee39.json"));
  const std::vector<double> expected{11, 9, 14, 10, 12, 9};
  EXPECT_EQ(attack_gain_bound_vector(g), expected);
  const auto r = droop_gain_bounds(g);
  for (BusId bus : {8, 29}) {
    EXPECT_DOUBLE_EQ(r.at(bus).lower, 0.0);
    EXPECT_DOUBLE_EQ(r.at(bus).upper, 15.0);
  }
}

TEST(GridModel, DroopBoundFormula) {
  auto doc = toy_grid();
  doc["ibr"]["units"] = {{{"bus", 4}, {"sensor", 1}, {"p_ref", 1.0}, {"p_max", 1.6}},
                         {{"bus", 5}, {"sensor", 2}, {"p_ref", 0.7}, {"p_max", 0.7}}};
  const auto r = droop_gain_bounds(parse_case(doc));
  EXPECT_NEAR(r.at(4).upper, 15.0, 1e-12);
  EXPECT_DOUBLE_EQ(r.at(5).upper, 0.0);

  doc["ibr"]["units"] = {{{"bus", 4}, {"sensor", 1}, {"gain_min", 5.0}, {"gain_max", 2.0}}};
  EXPECT_NE(error_of(doc).find("inverted"), std::string::npos);
}

TEST(GridModel, CaseHashStable) {
  const GridCase a = load_case(fixture("mini3.json"));
  const GridCase b = load_case(fixture("mini3.json"));
  EXPECT_EQ(case_hash(a), case_hash(b));
  EXPECT_EQ(case_hash(a).size(), 64u);
  EXPECT_NE(case_hash(a), case_hash(load_case(fixture("ieee39.json"))));
}

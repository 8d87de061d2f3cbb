#include "crda/grid_model.hpp"
#include "crda/spectral.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace crda;
using crda::testing::fixture;

TEST(Spectral, DiagonalMatrix) {
  Eigen::Matrix2d m;
  m << -1, 0, 0, -2;
  const auto pairs = eigen_pairs(m);
  ASSERT_EQ(pairs.size(), 2u);
  EXPECT_NEAR(pairs[0].value.real(), -1.0, 1e-14);
  EXPECT_NEAR(pairs[1].value.real(), -2.0, 1e-14);
  EXPECT_NEAR(std::abs(pairs[0].right(0)), 1.0, 1e-14);
  EXPECT_NEAR(std::abs(pairs[1].right(1)), 1.0, 1e-14);
}

TEST(Spectral, RotationHasImaginaryPair) {
  Eigen::Matrix2d m;
  m << 0, 1, -1, 0;
  const auto pairs = eigen_pairs(m);
  EXPECT_NEAR(pairs[0].value.real(), 0.0, 1e-14);
  EXPECT_NEAR(pairs[0].value.imag(), 1.0, 1e-14);
  EXPECT_NEAR(pairs[1].value.imag(), -1.0, 1e-14);
}

TEST(Spectral, FixtureResidualsAndNormalisation) {
  const GridCase g = load_case(fixture("ieee39.json"));
  const Eigen::MatrixXd b = assemble_system_matrix(g, attack_gain_bound_vector(g), {5.0, 5.0}).state;
  const auto pairs = eigen_pairs(b);
  ASSERT_EQ(pairs.size(), 49u);
  const double norm = b.norm();
  for (const auto& p : pairs) {
    EXPECT_LE((b * p.right - p.value * p.right).norm(), 1e-8 * norm) << p.index;
    EXPECT_LE((p.left.transpose() * b - p.value * p.left.transpose()).norm(), 1e-8 * norm * p.left.norm()) << p.index;
    EXPECT_NEAR(std::abs((p.left.transpose() * p.right)(0) - Complex(1.0, 0.0)), 0.0, 1e-10);
  }
}

TEST(Spectral, CanonicalOrderAndConjugateClosure) {
  const GridCase g = load_case(fixture("ieee39.json"));
  const auto pairs = eigen_pairs(assemble_system_matrix(g, GainMap{}, GainMap{}).state);
  for (std::size_t i = 1; i < pairs.size(); ++i) {
    const Complex a = pairs[i - 1].value, b = pairs[i].value;
    EXPECT_TRUE(a.real() > b.real() || (a.real() == b.real() && a.imag() >= b.imag()));
  }
  for (const auto& p : pairs) {
    double best = 1e300;
    for (const auto& q : pairs) best = std::min(best, std::abs(std::conj(p.value) - q.value));
    EXPECT_LT(best, 1e-9);
  }
}

TEST(Spectral, SensitivityOfZeroAndIdentity) {
  const GridCase g = load_case(fixture("mini3.json"));
  const Eigen::MatrixXd b = assemble_system_matrix(g, GainMap{}, GainMap{}).state;
  const auto pairs = eigen_pairs(b);
  const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(b.rows(), b.cols());
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(b.rows(), b.cols());
  for (const auto& p : pairs) {
    if (p.degenerate) continue;
    EXPECT_NEAR(std::abs(*eigen_sensitivity(p, zero)), 0.0, 1e-14);
    EXPECT_NEAR(std::abs(*eigen_sensitivity(p, eye) - Complex(1.0, 0.0)), 0.0, 1e-9);
  }
}

TEST(Spectral, SensitivityMatchesCentralDifference) {
  const GridCase g = load_case(fixture("ieee39.json"));
  const Eigen::MatrixXd b = assemble_system_matrix(g, attack_gain_bound_vector(g), {0.0, 0.0}).state;
  const GainEntry e = droop_gain_entry(g, 0);
  Eigen::MatrixXd db = Eigen::MatrixXd::Zero(b.rows(), b.cols());
  db(e.row, e.col) = e.derivative;
  for (const auto& p : eigen_pairs(b)) {
    if (p.degenerate) continue;
    const Complex analytic = *eigen_sensitivity(p, e.row, e.col, e.derivative);
    const Complex fd = finite_difference_sensitivity(b, db, p.value, 1e-5);
    EXPECT_LE(std::abs(analytic - fd), 1e-5 * std::max(std::abs(fd), 1e-2)) << "mode " << p.index;
  }
}

TEST(Spectral, NormalisationInvariance) {
  const GridCase g = load_case(fixture("mini3.json"));
  const Eigen::MatrixXd b = assemble_system_matrix(g, GainMap{}, GainMap{}).state;
  const GainEntry e = droop_gain_entry(g, 1);
  EigenPair p = eigen_pairs(b)[0];
  const Complex before = *eigen_sensitivity(p, e.row, e.col, e.derivative);
  const Complex c(2.0, -3.0);
  p.right *= c;
  p.left /= c;
  EXPECT_NEAR(std::abs(*eigen_sensitivity(p, e.row, e.col, e.derivative) - before), 0.0, 1e-12);
}

TEST(Spectral, FirstOrderEstimate) {
  SensitivityRecord r{Complex(-1.0, 0.0), {1.0, 2.0}, {Complex(0.2, 0.0), Complex(-0.1, 0.0)}};
  const std::vector<double> k{6.0, 7.0};
  EXPECT_NEAR(std::abs(first_order_estimate(r, k) - Complex(-0.5, 0.0)), 0.0, 1e-14);
  EXPECT_EQ(first_order_estimate(r, r.k0), r.lambda0);
  r.gradient = {Complex(0.0, 0.0), Complex(0.0, 0.0)};
  EXPECT_EQ(first_order_estimate(r, k), r.lambda0);
}

TEST(Spectral, MatchIdentityAndSwap) {
  Eigen::Matrix3d m;
  m << -1, 0, 0, 0, -5, 0, 0, 0, -9;
  const auto a = eigen_pairs(m);
  const auto same = match_eigenvalues(a, a);
  EXPECT_EQ(same, (std::vector<int>{0, 1, 2}));
  std::vector<EigenPair> swapped{a[1], a[0], a[2]};
  EXPECT_EQ(match_eigenvalues(a, swapped), (std::vector<int>{1, 0, 2}));
}

TEST(Spectral, MatchingContinuityOnFixtureStep) {
  const GridCase g = load_case(fixture("ieee39.json"));
  const auto attack = attack_gain_bound_vector(g);
  const auto a = eigen_pairs(assemble_system_matrix(g, attack, {5.0, 5.0}).state);
  const auto b = eigen_pairs(assemble_system_matrix(g, attack, {10.0, 5.0}).state);
  const auto perm = match_eigenvalues(a, b);
  std::vector<int> seen(perm.size(), 0);
  for (int p : perm) seen[static_cast<std::size_t>(p)]++;
  for (int s : seen) EXPECT_EQ(s, 1);
  // Each matched partner is no farther than any eigenvalue left over for it
  // once the closer modes have taken theirs; in practice the nearest one.
  double max_matched = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = std::abs(a[i].value - b[static_cast<std::size_t>(perm[i])].value);
    max_matched = std::max(max_matched, d);
    for (std::size_t j = 0; j < b.size(); ++j) {
      if (static_cast<int>(j) == perm[i]) continue;
      EXPECT_LE(d, std::abs(a[i].value - b[j].value) + 1e-9) << "mode " << i;
    }
  }
  EXPECT_LT(max_matched, 5.0);
}

TEST(Spectral, DegenerateFallsBackToFiniteDifference) {
  // Jordan block: defective double eigenvalue.
  Eigen::Matrix2d m;
  m << -1, 1, 0, -1;
  const auto pairs = eigen_pairs(m);
  EXPECT_TRUE(pairs[0].degenerate || pairs[1].degenerate);
  for (const auto& p : pairs) {
    if (p.degenerate) EXPECT_FALSE(eigen_sensitivity(p, 0, 0, 1.0).has_value());
  }
  Eigen::Matrix2d d = Eigen::Matrix2d::Identity();
  EXPECT_NEAR(std::abs(finite_difference_sensitivity(m, d, Complex(-1.0, 0.0)) - Complex(1.0, 0.0)), 0.0, 1e-6);
}

TEST(Spectral, RandomGainPointsSensitivity) {
  const GridCase g = load_case(fixture("ieee39.json"));
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto bounds = attack_gain_bound_vector(g);
  for (int trial = 0; trial < 3; ++trial) {
    std::vector<double> attack;
    for (double b : bounds) attack.push_back(b * unit(rng));
    const std::vector<double> droop{15.0 * unit(rng), 15.0 * unit(rng)};
    const Eigen::MatrixXd b = assemble_system_matrix(g, attack, droop).state;
    const GainEntry e = droop_gain_entry(g, 1);
    Eigen::MatrixXd db = Eigen::MatrixXd::Zero(b.rows(), b.cols());
    db(e.row, e.col) = e.derivative;
    const auto pairs = eigen_pairs(b);
    const Complex analytic = robust_sensitivity(b, pairs[0], e.row, e.col, e.derivative);
    const Complex fd = finite_difference_sensitivity(b, db, pairs[0].value);
    EXPECT_LE(std::abs(analytic - fd), 1e-5 * std::max(std::abs(fd), 1e-2));
  }
}

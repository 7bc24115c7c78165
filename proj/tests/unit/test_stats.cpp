#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <random>

#include "graspr/error.hpp"
#include "graspr/stats.hpp"

namespace graspr {
namespace {

Eigen::MatrixXd Gaussian(int n, int p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Eigen::MatrixXd m(n, p);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < p; ++j) m(i, j) = g(rng);
  return m;
}

double TextbookPearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    syy += y[i] * y[i];
    sxy += x[i] * y[i];
  }
  return (n * sxy - sx * sy) / std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy));
}

TEST(Pearson, MatchesClosedFormTailProbabilities) {
  // n = 4: two degrees of freedom, P(|T| > t) = 1 - t / sqrt(2 + t^2).
  const std::vector<double> x = {1, 2, 3, 4}, y = {1.5, 1.7, 3.9, 3.1};
  const Correlation c = Pearson(x, y);
  EXPECT_NEAR(c.r, TextbookPearson(x, y), 1e-14);
  const double t = c.r * std::sqrt(2.0 / (1.0 - c.r * c.r));
  EXPECT_NEAR(c.p, 1.0 - t / std::sqrt(2.0 + t * t), 1e-12);

  // n = 3: Cauchy tails.
  const std::vector<double> x3 = {0, 1, 2}, y3 = {0.2, 0.1, 1.4};
  const Correlation c3 = Pearson(x3, y3);
  const double t3 = std::abs(c3.r) * std::sqrt(1.0 / (1.0 - c3.r * c3.r));
  EXPECT_NEAR(c3.p, 1.0 - 2.0 / std::numbers::pi * std::atan(t3), 1e-12);
}

TEST(Pearson, EdgeCases) {
  const std::vector<double> x = {1, 2, 3, 4}, flat = {2, 2, 2, 2}, line = {3, 5, 7, 9};
  EXPECT_THROW(Pearson(x, flat), Error);
  const Correlation perfect = Pearson(x, line);
  EXPECT_DOUBLE_EQ(perfect.r, 1.0);
  EXPECT_EQ(perfect.p, 0.0);
  const std::vector<double> two = {1, 2};
  EXPECT_THROW(Pearson(two, two), Error);
}

TEST(PointBiserial, EqualsPearsonAndGroupMeanFormula) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  std::vector<double> f(80), y(80);
  for (int i = 0; i < 80; ++i) {
    y[i] = i % 3 == 0;
    f[i] = g(rng) + 0.8 * y[i];
  }
  const Correlation pb = PointBiserial(f, y);
  const Correlation pr = Pearson(f, y);
  EXPECT_NEAR(pb.r, pr.r, 1e-14);
  EXPECT_NEAR(pb.p, pr.p, 1e-14);

  double m1 = 0, m0 = 0, n1 = 0, mean = 0, var = 0;
  for (int i = 0; i < 80; ++i) {
    (y[i] ? m1 : m0) += f[i];
    n1 += y[i];
    mean += f[i] / 80.0;
  }
  m1 /= n1;
  m0 /= 80 - n1;
  for (double v : f) var += (v - mean) * (v - mean) / 80.0;
  const double p = n1 / 80.0;
  EXPECT_NEAR(pb.r, (m1 - m0) / std::sqrt(var) * std::sqrt(p * (1 - p)), 1e-12);

  const std::vector<double> one_class(80, 1.0);
  EXPECT_THROW(PointBiserial(f, one_class), Error);
}

TEST(AverageRanks, TiesShareMeanRank) {
  const std::vector<double> v = {10, 20, 10, 5, 20, 20};
  const std::vector<double> expected = {2.5, 5, 2.5, 1, 5, 5};
  EXPECT_EQ(AverageRanks(v), expected);
}

TEST(Spearman, MonotoneTransformIsPerfect) {
  const Eigen::MatrixXd base = Gaussian(50, 1, 4);
  Eigen::MatrixXd x(50, 3);
  x.col(0) = base.col(0);
  x.col(1) = base.col(0).array().cube();
  x.col(2) = -base.col(0).array().exp();
  const SpearmanMatrix s = Spearman(x);
  EXPECT_NEAR(s.rho(0, 1), 1.0, 1e-15);
  EXPECT_NEAR(s.rho(0, 2), -1.0, 1e-15);
  EXPECT_EQ(s.p(0, 1), 0.0);
  EXPECT_TRUE(s.constant_columns.empty());
}

TEST(Spearman, MatchesRankDifferenceFormula) {
  const Eigen::MatrixXd x = Gaussian(40, 4, 5);
  const SpearmanMatrix s = Spearman(x);
  const int n = 40;
  for (int a = 0; a < 4; ++a) {
    for (int b = 0; b < 4; ++b) {
      // Continuous data: no ties, so rho = 1 - 6 sum d^2 / (n (n^2 - 1)).
      std::vector<int> ra(n), rb(n);
      for (int i = 0; i < n; ++i) {
        ra[i] = rb[i] = 1;
        for (int k = 0; k < n; ++k) {
          ra[i] += x(k, a) < x(i, a);
          rb[i] += x(k, b) < x(i, b);
        }
      }
      double d2 = 0;
      for (int i = 0; i < n; ++i) d2 += double(ra[i] - rb[i]) * (ra[i] - rb[i]);
      EXPECT_NEAR(s.rho(a, b), 1.0 - 6.0 * d2 / (n * (double(n) * n - 1)), 1e-12);
      EXPECT_NEAR(s.rho(a, b), s.rho(b, a), 0.0);
    }
  }
}

TEST(Spearman, ConstantColumnsAreNaN) {
  Eigen::MatrixXd x = Gaussian(10, 3, 6);
  x.col(1).setConstant(4.0);
  const SpearmanMatrix s = Spearman(x);
  EXPECT_EQ(s.constant_columns, std::vector<int>{1});
  EXPECT_TRUE(std::isnan(s.rho(0, 1)));
  EXPECT_TRUE(std::isnan(s.rho(1, 2)));
  EXPECT_FALSE(std::isnan(s.rho(0, 2)));
}

TEST(Vif, OrthogonalDesignGivesOne) {
  // Columns 1..7 of the order-8 Sylvester-Hadamard matrix: centered and orthogonal.
  Eigen::MatrixXd h(8, 7);
  for (int i = 0; i < 8; ++i)
    for (int j = 1; j < 8; ++j) h(i, j - 1) = __builtin_popcount(i & j) % 2 ? -1.0 : 1.0;
  Eigen::MatrixXd x(16, 7);
  x << h, h;
  // Per-column affine changes do not alter VIF.
  for (int j = 0; j < 7; ++j) x.col(j) = x.col(j) * (j + 1.5) + Eigen::VectorXd::Constant(16, 3.0 * j);
  const VifResult v = Vif(x);
  for (int j = 0; j < 7; ++j) EXPECT_NEAR(v.vif[j], 1.0, 1e-9);
  EXPECT_TRUE(v.collinear.empty());
}

TEST(Vif, MatchesInverseCorrelationDiagonal) {
  // AR(1)-style correlated columns.
  const int n = 300, p = 5;
  Eigen::MatrixXd x = Gaussian(n, p, 7);
  for (int j = 1; j < p; ++j) x.col(j) = 0.8 * x.col(j - 1) + 0.6 * x.col(j);
  Eigen::MatrixXd c = x.rowwise() - x.colwise().mean();
  const Eigen::VectorXd sd = (c.colwise().squaredNorm().array() / n).sqrt();
  c = c.array().rowwise() / sd.transpose().array();
  const Eigen::MatrixXd r = c.transpose() * c / n;
  const Eigen::MatrixXd rinv = r.inverse();
  const VifResult v = Vif(x);
  for (int j = 0; j < p; ++j) EXPECT_NEAR(v.vif[j], rinv(j, j), 1e-9 * rinv(j, j));
  EXPECT_GT(v.vif[2], 1.5);
}

TEST(Vif, ExactCollinearityIsInfinite) {
  Eigen::MatrixXd x = Gaussian(30, 3, 8);
  x.col(2) = 2.0 * x.col(0) - x.col(1);
  const VifResult v = Vif(x);
  for (int j = 0; j < 3; ++j) EXPECT_TRUE(std::isinf(v.vif[j]));
  EXPECT_EQ(v.collinear.size(), 3u);
  EXPECT_THROW(Vif(Gaussian(3, 3, 9)), Error);
}

TEST(SelectFeatures, RecordsEachStage) {
  const int n = 400;
  const Eigen::MatrixXd g = Gaussian(n, 4, 10);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u;
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) y[i] = u(rng) < 1.0 / (1.0 + std::exp(-(2.0 * g(i, 0) - 1.0 * g(i, 3))));
  Eigen::MatrixXd x(n, 5);
  x.col(0) = g.col(0);                         // strong
  x.col(1) = g.col(1);                         // noise
  x.col(2) = g.col(0) + 0.05 * g.col(2);       // near copy of 0
  x.col(3).setConstant(1.0);                   // constant
  x.col(4) = g.col(3);                         // moderate
  const std::vector<std::string> names = {"target_x", "target_y", "target_z", "cage_ratio", "reach_volume"};
  const SelectionReport rep = SelectFeatures(x, y, names);

  std::map<std::string, std::string> stage;
  for (const SelectionStep& s : rep.dropped) stage[s.feature] = s.stage;
  EXPECT_EQ(stage["target_y"], "point_biserial");
  EXPECT_EQ(stage["cage_ratio"], "point_biserial");
  EXPECT_EQ(stage.count("target_x") + stage.count("target_z"), 1u);
  EXPECT_EQ(stage[stage.count("target_x") ? "target_x" : "target_z"], "spearman");
  // The survivor of the correlated pair has the smaller point-biserial p.
  const int survivor = stage.count("target_x") ? 2 : 0;
  EXPECT_LE(rep.point_biserial[survivor].p, rep.point_biserial[2 - survivor].p);
  EXPECT_EQ(rep.vif_features.size(), 2u);
  EXPECT_EQ(rep.kept.size(), 2u);
  EXPECT_EQ(rep.point_biserial.size(), 5u);
  EXPECT_TRUE(std::isnan(rep.point_biserial[3].r));
}

TEST(PreferenceRatios, CountsWinsAndAppearances) {
  const std::vector<TargetPoint> targets = {{"s/index/on_object", "s", Finger::kIndex, Stratum::kOnObject},
                                            {"s/index/in_air", "s", Finger::kIndex, Stratum::kInAir},
                                            {"s/thumb/on_hand", "s", Finger::kThumb, Stratum::kOnHand}};
  std::vector<ChoiceRecord> choices = {
      {"p1", "s", "s/index/on_object", "s/index/in_air", true, "a", "2025-01-01T00:00:00Z"},
      {"p2", "s", "s/index/on_object", "s/thumb/on_hand", false, "a", "2025-01-01T00:00:01Z"},
      {"p3", "s", "s/index/in_air", "s/thumb/on_hand", false, "b", "2025-01-01T00:00:02Z"},
  };
  const PreferenceRatioReport r = PreferenceRatios(choices, targets);
  ASSERT_EQ(r.cells.size(), 20u);
  EXPECT_EQ(r.cells.front().finger, Finger::kThumb);
  EXPECT_EQ(r.cells[1].stratum, Stratum::kOnHand);
  const PreferenceCell& obj = r.at(Finger::kIndex, Stratum::kOnObject);
  EXPECT_EQ(obj.wins, 1);
  EXPECT_EQ(obj.appearances, 2);
  EXPECT_DOUBLE_EQ(obj.ratio(), 0.5);
  EXPECT_DOUBLE_EQ(r.at(Finger::kThumb, Stratum::kOnHand).ratio(), 1.0);
  EXPECT_DOUBLE_EQ(r.at(Finger::kIndex, Stratum::kInAir).ratio(), 0.0);
  EXPECT_TRUE(std::isnan(r.at(Finger::kLittle, Stratum::kInAirMid).ratio()));

  choices.push_back({"p4", "s", "s/ring/in_air", "s/index/in_air", true, "a", "2025-01-01T00:00:03Z"});
  try {
    PreferenceRatios(choices, targets);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDanglingReference);
  }
}

}  // namespace
}  // namespace graspr

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "graspr/emg.hpp"
#include "graspr/error.hpp"

namespace graspr {
namespace {

Mlp RandomWithBiases(std::vector<int> sizes, std::uint64_t seed) {
  Mlp net = Mlp::Random(std::move(sizes), seed);
  std::mt19937_64 rng(seed + 1);
  std::normal_distribution<double> g(0.0, 0.1);
  for (int l = 0; l < net.layer_count(); ++l)
    for (Eigen::Index i = 0; i < net.biases(l).size(); ++i) net.biases(l)[i] = g(rng);
  return net;
}

Eigen::MatrixXd UniformMatrix(int rows, int cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (int c = 0; c < cols; ++c)
    for (int r = 0; r < rows; ++r) m(r, c) = u(rng);
  return m;
}

TEST(Mlp, ZeroInitializedNetworkOutputsZero) {
  const Mlp net(kEmgArchitecture);
  EXPECT_EQ(net.parameter_count(), 22 * 64 + 64 + 64 * 64 + 64 + 64 * 32 + 32 + 32 * 10 + 10);
  const Eigen::VectorXd y = net.Forward(Eigen::VectorXd(Eigen::VectorXd::Ones(kEmgInputs)));
  EXPECT_EQ(y.size(), kEmgOutputs);
  EXPECT_EQ(y.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Mlp, ForwardMatchesExplicitLoops) {
  const Mlp net = RandomWithBiases({3, 4, 5, 2}, 3);
  const Eigen::VectorXd params = net.parameters();
  const std::vector<double> x = {0.3, -0.7, 1.1};

  // Walk the flat parameter layout directly.
  std::vector<double> act = x;
  std::size_t off = 0;
  const std::vector<int> sizes = {3, 4, 5, 2};
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const int in = sizes[l], out = sizes[l + 1];
    std::vector<double> next(out);
    for (int r = 0; r < out; ++r) {
      double s = params[off + in * out + r];
      for (int c = 0; c < in; ++c) s += params[off + r * in + c] * act[c];
      next[r] = l + 2 < sizes.size() ? std::max(s, 0.0) : s;
    }
    off += in * out + out;
    act = next;
  }
  const Eigen::VectorXd y = net.Forward(Eigen::VectorXd(Eigen::Vector3d(x[0], x[1], x[2])));
  for (int i = 0; i < 2; ++i) EXPECT_NEAR(y[i], act[i], 1e-14);
}

TEST(Mlp, GradientMatchesCentralDifferences) {
  const Mlp net = RandomWithBiases({kEmgInputs, 16, 12, kEmgOutputs}, 5);
  const Eigen::MatrixXd x = UniformMatrix(kEmgInputs, 8, 6);
  const Eigen::MatrixXd y = UniformMatrix(kEmgOutputs, 8, 7);
  Eigen::VectorXd grad;
  net.Loss(x, y, &grad);

  const double eps = 1e-6;
  Mlp probe = net;
  Eigen::VectorXd fd(net.parameter_count());
  for (int i = 0; i < net.parameter_count(); ++i) {
    Eigen::VectorXd p = net.parameters();
    p[i] += eps;
    probe.set_parameters(p);
    const double up = probe.Loss(x, y);
    p[i] -= 2 * eps;
    probe.set_parameters(p);
    const double down = probe.Loss(x, y);
    fd[i] = (up - down) / (2 * eps);
  }
  EXPECT_LT((grad - fd).norm() / fd.norm(), 1e-4);
  for (int i = 0; i < net.parameter_count(); ++i) {
    EXPECT_LT(std::abs(grad[i] - fd[i]) / std::max({std::abs(grad[i]), std::abs(fd[i]), 1e-3}), 1e-4) << i;
  }
}

TEST(Mlp, BiasFreeNetworkIsPositivelyHomogeneous) {
  const Mlp net = Mlp::Random({kEmgInputs, 32, 32, kEmgOutputs}, 9);
  const Eigen::MatrixXd x = UniformMatrix(kEmgInputs, 16, 10).array() - 0.5;
  for (double c : {0.25, 2.0, 7.5}) {
    EXPECT_LT((net.Forward(Eigen::MatrixXd(c * x)) - c * net.Forward(x)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Mlp, PiecewiseAffineAlongSegments) {
  // Between kinks the output is affine in t, so second differences vanish
  // wherever the ReLU activation pattern is unchanged over three points.
  const Mlp net = RandomWithBiases({kEmgInputs, 8, kEmgOutputs}, 12);
  const Eigen::VectorXd a = UniformMatrix(kEmgInputs, 1, 13).col(0);
  const Eigen::VectorXd b = UniformMatrix(kEmgInputs, 1, 14).col(0);
  const auto pattern = [&](double t) {
    const Eigen::VectorXd h = net.weights(0) * (a + t * (b - a)) + net.biases(0);
    return (h.array() > 0.0).eval();
  };
  int affine_triples = 0;
  const int steps = 200;
  for (int k = 1; k < steps; ++k) {
    const double t0 = (k - 1.0) / steps, t1 = k / double(steps), t2 = (k + 1.0) / steps;
    if ((pattern(t0) != pattern(t1)).any() || (pattern(t1) != pattern(t2)).any()) continue;
    ++affine_triples;
    const Eigen::VectorXd second = net.Forward(Eigen::VectorXd(a + t0 * (b - a))) -
                                   2 * net.Forward(Eigen::VectorXd(a + t1 * (b - a))) +
                                   net.Forward(Eigen::VectorXd(a + t2 * (b - a)));
    EXPECT_LT(second.cwiseAbs().maxCoeff(), 1e-12);
  }
  EXPECT_GT(affine_triples, steps / 2);
}

TEST(Mlp, RejectsMismatchedBatches) {
  const Mlp net({3, 2});
  EXPECT_THROW(net.Loss(Eigen::MatrixXd::Zero(4, 2), Eigen::MatrixXd::Zero(2, 2)), Error);
  EXPECT_THROW(net.Loss(Eigen::MatrixXd::Zero(3, 2), Eigen::MatrixXd::Zero(2, 3)), Error);
}

TEST(EmgModel, MinMaxNormalizationWrapsNetwork) {
  EmgModel m = EmgModel::Wrap(RandomWithBiases({kEmgInputs, 6, kEmgOutputs}, 21));
  m.input_min = Eigen::VectorXd::Constant(kEmgInputs, -1.0);
  m.input_max = Eigen::VectorXd::Constant(kEmgInputs, 3.0);
  m.output_min = Eigen::VectorXd::LinSpaced(kEmgOutputs, 0.0, 0.9);
  m.output_max = m.output_min.array() + 2.0;
  m.Validate();
  const Eigen::VectorXd raw = UniformMatrix(kEmgInputs, 1, 22).col(0) * 4.0 - Eigen::VectorXd::Ones(kEmgInputs);
  const Eigen::VectorXd inner = m.net.Forward(Eigen::VectorXd((raw.array() + 1.0) / 4.0));
  const Eigen::VectorXd expected = m.output_min.array() + 2.0 * inner.array();
  EXPECT_LT((PredictEmg(m, raw) - expected).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_NEAR(EmgAbsSum(m, raw), expected.cwiseAbs().sum(), 1e-13);
  EXPECT_THROW(PredictEmg(m, Eigen::VectorXd(Eigen::VectorXd::Zero(3))), Error);
}

TEST(EvaluateEmg, ConstantPredictorScoresZeroR2) {
  const EmgDataset data = TeacherDataset(Mlp::Random(kEmgArchitecture, 31), 500, 32);
  Mlp net(std::vector<int>{kEmgInputs, kEmgOutputs});
  net.biases(0) = data.outputs.rowwise().mean();
  const EmgMetrics m = EvaluateEmg(EmgModel::Wrap(net), data);
  EXPECT_NEAR(m.r2, 0.0, 1e-12);

  // Perfect predictions score 1.
  const EmgMetrics perfect = EvaluateEmg(EmgModel::Wrap(Mlp::Random(kEmgArchitecture, 31)), data);
  EXPECT_NEAR(perfect.r2, 1.0, 1e-12);
  EXPECT_NEAR(perfect.mse, 0.0, 1e-24);
}

TEST(TrainEmg, LossDecreasesAndRunIsDeterministic) {
  const EmgDataset data = TeacherDataset(Mlp::Random(kEmgArchitecture, 41), 2000, 42);
  EmgTrainConfig config;
  config.epochs = 15;
  config.batch_size = 32;
  config.learning_rate = 1e-3;
  config.seed = 3;
  const EmgTrainResult a = TrainEmg(data, config);
  const EmgTrainResult b = TrainEmg(data, config);
  ASSERT_EQ(a.report.epochs_run, 15);
  EXPECT_EQ(a.report.holdout_size, 200u);
  EXPECT_EQ(a.report.train_size, 1800u);
  EXPECT_LT(a.report.epoch_loss.back(), 0.5 * a.report.epoch_loss.front());
  EXPECT_GT(a.report.epoch_r2.back(), a.report.epoch_r2.front());
  EXPECT_EQ(a.model.net.parameters(), b.model.net.parameters());
  EXPECT_EQ(a.report.holdout.r2, b.report.holdout.r2);
}

TEST(TrainEmg, StopsAtTargetR2) {
  const EmgDataset data = TeacherDataset(Mlp::Random(kEmgArchitecture, 41), 2000, 42);
  EmgTrainConfig config;
  config.epochs = 50;
  config.batch_size = 32;
  config.learning_rate = 1e-3;
  config.target_r2 = 0.3;
  const EmgTrainResult r = TrainEmg(data, config);
  EXPECT_LT(r.report.epochs_run, 50);
  EXPECT_GE(r.report.epoch_r2.back(), 0.3);
}

TEST(TrainEmg, RejectsBadInput) {
  EmgDataset bad;
  EXPECT_THROW(TrainEmg(bad), Error);
  bad.inputs = Eigen::MatrixXd::Zero(3, 10);
  bad.outputs = Eigen::MatrixXd::Zero(kEmgOutputs, 10);
  EXPECT_THROW(TrainEmg(bad), Error);
  EmgDataset ok = TeacherDataset(Mlp::Random(kEmgArchitecture, 1), 20, 2);
  EmgTrainConfig config;
  config.batch_size = 0;
  EXPECT_THROW(TrainEmg(ok, config), Error);
  ok.inputs(0, 0) = std::nan("");
  EXPECT_THROW(TrainEmg(ok), Error);
}

TEST(PoseAngleMapping, ScalesRomToUnitInterval) {
  const HandSkeleton skel = DefaultSkeleton();
  const PoseAngleMapping map = PoseAngleMapping::Default(skel);
  Eigen::VectorXd lo(skel.dof_count()), hi(skel.dof_count());
  for (int d = 0; d < skel.dof_count(); ++d) std::tie(lo[d], hi[d]) = skel.dof_limits(d);
  const Eigen::VectorXd a = map.Map(lo), b = map.Map(hi);
  for (int i = 0; i < skel.dof_count(); ++i) {
    EXPECT_NEAR(a[i], 0.0, 1e-15);
    EXPECT_NEAR(b[i], 1.0, 1e-15);
  }
  EXPECT_EQ(a[20], 0.0);
  EXPECT_EQ(b[21], 0.0);
}

TEST(SyntheticForearmDataset, NormalizedAndVaried) {
  const EmgDataset d = SyntheticForearmDataset(DefaultSkeleton(), 1000, 5);
  ASSERT_EQ(d.inputs.rows(), kEmgInputs);
  ASSERT_EQ(d.outputs.rows(), kEmgOutputs);
  EXPECT_GE(d.inputs.minCoeff(), 0.0);
  EXPECT_LE(d.inputs.maxCoeff(), 1.0);
  for (int c = 0; c < kEmgOutputs; ++c) {
    EXPECT_NEAR(d.outputs.row(c).minCoeff(), 0.0, 1e-12);
    EXPECT_NEAR(d.outputs.row(c).maxCoeff(), 1.0, 1e-12);
  }
}

}  // namespace
}  // namespace graspr

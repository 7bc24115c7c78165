#include <benchmark/benchmark.h>

#include <random>

#include "graspr/emg.hpp"
#include "graspr/geometry.hpp"
#include "graspr/kinematics.hpp"
#include "graspr/pipeline.hpp"
#include "graspr/preference.hpp"
#include "graspr/scenes.hpp"
#include "graspr/simulator.hpp"

namespace {

using namespace graspr;

void BM_ForwardKinematics(benchmark::State& state) {
  const HandSkeleton skel = DefaultSkeleton();
  const HandPose pose = HandPose::Rest(skel);
  for (auto _ : state) benchmark::DoNotOptimize(ForwardKinematics(skel, pose));
}
BENCHMARK(BM_ForwardKinematics);

void BM_DistanceToMesh(benchmark::State& state) {
  const TriMesh mesh = MakeIcosphere(0.04, static_cast<int>(state.range(0)));
  const MeshBvh bvh(mesh);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-0.1, 0.1);
  std::vector<Vec3> queries(1024);
  for (Vec3& q : queries) q = Vec3(u(rng), u(rng), u(rng));
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(DistanceToMesh(queries[i++ & 1023], bvh));
  state.counters["triangles"] = static_cast<double>(mesh.faces().size());
}
BENCHMARK(BM_DistanceToMesh)->Arg(2)->Arg(4);

void BM_ConvexHull(benchmark::State& state) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g;
  std::vector<Vec3> pts(static_cast<std::size_t>(state.range(0)));
  for (Vec3& p : pts) p = Vec3(g(rng), g(rng), g(rng));
  for (auto _ : state) benchmark::DoNotOptimize(ComputeConvexHull(pts).volume);
}
BENCHMARK(BM_ConvexHull)->Arg(1000)->Arg(20000);

void BM_SimulateIndexFinger(benchmark::State& state) {
  const GraspScene scene = ExampleScenes(DefaultSkeleton()).front();
  const SceneGeometry geo(scene);
  SimulationConfig config;
  config.step = DegToRad(static_cast<double>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(SimulateFinger(geo, Finger::kIndex, config).samples.size());
}
BENCHMARK(BM_SimulateIndexFinger)->Arg(15)->Arg(10)->Unit(benchmark::kMillisecond);

void BM_RidgeFit(benchmark::State& state) {
  Eigen::VectorXd beta = Eigen::VectorXd::LinSpaced(kFeatureCount, -0.8, 0.6);
  const SyntheticChoices data = DrawSyntheticChoices(beta, static_cast<std::size_t>(state.range(0)), 3);
  for (auto _ : state) benchmark::DoNotOptimize(SolveRidge(data.x, data.y, 1.0).beta);
}
BENCHMARK(BM_RidgeFit)->Arg(741)->Arg(2000);

void BM_PredictDelta(benchmark::State& state) {
  Standardization ref;
  ref.mean = Eigen::VectorXd::Zero(kFeatureCount);
  ref.std = Eigen::VectorXd::Ones(kFeatureCount);
  const LogisticModel model = PretrainedModel(PublishedOddsRatios(), ref);
  const FeatureVector d = FeatureVector::LinSpaced(-1.0, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(model.PredictDelta(d));
}
BENCHMARK(BM_PredictDelta);

void BM_EmgForward(benchmark::State& state) {
  const Mlp net = Mlp::Random(kEmgArchitecture, 4);
  const Eigen::MatrixXd x = Eigen::MatrixXd::Constant(kEmgInputs, state.range(0), 0.5);
  for (auto _ : state) benchmark::DoNotOptimize(net.Forward(x));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_EmgForward)->Arg(1)->Arg(256);

}  // namespace

BENCHMARK_MAIN();

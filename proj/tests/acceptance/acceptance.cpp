// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "graspr/emg.hpp"
#include "graspr/error.hpp"
#include "graspr/io.hpp"
#include "graspr/pipeline.hpp"
#include "graspr/preference.hpp"
#include "graspr/scenes.hpp"
#include "graspr/stats.hpp"
#include "support/oracles.hpp"
#include "support/planar_hand.hpp"

namespace graspr {
namespace {

namespace fs = std::filesystem;
using testing::PlanarHand;

constexpr double kPi = std::numbers::pi;
const fs::path kData = GRASPR_TEST_DATA_DIR;

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  std::string name;
  double limit_s;  // wall-clock budget, 0 for none
  std::function<Outcome()> run;
};

// Table odds ratios in canonical feature order.
Eigen::VectorXd TableBeta(std::vector<bool>* significant = nullptr) {
  const OddsRatioTable table = PublishedOddsRatios();
  Eigen::VectorXd beta(kFeatureCount);
  if (significant) significant->assign(kFeatureCount, false);
  for (std::size_t i = 0; i < table.features.size(); ++i) {
    const int j = FeatureIndexOf(table.features[i]);
    beta[j] = std::log(table.odds_ratios[i]);
    if (significant) (*significant)[j] = table.p_values[i] < 0.05;
  }
  return beta;
}

LogisticModel BundledModel() { return ModelFromJson(ReadTextFile(kData / "pretrained_model.json")); }

Outcome Pairing() {
  const std::vector<TargetPoint> targets = TargetsFromCsv(ReadTextFile(kData / "targets.csv"));
  const std::vector<TrialPair> pairs = PairTargets(targets);
  std::map<std::string, int> per_scene;
  for (const TrialPair& p : pairs) ++per_scene[p.scene];

  std::vector<std::string> scenes;
  for (const TargetPoint& t : targets)
    if (std::find(scenes.begin(), scenes.end(), t.scene) == scenes.end()) scenes.push_back(t.scene);
  std::vector<std::string> empty;
  for (const std::string& s : scenes) {
    for (Finger f : kAllFingers) {
      for (Stratum k : kAllStrata) {
        const auto hit = std::find_if(targets.begin(), targets.end(), [&](const TargetPoint& t) {
          return t.scene == s && t.finger == f && t.stratum == k;
        });
        if (hit == targets.end()) empty.push_back(TargetId(s, f, k));
      }
    }
  }
  std::vector<int> sizes;
  for (const std::string& s : scenes) sizes.push_back(per_scene[s]);
  std::vector<int> sorted = sizes;
  std::sort(sorted.rbegin(), sorted.rend());
  const bool shipped = PairsToCsv(pairs) == ReadTextFile(kData / "pairs.csv");
  const bool pass = scenes.size() == 4 && targets.size() == 79 && pairs.size() == 741 &&
                    sorted == std::vector<int>{190, 190, 190, 171} && empty.size() == 1 &&
                    empty[0].find("/little/on_object") != std::string::npos && shipped;
  return {pass, fmt::format("{} targets, {} pairs ({}), empty stratum {}, matches pairs.csv: {}", targets.size(),
                            pairs.size(), fmt::join(sizes, "+"), fmt::join(empty, ","), shipped)};
}

Outcome Pretrained() {
  const LogisticModel model = BundledModel();
  const OddsRatioTable table = PublishedOddsRatios();
  double or_err = 0.0;
  const Eigen::VectorXd ors = model.OddsRatios();
  for (std::size_t i = 0; i < table.features.size(); ++i) {
    const auto it = std::find(model.features.begin(), model.features.end(), table.features[i]);
    if (it == model.features.end()) return {false, "missing feature " + table.features[i]};
    or_err = std::max(or_err, std::abs(ors[it - model.features.begin()] - table.odds_ratios[i]));
  }
  const LogisticModel rebuilt = PretrainedModel(table, model.standardization);
  const bool same = rebuilt.beta == model.beta;

  std::mt19937_64 rng(20240);
  std::normal_distribution<double> g;
  double sym_err = 0.0;
  for (int i = 0; i < 100000; ++i) {
    FeatureVector d;
    for (int j = 0; j < kFeatureCount; ++j) d[j] = g(rng) * model.standardization.std[j];
    sym_err = std::max(sym_err, std::abs(model.PredictDelta(d) + model.PredictDelta(-d) - 1.0));
  }
  return {model.beta.size() == 16 && or_err <= 1e-12 && sym_err <= 1e-12 && same,
          fmt::format("16 betas, max |exp(beta) - OR| = {:.3g}, max |p(d) + p(-d) - 1| = {:.3g} over 1e5 deltas", or_err,
                      sym_err)};
}

Outcome SignChecks() {
  const LogisticModel model = BundledModel();
  const Eigen::VectorXd& s = model.standardization.std;
  std::mt19937_64 rng(77);
  std::normal_distribution<double> g;
  int body_checks = 0, volume_checks = 0;
  bool body_ok = true, volume_ok = true;
  for (int base = 0; base < 2000; ++base) {
    FeatureVector d;
    for (int j = 0; j < kFeatureCount; ++j) d[j] = 0.5 * g(rng) * s[j];
    // Moving A's target closer to the body lowers its distance, hence the delta.
    FeatureVector closer = d;
    double prev = model.PredictDelta(closer);
    for (int k = 0; k < 20; ++k) {
      closer[kTargetDistBody] -= 0.05 * s[kTargetDistBody];
      const double p = model.PredictDelta(closer);
      body_ok &= p > prev;
      prev = p;
      ++body_checks;
    }
    FeatureVector bigger = d;
    prev = model.PredictDelta(bigger);
    for (int k = 0; k < 20; ++k) {
      bigger[kReachVolume] += 0.05 * s[kReachVolume];
      const double p = model.PredictDelta(bigger);
      volume_ok &= p > prev;
      prev = p;
      ++volume_checks;
    }
  }
  const Eigen::VectorXd ors = model.OddsRatios();
  const auto or_of = [&](const char* f) {
    return ors[std::find(model.features.begin(), model.features.end(), f) - model.features.begin()];
  };
  return {body_ok && volume_ok,
          fmt::format("OR(target_dist_body) = {}, OR(reach_volume) = {}; {} closer-target and {} larger-volume "
                      "steps all strictly increase p(A)",
                      or_of("target_dist_body"), or_of("reach_volume"), body_ok ? body_checks : 0,
                      volume_ok ? volume_checks : 0)};
}

Outcome Recovery() {
  std::vector<bool> significant;
  const Eigen::VectorXd beta = TableBeta(&significant);
  const std::vector<std::string> names = FeatureNameList();
  int matched = 0;
  double worst_gap = 0.0;
  for (int seed = 0; seed < 100; ++seed) {
    const SyntheticChoices data = DrawSyntheticChoices(beta, 2000, 1000 + seed);
    FitConfig config;
    config.seed = seed;
    const FitResult r = Fit(data.x, data.y, names, config);
    bool signs = true;
    for (int j = 0; j < kFeatureCount; ++j)
      if (significant[j]) signs &= (r.model.beta[j] > 0) == (beta[j] > 0);
    matched += signs;
    worst_gap = std::max(worst_gap, std::abs(r.report.cv_accuracy - data.bayes_accuracy()));
  }
  const int n_sig = static_cast<int>(std::count(significant.begin(), significant.end(), true));
  return {n_sig == 6 && matched >= 95 && worst_gap <= 0.05,
          fmt::format("signs of {} significant features match in {}/100 seeds; max |CV acc - Bayes acc| = {:.4f}",
                      n_sig, matched, worst_gap)};
}

Outcome Geometry() {
  std::vector<Vec3> corners;
  for (int i = 0; i < 8; ++i) corners.emplace_back(i & 1, (i >> 1) & 1, (i >> 2) & 1);
  const double hull = ComputeConvexHull(corners).volume;

  const TriMesh cube =
      MakeBox(Vec3::Constant(0.5)).Transformed(Transform(Eigen::Translation3d(0.5, 0.5, 0.5)));
  const std::vector<Vec3> alternating = {{0, 0, 0}, {1, 1, 0}, {1, 0, 1}, {0, 1, 1}};
  const double cage = ComputeCageRatio(alternating, cube).ratio;

  const TriMesh mesh = Merge(std::vector<TriMesh>{
      MakeTorus(0.06, 0.015), MakeIcosphere(0.03, 2).Transformed(Transform(Eigen::Translation3d(0.1, 0, 0))),
      MakeBox(Vec3(0.02, 0.01, 0.04)).Transformed(Transform(Eigen::Translation3d(-0.05, 0.08, 0.0)))});
  const MeshBvh bvh(mesh);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-0.2, 0.2);
  double dist_err = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const Vec3 p(u(rng), u(rng), u(rng));
    dist_err = std::max(dist_err, std::abs(DistanceToMesh(p, bvh) - testing::BruteForceDistance(p, mesh)));
  }
  return {std::abs(hull - 1.0) <= 1e-12 && std::abs(cage - 1.0 / 3.0) <= 1e-9 && dist_err <= 1e-12,
          fmt::format("cube hull {:.17g}, alternating-corner cage {:.17g}, max distance error {:.3g} on 1e4 "
                      "queries ({} triangles)",
                      hull, cage, dist_err, mesh.faces().size())};
}

Outcome Kinematics() {
  const PlanarHand hand;
  SimulationConfig config;
  config.step = 2 * kPi / 99;
  const ReachCloud cloud = SimulateFinger(hand.Scene(hand.Skeleton()), Finger::kIndex, config);
  double fk_err = 0.0;
  for (const ReachSample& s : cloud.samples)
    fk_err = std::max(fk_err, (s.position - hand.Tip(s.angles[0], s.angles[1])).norm());

  // Slabs at several bearings and gaps: obstacle samples must be a subset.
  config.step = DegToRad(6.0);
  const GraspScene free_scene = hand.Scene(hand.Skeleton());
  std::set<std::vector<double>> free_set;
  for (const ReachSample& s : SimulateFinger(free_scene, Finger::kIndex, config).samples) free_set.insert(s.angles);
  int scenes = 0, subset = 0;
  std::size_t kept_total = 0;
  for (double angle : {-kPi / 2, -kPi / 3, 0.0, kPi / 4, 2 * kPi / 3}) {
    for (double gap : {0.02, 0.035, 0.06}) {
      const GraspScene walled = testing::WithSlab(free_scene, hand.head, angle, gap);
      const ReachCloud c = SimulateFinger(walled, Finger::kIndex, config);
      bool ok = c.samples.size() < free_set.size();
      for (const ReachSample& s : c.samples) ok &= free_set.count(s.angles) > 0;
      subset += ok;
      kept_total += c.samples.size();
      ++scenes;
    }
  }
  return {cloud.samples.size() == 10000 && fk_err <= 1e-9 && subset == scenes,
          fmt::format("{} poses, max tip error {:.3g} m; constrained subset of free in {}/{} slab scenes "
                      "({} of {} samples kept on average)",
                      cloud.samples.size(), fk_err, subset, scenes, kept_total / scenes, free_set.size())};
}

Outcome Numerics() {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> u;

  const int n = 80, p = 6;
  Eigen::MatrixXd z(n, p);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) z(i, j) = g(rng);
    y[i] = u(rng) < Sigmoid(z(i, 0) - 0.5 * z(i, 1)) ? 1.0 : 0.0;
  }
  double logistic_err = 0.0;
  for (double lambda : {0.0, 1.0}) {
    Eigen::VectorXd theta(p + 1);
    for (int j = 0; j <= p; ++j) theta[j] = 0.5 * g(rng);
    logistic_err = std::max(logistic_err, testing::MaxRelativeGradientError(
                                              [&](const Eigen::VectorXd& t) { return RidgeObjective(z, y, t, lambda); },
                                              theta, RidgeGradient(z, y, theta, lambda)));
  }

  Mlp net = Mlp::Random({kEmgInputs, 16, 12, kEmgOutputs}, 4);
  Eigen::VectorXd params = net.parameters();
  for (Eigen::Index i = 0; i < params.size(); ++i)
    if (params[i] == 0.0) params[i] = 0.1 * g(rng);  // exercise the biases too
  net.set_parameters(params);
  const Eigen::MatrixXd xb = Eigen::MatrixXd::NullaryExpr(kEmgInputs, 8, [&] { return u(rng); });
  const Eigen::MatrixXd yb = Eigen::MatrixXd::NullaryExpr(kEmgOutputs, 8, [&] { return u(rng); });
  Eigen::VectorXd grad;
  net.Loss(xb, yb, &grad);
  Mlp probe = net;
  const double mlp_err = testing::MaxRelativeGradientError(
      [&](const Eigen::VectorXd& t) {
        probe.set_parameters(t);
        return probe.Loss(xb, yb);
      },
      params, grad);

  double auc_err = 0.0;
  std::uniform_int_distribution<int> coarse(0, 12);
  for (int m : {2, 10, 57, 128, 200}) {
    std::vector<double> s(m), lab(m);
    for (int i = 0; i < m; ++i) {
      s[i] = coarse(rng) + (i % 3 == 0 ? u(rng) : 0.0);
      lab[i] = u(rng) < 0.4 ? 1.0 : 0.0;
    }
    lab[0] = 1.0;
    lab[1] = 0.0;
    auc_err = std::max(auc_err, std::abs(RocAuc(s, lab) - testing::PairwiseAuc(s, lab)));
  }

  // Sylvester-Hadamard columns and a centered orthonormal basis.
  Eigen::MatrixXd h = Eigen::MatrixXd::Ones(1, 1);
  while (h.rows() < 64) {
    Eigen::MatrixXd next(2 * h.rows(), 2 * h.cols());
    next << h, h, h, -h;
    h = next;
  }
  Eigen::MatrixXd raw = Eigen::MatrixXd::NullaryExpr(100, 12, [&] { return g(rng); });
  raw.rowwise() -= raw.colwise().mean();
  const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(raw).householderQ() * Eigen::MatrixXd::Identity(100, 12);
  const double vif_err = std::max((Vif(h.middleCols(1, 20)).vif.array() - 1.0).abs().maxCoeff(),
                                  (Vif(q).vif.array() - 1.0).abs().maxCoeff());

  return {logistic_err < 1e-4 && mlp_err < 1e-4 && auc_err <= 1e-12 && vif_err <= 1e-9,
          fmt::format("gradient rel. error logistic {:.3g}, MLP {:.3g}; max |AUC - pair count| {:.3g}; "
                      "max |VIF - 1| {:.3g}",
                      logistic_err, mlp_err, auc_err, vif_err)};
}

Outcome EmgTeacherStudent() {
  const Mlp teacher = Mlp::Random(kEmgArchitecture, 1000);
  const EmgDataset data = TeacherDataset(teacher, 20000, 0);
  EmgTrainConfig config;
  config.epochs = 200;
  config.learning_rate = 1e-4;
  config.batch_size = 32;
  config.target_r2 = 0.9;
  const EmgTrainResult r = TrainEmg(data, config);
  const double r2 = r.report.holdout.r2;
  return {r2 > 0.9 && r.report.epochs_run <= 200,
          fmt::format("holdout R^2 {:.4f} after {} epochs (lr 1e-4, batch 32, {} train / {} holdout)", r2,
                      r.report.epochs_run, r.report.train_size, r.report.holdout_size)};
}

// simulate -> sample -> features -> choices -> fit, every artifact written under `dir`.
void RunPipeline(const fs::path& dir, std::uint64_t seed) {
  fs::remove_all(dir);
  fs::create_directories(dir);
  Study::Options options;
  options.simulation.step = DegToRad(10.0);
  const Study study(ExampleScenes(DefaultSkeleton()), EmgModelFromJson(ReadTextFile(kData / "emg_model.json")),
                    options);
  for (const std::string& id : study.scene_ids())
    WriteTextFile(dir / (id + ".clouds.csv"), CloudsToCsv(study.clouds(id)));

  const StudyDesign design = SampleStudy(study, seed);
  WriteTextFile(dir / "targets.csv", TargetsToCsv(design.targets));
  WriteTextFile(dir / "pairs.csv", PairsToCsv(design.pairs));

  std::vector<ReachTask> tasks;
  for (const TargetPoint& t : design.targets) tasks.push_back(study.Task(t));
  const LogisticModel teacher = PretrainedModel(PublishedOddsRatios(), ReferenceStatistics(tasks));
  WriteTextFile(dir / "pretrained_model.json", ModelToJson(teacher));

  const FeatureTable unlabeled = ComputeFeatures(study, design.targets, design.pairs);
  const std::vector<ChoiceRecord> choices = SimulateChoices(teacher, unlabeled, design.pairs, seed);
  WriteTextFile(dir / "choices.csv", ChoicesToCsv(choices));
  const FeatureTable labeled = ComputeFeatures(study, design.targets, design.pairs, choices);
  WriteTextFile(dir / "features.csv", FeaturesToCsv(labeled));

  FitConfig config;
  config.seed = seed;
  const FitResult fit = Fit(labeled.x, labeled.labels, FeatureNameList(), config);
  WriteTextFile(dir / "model.json", ModelToJson(fit.model));
  WriteTextFile(dir / "fit_report.json", FitReportToJson(fit.report));
}

Outcome Determinism() {
  const fs::path root = fs::temp_directory_path() / "graspr_acceptance_determinism";
  RunPipeline(root / "a", 11);
  RunPipeline(root / "b", 11);
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(root / "a")) names.push_back(e.path().filename().string());
  std::sort(names.begin(), names.end());
  std::size_t bytes = 0;
  std::vector<std::string> differ;
  for (const std::string& n : names) {
    const std::string a = ReadTextFile(root / "a" / n);
    bytes += a.size();
    if (!fs::exists(root / "b" / n) || ReadTextFile(root / "b" / n) != a) differ.push_back(n);
  }
  std::size_t count_b = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(root / "b")) ++count_b;
  fs::remove_all(root);
  return {differ.empty() && count_b == names.size() && names.size() >= 10,
          fmt::format("{} artifacts ({} bytes) compared; differing: {}", names.size(), bytes,
                      differ.empty() ? std::string("none") : fmt::format("{}", fmt::join(differ, ",")))};
}

}  // namespace
}  // namespace graspr

int main() {
  using namespace graspr;
  const std::vector<Criterion> criteria = {
      {"pairing-combinatorics", 1.0, Pairing},
      {"pretrained-model", 5.0, Pretrained},
      {"sign-checks", 0.0, SignChecks},
      {"coefficient-recovery", 120.0, Recovery},
      {"geometry-oracles", 60.0, Geometry},
      {"kinematics-oracle", 60.0, Kinematics},
      {"numerics", 60.0, Numerics},
      {"emg-teacher-student", 180.0, EmgTeacherStudent},
      {"determinism", 0.0, Determinism},
  };
  int failures = 0;
  for (const Criterion& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = c.limit_s <= 0.0 || s < c.limit_s;
    const bool pass = o.pass && in_time;
    failures += !pass;
    const std::string budget = c.limit_s > 0.0 ? fmt::format(" < {:g} s", c.limit_s) : "";
    fmt::print("{} {}: {} [{:.2f} s{}{}]\n", pass ? "PASS" : "FAIL", c.name, o.detail, s, budget,
               in_time ? "" : ", over budget");
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}

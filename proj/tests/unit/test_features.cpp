#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "graspr/error.hpp"
#include "graspr/features.hpp"
#include "graspr/io.hpp"
#include "graspr/pipeline.hpp"
#include "graspr/scenes.hpp"
#include "support/planar_hand.hpp"

namespace graspr {
namespace {

using testing::PlanarHand;
using testing::WithSlab;

constexpr double kPi = std::numbers::pi;

double Wrapped(double d) {
  d = std::fmod(std::abs(d), 2 * kPi);
  return std::min(d, 2 * kPi - d);
}

TEST(FeatureNames, IndexLookup) {
  EXPECT_EQ(FeatureIndexOf("target_x"), kTargetX);
  EXPECT_EQ(FeatureIndexOf("vemg_abs_sum"), kVemgAbsSum);
  EXPECT_EQ(FeatureIndexOf("wrist_speed"), -1);
  EXPECT_EQ(FeatureNameList().size(), static_cast<std::size_t>(kFeatureCount));
}

TEST(DeltaFeatures, Antisymmetric) {
  FeatureVector a = FeatureVector::LinSpaced(0.0, 1.5), b = FeatureVector::Constant(0.3);
  EXPECT_EQ(DeltaFeatures(a, a), FeatureVector::Zero());
  EXPECT_EQ(DeltaFeatures(a, b), -DeltaFeatures(b, a));
}

class PlanarFeatures : public ::testing::Test {
 protected:
  PlanarFeatures()
      : scene_(WithSlab(hand_.Scene(hand_.Skeleton()), hand_.head, -kPi / 3, 0.03)),
        geo_(scene_),
        clouds_(SimulateScene(scene_, {DegToRad(6.0), kDefaultCollisionTolerance, 0.1})) {
    FeatureOptions options;
    options.geometric_only = true;
    extractor_.emplace(geo_, clouds_, nullptr, options);
  }

  PlanarHand hand_;
  GraspScene scene_;
  SceneGeometry geo_;
  std::vector<ReachCloud> clouds_;
  std::optional<FeatureExtractor> extractor_;
};

TEST_F(PlanarFeatures, SampleFeaturesMatchDirectGeometry) {
  const ReachCloud& cloud = extractor_->cloud(Finger::kIndex);
  ASSERT_GT(cloud.samples.size(), 100u);
  const Vec3 tip0 = hand_.Tip(0.0, 0.0);
  EXPECT_LT((cloud.initial_fingertip - tip0).norm(), 1e-15);
  for (std::size_t i = 0; i < cloud.samples.size(); i += 13) {
    const ReachSample& s = cloud.samples[i];
    const FeatureVector f = extractor_->ComputeSample(Finger::kIndex, static_cast<int>(i));
    EXPECT_EQ(f[kTargetX], s.position.x());
    EXPECT_EQ(f[kTargetY], s.position.y());
    EXPECT_EQ(f[kTargetZ], s.position.z());
    EXPECT_NEAR(f[kTargetDistCentroid], (s.position - cloud.centroid).norm(), 1e-15);
    EXPECT_NEAR(f[kJointX], tip0.x(), 1e-15);
    EXPECT_NEAR(f[kJointToTargetEuclid], (s.position - tip0).norm(), 1e-15);
    // Single-axis joints: quaternion distance is the wrapped angle change.
    EXPECT_NEAR(f[kJointAngularDistance], Wrapped(s.angles[0]) + Wrapped(s.angles[1]), 1e-12);
    EXPECT_NEAR(f[kJointAngleAbsSum], std::abs(s.angles[0]) + std::abs(s.angles[1]), 1e-15);
    EXPECT_EQ(f[kReachVolume], cloud.volume);
    EXPECT_EQ(f[kVemgAbsSum], 0.0);
    EXPECT_NEAR(f[kObjectVolume], 0.004 * 1.0 * 1.0, 1e-12);
    // Distance to the slab's near face, measured along its normal.
    const Vec3 m(std::cos(-kPi / 3), std::sin(-kPi / 3), 0.0);
    EXPECT_NEAR(f[kTargetDistObject], std::max(0.0, 0.03 - (s.position - hand_.head).dot(m)), 1e-12);
  }
}

TEST_F(PlanarFeatures, GraspPoseHasZeroMotionFeatures) {
  const std::vector<double> grasp = {0.0, 0.0};
  const ReachCloud& c = extractor_->cloud(Finger::kIndex);
  const FeatureVector f = extractor_->Compute(Finger::kIndex, grasp, c.initial_fingertip);
  EXPECT_EQ(f[kJointAngularDistance], 0.0);
  EXPECT_EQ(f[kJointAngleAbsSum], 0.0);
  EXPECT_EQ(f[kJointToTargetEuclid], 0.0);
  const DiagnosticFeatures d = extractor_->Diagnostics(Finger::kIndex, grasp, c.initial_fingertip);
  EXPECT_EQ(d.joint_angle_euclid, 0.0);
  EXPECT_EQ(d.forward_position, -c.initial_fingertip.x());
}

TEST_F(PlanarFeatures, RejectsUnknownSamplesAndShapes) {
  EXPECT_THROW(extractor_->ComputeSample(Finger::kIndex, -1), Error);
  EXPECT_THROW(extractor_->ComputeSample(Finger::kIndex, 1 << 20), Error);
  const std::vector<double> three = {0, 0, 0};
  EXPECT_THROW(extractor_->Compute(Finger::kIndex, three, Vec3::Zero()), Error);
}

TEST(FeatureExtractor, NeedsEmgUnlessGeometricOnly) {
  const PlanarHand hand;
  const GraspScene scene = hand.Scene(hand.Skeleton());
  const SceneGeometry geo(scene);
  const std::vector<ReachCloud> clouds = SimulateScene(scene, {DegToRad(30.0), kDefaultCollisionTolerance, 0.1});
  try {
    FeatureExtractor ex(geo, clouds, nullptr);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvalidArgument);
  }
}

class BallStudy : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    Study::Options options;
    options.simulation.step = DegToRad(10.0);
    emg_ = new EmgModel(EmgModelFromJson(ReadTextFile(GRASPR_TEST_DATA_DIR "/emg_model.json")));
    study_ = new Study({ExampleScenes(DefaultSkeleton()).front()}, *emg_, options);
  }
  static void TearDownTestSuite() {
    delete study_;
    delete emg_;
  }
  static EmgModel* emg_;
  static Study* study_;
};
EmgModel* BallStudy::emg_ = nullptr;
Study* BallStudy::study_ = nullptr;

TEST_F(BallStudy, TasksReproduceTargetsAndCarryEmg) {
  const std::string id = study_->scene_ids().front();
  const FeatureExtractor& ex = study_->extractor(id);
  const SceneGeometry& geo = study_->geometry(id);
  EXPECT_TRUE(ex.emg_present());
  EXPECT_GT(ex.cage_ratio(), 0.0);
  EXPECT_LE(ex.cage_ratio(), 1.0);
  EXPECT_NEAR(ex.object_volume(), geo.world_object().Volume(), 1e-15);

  const ReachCloud& cloud = ex.cloud(Finger::kMiddle);
  const int sample = static_cast<int>(cloud.samples.size() / 2);
  TargetPoint t{"x", id, Finger::kMiddle, Stratum::kInAir, cloud.samples[sample].position, sample};
  const ReachTask task = MakeTask(ex, t);
  EXPECT_EQ(task.finger_angles, cloud.samples[sample].angles);
  EXPECT_EQ(DeltaFeatures(task.features, study_->Task(t).features), FeatureVector::Zero());
  EXPECT_EQ(task.features, study_->SampleTask(id, Finger::kMiddle, sample).features);

  const Eigen::VectorXd angles = geo.PoseAngles(Finger::kMiddle, task.finger_angles);
  const Eigen::VectorXd inputs = PoseAngleMapping::Default(geo.skeleton()).Map(angles);
  EXPECT_NEAR(task.features[kVemgAbsSum], EmgAbsSum(*emg_, inputs), 1e-14);
  EXPECT_GT(task.features[kTargetDistBody], 0.0);
  EXPECT_NEAR(task.features[kTargetDistBody], geo.DistanceToStaticHand(Finger::kMiddle, t.position), 1e-15);

  TargetPoint moved = t;
  moved.position.x() += 1e-6;
  try {
    MakeTask(ex, moved);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvalidArgument);
  }
  TargetPoint missing = t;
  missing.sample = -3;
  try {
    MakeTask(ex, missing);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDanglingReference);
  }
}

}  // namespace
}  // namespace graspr

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "graspr/error.hpp"
#include "graspr/kinematics.hpp"

namespace graspr {
namespace {

constexpr double kPi = std::numbers::pi;

Eigen::VectorXd RandomAngles(const HandSkeleton& skel, std::mt19937_64& rng) {
  Eigen::VectorXd a(skel.dof_count());
  for (int d = 0; d < skel.dof_count(); ++d) {
    const auto [lo, hi] = skel.dof_limits(d);
    a[d] = std::uniform_real_distribution<double>(lo, hi)(rng);
  }
  return a;
}

Transform RandomRigid(std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Eigen::Quaterniond q(g(rng), g(rng), g(rng), g(rng));
  q.normalize();
  Transform t = Transform::Identity();
  t.linear() = q.toRotationMatrix();
  t.translation() = Vec3(g(rng), g(rng), g(rng)) * 0.1;
  return t;
}

// Index finger is a planar two-link chain in the XY plane rotating about Z;
// the other fingers are jointless stubs so the skeleton stays well-formed.
HandSkeleton PlanarChain(double l1, double l2) {
  std::vector<Bone> bones = {{"root", -1, Vec3::Zero(), 0.0},
                             {"link1", 0, Vec3::Zero(), 0.005},
                             {"link2", 1, Vec3(l1, 0, 0), 0.005},
                             {"tip", 2, Vec3(l2, 0, 0), 0.0}};
  std::array<int, 5> tips{};
  tips[1] = 3;
  int slot = 0;
  for (int f : {0, 2, 3, 4}) {
    bones.push_back({"stub" + std::to_string(slot), 0, Vec3(0, 0, 0.01 * ++slot), 0.0});
    tips[f] = static_cast<int>(bones.size()) - 1;
  }
  std::vector<Joint> joints = {{1, {Vec3::UnitZ()}, {{-kPi, kPi}}}, {2, {Vec3::UnitZ()}, {{-kPi, kPi}}}};
  return HandSkeleton(bones, joints, tips);
}

// Rotation angle from the matrix logarithm: sin from the skew part, cos from the trace.
double RotationAngle(const Mat3& r) {
  const Vec3 v(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
  return std::atan2(0.5 * v.norm(), 0.5 * (r.trace() - 1.0));
}

TEST(ForwardKinematics, RestPoseFollowsOffsetChain) {
  const HandSkeleton skel = DefaultSkeleton();
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(skel.dof_count());
  std::vector<Transform> fk(skel.bones().size());
  ForwardKinematicsInto(skel, Transform::Identity(), zero, fk);
  for (std::size_t i = 1; i < skel.bones().size(); ++i) {
    Vec3 expected = Vec3::Zero();
    for (int b = static_cast<int>(i); b > 0; b = skel.bones()[b].parent) expected += skel.bones()[b].offset;
    EXPECT_LT((fk[i].translation() - expected).norm(), 1e-15);
    EXPECT_TRUE(fk[i].linear().isIdentity(1e-15));
  }
}

TEST(ForwardKinematics, PlanarChainMatchesClosedForm) {
  const double l1 = 0.04, l2 = 0.03;
  const HandSkeleton skel = PlanarChain(l1, l2);
  Eigen::VectorXd a(2);
  a << kPi / 2, 0.0;
  auto tip = FingertipPositions(skel, ForwardKinematics(skel, HandPose(skel, Transform::Identity(), a)))[1];
  EXPECT_LT((tip - Vec3(0, l1 + l2, 0)).norm(), 1e-12);

  for (int i = 0; i < 100; ++i) {
    for (int j = 0; j < 100; ++j) {
      const double t1 = -kPi + 2 * kPi * i / 99.0, t2 = -kPi + 2 * kPi * j / 99.0;
      a << t1, t2;
      tip = FingertipPositions(skel, ForwardKinematics(skel, HandPose(skel, Transform::Identity(), a)))[1];
      const Vec3 expected(l1 * std::cos(t1) + l2 * std::cos(t1 + t2), l1 * std::sin(t1) + l2 * std::sin(t1 + t2), 0);
      ASSERT_LT((tip - expected).norm(), 1e-9);
    }
  }
}

TEST(ForwardKinematics, ScaleIsLinear) {
  const HandSkeleton unit = DefaultSkeleton();
  const HandSkeleton twice = unit.Scaled(2.0);
  const auto a = ForwardKinematics(unit, HandPose::Rest(unit));
  const auto b = ForwardKinematics(twice, HandPose::Rest(twice));
  const auto ta = FingertipPositions(unit, a), tb = FingertipPositions(twice, b);
  for (int f = 0; f < 5; ++f) EXPECT_LT((tb[f] - 2.0 * ta[f]).norm(), 1e-15);

  std::mt19937_64 rng(4);
  const Eigen::VectorXd angles = RandomAngles(unit, rng);
  const auto ra = FingertipPositions(unit, ForwardKinematics(unit, HandPose(unit, Transform::Identity(), angles)));
  const auto rb = FingertipPositions(twice, ForwardKinematics(twice, HandPose(twice, Transform::Identity(), angles)));
  for (int f = 0; f < 5; ++f) EXPECT_LT((rb[f] - 2.0 * ra[f]).norm(), 1e-14);
}

TEST(ForwardKinematics, RomViolationRejected) {
  const HandSkeleton skel = DefaultSkeleton();
  Eigen::VectorXd a = HandPose::Rest(skel).angles();
  const int pip = skel.finger_dofs(Finger::kIndex)[2];
  a[pip] = DegToRad(101);
  try {
    HandPose(skel, Transform::Identity(), a);
    FAIL() << "expected rejection";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kRejectedPose);
  }
  EXPECT_THROW(HandPose(skel, Transform::Identity(), Eigen::VectorXd::Zero(3)), Error);
}

TEST(ForwardKinematics, DistalJointsLeaveProximalBonesFixed) {
  const HandSkeleton skel = DefaultSkeleton();
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::VectorXd base = RandomAngles(skel, rng);
    for (Finger f : kAllFingers) {
      Eigen::VectorXd moved = base;
      const int dip = skel.finger_dofs(f).back();
      const auto [lo, hi] = skel.dof_limits(dip);
      moved[dip] = std::uniform_real_distribution<double>(lo, hi)(rng);
      const auto a = ForwardKinematics(skel, HandPose(skel, Transform::Identity(), base));
      const auto b = ForwardKinematics(skel, HandPose(skel, Transform::Identity(), moved));
      const int dip_bone = skel.finger_bones(f)[skel.finger_bones(f).size() - 2];
      for (std::size_t i = 0; i < skel.bones().size(); ++i) {
        if (static_cast<int>(i) == dip_bone || skel.bones()[i].parent == dip_bone) continue;
        EXPECT_TRUE(a[i].isApprox(b[i], 0.0)) << "bone " << i;
      }
    }
  }
}

TEST(WristFrame, RestPoseAxes) {
  const HandSkeleton skel = DefaultSkeleton();
  const WristFrame frame = ComputeWristFrame(skel, HandPose::Rest(skel));
  const Vec3 index = skel.bones()[skel.finger_bones(Finger::kIndex).front()].offset;
  const Vec3 little = skel.bones()[skel.finger_bones(Finger::kLittle).front()].offset;
  EXPECT_LT((frame.z - (index - little).normalized()).norm(), 1e-9);
  EXPECT_LT((frame.y - Vec3::UnitY()).norm(), 1e-9);
  EXPECT_LT((frame.x - Vec3::UnitX()).norm(), 1e-9);
  EXPECT_LT(frame.origin.norm(), 1e-15);
}

TEST(WristFrame, RotationEquivariant) {
  const HandSkeleton skel = DefaultSkeleton();
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::VectorXd angles = RandomAngles(skel, rng);
    const Transform r = RandomRigid(rng);
    const WristFrame a = ComputeWristFrame(skel, HandPose(skel, Transform::Identity(), angles));
    const WristFrame b = ComputeWristFrame(skel, HandPose(skel, r, angles));
    EXPECT_LT((r.linear() * a.x - b.x).norm(), 1e-9);
    EXPECT_LT((r.linear() * a.y - b.y).norm(), 1e-9);
    EXPECT_LT((r.linear() * a.z - b.z).norm(), 1e-9);
    EXPECT_LT((r * a.origin - b.origin).norm(), 1e-12);
  }
}

TEST(WristFrame, OrthonormalRightHandedOnRandomPoses) {
  const HandSkeleton skel = DefaultSkeleton();
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 1000; ++trial) {
    const WristFrame f = ComputeWristFrame(skel, HandPose(skel, RandomRigid(rng), RandomAngles(skel, rng)));
    ASSERT_NEAR(f.x.norm(), 1.0, 1e-9);
    ASSERT_NEAR(f.y.norm(), 1.0, 1e-9);
    ASSERT_NEAR(f.z.norm(), 1.0, 1e-9);
    ASSERT_NEAR(f.x.dot(f.y), 0.0, 1e-9);
    ASSERT_NEAR(f.y.dot(f.z), 0.0, 1e-9);
    ASSERT_NEAR(f.x.dot(f.z), 0.0, 1e-9);
    ASSERT_LT((f.x - f.y.cross(f.z)).norm(), 1e-9);
    const Vec3 p(0.01, -0.02, 0.03);
    ASSERT_LT((f.ToLocal(f.ToWorld(p)) - p).norm(), 1e-12);
  }
}

TEST(WristFrame, CollinearHeadsRejected) {
  std::vector<Bone> bones = {{"root", -1, Vec3::Zero(), 0.0}};
  std::array<int, 5> tips{};
  for (int f = 0; f < 5; ++f) {
    bones.push_back({"mcp" + std::to_string(f), 0, Vec3(-0.08, 0, 0.01 * f), 0.0});
    bones.push_back({"tip" + std::to_string(f), static_cast<int>(bones.size()) - 1, Vec3(-0.05, 0, 0), 0.0});
    tips[f] = static_cast<int>(bones.size()) - 1;
  }
  const HandSkeleton skel(bones, {}, tips);
  try {
    ComputeWristFrame(skel, HandPose::Rest(skel));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kFrame);
  }
}

TEST(QuaternionDistance, IdentityAndQuarterTurn) {
  const HandSkeleton skel = DefaultSkeleton();
  const HandPose rest = HandPose::Rest(skel);
  EXPECT_EQ(JointQuaternionDistance(skel, rest, rest, Finger::kIndex), 0.0);
  Eigen::VectorXd a = rest.angles();
  a[skel.finger_dofs(Finger::kIndex)[1]] = kPi / 2;
  const HandPose bent(skel, Transform::Identity(), a);
  EXPECT_NEAR(JointQuaternionDistance(skel, rest, bent, Finger::kIndex), kPi / 2, 1e-12);
  EXPECT_EQ(JointQuaternionDistance(skel, rest, bent, Finger::kMiddle), 0.0);
}

TEST(QuaternionDistance, MatchesRotationMatrixLog) {
  const HandSkeleton skel = DefaultSkeleton();
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 500; ++trial) {
    const HandPose a(skel, Transform::Identity(), RandomAngles(skel, rng));
    const HandPose b(skel, Transform::Identity(), RandomAngles(skel, rng));
    for (Finger f : kAllFingers) {
      double expected = 0.0;
      for (int j : skel.finger_joints(f)) {
        const Mat3 ra = JointRotation(skel, j, a.angles()), rb = JointRotation(skel, j, b.angles());
        expected += RotationAngle(ra.transpose() * rb);
      }
      ASSERT_NEAR(JointQuaternionDistance(skel, a, b, f), expected, 1e-9);
      ASSERT_NEAR(JointQuaternionDistance(skel, b, a, f), expected, 1e-9);
    }
  }
}

TEST(AngleAbsSum, Arithmetic) {
  EXPECT_EQ(JointAngleAbsSum(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2, 3}), 0.0);
  EXPECT_NEAR(JointAngleAbsSum(std::vector<double>{0.3, 0}, std::vector<double>{0, 0}), 0.3, 1e-15);
  EXPECT_NEAR(JointAngleAbsSum(std::vector<double>{0.1, -0.2, 0.05, 0}, std::vector<double>{0, 0, 0, 0}), 0.35,
              1e-15);
  EXPECT_THROW(JointAngleAbsSum(std::vector<double>{1}, std::vector<double>{1, 2}), Error);
}

TEST(PseudoMetrics, SymmetricAndTriangle) {
  const HandSkeleton skel = DefaultSkeleton();
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 300; ++trial) {
    const HandPose a(skel, Transform::Identity(), RandomAngles(skel, rng));
    const HandPose b(skel, Transform::Identity(), RandomAngles(skel, rng));
    const HandPose c(skel, Transform::Identity(), RandomAngles(skel, rng));
    for (Finger f : kAllFingers) {
      const double qab = JointQuaternionDistance(skel, a, b, f), qbc = JointQuaternionDistance(skel, b, c, f),
                   qac = JointQuaternionDistance(skel, a, c, f);
      EXPECT_NEAR(qab, JointQuaternionDistance(skel, b, a, f), 1e-12);
      EXPECT_LE(qac, qab + qbc + 1e-12);
      const double sab = JointAngleAbsSum(skel, a, b, f), sbc = JointAngleAbsSum(skel, b, c, f),
                   sac = JointAngleAbsSum(skel, a, c, f);
      EXPECT_EQ(sab, JointAngleAbsSum(skel, b, a, f));
      EXPECT_LE(sac, sab + sbc + 1e-12);
    }
  }
}

}  // namespace
}  // namespace graspr

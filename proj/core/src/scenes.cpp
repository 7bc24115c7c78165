#include "graspr/scenes.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "graspr/error.hpp"

namespace graspr {

namespace {

std::vector<double> Deg(std::initializer_list<double> values) {
  std::vector<double> out;
  for (double v : values) out.push_back(DegToRad(v));
  return out;
}

std::vector<double> Lerp(const std::vector<double>& a, const std::vector<double>& b, double s) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + s * (b[i] - a[i]);
  return out;
}

std::vector<double> FingerAngles(const HandSkeleton& skel, const Eigen::VectorXd& angles, Finger f) {
  std::vector<double> out;
  for (int d : skel.finger_dofs(f)) out.push_back(angles[d]);
  return out;
}

Transform Pose(const Vec3& translation, const Mat3& rotation = Mat3::Identity()) {
  Transform t = Transform::Identity();
  t.linear() = rotation;
  t.translation() = translation;
  return t;
}

Mat3 AxisTo(const Vec3& from, const Vec3& to) {
  return Eigen::Quaterniond::FromTwoVectors(from, to).toRotationMatrix();
}

}  // namespace

GraspScene CloseGrasp(const HandSkeleton& skel, const GraspRecipe& recipe) {
  if (recipe.open.size() != skel.dof_count()) {
    throw Error(ErrorCode::kShapeMismatch, fmt::format("recipe '{}' open pose has wrong DOF count", recipe.id));
  }
  GraspScene scene{recipe.id, recipe.object_name, skel, HandPose(skel, Transform::Identity(), recipe.open),
                   recipe.object, recipe.object_transform};
  for (Finger f : recipe.order) {
    const auto& target = recipe.closed[static_cast<int>(f)];
    if (!target) continue;
    const SceneGeometry geo(scene);
    const std::vector<double> open = FingerAngles(skel, scene.grasp.angles(), f);
    if (target->size() != open.size()) {
      throw Error(ErrorCode::kShapeMismatch, fmt::format("recipe '{}' {} target size", recipe.id, ToString(f)));
    }
    const auto clearance = [&](double s) { return geo.FingerClearance(f, Lerp(open, *target, s)); };
    const auto start = clearance(0.0);
    if (start.object < recipe.tolerance || start.hand < recipe.tolerance) {
      throw Error(ErrorCode::kRejectedPose,
                  fmt::format("recipe '{}': {} collides before closing ({:.2f} mm object, {:.2f} mm hand)",
                              recipe.id, ToString(f), start.object * 1e3, start.hand * 1e3));
    }
    double s_final = 1.0;
    double prev = 0.0;
    constexpr int kSteps = 200;
    for (int i = 1; i <= kSteps; ++i) {
      const double s = static_cast<double>(i) / kSteps;
      const auto c = clearance(s);
      if (c.hand < recipe.tolerance) {
        s_final = prev;
        break;
      }
      if (c.object <= recipe.gap) {
        double lo = prev, hi = s;
        for (int it = 0; it < 60; ++it) {
          const double mid = 0.5 * (lo + hi);
          const auto m = clearance(mid);
          (m.object > recipe.gap && m.hand >= recipe.tolerance ? lo : hi) = mid;
        }
        s_final = lo;
        break;
      }
      prev = s;
    }
    Eigen::VectorXd angles = scene.grasp.angles();
    const auto closed = Lerp(open, *target, s_final);
    const auto& dofs = skel.finger_dofs(f);
    for (std::size_t i = 0; i < dofs.size(); ++i) angles[dofs[i]] = closed[i];
    scene.grasp = HandPose(skel, Transform::Identity(), angles);
  }
  ValidateGrasp(scene, recipe.tolerance);
  return scene;
}

void ValidateGrasp(const GraspScene& scene, double tolerance) {
  const SceneGeometry geo(scene);
  for (Finger f : kAllFingers) {
    const auto c = geo.FingerClearance(f, FingerAngles(scene.skeleton, scene.grasp.angles(), f));
    if (c.object < tolerance || c.hand < tolerance) {
      throw Error(ErrorCode::kRejectedPose,
                  fmt::format("scene '{}': {} at the grasp is {:.2f} mm from the object and {:.2f} mm from the hand",
                              scene.id, ToString(f), c.object * 1e3, c.hand * 1e3));
    }
  }
}

GraspScene FreeHandScene(const HandSkeleton& skel, std::string id) {
  return GraspScene{std::move(id), "", skel, HandPose::Rest(skel), TriMesh(), Transform::Identity()};
}

namespace {

Eigen::VectorXd OpenPose(const HandSkeleton& skel, const std::array<std::vector<double>, 5>& fingers) {
  Eigen::VectorXd angles = HandPose::Rest(skel).angles();
  for (Finger f : kAllFingers) {
    const auto& dofs = skel.finger_dofs(f);
    for (std::size_t i = 0; i < dofs.size(); ++i) angles[dofs[i]] = fingers[static_cast<int>(f)][i];
  }
  return angles;
}

GraspRecipe LateralTripodBall(const HandSkeleton& skel) {
  GraspRecipe r;
  r.id = "lateral_tripod_ball";
  r.object_name = "racquetball";
  r.object = MakeIcosphere(0.032, 3);
  r.object_transform = Pose(Vec3(-0.114, -0.046, -0.002));
  r.open = OpenPose(skel, {Deg({0, 0, 0, 0}), Deg({0, 0, 0, 0}), Deg({0, 0, 0, 0}), Deg({0, 0, 0, 0}),
                           Deg({0, 0, 0, 0})});
  r.closed[0] = Deg({-10, 45, 40, 40});
  r.closed[1] = Deg({0, 45, 70, 80});
  r.closed[2] = Deg({0, 80, 90, 60});
  r.closed[3] = Deg({0, 85, 95, 70});
  r.closed[4] = Deg({0, 40, 60, 90});
  return r;
}

GraspRecipe MediumWrapCan(const HandSkeleton& skel) {
  GraspRecipe r;
  r.id = "medium_wrap_can";
  r.object_name = "soup_can";
  r.object = MakeCylinder(0.033, 0.110, 48);
  r.object_transform = Pose(Vec3(-0.092, -0.060, 0.043));
  r.open = OpenPose(skel, {Deg({20, -15, 0, 0}), Deg({0, 0, 0, 0}), Deg({0, 0, 0, 0}), Deg({0, 0, 0, 0}),
                           Deg({0, 0, 0, 0})});
  r.closed[0] = Deg({20, 0, 30, 80});
  r.closed[1] = Deg({0, 90, 100, 80});
  r.closed[2] = Deg({0, 90, 100, 80});
  r.closed[3] = Deg({0, 20, 40, 90});
  r.closed[4] = Deg({0, 90, 100, 80});
  return r;
}

GraspRecipe WritingTripodMarker(const HandSkeleton& skel) {
  GraspRecipe r;
  r.id = "writing_tripod_marker";
  r.object_name = "large_marker";
  r.object = MakeCylinder(0.0095, 0.130, 32);
  const Vec3 axis = Vec3(0.35, 0.25, 1.0).normalized();
  r.object_transform = Pose(Vec3(-0.128, -0.045, 0.015), AxisTo(Vec3::UnitZ(), axis));
  r.open = OpenPose(skel, {Deg({-20, -15, 0, 0}), Deg({0, 0, 0, 0}), Deg({0, 0, 0, 0}), Deg({0, 0, 0, 0}),
                           Deg({0, 0, 0, 0})});
  r.closed[0] = Deg({-5, 40, 40, 40});
  r.closed[1] = Deg({0, 60, 60, 40});
  r.closed[2] = Deg({0, 70, 70, 50});
  r.closed[3] = Deg({0, 85, 95, 70});
  r.closed[4] = Deg({0, 85, 95, 70});
  return r;
}

GraspScene DistalScissors(const HandSkeleton& skel) {
  // Finger rings are threaded onto the thumb and ring-finger middle segments
  // at a fixed grasp, then blades are added beyond the index finger.
  Eigen::VectorXd angles = OpenPose(skel, {Deg({0, 20, 20, 10}), Deg({0, 20, 30, 20}), Deg({0, 35, 45, 25}),
                                           Deg({0, 45, 60, 30}), Deg({0, 55, 70, 40})});
  const HandPose grasp(skel, Transform::Identity(), angles);
  const auto bones = ForwardKinematics(skel, grasp);
  std::vector<TriMesh> parts;
  const auto ring_on = [&](Finger f, std::size_t segment) {
    const int b = skel.finger_bones(f)[segment];
    const int c = skel.chain_child(b);
    const Vec3 a = bones[b].translation(), e = bones[c].translation();
    const double hole = skel.bone_radius(b) + 0.0022;
    const double minor = 0.0035;
    parts.push_back(MakeTorus(hole + minor, minor, 40, 12).Transformed(Pose(0.5 * (a + e), AxisTo(Vec3::UnitZ(), (e - a).normalized()))));
  };
  ring_on(Finger::kThumb, 2);
  ring_on(Finger::kRing, 1);
  const Vec3 index_tip = bones[skel.fingertip(Finger::kIndex)].translation();
  parts.push_back(MakeBox(Vec3(0.045, 0.003, 0.008)).Transformed(Pose(index_tip + Vec3(-0.050, -0.010, -0.004))));
  GraspScene scene{"distal_scissors", "scissors", skel, grasp, Merge(parts), Transform::Identity()};
  ValidateGrasp(scene);
  return scene;
}

}  // namespace

std::vector<GraspScene> ExampleScenes(const HandSkeleton& skel) {
  std::vector<GraspScene> scenes;
  scenes.push_back(CloseGrasp(skel, LateralTripodBall(skel)));
  scenes.push_back(CloseGrasp(skel, MediumWrapCan(skel)));
  scenes.push_back(CloseGrasp(skel, WritingTripodMarker(skel)));
  scenes.push_back(DistalScissors(skel));
  return scenes;
}

}  // namespace graspr

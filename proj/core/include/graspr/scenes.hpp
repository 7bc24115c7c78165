#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "graspr/simulator.hpp"

namespace graspr {

/// How to close a hand onto an object: every finger starts at `open` and is
/// driven toward its `closed` angles (finger DOFs, radians) until its skin is
/// `gap` from the object or it would touch the rest of the hand.
struct GraspRecipe {
  std::string id;
  std::string object_name;
  TriMesh object;
  Transform object_transform = Transform::Identity();
  Eigen::VectorXd open;
  std::array<std::optional<std::vector<double>>, 5> closed;
  std::vector<Finger> order = {Finger::kIndex, Finger::kMiddle, Finger::kRing, Finger::kLittle, Finger::kThumb};
  double gap = 0.0015;
  double tolerance = kDefaultCollisionTolerance;
};

GraspScene CloseGrasp(const HandSkeleton& skeleton, const GraspRecipe& recipe);

/// Throws kRejectedPose when some finger at the grasp is closer than
/// `tolerance` to the object, the rest of the hand, or itself.
void ValidateGrasp(const GraspScene& scene, double tolerance = kDefaultCollisionTolerance);

/// The four bundled study conditions: lateral tripod on a ball, medium wrap on
/// a can, writing tripod on a marker and a distal grasp on scissors.
std::vector<GraspScene> ExampleScenes(const HandSkeleton& skeleton);

GraspScene FreeHandScene(const HandSkeleton& skeleton, std::string id = "free_hand");

}  // namespace graspr

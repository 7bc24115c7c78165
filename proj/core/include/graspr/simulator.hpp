#pragma once

#include <limits>
#include <string>
#include <vector>

#include "graspr/geometry.hpp"
#include "graspr/kinematics.hpp"

namespace graspr {

/// A hand holding an object. The object mesh is stored in its own frame and
/// placed in the world by `object_transform`; an empty mesh means a free hand.
struct GraspScene {
  std::string id;
  std::string object_name;
  HandSkeleton skeleton;
  HandPose grasp;
  TriMesh object;
  Transform object_transform = Transform::Identity();
};

/// Skin capsule attached to one bone segment. `finger` is -1 for the palm.
struct SkinCapsule {
  Capsule capsule;
  int bone = 0;
  int finger = -1;
  bool proximal = false;  // first segment of its finger chain
};

/// Capsules for every bone with a chain child (finger segments) plus palm
/// capsules from the wrist to each finger's first joint. Distal segments are
/// shortened by their radius so the fingertip point lies on the skin.
std::vector<SkinCapsule> HandSkin(const HandSkeleton& skeleton, std::span<const Transform> bones);

struct SimulationConfig {
  double step = DegToRad(5.0);
  double collision_tolerance = kDefaultCollisionTolerance;
  double alpha = 0.1;
};

struct ReachSample {
  Finger finger = Finger::kIndex;
  std::vector<double> angles;  // the finger's DOFs, skeleton order
  Vec3 position = Vec3::Zero();  // fingertip, wrist frame
};

enum class VolumeSource { kAlphaShape, kConvexHull, kNone };
std::string_view ToString(VolumeSource source);

struct ReachCloud {
  Finger finger = Finger::kIndex;
  std::vector<ReachSample> samples;
  Vec3 centroid = Vec3::Zero();
  double volume = 0.0;
  VolumeSource volume_source = VolumeSource::kNone;
  AlphaShape boundary;
  Vec3 initial_fingertip = Vec3::Zero();
  std::vector<std::string> warnings;

  std::vector<Vec3> positions() const;
};

/// Immutable per-scene geometry shared by the simulator, region extraction
/// and feature computation.
class SceneGeometry {
 public:
  explicit SceneGeometry(const GraspScene& scene);

  const GraspScene& scene() const { return scene_; }
  const HandSkeleton& skeleton() const { return scene_.skeleton; }
  const std::vector<Transform>& grasp_bones() const { return grasp_bones_; }
  const WristFrame& frame() const { return frame_; }
  bool has_object() const { return !world_object_.empty(); }
  const TriMesh& world_object() const { return world_object_; }
  const MeshBvh& object_bvh() const { return bvh_; }
  const std::vector<SkinCapsule>& grasp_skin() const { return skin_; }

  /// Palm plus every finger except `acting`, at the grasp pose.
  std::vector<SkinCapsule> StaticSkin(Finger acting) const;

  /// Wrist-frame point distances. Object distance is +inf without an object.
  double DistanceToObject(const Vec3& local) const;
  double DistanceToStaticHand(Finger acting, const Vec3& local) const;

  /// Grasp angles with the finger's DOFs replaced.
  Eigen::VectorXd PoseAngles(Finger finger, std::span<const double> finger_angles) const;
  Vec3 InitialFingertip(Finger finger) const;

  /// Whether the finger at the given angles (others at the grasp) touches the
  /// object, the static hand or itself closer than `tolerance`.
  bool Collides(Finger finger, std::span<const double> finger_angles, double tolerance) const;

  struct Clearance {
    double object = std::numeric_limits<double>::infinity();
    double hand = std::numeric_limits<double>::infinity();  // static hand and own segments
  };
  /// Minimum skin separations of the finger at the given angles.
  Clearance FingerClearance(Finger finger, std::span<const double> finger_angles) const;

 private:
  GraspScene scene_;
  std::vector<Transform> grasp_bones_;
  WristFrame frame_;
  TriMesh world_object_;
  MeshBvh bvh_;
  std::vector<SkinCapsule> skin_;
};

/// Grid sweep over one finger's DOFs within the ROM. Samples are collision
/// free and ordered lexicographically by DOF grid index.
ReachCloud SimulateFinger(const SceneGeometry& geometry, Finger finger, const SimulationConfig& config = {});
ReachCloud SimulateFinger(const GraspScene& scene, Finger finger, const SimulationConfig& config = {});

/// Thumb to little.
std::vector<ReachCloud> SimulateScene(const GraspScene& scene, const SimulationConfig& config = {});

/// Grid values lo, lo + step, ... not exceeding hi (hi included when aligned).
std::vector<double> SweepGrid(double lo, double hi, double step);

/// Fills centroid, boundary and volume from the samples.
void FinalizeCloud(ReachCloud& cloud, double alpha);

}  // namespace graspr

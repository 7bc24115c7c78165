#pragma once

#include <array>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Geometry>

namespace graspr {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Transform = Eigen::Isometry3d;

enum class Finger { kThumb = 0, kIndex = 1, kMiddle = 2, kRing = 3, kLittle = 4 };

inline constexpr std::array<Finger, 5> kAllFingers = {
    Finger::kThumb, Finger::kIndex, Finger::kMiddle, Finger::kRing, Finger::kLittle};

std::string_view ToString(Finger finger);
Finger FingerFromString(std::string_view name);

struct Bone {
  std::string name;
  int parent = -1;
  Vec3 offset = Vec3::Zero();  // unit-scale rest offset from the parent origin, meters
  double radius = 0.0;         // skin capsule radius for the segment to this bone's child
};

struct Joint {
  int bone = 0;
  std::vector<Vec3> axes;                          // unit axes, applied in order
  std::vector<std::pair<double, double>> limits;  // radians per axis
};

/// Rigid articulated hand. Bones are stored in topological order (parent
/// index strictly smaller than the child's). Each joint rotates the frame of
/// one bone; the flattened joint axes form the pose's degrees of freedom.
class HandSkeleton {
 public:
  HandSkeleton(std::vector<Bone> bones, std::vector<Joint> joints,
               std::array<int, 5> fingertips, double scale = 1.0, double palm_radius = 0.0);

  const std::vector<Bone>& bones() const { return bones_; }
  const std::vector<Joint>& joints() const { return joints_; }
  const std::array<int, 5>& fingertips() const { return fingertips_; }
  double scale() const { return scale_; }
  double palm_radius() const { return palm_radius_ * scale_; }
  double unit_palm_radius() const { return palm_radius_; }

  int dof_count() const { return dof_count_; }
  int fingertip(Finger f) const { return fingertips_[static_cast<int>(f)]; }
  Vec3 rest_offset(int bone) const { return bones_[bone].offset * scale_; }
  double bone_radius(int bone) const { return bones_[bone].radius * scale_; }

  /// Joint index acting on `bone`, or -1.
  int joint_of_bone(int bone) const { return joint_of_bone_[bone]; }
  int first_dof(int joint) const { return first_dof_[joint]; }
  /// First child of `bone` along its finger chain, or -1 for terminal bones.
  int chain_child(int bone) const { return chain_child_[bone]; }

  /// Bones of a finger from the most proximal (child of the root) to the tip.
  const std::vector<int>& finger_bones(Finger f) const { return finger_bones_[static_cast<int>(f)]; }
  const std::vector<int>& finger_joints(Finger f) const { return finger_joints_[static_cast<int>(f)]; }
  const std::vector<int>& finger_dofs(Finger f) const { return finger_dofs_[static_cast<int>(f)]; }

  /// Finger owning `bone`, or -1 for the root.
  int finger_of_bone(int bone) const { return finger_of_bone_[bone]; }

  std::pair<double, double> dof_limits(int dof) const;

  HandSkeleton Scaled(double scale) const;

 private:
  std::vector<Bone> bones_;
  std::vector<Joint> joints_;
  std::array<int, 5> fingertips_;
  double scale_;
  double palm_radius_;
  int dof_count_ = 0;
  std::vector<int> joint_of_bone_;
  std::vector<int> first_dof_;
  std::vector<int> chain_child_;
  std::vector<int> finger_of_bone_;
  std::vector<std::pair<int, int>> dof_owner_;  // (joint, axis)
  std::array<std::vector<int>, 5> finger_bones_;
  std::array<std::vector<int>, 5> finger_joints_;
  std::array<std::vector<int>, 5> finger_dofs_;
};

/// Wrist transform plus one angle per degree of freedom. Construction checks
/// the angles against the skeleton's range of motion.
class HandPose {
 public:
  HandPose(const HandSkeleton& skeleton, const Transform& wrist, Eigen::VectorXd angles);

  static HandPose Rest(const HandSkeleton& skeleton, const Transform& wrist = Transform::Identity());

  const Transform& wrist() const { return wrist_; }
  const Eigen::VectorXd& angles() const { return angles_; }

 private:
  Transform wrist_;
  Eigen::VectorXd angles_;
};

/// Validates angles against the ROM table; throws kRejectedPose.
void CheckPose(const HandSkeleton& skeleton, const Eigen::VectorXd& angles);

/// Local rotation of one joint for the given angle vector.
Mat3 JointRotation(const HandSkeleton& skeleton, int joint, const Eigen::VectorXd& angles);

std::vector<Transform> ForwardKinematics(const HandSkeleton& skeleton, const HandPose& pose);

/// Allocation-free variant used by the sweep; `out` must hold one entry per bone.
/// Angles are not range-checked.
void ForwardKinematicsInto(const HandSkeleton& skeleton, const Transform& wrist,
                           const Eigen::VectorXd& angles, std::span<Transform> out);

std::array<Vec3, 5> FingertipPositions(const HandSkeleton& skeleton,
                                       std::span<const Transform> bone_transforms);

struct WristFrame {
  Vec3 origin = Vec3::Zero();
  Vec3 x = Vec3::UnitX();
  Vec3 y = Vec3::UnitY();
  Vec3 z = Vec3::UnitZ();

  Mat3 rotation() const;
  /// World point expressed in wrist-frame coordinates.
  Vec3 ToLocal(const Vec3& world) const;
  Vec3 ToWorld(const Vec3& local) const;
};

/// Y: dorsal normal of the plane through the finger metacarpal heads.
/// Z: little to index metacarpal head. X = Y x Z, pointing toward the forearm.
WristFrame ComputeWristFrame(const HandSkeleton& skeleton, const HandPose& pose);
WristFrame ComputeWristFrame(const HandSkeleton& skeleton, std::span<const Transform> bone_transforms);

/// Sum over the finger's joints of the geodesic angle between joint
/// orientations, with quaternions canonicalized to w >= 0.
double JointQuaternionDistance(const HandSkeleton& skeleton, const HandPose& a, const HandPose& b,
                               Finger finger);

/// Sum of |a_i - b_i| over the finger's degrees of freedom.
double JointAngleAbsSum(const HandSkeleton& skeleton, const HandPose& a, const HandPose& b,
                        Finger finger);
double JointAngleAbsSum(std::span<const double> a, std::span<const double> b);

/// Default right-hand skeleton: 4-DOF fingers (MCP abduction + flexion, PIP,
/// DIP) and a 4-DOF thumb (CMC 2-DOF, MCP, IP); 20 DOF in total. Sized for a
/// 17.65 cm hand length and 7.93 cm metacarpal breadth.
HandSkeleton DefaultSkeleton();

inline constexpr double kDefaultHandLength = 0.1765;
inline constexpr double kDefaultMetacarpalBreadth = 0.0793;

double DegToRad(double deg);
double RadToDeg(double rad);

}  // namespace graspr

#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "graspr/emg.hpp"
#include "graspr/sampler.hpp"
#include "graspr/simulator.hpp"

namespace graspr {

inline constexpr int kFeatureCount = 16;

/// Model feature order. Units: meters, radians, cubic meters; cage ratio is
/// dimensionless and vemg_abs_sum is in normalized sEMG units.
inline constexpr std::array<std::string_view, kFeatureCount> kFeatureNames = {
    "target_x",
    "target_y",
    "target_z",
    "target_dist_body",
    "target_dist_object",
    "target_dist_centroid",
    "joint_x",
    "joint_y",
    "joint_z",
    "joint_to_target_euclid",
    "joint_angular_distance",
    "joint_angle_abs_sum",
    "reach_volume",
    "cage_ratio",
    "object_volume",
    "vemg_abs_sum",
};

enum FeatureIndex : int {
  kTargetX = 0,
  kTargetY,
  kTargetZ,
  kTargetDistBody,
  kTargetDistObject,
  kTargetDistCentroid,
  kJointX,
  kJointY,
  kJointZ,
  kJointToTargetEuclid,
  kJointAngularDistance,
  kJointAngleAbsSum,
  kReachVolume,
  kCageRatio,
  kObjectVolume,
  kVemgAbsSum,
};

using FeatureVector = Eigen::Matrix<double, kFeatureCount, 1>;

/// Index of a feature name, or -1.
int FeatureIndexOf(std::string_view name);
std::vector<std::string> FeatureNameList();

/// a - b.
FeatureVector DeltaFeatures(const FeatureVector& a, const FeatureVector& b);

/// Candidates screened out of the model vector, kept for selection reports.
struct DiagnosticFeatures {
  double forward_position = 0.0;      // along -X of the wrist frame
  double dist_alpha_shape = 0.0;      // to the reach cloud's alpha-shape boundary
  double dist_convex_hull = 0.0;      // to the reach cloud's hull boundary
  double joint_angle_euclid = 0.0;    // L2 norm of the finger's angle change
  double anatomical_loss = 0.0;       // squared ROM-normalized distance from mid-range

  static constexpr std::array<std::string_view, 5> kNames = {
      "forward_position", "dist_alpha_shape", "dist_convex_hull", "joint_angle_euclid", "anatomical_loss"};
  std::array<double, 5> values() const {
    return {forward_position, dist_alpha_shape, dist_convex_hull, joint_angle_euclid, anatomical_loss};
  }
};

struct FeatureOptions {
  /// Without an EMG model, vemg_abs_sum is 0 and emg_present() is false
  /// instead of an error.
  bool geometric_only = false;
  double contact_tolerance = kDefaultContactTolerance;
};

/// Per-scene feature computation. Keeps references to the geometry, clouds
/// and EMG model, which must outlive it.
class FeatureExtractor {
 public:
  /// `clouds` holds one cloud per finger, any order.
  FeatureExtractor(const SceneGeometry& geometry, std::span<const ReachCloud> clouds, const EmgModel* emg,
                   const FeatureOptions& options = {});

  const SceneGeometry& geometry() const { return geo_; }
  const ReachCloud& cloud(Finger f) const;
  double cage_ratio() const { return cage_ratio_; }
  double object_volume() const { return object_volume_; }
  bool emg_present() const { return emg_ != nullptr; }

  /// Features of reaching `target` (wrist frame) with the finger at
  /// `finger_angles`, the rest of the hand at the grasp.
  FeatureVector Compute(Finger finger, std::span<const double> finger_angles, const Vec3& target) const;
  FeatureVector ComputeSample(Finger finger, int sample) const;

  DiagnosticFeatures Diagnostics(Finger finger, std::span<const double> finger_angles, const Vec3& target) const;

 private:
  struct Surfaces {
    std::optional<MeshBvh> alpha;
    std::optional<MeshBvh> hull;
  };
  const Surfaces& SurfacesOf(Finger f) const;

  const SceneGeometry& geo_;
  std::array<const ReachCloud*, 5> clouds_{};
  const EmgModel* emg_;
  PoseAngleMapping mapping_;
  double cage_ratio_ = 0.0;
  double object_volume_ = 0.0;
  mutable std::array<std::optional<Surfaces>, 5> surfaces_;
};

/// A target with its reach pose and features.
struct ReachTask {
  TargetPoint target;
  std::vector<double> finger_angles;
  FeatureVector features = FeatureVector::Zero();
};

/// Looks up each target's cloud sample, checks that forward kinematics of the
/// sample reproduces the target within 1e-9 m and computes its features.
ReachTask MakeTask(const FeatureExtractor& extractor, const TargetPoint& target);

}  // namespace graspr

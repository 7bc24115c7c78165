#include "graspr/features.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "graspr/error.hpp"

namespace graspr {

int FeatureIndexOf(std::string_view name) {
  for (int i = 0; i < kFeatureCount; ++i) {
    if (kFeatureNames[i] == name) return i;
  }
  return -1;
}

std::vector<std::string> FeatureNameList() { return {kFeatureNames.begin(), kFeatureNames.end()}; }

FeatureVector DeltaFeatures(const FeatureVector& a, const FeatureVector& b) { return a - b; }

FeatureExtractor::FeatureExtractor(const SceneGeometry& geometry, std::span<const ReachCloud> clouds,
                                   const EmgModel* emg, const FeatureOptions& options)
    : geo_(geometry), emg_(emg), mapping_(PoseAngleMapping::Default(geometry.skeleton())) {
  for (const ReachCloud& c : clouds) clouds_[static_cast<int>(c.finger)] = &c;
  if (emg_ == nullptr && !options.geometric_only) {
    throw Error(ErrorCode::kInvalidArgument, "missing EMG model",
                "vemg_abs_sum needs an EMG model; enable geometric-only mode to compute without it");
  }
  if (emg_ != nullptr) emg_->Validate();
  if (geo_.has_object()) {
    object_volume_ = geo_.world_object().Volume();
    std::vector<Capsule> skin;
    for (const SkinCapsule& c : geo_.grasp_skin()) skin.push_back(c.capsule);
    const std::vector<Vec3> contacts = ContactPoints(skin, geo_.world_object(), options.contact_tolerance);
    cage_ratio_ = ComputeCageRatio(contacts, geo_.world_object()).ratio;
  }
}

const ReachCloud& FeatureExtractor::cloud(Finger f) const {
  const ReachCloud* c = clouds_[static_cast<int>(f)];
  if (c == nullptr) throw Error(ErrorCode::kNotFound, fmt::format("no reach cloud for {}", ToString(f)));
  return *c;
}

FeatureVector FeatureExtractor::Compute(Finger finger, std::span<const double> finger_angles,
                                        const Vec3& target) const {
  const ReachCloud& c = cloud(finger);
  const HandSkeleton& skel = geo_.skeleton();
  const Eigen::VectorXd angles = geo_.PoseAngles(finger, finger_angles);
  const HandPose reach(skel, geo_.scene().grasp.wrist(), angles);

  FeatureVector f;
  f[kTargetX] = target.x();
  f[kTargetY] = target.y();
  f[kTargetZ] = target.z();
  f[kTargetDistBody] = std::max(0.0, geo_.DistanceToStaticHand(finger, target));
  f[kTargetDistObject] = geo_.has_object() ? std::max(0.0, geo_.DistanceToObject(target)) : 0.0;
  f[kTargetDistCentroid] = (target - c.centroid).norm();
  f[kJointX] = c.initial_fingertip.x();
  f[kJointY] = c.initial_fingertip.y();
  f[kJointZ] = c.initial_fingertip.z();
  f[kJointToTargetEuclid] = (target - c.initial_fingertip).norm();
  f[kJointAngularDistance] = JointQuaternionDistance(skel, geo_.scene().grasp, reach, finger);
  f[kJointAngleAbsSum] = JointAngleAbsSum(skel, geo_.scene().grasp, reach, finger);
  f[kReachVolume] = c.volume;
  f[kCageRatio] = cage_ratio_;
  f[kObjectVolume] = object_volume_;
  f[kVemgAbsSum] = emg_ != nullptr ? EmgAbsSum(*emg_, mapping_.Map(angles)) : 0.0;
  return f;
}

FeatureVector FeatureExtractor::ComputeSample(Finger finger, int sample) const {
  const ReachCloud& c = cloud(finger);
  if (sample < 0 || static_cast<std::size_t>(sample) >= c.samples.size()) {
    throw Error(ErrorCode::kNotFound, fmt::format("{} cloud has no sample {}", ToString(finger), sample));
  }
  const ReachSample& s = c.samples[sample];
  return Compute(finger, s.angles, s.position);
}

const FeatureExtractor::Surfaces& FeatureExtractor::SurfacesOf(Finger f) const {
  auto& slot = surfaces_[static_cast<int>(f)];
  if (slot) return *slot;
  Surfaces s;
  const ReachCloud& c = cloud(f);
  const std::vector<Vec3> pts = c.positions();
  if (!c.boundary.faces.empty()) s.alpha.emplace(TriMesh(pts, c.boundary.faces));
  try {
    const ConvexHull hull = ComputeConvexHull(pts);
    s.hull.emplace(TriMesh(pts, hull.faces));
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kDegenerateGeometry) throw;
  }
  slot = std::move(s);
  return *slot;
}

DiagnosticFeatures FeatureExtractor::Diagnostics(Finger finger, std::span<const double> finger_angles,
                                                 const Vec3& target) const {
  const HandSkeleton& skel = geo_.skeleton();
  const auto& dofs = skel.finger_dofs(finger);
  const Eigen::VectorXd& grasp = geo_.scene().grasp.angles();
  if (finger_angles.size() != dofs.size()) {
    throw Error(ErrorCode::kShapeMismatch, fmt::format("{} has {} DOF", ToString(finger), dofs.size()));
  }
  DiagnosticFeatures d;
  d.forward_position = -target.x();
  const Surfaces& s = SurfacesOf(finger);
  d.dist_alpha_shape = s.alpha && !s.alpha->empty() ? s.alpha->Distance(target) : 0.0;
  d.dist_convex_hull = s.hull && !s.hull->empty() ? s.hull->Distance(target) : 0.0;
  double sq = 0.0, loss = 0.0;
  for (std::size_t i = 0; i < dofs.size(); ++i) {
    const double delta = finger_angles[i] - grasp[dofs[i]];
    sq += delta * delta;
    const auto [lo, hi] = skel.dof_limits(dofs[i]);
    const double half = 0.5 * (hi - lo);
    if (half > 0.0) {
      const double u = (finger_angles[i] - 0.5 * (hi + lo)) / half;
      loss += u * u;
    }
  }
  d.joint_angle_euclid = std::sqrt(sq);
  d.anatomical_loss = loss;
  return d;
}

ReachTask MakeTask(const FeatureExtractor& extractor, const TargetPoint& target) {
  const ReachCloud& c = extractor.cloud(target.finger);
  if (target.sample < 0 || static_cast<std::size_t>(target.sample) >= c.samples.size()) {
    throw Error(ErrorCode::kDanglingReference,
                fmt::format("target {} refers to missing sample {}", target.id, target.sample));
  }
  const ReachSample& s = c.samples[target.sample];
  const SceneGeometry& geo = extractor.geometry();
  const HandSkeleton& skel = geo.skeleton();
  const HandPose pose(skel, geo.scene().grasp.wrist(), geo.PoseAngles(target.finger, s.angles));
  const std::vector<Transform> bones = ForwardKinematics(skel, pose);
  const Vec3 tip = geo.frame().ToLocal(bones[skel.fingertip(target.finger)].translation());
  if ((tip - target.position).norm() > 1e-9) {
    throw Error(ErrorCode::kInvalidArgument,
                fmt::format("target {} is not the fingertip of its reach pose ({:.3g} m apart)", target.id,
                            (tip - target.position).norm()));
  }
  ReachTask task;
  task.target = target;
  task.finger_angles = s.angles;
  task.features = extractor.Compute(target.finger, s.angles, target.position);
  return task;
}

}  // namespace graspr

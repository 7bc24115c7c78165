#include "graspr/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "graspr/error.hpp"

namespace graspr {

std::string_view ToString(VolumeSource source) {
  switch (source) {
    case VolumeSource::kAlphaShape: return "alpha_shape";
    case VolumeSource::kConvexHull: return "convex_hull";
    case VolumeSource::kNone: return "none";
  }
  return "none";
}

std::vector<Vec3> ReachCloud::positions() const {
  std::vector<Vec3> out;
  out.reserve(samples.size());
  for (const ReachSample& s : samples) out.push_back(s.position);
  return out;
}

namespace {

bool IsTipBone(const HandSkeleton& skel, int bone) { return skel.chain_child(bone) < 0; }

// Segment from a bone's origin to its chain child's origin, shortened at a
// fingertip so the tip lies on the capsule surface.
Capsule SegmentCapsule(const HandSkeleton& skel, int bone, const Vec3& origin, const Vec3& child_origin) {
  const double r = skel.bone_radius(bone);
  Vec3 end = child_origin;
  if (IsTipBone(skel, skel.chain_child(bone))) {
    const Vec3 d = child_origin - origin;
    const double len = d.norm();
    end = len > r ? Vec3(origin + d * ((len - r) / len)) : origin;
  }
  return {origin, end, r};
}

}  // namespace

std::vector<SkinCapsule> HandSkin(const HandSkeleton& skel, std::span<const Transform> bones) {
  std::vector<SkinCapsule> skin;
  if (skel.palm_radius() > 0.0) {
    for (Finger f : kAllFingers) {
      if (f == Finger::kThumb) continue;
      const int first = skel.finger_bones(f).front();
      const int root = skel.bones()[first].parent;
      skin.push_back({{bones[root].translation(), bones[first].translation(), skel.palm_radius()}, root, -1, false});
    }
  }
  for (Finger f : kAllFingers) {
    const auto& chain = skel.finger_bones(f);
    for (std::size_t k = 0; k < chain.size(); ++k) {
      const int b = chain[k];
      const int child = skel.chain_child(b);
      if (child < 0 || skel.bone_radius(b) <= 0.0) continue;
      skin.push_back({SegmentCapsule(skel, b, bones[b].translation(), bones[child].translation()), b,
                      static_cast<int>(f), k == 0});
    }
  }
  return skin;
}

// ---------------------------------------------------------------------------

SceneGeometry::SceneGeometry(const GraspScene& scene) : scene_(scene) {
  grasp_bones_ = ForwardKinematics(scene_.skeleton, scene_.grasp);
  frame_ = ComputeWristFrame(scene_.skeleton, grasp_bones_);
  if (!scene_.object.empty()) {
    world_object_ = scene_.object.Transformed(scene_.object_transform);
    bvh_ = MeshBvh(world_object_);
  }
  skin_ = HandSkin(scene_.skeleton, grasp_bones_);
}

std::vector<SkinCapsule> SceneGeometry::StaticSkin(Finger acting) const {
  std::vector<SkinCapsule> out;
  for (const SkinCapsule& c : skin_)
    if (c.finger != static_cast<int>(acting)) out.push_back(c);
  return out;
}

double SceneGeometry::DistanceToObject(const Vec3& local) const {
  if (!has_object()) return std::numeric_limits<double>::infinity();
  return bvh_.Distance(frame_.ToWorld(local));
}

double SceneGeometry::DistanceToStaticHand(Finger acting, const Vec3& local) const {
  const Vec3 p = frame_.ToWorld(local);
  double best = std::numeric_limits<double>::infinity();
  for (const SkinCapsule& c : skin_) {
    if (c.finger == static_cast<int>(acting)) continue;
    best = std::min(best, PointCapsuleDistance(p, c.capsule));
  }
  return best;
}

Eigen::VectorXd SceneGeometry::PoseAngles(Finger finger, std::span<const double> finger_angles) const {
  const auto& dofs = skeleton().finger_dofs(finger);
  if (finger_angles.size() != dofs.size()) {
    throw Error(ErrorCode::kShapeMismatch,
                fmt::format("{} has {} DOF, got {} angles", ToString(finger), dofs.size(), finger_angles.size()));
  }
  Eigen::VectorXd angles = scene_.grasp.angles();
  for (std::size_t i = 0; i < dofs.size(); ++i) angles[dofs[i]] = finger_angles[i];
  return angles;
}

Vec3 SceneGeometry::InitialFingertip(Finger finger) const {
  return frame_.ToLocal(grasp_bones_[skeleton().fingertip(finger)].translation());
}

namespace {

// Collision state for one acting finger; capsules of the acting finger are
// checked one segment at a time so that sweeps can prune early.
class FingerChecker {
 public:
  FingerChecker(const SceneGeometry& geo, Finger finger, double tolerance)
      : geo_(geo), finger_(static_cast<int>(finger)), tol_(tolerance) {
    for (const SkinCapsule& c : geo.grasp_skin()) {
      if (c.finger == finger_) continue;
      (c.finger < 0 ? palm_ : others_).push_back(c.capsule);
    }
  }

  // `placed` holds the acting finger's capsules for chain positions < k.
  bool SegmentCollides(const Capsule& cap, std::size_t k, std::span<const Capsule> placed) const {
    if (geo_.has_object() && geo_.object_bvh().CapsuleWithin(cap, tol_)) return true;
    for (const Capsule& o : others_)
      if (CapsuleSeparation(cap, o) < tol_) return true;
    if (k > 0) {
      for (const Capsule& o : palm_)
        if (CapsuleSeparation(cap, o) < tol_) return true;
    }
    for (std::size_t j = 0; j + 1 < k; ++j)
      if (CapsuleSeparation(cap, placed[j]) < tol_) return true;
    return false;
  }

 private:
  const SceneGeometry& geo_;
  int finger_;
  double tol_;
  std::vector<Capsule> palm_;
  std::vector<Capsule> others_;
};

}  // namespace

bool SceneGeometry::Collides(Finger finger, std::span<const double> finger_angles, double tolerance) const {
  const Eigen::VectorXd angles = PoseAngles(finger, finger_angles);
  std::vector<Transform> bones(skeleton().bones().size());
  ForwardKinematicsInto(skeleton(), scene_.grasp.wrist(), angles, bones);
  const FingerChecker checker(*this, finger, tolerance);
  std::vector<Capsule> placed;
  const auto& chain = skeleton().finger_bones(finger);
  for (std::size_t k = 0; k < chain.size(); ++k) {
    const int b = chain[k];
    const int child = skeleton().chain_child(b);
    if (child < 0) break;
    const Capsule cap = SegmentCapsule(skeleton(), b, bones[b].translation(), bones[child].translation());
    if (skeleton().bone_radius(b) > 0.0 && checker.SegmentCollides(cap, k, placed)) return true;
    placed.push_back(cap);
  }
  return false;
}

SceneGeometry::Clearance SceneGeometry::FingerClearance(Finger finger,
                                                       std::span<const double> finger_angles) const {
  const Eigen::VectorXd angles = PoseAngles(finger, finger_angles);
  std::vector<Transform> bones(skeleton().bones().size());
  ForwardKinematicsInto(skeleton(), scene_.grasp.wrist(), angles, bones);
  Clearance out;
  std::vector<Capsule> placed;
  const auto& chain = skeleton().finger_bones(finger);
  for (std::size_t k = 0; k < chain.size(); ++k) {
    const int b = chain[k];
    const int child = skeleton().chain_child(b);
    if (child < 0) break;
    const Capsule cap = SegmentCapsule(skeleton(), b, bones[b].translation(), bones[child].translation());
    placed.push_back(cap);
    if (skeleton().bone_radius(b) <= 0.0) continue;
    if (has_object()) out.object = std::min(out.object, bvh_.CapsuleSeparation(cap));
    for (const SkinCapsule& o : skin_) {
      if (o.finger == static_cast<int>(finger) || (o.finger < 0 && k == 0)) continue;
      out.hand = std::min(out.hand, CapsuleSeparation(cap, o.capsule));
    }
    for (std::size_t j = 0; j + 1 < k; ++j) out.hand = std::min(out.hand, CapsuleSeparation(cap, placed[j]));
  }
  return out;
}

std::vector<double> SweepGrid(double lo, double hi, double step) {
  if (!(step > 0.0)) throw Error(ErrorCode::kInvalidArgument, "sweep step must be positive");
  std::vector<double> values;
  const long count = static_cast<long>(std::floor((hi - lo) / step + 1e-9)) + 1;
  values.reserve(count);
  for (long i = 0; i < count; ++i) values.push_back(std::min(lo + static_cast<double>(i) * step, hi));
  return values;
}

namespace {

class Sweep {
 public:
  Sweep(const SceneGeometry& geo, Finger finger, const SimulationConfig& config)
      : geo_(geo), skel_(geo.skeleton()), finger_(finger), checker_(geo, finger, config.collision_tolerance) {
    chain_ = skel_.finger_bones(finger);
    const auto& dofs = skel_.finger_dofs(finger);
    angles_.assign(dofs.size(), 0.0);
    placed_.resize(chain_.size());
    // Per chain bone: the grid of each of its joint axes and the rotation per grid value.
    levels_.resize(chain_.size());
    std::size_t dof_cursor = 0;
    for (std::size_t k = 0; k < chain_.size(); ++k) {
      const int j = skel_.joint_of_bone(chain_[k]);
      if (j < 0) continue;
      const Joint& joint = skel_.joints()[j];
      for (std::size_t a = 0; a < joint.axes.size(); ++a) {
        Axis axis;
        axis.dof_slot = dof_cursor++;
        axis.values = SweepGrid(joint.limits[a].first, joint.limits[a].second, config.step);
        for (double v : axis.values) axis.rotations.push_back(Eigen::AngleAxisd(v, joint.axes[a]).toRotationMatrix());
        levels_[k].push_back(std::move(axis));
      }
    }
  }

  std::vector<ReachSample> Run() {
    const int root = skel_.bones()[chain_.front()].parent;
    Visit(0, geo_.grasp_bones()[root]);
    return std::move(samples_);
  }

 private:
  struct Axis {
    std::size_t dof_slot = 0;
    std::vector<double> values;
    std::vector<Mat3> rotations;
  };

  void Visit(std::size_t k, const Transform& parent) {
    const int bone = chain_[k];
    Transform base;
    base.linear() = parent.linear();
    base.translation() = parent.translation() + parent.linear() * skel_.rest_offset(bone);
    Rotate(k, 0, base, Mat3::Identity());
  }

  // Enumerates the axes of the joint at chain position k, then places the segment.
  void Rotate(std::size_t k, std::size_t axis, const Transform& base, const Mat3& rot) {
    if (axis < levels_[k].size()) {
      const Axis& ax = levels_[k][axis];
      for (std::size_t i = 0; i < ax.values.size(); ++i) {
        angles_[ax.dof_slot] = ax.values[i];
        Rotate(k, axis + 1, base, rot * ax.rotations[i]);
      }
      return;
    }
    Transform t = base;
    t.linear() = base.linear() * rot;
    const int bone = chain_[k];
    const int child = skel_.chain_child(bone);
    if (child < 0) {
      samples_.push_back({finger_, angles_, geo_.frame().ToLocal(t.translation())});
      return;
    }
    const Vec3 child_origin = t.translation() + t.linear() * skel_.rest_offset(child);
    placed_[k] = SegmentCapsule(skel_, bone, t.translation(), child_origin);
    if (skel_.bone_radius(bone) > 0.0 && checker_.SegmentCollides(placed_[k], k, placed_)) return;
    Visit(k + 1, t);
  }

  const SceneGeometry& geo_;
  const HandSkeleton& skel_;
  Finger finger_;
  FingerChecker checker_;
  std::vector<int> chain_;
  std::vector<std::vector<Axis>> levels_;
  std::vector<double> angles_;
  std::vector<Capsule> placed_;
  std::vector<ReachSample> samples_;
};

}  // namespace

void FinalizeCloud(ReachCloud& cloud, double alpha) {
  cloud.boundary = AlphaShape{};
  cloud.boundary.alpha = alpha;
  cloud.volume = 0.0;
  cloud.volume_source = VolumeSource::kNone;
  if (cloud.samples.empty()) {
    cloud.centroid = cloud.initial_fingertip;
    return;
  }
  Vec3 sum = Vec3::Zero();
  for (const ReachSample& s : cloud.samples) sum += s.position;
  cloud.centroid = sum / static_cast<double>(cloud.samples.size());

  const std::vector<Vec3> pts = cloud.positions();
  try {
    AlphaShape shape = ComputeAlphaShape(pts, alpha);
    if (shape.tetrahedra > 0) {
      cloud.boundary = std::move(shape);
      cloud.volume = cloud.boundary.volume;
      cloud.volume_source = VolumeSource::kAlphaShape;
      return;
    }
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kDegenerateGeometry) throw;
  }
  try {
    const ConvexHull hull = ComputeConvexHull(pts);
    cloud.boundary.faces = hull.faces;
    cloud.boundary.vertices = hull.vertices;
    cloud.boundary.volume = hull.volume;
    cloud.boundary.components = 1;
    cloud.boundary.manifold = true;
    cloud.volume = hull.volume;
    cloud.volume_source = VolumeSource::kConvexHull;
    cloud.warnings.push_back(fmt::format("{}: alpha shape degenerate, using convex hull", ToString(cloud.finger)));
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kDegenerateGeometry) throw;
    cloud.warnings.push_back(fmt::format("{}: samples are flat, reach volume 0", ToString(cloud.finger)));
  }
}

ReachCloud SimulateFinger(const SceneGeometry& geometry, Finger finger, const SimulationConfig& config) {
  if (!(config.step > 0.0)) throw Error(ErrorCode::kInvalidArgument, "sweep step must be positive");
  ReachCloud cloud;
  cloud.finger = finger;
  cloud.initial_fingertip = geometry.InitialFingertip(finger);
  cloud.samples = Sweep(geometry, finger, config).Run();
  if (cloud.samples.empty()) {
    cloud.warnings.push_back(fmt::format("{}: immobilized, every swept pose collides", ToString(finger)));
  }
  FinalizeCloud(cloud, config.alpha);
  return cloud;
}

ReachCloud SimulateFinger(const GraspScene& scene, Finger finger, const SimulationConfig& config) {
  return SimulateFinger(SceneGeometry(scene), finger, config);
}

std::vector<ReachCloud> SimulateScene(const GraspScene& scene, const SimulationConfig& config) {
  const SceneGeometry geometry(scene);
  std::vector<ReachCloud> clouds;
  for (Finger f : kAllFingers) clouds.push_back(SimulateFinger(geometry, f, config));
  return clouds;
}

}  // namespace graspr

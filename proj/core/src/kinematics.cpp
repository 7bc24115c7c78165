#include "graspr/kinematics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Eigenvalues>
#include <fmt/format.h>

#include "graspr/error.hpp"

namespace graspr {

namespace {

constexpr double kRomSlack = 1e-12;

constexpr std::array<std::string_view, 5> kFingerNames = {"thumb", "index", "middle", "ring",
                                                          "little"};

}  // namespace

std::string_view ToString(Finger finger) { return kFingerNames[static_cast<int>(finger)]; }

Finger FingerFromString(std::string_view name) {
  for (std::size_t i = 0; i < kFingerNames.size(); ++i) {
    if (kFingerNames[i] == name) return static_cast<Finger>(i);
  }
  throw Error(ErrorCode::kInvalidArgument, fmt::format("unknown finger '{}'", name));
}

double DegToRad(double deg) { return deg * std::numbers::pi / 180.0; }
double RadToDeg(double rad) { return rad * 180.0 / std::numbers::pi; }

HandSkeleton::HandSkeleton(std::vector<Bone> bones, std::vector<Joint> joints,
                           std::array<int, 5> fingertips, double scale, double palm_radius)
    : bones_(std::move(bones)),
      joints_(std::move(joints)),
      fingertips_(fingertips),
      scale_(scale),
      palm_radius_(palm_radius) {
  if (!(scale_ > 0.0) || !std::isfinite(scale_)) {
    throw Error(ErrorCode::kInvalidArgument, "skeleton scale must be positive");
  }
  if (bones_.empty() || bones_[0].parent != -1) {
    throw Error(ErrorCode::kInvalidArgument, "bone 0 must be the root (parent -1)");
  }
  const int n = static_cast<int>(bones_.size());
  for (int i = 1; i < n; ++i) {
    if (bones_[i].parent < 0 || bones_[i].parent >= i) {
      throw Error(ErrorCode::kInvalidArgument,
                  fmt::format("bone '{}' breaks topological order (parent {})", bones_[i].name,
                              bones_[i].parent));
    }
  }

  joint_of_bone_.assign(n, -1);
  first_dof_.clear();
  for (int j = 0; j < static_cast<int>(joints_.size()); ++j) {
    auto& joint = joints_[j];
    if (joint.bone <= 0 || joint.bone >= n) {
      throw Error(ErrorCode::kInvalidArgument, fmt::format("joint {} references bone {}", j, joint.bone));
    }
    if (joint_of_bone_[joint.bone] != -1) {
      throw Error(ErrorCode::kInvalidArgument, fmt::format("bone {} has two joints", joint.bone));
    }
    if (joint.axes.empty() || joint.axes.size() != joint.limits.size()) {
      throw Error(ErrorCode::kInvalidArgument, fmt::format("joint {} axes/limits mismatch", j));
    }
    for (std::size_t a = 0; a < joint.axes.size(); ++a) {
      const double norm = joint.axes[a].norm();
      if (!(norm > 0.0)) throw Error(ErrorCode::kInvalidArgument, "zero joint axis");
      joint.axes[a] /= norm;
      if (!(joint.limits[a].first <= joint.limits[a].second)) {
        throw Error(ErrorCode::kInvalidArgument,
                    fmt::format("joint {} axis {} has min > max", j, a));
      }
      dof_owner_.emplace_back(j, static_cast<int>(a));
    }
    joint_of_bone_[joint.bone] = j;
    first_dof_.push_back(dof_count_);
    dof_count_ += static_cast<int>(joint.axes.size());
  }

  chain_child_.assign(n, -1);
  finger_of_bone_.assign(n, -1);
  for (int f = 0; f < 5; ++f) {
    int bone = fingertips_[f];
    if (bone <= 0 || bone >= n) {
      throw Error(ErrorCode::kInvalidArgument, fmt::format("fingertip {} out of range", f));
    }
    std::vector<int> chain;
    while (bone > 0) {
      if (finger_of_bone_[bone] != -1) {
        throw Error(ErrorCode::kInvalidArgument, "finger chains must not share bones");
      }
      finger_of_bone_[bone] = f;
      chain.push_back(bone);
      bone = bones_[bone].parent;
    }
    std::reverse(chain.begin(), chain.end());
    for (std::size_t i = 0; i + 1 < chain.size(); ++i) chain_child_[chain[i]] = chain[i + 1];
    finger_bones_[f] = chain;
    for (int b : chain) {
      const int j = joint_of_bone_[b];
      if (j < 0) continue;
      finger_joints_[f].push_back(j);
      for (std::size_t a = 0; a < joints_[j].axes.size(); ++a) {
        finger_dofs_[f].push_back(first_dof_[j] + static_cast<int>(a));
      }
    }
  }
}

std::pair<double, double> HandSkeleton::dof_limits(int dof) const {
  const auto [j, a] = dof_owner_.at(dof);
  return joints_[j].limits[a];
}

HandSkeleton HandSkeleton::Scaled(double scale) const {
  return HandSkeleton(bones_, joints_, fingertips_, scale, palm_radius_);
}

void CheckPose(const HandSkeleton& skeleton, const Eigen::VectorXd& angles) {
  if (angles.size() != skeleton.dof_count()) {
    throw Error(ErrorCode::kRejectedPose,
                fmt::format("pose has {} angles, skeleton has {} DOF", angles.size(),
                            skeleton.dof_count()));
  }
  for (int d = 0; d < skeleton.dof_count(); ++d) {
    const auto [lo, hi] = skeleton.dof_limits(d);
    const double v = angles[d];
    if (!std::isfinite(v) || v < lo - kRomSlack || v > hi + kRomSlack) {
      throw Error(ErrorCode::kRejectedPose,
                  fmt::format("DOF {} angle {:.6f} rad outside ROM [{:.6f}, {:.6f}]", d, v, lo, hi));
    }
  }
}

HandPose::HandPose(const HandSkeleton& skeleton, const Transform& wrist, Eigen::VectorXd angles)
    : wrist_(wrist), angles_(std::move(angles)) {
  CheckPose(skeleton, angles_);
}

HandPose HandPose::Rest(const HandSkeleton& skeleton, const Transform& wrist) {
  Eigen::VectorXd angles = Eigen::VectorXd::Zero(skeleton.dof_count());
  // Zero is outside some ROM intervals; clamp into range.
  for (int d = 0; d < skeleton.dof_count(); ++d) {
    const auto [lo, hi] = skeleton.dof_limits(d);
    angles[d] = std::clamp(0.0, lo, hi);
  }
  return HandPose(skeleton, wrist, std::move(angles));
}

Mat3 JointRotation(const HandSkeleton& skeleton, int joint, const Eigen::VectorXd& angles) {
  const Joint& j = skeleton.joints()[joint];
  const int first = skeleton.first_dof(joint);
  Mat3 r = Mat3::Identity();
  for (std::size_t a = 0; a < j.axes.size(); ++a) {
    r = r * Eigen::AngleAxisd(angles[first + static_cast<int>(a)], j.axes[a]).toRotationMatrix();
  }
  return r;
}

void ForwardKinematicsInto(const HandSkeleton& skeleton, const Transform& wrist,
                           const Eigen::VectorXd& angles, std::span<Transform> out) {
  const auto& bones = skeleton.bones();
  out[0] = wrist;
  if (const int j = skeleton.joint_of_bone(0); j >= 0) out[0].linear() = wrist.linear() * JointRotation(skeleton, j, angles);
  for (std::size_t i = 1; i < bones.size(); ++i) {
    const Transform& parent = out[bones[i].parent];
    Transform t;
    t.linear() = parent.linear();
    t.translation() = parent.translation() + parent.linear() * skeleton.rest_offset(static_cast<int>(i));
    if (const int j = skeleton.joint_of_bone(static_cast<int>(i)); j >= 0) {
      t.linear() = t.linear() * JointRotation(skeleton, j, angles);
    }
    out[i] = t;
  }
}

std::vector<Transform> ForwardKinematics(const HandSkeleton& skeleton, const HandPose& pose) {
  CheckPose(skeleton, pose.angles());
  std::vector<Transform> out(skeleton.bones().size(), Transform::Identity());
  ForwardKinematicsInto(skeleton, pose.wrist(), pose.angles(), out);
  return out;
}

std::array<Vec3, 5> FingertipPositions(const HandSkeleton& skeleton,
                                       std::span<const Transform> bone_transforms) {
  std::array<Vec3, 5> tips;
  for (Finger f : kAllFingers) {
    tips[static_cast<int>(f)] = bone_transforms[skeleton.fingertip(f)].translation();
  }
  return tips;
}

Mat3 WristFrame::rotation() const {
  Mat3 r;
  r.col(0) = x;
  r.col(1) = y;
  r.col(2) = z;
  return r;
}

Vec3 WristFrame::ToLocal(const Vec3& world) const {
  const Vec3 d = world - origin;
  return {x.dot(d), y.dot(d), z.dot(d)};
}

Vec3 WristFrame::ToWorld(const Vec3& local) const {
  return origin + local.x() * x + local.y() * y + local.z() * z;
}

WristFrame ComputeWristFrame(const HandSkeleton& skeleton, std::span<const Transform> bones) {
  std::array<Vec3, 4> heads;
  for (int k = 0; k < 4; ++k) {
    const Finger f = kAllFingers[k + 1];
    heads[k] = bones[skeleton.finger_bones(f).front()].translation();
  }
  const Vec3 centroid = (heads[0] + heads[1] + heads[2] + heads[3]) / 4.0;
  Mat3 cov = Mat3::Zero();
  for (const Vec3& h : heads) cov += (h - centroid) * (h - centroid).transpose();

  const Vec3 across = heads[0] - heads[3];  // little -> index
  const double scale2 = std::max(cov.trace(), 1e-300);
  Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
  // Collinear heads leave two vanishing eigenvalues and no unique plane.
  if (across.norm() < 1e-12 || eig.eigenvalues()[1] <= 1e-12 * scale2) {
    throw Error(ErrorCode::kFrame, "degenerate metacarpal configuration (collinear heads)");
  }
  Vec3 y = eig.eigenvectors().col(0).normalized();
  Vec3 z = (across - y * y.dot(across)).normalized();
  Vec3 x = y.cross(z);

  WristFrame frame;
  frame.origin = bones[0].translation();
  // X points from the metacarpal heads toward the forearm; this fixes the sign of Y.
  if (x.dot(frame.origin - centroid) < 0.0) {
    y = -y;
    x = -x;
  }
  // Re-orthonormalize.
  z = (z - y * y.dot(z)).normalized();
  x = y.cross(z).normalized();
  frame.x = x;
  frame.y = y;
  frame.z = z;
  return frame;
}

WristFrame ComputeWristFrame(const HandSkeleton& skeleton, const HandPose& pose) {
  return ComputeWristFrame(skeleton, ForwardKinematics(skeleton, pose));
}

namespace {

Eigen::Quaterniond CanonicalQuaternion(const Mat3& r) {
  Eigen::Quaterniond q(r);
  q.normalize();
  if (q.w() < 0.0) q.coeffs() = -q.coeffs();
  return q;
}

void CheckSameShape(const HandSkeleton& skeleton, const HandPose& a, const HandPose& b) {
  if (a.angles().size() != skeleton.dof_count() || b.angles().size() != skeleton.dof_count()) {
    throw Error(ErrorCode::kShapeMismatch, "pose DOF count does not match skeleton");
  }
}

}  // namespace

double JointQuaternionDistance(const HandSkeleton& skeleton, const HandPose& a, const HandPose& b,
                               Finger finger) {
  CheckSameShape(skeleton, a, b);
  const int f = static_cast<int>(finger);
  if (f < 0 || f >= 5) throw Error(ErrorCode::kInvalidArgument, "finger not in skeleton");
  double total = 0.0;
  for (int j : skeleton.finger_joints(finger)) {
    const Eigen::Quaterniond qa = CanonicalQuaternion(JointRotation(skeleton, j, a.angles()));
    const Eigen::Quaterniond qb = CanonicalQuaternion(JointRotation(skeleton, j, b.angles()));
    // 2*acos(|<qa,qb>|) evaluated through atan2 to stay accurate near zero.
    const Eigen::Quaterniond rel = qa.conjugate() * qb;
    total += 2.0 * std::atan2(rel.vec().norm(), std::abs(rel.w()));
  }
  return total;
}

double JointAngleAbsSum(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error(ErrorCode::kShapeMismatch, "mismatched DOF count");
  double total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) total += std::abs(a[i] - b[i]);
  return total;
}

double JointAngleAbsSum(const HandSkeleton& skeleton, const HandPose& a, const HandPose& b,
                        Finger finger) {
  CheckSameShape(skeleton, a, b);
  double total = 0.0;
  for (int d : skeleton.finger_dofs(finger)) total += std::abs(a.angles()[d] - b.angles()[d]);
  return total;
}

HandSkeleton DefaultSkeleton() {
  std::vector<Bone> bones;
  std::vector<Joint> joints;
  bones.push_back({"wrist", -1, Vec3::Zero(), 0.0});

  auto rom = [](double lo, double hi) { return std::make_pair(DegToRad(lo), DegToRad(hi)); };

  // Thumb: CMC near the wrist on the radial/palmar side.
  const Vec3 t = Vec3(-0.62, -0.16, 0.77).normalized();
  Vec3 toward_palm = Vec3(-0.35, -0.22, -0.91);
  toward_palm = (toward_palm - t * t.dot(toward_palm)).normalized();
  const Vec3 thumb_flex = t.cross(toward_palm).normalized();
  const Vec3 thumb_abd = t.cross(thumb_flex).normalized();

  const int cmc = static_cast<int>(bones.size());
  bones.push_back({"thumb_cmc", 0, Vec3(-0.026, -0.016, 0.022), 0.0110});
  bones.push_back({"thumb_mcp", cmc, 0.045 * t, 0.0095});
  bones.push_back({"thumb_ip", cmc + 1, 0.032 * t, 0.0085});
  bones.push_back({"thumb_tip", cmc + 2, 0.027 * t, 0.0});
  joints.push_back({cmc, {thumb_abd, thumb_flex}, {rom(-20, 30), rom(-15, 45)}});
  joints.push_back({cmc + 1, {thumb_flex}, {rom(-10, 55)}});
  joints.push_back({cmc + 2, {thumb_flex}, {rom(-15, 80)}});

  struct FingerSpec {
    const char* name;
    Vec3 mcp;
    std::array<double, 3> lengths;
  };
  // Metacarpal heads spread across the breadth minus the palm skin radius.
  const std::array<FingerSpec, 4> specs = {{
      {"index", Vec3(-0.081, 0.0, 0.03015), {0.041, 0.024, 0.020}},
      {"middle", Vec3(-0.084, 0.0, 0.01005), {0.045, 0.028, 0.0195}},
      {"ring", Vec3(-0.082, 0.0, -0.01005), {0.042, 0.027, 0.020}},
      {"little", Vec3(-0.081, 0.0, -0.03015), {0.033, 0.019, 0.018}},
  }};
  std::array<int, 5> tips{};
  tips[0] = cmc + 3;
  for (int k = 0; k < 4; ++k) {
    const auto& s = specs[k];
    const int mcp = static_cast<int>(bones.size());
    const std::string name = s.name;
    bones.push_back({name + "_mcp", 0, s.mcp, 0.0085});
    bones.push_back({name + "_pip", mcp, Vec3(-s.lengths[0], 0, 0), 0.0078});
    bones.push_back({name + "_dip", mcp + 1, Vec3(-s.lengths[1], 0, 0), 0.0072});
    bones.push_back({name + "_tip", mcp + 2, Vec3(-s.lengths[2], 0, 0), 0.0});
    joints.push_back({mcp, {Vec3::UnitY(), Vec3::UnitZ()}, {rom(-15, 15), rom(-20, 90)}});
    joints.push_back({mcp + 1, {Vec3::UnitZ()}, {rom(0, 100)}});
    joints.push_back({mcp + 2, {Vec3::UnitZ()}, {rom(0, 80)}});
    tips[k + 1] = mcp + 3;
  }
  return HandSkeleton(std::move(bones), std::move(joints), tips, 1.0, 0.0095);
}

}  // namespace graspr

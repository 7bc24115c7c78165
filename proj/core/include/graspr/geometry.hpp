#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "graspr/kinematics.hpp"

namespace graspr {

using Face = std::array<int, 3>;

/// Triangle mesh in meters. Degenerate (zero-area) faces are removed on
/// construction; watertightness is computed once.
class TriMesh {
 public:
  TriMesh() = default;
  TriMesh(std::vector<Vec3> vertices, std::vector<Face> faces);

  const std::vector<Vec3>& vertices() const { return vertices_; }
  const std::vector<Face>& faces() const { return faces_; }
  bool empty() const { return faces_.empty(); }
  /// Every undirected edge is shared by exactly two faces with opposite orientation.
  bool watertight() const { return watertight_; }

  std::array<Vec3, 3> triangle(std::size_t f) const {
    const Face& t = faces_[f];
    return {vertices_[t[0]], vertices_[t[1]], vertices_[t[2]]};
  }

  TriMesh Transformed(const Transform& t) const;

  /// Enclosed volume in m^3. Watertight meshes use the divergence theorem;
  /// others are voxelized, exterior flood-filled and the remainder counted.
  double Volume() const;

 private:
  std::vector<Vec3> vertices_;
  std::vector<Face> faces_;
  bool watertight_ = false;
};

/// Signed divergence-theorem volume, meaningful for closed meshes.
double SignedVolume(const TriMesh& mesh);
/// Volume of the voxel-repaired solid (surface voxels + enclosed voxels).
double VoxelRepairedVolume(const TriMesh& mesh, int resolution = 96);

struct Aabb {
  Vec3 min = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 max = Vec3::Constant(-std::numeric_limits<double>::infinity());

  void Extend(const Vec3& p) {
    min = min.cwiseMin(p);
    max = max.cwiseMax(p);
  }
  void Extend(const Aabb& b) {
    min = min.cwiseMin(b.min);
    max = max.cwiseMax(b.max);
  }
  Aabb Inflated(double r) const { return {min.array() - r, max.array() + r}; }
  bool Overlaps(const Aabb& o) const {
    return (min.array() <= o.max.array()).all() && (o.min.array() <= max.array()).all();
  }
  double DistanceSq(const Vec3& p) const {
    const Vec3 d = (min - p).cwiseMax(p - max).cwiseMax(Vec3::Zero());
    return d.squaredNorm();
  }
};

struct Capsule {
  Vec3 a = Vec3::Zero();
  Vec3 b = Vec3::Zero();
  double radius = 0.0;

  Aabb Bounds() const {
    Aabb box;
    box.Extend(a);
    box.Extend(b);
    return box.Inflated(radius);
  }
};

// Primitive distances (Euclidean, not squared unless stated).
Vec3 ClosestPointOnTriangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);
double PointTriangleDistance(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);
double PointSegmentDistance(const Vec3& p, const Vec3& a, const Vec3& b);
double SegmentSegmentDistance(const Vec3& p1, const Vec3& q1, const Vec3& p2, const Vec3& q2);
bool SegmentIntersectsTriangle(const Vec3& p, const Vec3& q, const Vec3& a, const Vec3& b,
                               const Vec3& c);
double SegmentTriangleDistance(const Vec3& p, const Vec3& q, const Vec3& a, const Vec3& b,
                               const Vec3& c);
double TriangleTriangleDistance(const std::array<Vec3, 3>& s, const std::array<Vec3, 3>& t);
/// Surface separation between two capsules; negative when they overlap.
double CapsuleSeparation(const Capsule& c1, const Capsule& c2);
/// Distance from a point to a capsule surface, clamped at zero inside.
double PointCapsuleDistance(const Vec3& p, const Capsule& c);

/// Bounding-volume hierarchy over a mesh's triangles. Immutable once built.
class MeshBvh {
 public:
  MeshBvh() = default;
  explicit MeshBvh(const TriMesh& mesh);

  bool empty() const { return nodes_.empty(); }
  const Aabb& bounds() const { return nodes_.front().box; }

  /// Exact minimum point-to-triangle distance.
  double Distance(const Vec3& p) const;
  /// True when some triangle lies within `radius + tolerance` of segment ab.
  bool CapsuleWithin(const Capsule& c, double tolerance) const;
  /// Minimum surface separation between the capsule and the mesh, stopping
  /// early once below `stop_below`.
  double CapsuleSeparation(const Capsule& c, double stop_below = -1e300) const;
  /// Calls `fn(face index)` for every triangle whose box overlaps `box`.
  void ForEachOverlapping(const Aabb& box, const std::function<void(int)>& fn) const;
  /// True when any triangle pair lies within `tolerance`.
  bool AnyWithin(const MeshBvh& other, double tolerance) const;

  std::size_t triangle_count() const { return tris_.size(); }
  const std::array<Vec3, 3>& triangle(int i) const { return tris_[i]; }
  int face_index(int i) const { return face_ids_[i]; }

 private:
  struct Node {
    Aabb box;
    int left = -1;
    int right = -1;
    int start = 0;
    int count = 0;
  };
  int Build(int start, int count, std::vector<Vec3>& centroids);

  std::vector<Node> nodes_;
  std::vector<std::array<Vec3, 3>> tris_;
  std::vector<int> face_ids_;
};

double DistanceToMesh(const Vec3& point, const TriMesh& mesh);
double DistanceToMesh(const Vec3& point, const MeshBvh& bvh);

/// True iff some triangle pair intersects or lies closer than `tolerance`.
bool Collide(const TriMesh& a, const TriMesh& b, double tolerance);

struct ConvexHull {
  std::vector<Face> faces;  // outward counter-clockwise, indices into the input
  std::vector<int> vertices;
  double volume = 0.0;
};

/// Quickhull. Points within a relative epsilon of a face count as inside.
/// Throws kDegenerateGeometry for fewer than four or coplanar points.
ConvexHull ComputeConvexHull(std::span<const Vec3> points);

struct AlphaShape {
  double alpha = 0.0;  // probe radius, same unit as the points
  std::vector<Face> faces;
  std::vector<int> vertices;  // sorted unique input indices on the boundary
  double volume = 0.0;
  std::size_t tetrahedra = 0;
  int components = 0;
  bool manifold = false;
};

/// Union of Delaunay tetrahedra whose circumradius is at most `radius`.
AlphaShape ComputeAlphaShape(std::span<const Vec3> points, double radius);

struct CageRatio {
  double ratio = 0.0;
  bool degenerate_contacts = false;
};

/// Hull volume of the contacts over the hull volume of the object's vertices.
/// Fewer than four or coplanar contacts give ratio 0 with the flag set.
CageRatio ComputeCageRatio(std::span<const Vec3> contacts, const TriMesh& object);

/// Vertices of object faces lying within `tolerance` of any skin capsule,
/// in ascending vertex-index order.
std::vector<int> ContactVertexIndices(std::span<const Capsule> skin, const TriMesh& object,
                                      const MeshBvh& bvh, double tolerance);
std::vector<Vec3> ContactPoints(std::span<const Capsule> skin, const TriMesh& object,
                                double tolerance);

inline constexpr double kDefaultCollisionTolerance = 0.001;
inline constexpr double kDefaultContactTolerance = 0.002;

// Procedural watertight primitives, centered at the origin.
TriMesh MakeBox(const Vec3& half_extents);
TriMesh MakeCylinder(double radius, double height, int segments = 48);  // axis Z
TriMesh MakeIcosphere(double radius, int subdivisions = 3);
TriMesh MakeTorus(double major_radius, double minor_radius, int major_segments = 48,
                  int minor_segments = 16);  // axis Z
TriMesh MakeCapsuleMesh(const Capsule& capsule, int segments = 16, int rings = 6);
TriMesh Merge(std::span<const TriMesh> parts);

}  // namespace graspr

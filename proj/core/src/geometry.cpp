#include "graspr/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <queue>
#include <unordered_map>

#include <fmt/format.h>

#include "graspr/error.hpp"

namespace graspr {

// ---------------------------------------------------------------------------
// Mesh

namespace {

std::uint64_t EdgeKey(int a, int b) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
         static_cast<std::uint32_t>(b);
}

bool ComputeWatertight(const std::vector<Face>& faces) {
  if (faces.empty()) return false;
  std::unordered_map<std::uint64_t, int> directed;
  directed.reserve(faces.size() * 3);
  for (const Face& f : faces) {
    for (int k = 0; k < 3; ++k) {
      if (++directed[EdgeKey(f[k], f[(k + 1) % 3])] > 1) return false;
    }
  }
  for (const auto& [key, count] : directed) {
    const int a = static_cast<int>(key >> 32);
    const int b = static_cast<int>(key & 0xffffffffu);
    auto it = directed.find(EdgeKey(b, a));
    if (it == directed.end() || it->second != 1) return false;
  }
  return true;
}

}  // namespace

TriMesh::TriMesh(std::vector<Vec3> vertices, std::vector<Face> faces)
    : vertices_(std::move(vertices)) {
  const int n = static_cast<int>(vertices_.size());
  double extent = 0.0;
  for (const Vec3& v : vertices_) {
    if (!v.allFinite()) throw Error(ErrorCode::kSchema, "mesh vertex is not finite");
    extent = std::max(extent, v.cwiseAbs().maxCoeff());
  }
  const double area_eps = 1e-24 * std::max(extent * extent, 1e-300);
  faces_.reserve(faces.size());
  for (const Face& f : faces) {
    for (int idx : f) {
      if (idx < 0 || idx >= n) {
        throw Error(ErrorCode::kSchema, fmt::format("face index {} out of range [0, {})", idx, n));
      }
    }
    const Vec3 cross = (vertices_[f[1]] - vertices_[f[0]]).cross(vertices_[f[2]] - vertices_[f[0]]);
    if (cross.norm() <= area_eps) continue;
    faces_.push_back(f);
  }
  watertight_ = ComputeWatertight(faces_);
}

TriMesh TriMesh::Transformed(const Transform& t) const {
  TriMesh out;
  out.vertices_.reserve(vertices_.size());
  for (const Vec3& v : vertices_) out.vertices_.push_back(t * v);
  out.faces_ = faces_;
  out.watertight_ = watertight_;
  return out;
}

double SignedVolume(const TriMesh& mesh) {
  double six_v = 0.0;
  for (std::size_t f = 0; f < mesh.faces().size(); ++f) {
    const auto [a, b, c] = mesh.triangle(f);
    six_v += a.dot(b.cross(c));
  }
  return six_v / 6.0;
}

double VoxelRepairedVolume(const TriMesh& mesh, int resolution) {
  if (mesh.empty()) return 0.0;
  Aabb box;
  for (const Vec3& v : mesh.vertices()) box.Extend(v);
  const double cell = (box.max - box.min).maxCoeff() / resolution;
  if (!(cell > 0.0)) return 0.0;
  // One empty layer of padding on each side so the exterior is connected.
  const Vec3 origin = box.min - Vec3::Constant(cell);
  std::array<int, 3> dims;
  for (int k = 0; k < 3; ++k) {
    dims[k] = static_cast<int>(std::ceil((box.max[k] - box.min[k]) / cell)) + 3;
  }
  const auto index = [&](int i, int j, int k) {
    return (static_cast<std::size_t>(k) * dims[1] + j) * dims[0] + i;
  };
  std::vector<std::uint8_t> state(static_cast<std::size_t>(dims[0]) * dims[1] * dims[2], 0);
  const double half_diag = 0.5 * std::sqrt(3.0) * cell;
  for (std::size_t f = 0; f < mesh.faces().size(); ++f) {
    const auto [a, b, c] = mesh.triangle(f);
    Aabb tb;
    tb.Extend(a);
    tb.Extend(b);
    tb.Extend(c);
    std::array<int, 3> lo, hi;
    for (int k = 0; k < 3; ++k) {
      lo[k] = std::max(0, static_cast<int>(std::floor((tb.min[k] - origin[k]) / cell)) - 1);
      hi[k] = std::min(dims[k] - 1, static_cast<int>(std::floor((tb.max[k] - origin[k]) / cell)) + 1);
    }
    for (int k = lo[2]; k <= hi[2]; ++k)
      for (int j = lo[1]; j <= hi[1]; ++j)
        for (int i = lo[0]; i <= hi[0]; ++i) {
          const Vec3 center = origin + cell * Vec3(i + 0.5, j + 0.5, k + 0.5);
          if (PointTriangleDistance(center, a, b, c) <= half_diag) state[index(i, j, k)] = 1;
        }
  }
  // Flood the exterior (state 2) from the padded corner.
  std::vector<std::array<int, 3>> stack = {{0, 0, 0}};
  state[index(0, 0, 0)] = 2;
  while (!stack.empty()) {
    const auto [i, j, k] = stack.back();
    stack.pop_back();
    const std::array<std::array<int, 3>, 6> nbrs = {{{i - 1, j, k}, {i + 1, j, k}, {i, j - 1, k},
                                                     {i, j + 1, k}, {i, j, k - 1}, {i, j, k + 1}}};
    for (const auto& n : nbrs) {
      if (n[0] < 0 || n[1] < 0 || n[2] < 0 || n[0] >= dims[0] || n[1] >= dims[1] || n[2] >= dims[2])
        continue;
      auto& s = state[index(n[0], n[1], n[2])];
      if (s != 0) continue;
      s = 2;
      stack.push_back(n);
    }
  }
  // Surface voxels straddle the boundary; count them at half weight.
  double count = 0.0;
  for (std::uint8_t s : state) {
    if (s == 0) count += 1.0;
    else if (s == 1) count += 0.5;
  }
  return count * cell * cell * cell;
}

double TriMesh::Volume() const {
  if (watertight_) return std::abs(SignedVolume(*this));
  return VoxelRepairedVolume(*this);
}

// ---------------------------------------------------------------------------
// Primitive distances

Vec3 ClosestPointOnTriangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 ab = b - a;
  const Vec3 ac = c - a;
  const Vec3 ap = p - a;
  const double d1 = ab.dot(ap);
  const double d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return a;

  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp);
  const double d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return b;

  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) return a + ab * (d1 / (d1 - d3));

  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp);
  const double d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return c;

  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) return a + ac * (d2 / (d2 - d6));

  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
  }
  const double denom = 1.0 / (va + vb + vc);
  return a + ab * (vb * denom) + ac * (vc * denom);
}

double PointTriangleDistance(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  return (p - ClosestPointOnTriangle(p, a, b, c)).norm();
}

double PointSegmentDistance(const Vec3& p, const Vec3& a, const Vec3& b) {
  const Vec3 ab = b - a;
  const double len2 = ab.squaredNorm();
  double t = len2 > 0.0 ? (p - a).dot(ab) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

double SegmentSegmentDistance(const Vec3& p1, const Vec3& q1, const Vec3& p2, const Vec3& q2) {
  const Vec3 d1 = q1 - p1;
  const Vec3 d2 = q2 - p2;
  const Vec3 r = p1 - p2;
  const double a = d1.squaredNorm();
  const double e = d2.squaredNorm();
  const double f = d2.dot(r);
  constexpr double kEps = 1e-300;
  double s = 0.0;
  double t = 0.0;
  if (a <= kEps && e <= kEps) return r.norm();
  if (a <= kEps) {
    t = std::clamp(f / e, 0.0, 1.0);
  } else {
    const double c = d1.dot(r);
    if (e <= kEps) {
      s = std::clamp(-c / a, 0.0, 1.0);
    } else {
      const double b = d1.dot(d2);
      const double denom = a * e - b * b;
      s = denom > 0.0 ? std::clamp((b * f - c * e) / denom, 0.0, 1.0) : 0.0;
      t = (b * s + f) / e;
      if (t < 0.0) {
        t = 0.0;
        s = std::clamp(-c / a, 0.0, 1.0);
      } else if (t > 1.0) {
        t = 1.0;
        s = std::clamp((b - c) / a, 0.0, 1.0);
      }
    }
  }
  return ((p1 + d1 * s) - (p2 + d2 * t)).norm();
}

bool SegmentIntersectsTriangle(const Vec3& p, const Vec3& q, const Vec3& a, const Vec3& b,
                               const Vec3& c) {
  const Vec3 n = (b - a).cross(c - a);
  const double dp = n.dot(p - a);
  const double dq = n.dot(q - a);
  if ((dp > 0.0 && dq > 0.0) || (dp < 0.0 && dq < 0.0)) return false;
  if (dp == 0.0 && dq == 0.0) return false;  // coplanar: handled by edge distances
  const double t = dp / (dp - dq);
  const Vec3 x = p + t * (q - p);
  const Vec3 c0 = (b - a).cross(x - a);
  const Vec3 c1 = (c - b).cross(x - b);
  const Vec3 c2 = (a - c).cross(x - c);
  return n.dot(c0) >= 0.0 && n.dot(c1) >= 0.0 && n.dot(c2) >= 0.0;
}

double SegmentTriangleDistance(const Vec3& p, const Vec3& q, const Vec3& a, const Vec3& b,
                               const Vec3& c) {
  if (SegmentIntersectsTriangle(p, q, a, b, c)) return 0.0;
  double d = std::min(PointTriangleDistance(p, a, b, c), PointTriangleDistance(q, a, b, c));
  d = std::min(d, SegmentSegmentDistance(p, q, a, b));
  d = std::min(d, SegmentSegmentDistance(p, q, b, c));
  d = std::min(d, SegmentSegmentDistance(p, q, c, a));
  return d;
}

double TriangleTriangleDistance(const std::array<Vec3, 3>& s, const std::array<Vec3, 3>& t) {
  double d = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 3 && d > 0.0; ++k) {
    d = std::min(d, SegmentTriangleDistance(s[k], s[(k + 1) % 3], t[0], t[1], t[2]));
    d = std::min(d, SegmentTriangleDistance(t[k], t[(k + 1) % 3], s[0], s[1], s[2]));
  }
  return d;
}

double CapsuleSeparation(const Capsule& c1, const Capsule& c2) {
  return SegmentSegmentDistance(c1.a, c1.b, c2.a, c2.b) - c1.radius - c2.radius;
}

double PointCapsuleDistance(const Vec3& p, const Capsule& c) {
  return std::max(0.0, PointSegmentDistance(p, c.a, c.b) - c.radius);
}

// ---------------------------------------------------------------------------
// BVH

namespace {
constexpr int kLeafSize = 4;
}

MeshBvh::MeshBvh(const TriMesh& mesh) {
  const std::size_t n = mesh.faces().size();
  if (n == 0) return;
  tris_.reserve(n);
  face_ids_.resize(n);
  std::vector<Vec3> centroids(n);
  for (std::size_t f = 0; f < n; ++f) {
    tris_.push_back(mesh.triangle(f));
    face_ids_[f] = static_cast<int>(f);
    centroids[f] = (tris_[f][0] + tris_[f][1] + tris_[f][2]) / 3.0;
  }
  nodes_.reserve(2 * n / kLeafSize + 2);
  Build(0, static_cast<int>(n), centroids);
}

int MeshBvh::Build(int start, int count, std::vector<Vec3>& centroids) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back({});
  Aabb box;
  Aabb cbox;
  for (int i = start; i < start + count; ++i) {
    for (const Vec3& v : tris_[i]) box.Extend(v);
    cbox.Extend(centroids[i]);
  }
  nodes_[id].box = box;
  if (count <= kLeafSize) {
    nodes_[id].start = start;
    nodes_[id].count = count;
    return id;
  }
  int axis = 0;
  (cbox.max - cbox.min).maxCoeff(&axis);
  const int mid = start + count / 2;
  std::vector<int> order(count);
  for (int i = 0; i < count; ++i) order[i] = start + i;
  std::nth_element(order.begin(), order.begin() + count / 2, order.end(), [&](int x, int y) {
    if (centroids[x][axis] != centroids[y][axis]) return centroids[x][axis] < centroids[y][axis];
    return face_ids_[x] < face_ids_[y];
  });
  std::vector<std::array<Vec3, 3>> tris(count);
  std::vector<int> ids(count);
  std::vector<Vec3> cents(count);
  for (int i = 0; i < count; ++i) {
    tris[i] = tris_[order[i]];
    ids[i] = face_ids_[order[i]];
    cents[i] = centroids[order[i]];
  }
  std::copy(tris.begin(), tris.end(), tris_.begin() + start);
  std::copy(ids.begin(), ids.end(), face_ids_.begin() + start);
  std::copy(cents.begin(), cents.end(), centroids.begin() + start);
  const int left = Build(start, mid - start, centroids);
  const int right = Build(mid, start + count - mid, centroids);
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

double MeshBvh::Distance(const Vec3& p) const {
  if (nodes_.empty()) throw Error(ErrorCode::kInvalidArgument, "distance query on empty mesh");
  double best2 = std::numeric_limits<double>::infinity();
  double best = best2;
  std::vector<std::pair<double, int>> stack;
  stack.reserve(64);
  stack.emplace_back(nodes_[0].box.DistanceSq(p), 0);
  while (!stack.empty()) {
    const auto [d2, id] = stack.back();
    stack.pop_back();
    if (d2 > best2) continue;
    const Node& node = nodes_[id];
    if (node.left < 0) {
      for (int i = node.start; i < node.start + node.count; ++i) {
        const auto& t = tris_[i];
        const double d = PointTriangleDistance(p, t[0], t[1], t[2]);
        if (d < best) {
          best = d;
          best2 = d * d;
        }
      }
      continue;
    }
    const double dl = nodes_[node.left].box.DistanceSq(p);
    const double dr = nodes_[node.right].box.DistanceSq(p);
    // Visit the nearer child first (pushed last).
    if (dl < dr) {
      stack.emplace_back(dr, node.right);
      stack.emplace_back(dl, node.left);
    } else {
      stack.emplace_back(dl, node.left);
      stack.emplace_back(dr, node.right);
    }
  }
  return best;
}

bool MeshBvh::CapsuleWithin(const Capsule& c, double tolerance) const {
  if (nodes_.empty()) return false;
  const double reach = c.radius + tolerance;
  const Aabb query = c.Bounds().Inflated(tolerance);
  int stack[128];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& node = nodes_[stack[--top]];
    if (!node.box.Overlaps(query)) continue;
    if (node.left < 0) {
      for (int i = node.start; i < node.start + node.count; ++i) {
        const auto& t = tris_[i];
        if (SegmentTriangleDistance(c.a, c.b, t[0], t[1], t[2]) <= reach) return true;
      }
      continue;
    }
    stack[top++] = node.left;
    stack[top++] = node.right;
  }
  return false;
}

double MeshBvh::CapsuleSeparation(const Capsule& c, double stop_below) const {
  if (nodes_.empty()) throw Error(ErrorCode::kInvalidArgument, "query on empty mesh");
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> stack = {0};
  while (!stack.empty()) {
    const Node& node = nodes_[stack.back()];
    stack.pop_back();
    // Conservative box test against the capsule bounds inflated by the current best.
    if (std::isfinite(best) && !node.box.Overlaps(c.Bounds().Inflated(std::max(best, 0.0)))) continue;
    if (node.left < 0) {
      for (int i = node.start; i < node.start + node.count; ++i) {
        const auto& t = tris_[i];
        best = std::min(best, SegmentTriangleDistance(c.a, c.b, t[0], t[1], t[2]) - c.radius);
        if (best < stop_below) return best;
      }
      continue;
    }
    stack.push_back(node.left);
    stack.push_back(node.right);
  }
  return best;
}

void MeshBvh::ForEachOverlapping(const Aabb& box, const std::function<void(int)>& fn) const {
  if (nodes_.empty()) return;
  std::vector<int> stack = {0};
  while (!stack.empty()) {
    const Node& node = nodes_[stack.back()];
    stack.pop_back();
    if (!node.box.Overlaps(box)) continue;
    if (node.left < 0) {
      for (int i = node.start; i < node.start + node.count; ++i) fn(i);
      continue;
    }
    stack.push_back(node.left);
    stack.push_back(node.right);
  }
}

bool MeshBvh::AnyWithin(const MeshBvh& other, double tolerance) const {
  if (nodes_.empty() || other.nodes_.empty()) return false;
  std::vector<std::pair<int, int>> stack = {{0, 0}};
  while (!stack.empty()) {
    const auto [ia, ib] = stack.back();
    stack.pop_back();
    const Node& na = nodes_[ia];
    const Node& nb = other.nodes_[ib];
    if (!na.box.Inflated(tolerance).Overlaps(nb.box)) continue;
    const bool leaf_a = na.left < 0;
    const bool leaf_b = nb.left < 0;
    if (leaf_a && leaf_b) {
      for (int i = na.start; i < na.start + na.count; ++i)
        for (int j = nb.start; j < nb.start + nb.count; ++j)
          if (TriangleTriangleDistance(tris_[i], other.tris_[j]) <= tolerance) return true;
      continue;
    }
    const auto extent = [](const Aabb& b) { return (b.max - b.min).squaredNorm(); };
    if (leaf_b || (!leaf_a && extent(na.box) >= extent(nb.box))) {
      stack.emplace_back(na.left, ib);
      stack.emplace_back(na.right, ib);
    } else {
      stack.emplace_back(ia, nb.left);
      stack.emplace_back(ia, nb.right);
    }
  }
  return false;
}

double DistanceToMesh(const Vec3& point, const MeshBvh& bvh) { return bvh.Distance(point); }

double DistanceToMesh(const Vec3& point, const TriMesh& mesh) {
  if (mesh.empty()) throw Error(ErrorCode::kInvalidArgument, "distance to empty mesh");
  return MeshBvh(mesh).Distance(point);
}

bool Collide(const TriMesh& a, const TriMesh& b, double tolerance) {
  if (a.empty() || b.empty()) throw Error(ErrorCode::kInvalidArgument, "collision with empty mesh");
  const MeshBvh ba(a);
  const MeshBvh bb(b);
  return ba.AnyWithin(bb, tolerance);
}

// ---------------------------------------------------------------------------
// Contacts and cage ratio

std::vector<int> ContactVertexIndices(std::span<const Capsule> skin, const TriMesh& object,
                                      const MeshBvh& bvh, double tolerance) {
  std::vector<char> hit(object.vertices().size(), 0);
  for (const Capsule& c : skin) {
    bvh.ForEachOverlapping(c.Bounds().Inflated(tolerance), [&](int i) {
      const auto& t = bvh.triangle(i);
      if (SegmentTriangleDistance(c.a, c.b, t[0], t[1], t[2]) - c.radius <= tolerance) {
        for (int v : object.faces()[bvh.face_index(i)]) hit[v] = 1;
      }
    });
  }
  std::vector<int> out;
  for (std::size_t v = 0; v < hit.size(); ++v)
    if (hit[v]) out.push_back(static_cast<int>(v));
  return out;
}

std::vector<Vec3> ContactPoints(std::span<const Capsule> skin, const TriMesh& object,
                                double tolerance) {
  const MeshBvh bvh(object);
  std::vector<Vec3> out;
  for (int v : ContactVertexIndices(skin, object, bvh, tolerance)) out.push_back(object.vertices()[v]);
  return out;
}

CageRatio ComputeCageRatio(std::span<const Vec3> contacts, const TriMesh& object) {
  const ConvexHull object_hull = ComputeConvexHull(object.vertices());
  if (!(object_hull.volume > 0.0)) {
    throw Error(ErrorCode::kDegenerateGeometry, "object hull has zero volume");
  }
  CageRatio out;
  if (contacts.size() < 4) {
    out.degenerate_contacts = true;
    return out;
  }
  try {
    out.ratio = ComputeConvexHull(contacts).volume / object_hull.volume;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kDegenerateGeometry) throw;
    out.degenerate_contacts = true;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Primitives

TriMesh MakeBox(const Vec3& h) {
  std::vector<Vec3> v;
  for (int i = 0; i < 8; ++i) {
    v.emplace_back((i & 1) ? h.x() : -h.x(), (i & 2) ? h.y() : -h.y(), (i & 4) ? h.z() : -h.z());
  }
  std::vector<Face> f = {{0, 2, 1}, {1, 2, 3}, {4, 5, 6}, {5, 7, 6}, {0, 1, 4}, {1, 5, 4},
                         {2, 6, 3}, {3, 6, 7}, {0, 4, 2}, {2, 4, 6}, {1, 3, 5}, {3, 7, 5}};
  return TriMesh(std::move(v), std::move(f));
}

TriMesh MakeCylinder(double radius, double height, int segments) {
  std::vector<Vec3> v;
  std::vector<Face> f;
  const double h = height / 2.0;
  for (int i = 0; i < segments; ++i) {
    const double a = 2.0 * std::numbers::pi * i / segments;
    v.emplace_back(radius * std::cos(a), radius * std::sin(a), -h);
    v.emplace_back(radius * std::cos(a), radius * std::sin(a), h);
  }
  const int bottom = static_cast<int>(v.size());
  v.emplace_back(0, 0, -h);
  const int top = bottom + 1;
  v.emplace_back(0, 0, h);
  for (int i = 0; i < segments; ++i) {
    const int j = (i + 1) % segments;
    const int b0 = 2 * i, t0 = 2 * i + 1, b1 = 2 * j, t1 = 2 * j + 1;
    f.push_back({b0, b1, t1});
    f.push_back({b0, t1, t0});
    f.push_back({bottom, b1, b0});
    f.push_back({top, t0, t1});
  }
  return TriMesh(std::move(v), std::move(f));
}

TriMesh MakeIcosphere(double radius, int subdivisions) {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> v = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                         {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  for (Vec3& p : v) p.normalize();
  std::vector<Face> f = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                         {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                         {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                         {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      v.push_back((v[a] + v[b]).normalized());
      const int id = static_cast<int>(v.size()) - 1;
      midpoint.emplace(key, id);
      return id;
    };
    std::vector<Face> next;
    for (const Face& tri : f) {
      const int a = mid(tri[0], tri[1]);
      const int b = mid(tri[1], tri[2]);
      const int c = mid(tri[2], tri[0]);
      next.push_back({tri[0], a, c});
      next.push_back({tri[1], b, a});
      next.push_back({tri[2], c, b});
      next.push_back({a, b, c});
    }
    f = std::move(next);
  }
  for (Vec3& p : v) p *= radius;
  return TriMesh(std::move(v), std::move(f));
}

TriMesh MakeTorus(double major_radius, double minor_radius, int nu, int nv) {
  std::vector<Vec3> v;
  std::vector<Face> f;
  for (int i = 0; i < nu; ++i) {
    const double u = 2.0 * std::numbers::pi * i / nu;
    for (int j = 0; j < nv; ++j) {
      const double w = 2.0 * std::numbers::pi * j / nv;
      const double r = major_radius + minor_radius * std::cos(w);
      v.emplace_back(r * std::cos(u), r * std::sin(u), minor_radius * std::sin(w));
    }
  }
  for (int i = 0; i < nu; ++i) {
    const int i1 = (i + 1) % nu;
    for (int j = 0; j < nv; ++j) {
      const int j1 = (j + 1) % nv;
      const int a = i * nv + j, b = i1 * nv + j, c = i1 * nv + j1, d = i * nv + j1;
      f.push_back({a, b, c});
      f.push_back({a, c, d});
    }
  }
  return TriMesh(std::move(v), std::move(f));
}

TriMesh MakeCapsuleMesh(const Capsule& capsule, int segments, int rings) {
  Vec3 axis = capsule.b - capsule.a;
  const double len = axis.norm();
  axis = len > 0.0 ? Vec3(axis / len) : Vec3(Vec3::UnitZ());
  const Vec3 u = axis.unitOrthogonal();
  const Vec3 w = axis.cross(u);
  std::vector<Vec3> v;
  std::vector<Face> f;
  // Latitude rings from the bottom pole (at a) to the top pole (at b).
  v.push_back(capsule.a - capsule.radius * axis);
  std::vector<std::pair<double, Vec3>> lats;  // (polar angle, center)
  for (int r = 1; r <= rings; ++r) lats.emplace_back(std::numbers::pi / 2.0 * r / rings, capsule.a);
  for (int r = 0; r < rings; ++r)
    lats.emplace_back(std::numbers::pi / 2.0 + std::numbers::pi / 2.0 * r / rings, capsule.b);
  for (const auto& [phi, center] : lats) {
    const double z = -std::cos(phi) * capsule.radius;
    const double rr = std::sin(phi) * capsule.radius;
    for (int s = 0; s < segments; ++s) {
      const double a = 2.0 * std::numbers::pi * s / segments;
      v.push_back(center + z * axis + rr * (std::cos(a) * u + std::sin(a) * w));
    }
  }
  v.push_back(capsule.b + capsule.radius * axis);
  const int nring = static_cast<int>(lats.size());
  const int top = static_cast<int>(v.size()) - 1;
  for (int s = 0; s < segments; ++s) {
    const int s1 = (s + 1) % segments;
    f.push_back({0, 1 + s1, 1 + s});
  }
  for (int r = 0; r + 1 < nring; ++r) {
    for (int s = 0; s < segments; ++s) {
      const int s1 = (s + 1) % segments;
      const int a = 1 + r * segments + s, b = 1 + r * segments + s1;
      const int c = 1 + (r + 1) * segments + s1, d = 1 + (r + 1) * segments + s;
      f.push_back({a, b, c});
      f.push_back({a, c, d});
    }
  }
  const int last = 1 + (nring - 1) * segments;
  for (int s = 0; s < segments; ++s) {
    const int s1 = (s + 1) % segments;
    f.push_back({top, last + s, last + s1});
  }
  return TriMesh(std::move(v), std::move(f));
}

TriMesh Merge(std::span<const TriMesh> parts) {
  std::vector<Vec3> v;
  std::vector<Face> f;
  for (const TriMesh& m : parts) {
    const int base = static_cast<int>(v.size());
    v.insert(v.end(), m.vertices().begin(), m.vertices().end());
    for (const Face& t : m.faces()) f.push_back({t[0] + base, t[1] + base, t[2] + base});
  }
  return TriMesh(std::move(v), std::move(f));
}

}  // namespace graspr

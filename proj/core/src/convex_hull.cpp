#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "graspr/error.hpp"
#include "graspr/geometry.hpp"

namespace graspr {

namespace {

struct HullFace {
  std::array<int, 3> v;
  Vec3 normal;
  double offset;  // plane: normal . x = offset
  std::vector<int> outside;
  bool alive = true;
  int visit = -1;
};

std::uint64_t DirectedEdge(int a, int b) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
         static_cast<std::uint32_t>(b);
}

class Quickhull {
 public:
  explicit Quickhull(std::span<const Vec3> pts) : pts_(pts) {}

  ConvexHull Run() {
    if (pts_.size() < 4) {
      throw Error(ErrorCode::kDegenerateGeometry, "convex hull needs at least 4 points");
    }
    double extent = 0.0;
    for (const Vec3& p : pts_) {
      if (!p.allFinite()) throw Error(ErrorCode::kInvalidArgument, "non-finite point");
      extent = std::max(extent, p.cwiseAbs().maxCoeff());
    }
    Aabb box;
    for (const Vec3& p : pts_) box.Extend(p);
    const double diag = (box.max - box.min).norm();
    eps_ = 1e-12 * std::max(extent, diag);
    InitialSimplex(diag);

    // Points are only ever reassigned to newly appended faces, so one
    // forward pass reaches every face that owns outside points.
    for (std::size_t f = 0; f < faces_.size(); ++f) {
      if (!faces_[f].alive || faces_[f].outside.empty()) continue;
      AddPoint(static_cast<int>(f));
    }
    return Collect();
  }

 private:
  double Dist(const HullFace& f, int p) const { return f.normal.dot(pts_[p]) - f.offset; }

  int MakeFace(int a, int b, int c) {
    HullFace f;
    f.v = {a, b, c};
    Vec3 n = (pts_[b] - pts_[a]).cross(pts_[c] - pts_[a]);
    const double len = n.norm();
    f.normal = len > 0.0 ? Vec3(n / len) : Vec3::Zero();
    f.offset = f.normal.dot(pts_[a]);
    faces_.push_back(std::move(f));
    const int id = static_cast<int>(faces_.size()) - 1;
    for (int k = 0; k < 3; ++k) edges_[DirectedEdge(faces_[id].v[k], faces_[id].v[(k + 1) % 3])] = id;
    return id;
  }

  void InitialSimplex(double diag) {
    const int n = static_cast<int>(pts_.size());
    int i0 = 0, i1 = 0;
    for (int i = 1; i < n; ++i) {
      if (pts_[i].x() < pts_[i0].x()) i0 = i;
      if (pts_[i].x() > pts_[i1].x()) i1 = i;
    }
    if (i0 == i1 || (pts_[i1] - pts_[i0]).norm() <= eps_) {
      // Fall back to the farthest pair from point 0.
      i0 = 0;
      double best = -1.0;
      for (int i = 1; i < n; ++i) {
        const double d = (pts_[i] - pts_[0]).norm();
        if (d > best) best = d, i1 = i;
      }
    }
    const Vec3 dir = (pts_[i1] - pts_[i0]).normalized();
    int i2 = -1;
    double best = 0.0;
    for (int i = 0; i < n; ++i) {
      const Vec3 d = pts_[i] - pts_[i0];
      const double dist = (d - dir * dir.dot(d)).norm();
      if (dist > best) best = dist, i2 = i;
    }
    if (i2 < 0 || best <= 1e-10 * std::max(diag, 1e-300)) {
      throw Error(ErrorCode::kDegenerateGeometry, "points are collinear");
    }
    const Vec3 normal = (pts_[i1] - pts_[i0]).cross(pts_[i2] - pts_[i0]).normalized();
    int i3 = -1;
    best = 0.0;
    for (int i = 0; i < n; ++i) {
      const double dist = std::abs(normal.dot(pts_[i] - pts_[i0]));
      if (dist > best) best = dist, i3 = i;
    }
    if (i3 < 0 || best <= 1e-10 * std::max(diag, 1e-300)) {
      throw Error(ErrorCode::kDegenerateGeometry, "points are coplanar");
    }
    interior_ = (pts_[i0] + pts_[i1] + pts_[i2] + pts_[i3]) / 4.0;
    const bool flip = normal.dot(pts_[i3] - pts_[i0]) > 0.0;
    // Orient every face so the interior point is behind it.
    std::array<std::array<int, 3>, 4> tris = {
        {{i0, i1, i2}, {i0, i3, i1}, {i1, i3, i2}, {i2, i3, i0}}};
    if (flip) {
      for (auto& t : tris) std::swap(t[1], t[2]);
    }
    for (const auto& t : tris) MakeFace(t[0], t[1], t[2]);
    for (int p = 0; p < n; ++p) {
      if (p == i0 || p == i1 || p == i2 || p == i3) continue;
      Assign(p, 0, 4);
    }
  }

  void Assign(int p, int first_face, int end_face) {
    for (int f = first_face; f < end_face; ++f) {
      if (!faces_[f].alive) continue;
      if (Dist(faces_[f], p) > eps_) {
        faces_[f].outside.push_back(p);
        return;
      }
    }
  }

  void AddPoint(int face) {
    // Farthest outside point of this face becomes the new apex.
    int apex = -1;
    double best = -1.0;
    for (int p : faces_[face].outside) {
      const double d = Dist(faces_[face], p);
      if (d > best) best = d, apex = p;
    }
    ++stamp_;
    std::vector<int> visible;
    std::vector<int> stack = {face};
    faces_[face].visit = stamp_;
    while (!stack.empty()) {
      const int f = stack.back();
      stack.pop_back();
      visible.push_back(f);
      for (int k = 0; k < 3; ++k) {
        const int a = faces_[f].v[k], b = faces_[f].v[(k + 1) % 3];
        const int nb = edges_.at(DirectedEdge(b, a));
        if (faces_[nb].visit == stamp_) continue;
        if (Dist(faces_[nb], apex) > eps_) {
          faces_[nb].visit = stamp_;
          stack.push_back(nb);
        }
      }
    }
    // Horizon: edges of visible faces whose twin face is not visible.
    std::vector<std::pair<int, int>> horizon;
    for (int f : visible) {
      for (int k = 0; k < 3; ++k) {
        const int a = faces_[f].v[k], b = faces_[f].v[(k + 1) % 3];
        const int nb = edges_.at(DirectedEdge(b, a));
        if (faces_[nb].visit != stamp_) horizon.emplace_back(a, b);
      }
    }
    std::vector<int> orphans;
    for (int f : visible) {
      faces_[f].alive = false;
      for (int k = 0; k < 3; ++k) edges_.erase(DirectedEdge(faces_[f].v[k], faces_[f].v[(k + 1) % 3]));
      for (int p : faces_[f].outside)
        if (p != apex) orphans.push_back(p);
      faces_[f].outside.clear();
      faces_[f].outside.shrink_to_fit();
    }
    const int first_new = static_cast<int>(faces_.size());
    for (const auto& [a, b] : horizon) MakeFace(a, b, apex);
    const int end_new = static_cast<int>(faces_.size());
    for (int p : orphans) Assign(p, first_new, end_new);
  }

  ConvexHull Collect() const {
    ConvexHull hull;
    std::vector<char> used(pts_.size(), 0);
    double six_v = 0.0;
    for (const HullFace& f : faces_) {
      if (!f.alive) continue;
      hull.faces.push_back(f.v);
      const Vec3 a = pts_[f.v[0]] - interior_;
      const Vec3 b = pts_[f.v[1]] - interior_;
      const Vec3 c = pts_[f.v[2]] - interior_;
      six_v += a.dot(b.cross(c));
      for (int v : f.v) used[v] = 1;
    }
    for (std::size_t i = 0; i < used.size(); ++i)
      if (used[i]) hull.vertices.push_back(static_cast<int>(i));
    hull.volume = six_v / 6.0;
    return hull;
  }

  std::span<const Vec3> pts_;
  std::vector<HullFace> faces_;
  std::unordered_map<std::uint64_t, int> edges_;
  Vec3 interior_ = Vec3::Zero();
  double eps_ = 0.0;
  int stamp_ = 0;
};

}  // namespace

ConvexHull ComputeConvexHull(std::span<const Vec3> points) { return Quickhull(points).Run(); }

}  // namespace graspr

#include "graspr/delaunay.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "graspr/error.hpp"
#include "graspr/geometry.hpp"

namespace graspr {

namespace {

std::uint64_t SplitMix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

double UnitFromBits(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * (1.0 / 9007199254740992.0) * 2.0 - 1.0;
}

std::uint64_t SpreadBits(std::uint64_t v) {
  v &= 0x1fffff;
  v = (v | v << 32) & 0x1f00000000ffffULL;
  v = (v | v << 16) & 0x1f0000ff0000ffULL;
  v = (v | v << 8) & 0x100f00f00f00f00fULL;
  v = (v | v << 4) & 0x10c30c30c30c30c3ULL;
  v = (v | v << 2) & 0x1249249249249249ULL;
  return v;
}

double Det3(const Vec3& x, const Vec3& y, const Vec3& z) { return x.dot(y.cross(z)); }

}  // namespace

namespace {

using Quad = __float128;

struct QVec {
  Quad x, y, z;
};

QVec Sub(const Vec3& a, const Vec3& b) {
  return {Quad(a.x()) - Quad(b.x()), Quad(a.y()) - Quad(b.y()), Quad(a.z()) - Quad(b.z())};
}

Quad QDet3(const QVec& a, const QVec& b, const QVec& c) {
  return a.x * (b.y * c.z - b.z * c.y) - a.y * (b.x * c.z - b.z * c.x) + a.z * (b.x * c.y - b.y * c.x);
}

double Perm3(const Vec3& x, const Vec3& y, const Vec3& z) {
  const Vec3 ax = x.cwiseAbs(), ay = y.cwiseAbs(), az = z.cwiseAbs();
  return ax.x() * (ay.y() * az.z() + ay.z() * az.y()) + ax.y() * (ay.x() * az.z() + ay.z() * az.x()) +
         ax.z() * (ay.x() * az.y() + ay.y() * az.x());
}

// Results below these fractions of the permanent are recomputed in quad precision.
constexpr double kOrientBound = 1e-14;
constexpr double kInSphereBound = 1e-13;

}  // namespace

double Delaunay3::Orient(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
  const Vec3 ba = b - a, ca = c - a, da = d - a;
  const double det = Det3(ba, ca, da);
  if (std::abs(det) > kOrientBound * Perm3(ba, ca, da)) return det;
  return static_cast<double>(QDet3(Sub(b, a), Sub(c, a), Sub(d, a)));
}

double Delaunay3::InSphere(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d,
                           const Vec3& e) {
  const Vec3 ae = a - e, be = b - e, ce = c - e, de = d - e;
  const double la = ae.squaredNorm(), lb = be.squaredNorm(), lc = ce.squaredNorm(),
               ld = de.squaredNorm();
  const double det = -la * Det3(be, ce, de) + lb * Det3(ae, ce, de) - lc * Det3(ae, be, de) +
                     ld * Det3(ae, be, ce);
  const double perm = la * Perm3(be, ce, de) + lb * Perm3(ae, ce, de) + lc * Perm3(ae, be, de) +
                      ld * Perm3(ae, be, ce);
  if (std::abs(det) > kInSphereBound * perm) return -det;
  const QVec qa = Sub(a, e), qb = Sub(b, e), qc = Sub(c, e), qd = Sub(d, e);
  const auto lift = [](const QVec& v) { return v.x * v.x + v.y * v.y + v.z * v.z; };
  const Quad q = -lift(qa) * QDet3(qb, qc, qd) + lift(qb) * QDet3(qa, qc, qd) -
                 lift(qc) * QDet3(qa, qb, qd) + lift(qd) * QDet3(qa, qb, qc);
  return -static_cast<double>(q);
}

bool Delaunay3::finite(int t) const {
  const auto& v = tets_[t].v;
  return v[0] >= 0 && v[1] >= 0 && v[2] >= 0 && v[3] >= 0;
}

double Delaunay3::circumradius(int t) const {
  const auto& v = tets_[t].v;
  const Vec3& a = work_[v[0]];
  const Vec3 b = work_[v[1]] - a, c = work_[v[2]] - a, d = work_[v[3]] - a;
  const double denom = 2.0 * Det3(b, c, d);
  if (denom == 0.0) return std::numeric_limits<double>::infinity();
  const Vec3 center =
      (b.squaredNorm() * c.cross(d) + c.squaredNorm() * d.cross(b) + d.squaredNorm() * b.cross(c)) /
      denom;
  return center.norm();
}

double Delaunay3::volume(int t) const {
  const auto& v = tets_[t].v;
  return Det3(input_[v[1]] - input_[v[0]], input_[v[2]] - input_[v[0]], input_[v[3]] - input_[v[0]]) / 6.0;
}

Delaunay3::Delaunay3(std::span<const Vec3> points) : input_(points) {
  const int n = static_cast<int>(points.size());
  if (n < 4) throw Error(ErrorCode::kDegenerateGeometry, "Delaunay needs at least 4 points");
  Aabb box;
  for (const Vec3& p : points) {
    if (!p.allFinite()) throw Error(ErrorCode::kInvalidArgument, "non-finite point");
    box.Extend(p);
  }
  const double diag = (box.max - box.min).norm();
  if (!(diag > 0.0)) throw Error(ErrorCode::kDegenerateGeometry, "all points coincide");

  // Pick a well-spread initial simplex on the unperturbed input; failure
  // means the input is collinear or coplanar.
  int i0 = 0, i1 = 0;
  double best = -1.0;
  for (int i = 0; i < n; ++i) {
    const double d = (points[i] - points[0]).squaredNorm();
    if (d > best) best = d, i1 = i;
  }
  best = -1.0;
  for (int i = 0; i < n; ++i) {
    const double d = (points[i] - points[i1]).squaredNorm();
    if (d > best) best = d, i0 = i;
  }
  const Vec3 dir = (points[i1] - points[i0]).normalized();
  int i2 = -1;
  best = 0.0;
  for (int i = 0; i < n; ++i) {
    const Vec3 d = points[i] - points[i0];
    const double dist = (d - dir * dir.dot(d)).norm();
    if (dist > best) best = dist, i2 = i;
  }
  if (i2 < 0 || best <= 1e-10 * diag) throw Error(ErrorCode::kDegenerateGeometry, "points are collinear");
  const Vec3 normal = (points[i1] - points[i0]).cross(points[i2] - points[i0]).normalized();
  int i3 = -1;
  best = 0.0;
  for (int i = 0; i < n; ++i) {
    const double dist = std::abs(normal.dot(points[i] - points[i0]));
    if (dist > best) best = dist, i3 = i;
  }
  if (i3 < 0 || best <= 1e-10 * diag) throw Error(ErrorCode::kDegenerateGeometry, "points are coplanar");

  const double jitter = 1e-9 * diag;
  work_.resize(n);
  for (int i = 0; i < n; ++i) {
    const std::uint64_t h = SplitMix64(static_cast<std::uint64_t>(i));
    const Vec3 u(UnitFromBits(h), UnitFromBits(SplitMix64(h)), UnitFromBits(SplitMix64(h + 1)));
    work_[i] = points[i] + jitter * u;
  }

  // Exact duplicates collapse onto their first occurrence.
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const Vec3& p = points[a];
    const Vec3& q = points[b];
    if (p.x() != q.x()) return p.x() < q.x();
    if (p.y() != q.y()) return p.y() < q.y();
    if (p.z() != q.z()) return p.z() < q.z();
    return a < b;
  });
  std::vector<int> unique;
  for (int k = 0; k < n; ++k) {
    if (k > 0 && points[order[k]] == points[order[k - 1]]) continue;
    unique.push_back(order[k]);
  }

  // Z-order insertion keeps point location walks short.
  const Vec3 extent = (box.max - box.min).cwiseMax(Vec3::Constant(1e-300));
  std::vector<std::pair<std::uint64_t, int>> keyed;
  keyed.reserve(unique.size());
  for (int i : unique) {
    if (i == i0 || i == i1 || i == i2 || i == i3) continue;
    const Vec3 q = ((points[i] - box.min).array() / extent.array()) * 2097151.0;
    const std::uint64_t key = SpreadBits(static_cast<std::uint64_t>(q.x())) |
                              SpreadBits(static_cast<std::uint64_t>(q.y())) << 1 |
                              SpreadBits(static_cast<std::uint64_t>(q.z())) << 2;
    keyed.emplace_back(key, i);
  }
  std::sort(keyed.begin(), keyed.end());

  // Initial tetrahedron and its four hull tetrahedra.
  std::array<int, 4> first = {i0, i1, i2, i3};
  if (Orient(work_[i0], work_[i1], work_[i2], work_[i3]) < 0.0) std::swap(first[2], first[3]);
  tets_.reserve(8 * n);
  alive_.reserve(8 * n);
  mark_.reserve(8 * n);
  NewTet(first);
  for (int i = 0; i < 4; ++i) {
    std::array<int, 4> v = first;
    v[i] = kInfinite;
    // Replacing an inner vertex by an outside point flips orientation; swap
    // two finite entries so that "infinite -> p" is positive iff p is outside.
    const int a = (i + 1) % 4, b = (i + 2) % 4;
    std::swap(v[a], v[b]);
    NewTet(v);
  }
  // Link all faces of the initial five tetrahedra by shared vertex triples.
  for (int t = 0; t < 5; ++t) {
    for (int i = 0; i < 4; ++i) {
      std::array<int, 3> f;
      for (int k = 0, m = 0; k < 4; ++k)
        if (k != i) f[m++] = tets_[t].v[k];
      std::sort(f.begin(), f.end());
      for (int u = 0; u < 5; ++u) {
        if (u == t) continue;
        for (int j = 0; j < 4; ++j) {
          std::array<int, 3> g;
          for (int k = 0, m = 0; k < 4; ++k)
            if (k != j) g[m++] = tets_[u].v[k];
          std::sort(g.begin(), g.end());
          if (f == g) tets_[t].n[i] = u;
        }
      }
    }
  }
  last_ = 0;
  for (const auto& [key, idx] : keyed) Insert(idx);

  // Compact away dead slots.
  std::vector<int> remap(tets_.size(), -1);
  std::vector<Tet> packed;
  packed.reserve(tets_.size() - free_.size());
  for (std::size_t t = 0; t < tets_.size(); ++t) {
    if (!alive_[t]) continue;
    remap[t] = static_cast<int>(packed.size());
    packed.push_back(tets_[t]);
  }
  for (Tet& t : packed)
    for (int& nb : t.n) nb = remap[nb];
  tets_ = std::move(packed);
  alive_.assign(tets_.size(), 1);
  free_.clear();
  mark_.clear();
}

int Delaunay3::NewTet(const std::array<int, 4>& v) {
  int id;
  if (!free_.empty()) {
    id = free_.back();
    free_.pop_back();
    tets_[id] = Tet{v, {-1, -1, -1, -1}};
    alive_[id] = 1;
    mark_[id] = 0;
  } else {
    id = static_cast<int>(tets_.size());
    tets_.push_back(Tet{v, {-1, -1, -1, -1}});
    alive_.push_back(1);
    mark_.push_back(0);
  }
  return id;
}

bool Delaunay3::InConflict(int t, int p) const {
  const auto& v = tets_[t].v;
  std::array<Vec3, 4> q;
  bool infinite = false;
  for (int k = 0; k < 4; ++k) {
    if (v[k] == kInfinite) {
      q[k] = work_[p];
      infinite = true;
    } else {
      q[k] = work_[v[k]];
    }
  }
  if (infinite) return Orient(q[0], q[1], q[2], q[3]) > 0.0;
  return InSphere(q[0], q[1], q[2], q[3], work_[p]) > 0.0;
}

int Delaunay3::Locate(int p, int start) {
  int t = alive_[start] ? start : -1;
  if (t < 0) {
    for (std::size_t k = 0; k < tets_.size(); ++k)
      if (alive_[k]) {
        t = static_cast<int>(k);
        break;
      }
  }
  const Vec3& x = work_[p];
  const std::size_t guard = 4 * tets_.size() + 64;
  for (std::size_t step = 0; step < guard; ++step) {
    const Tet& tet = tets_[t];
    if (!finite(t)) {
      if (InConflict(t, p)) return t;
      for (int k = 0; k < 4; ++k)
        if (tet.v[k] == kInfinite) t = tet.n[k];
      continue;
    }
    rng_ ^= rng_ << 13;
    rng_ ^= rng_ >> 7;
    rng_ ^= rng_ << 17;
    const int r = static_cast<int>(rng_ & 3);
    bool moved = false;
    for (int k = 0; k < 4; ++k) {
      const int i = (r + k) & 3;
      std::array<Vec3, 4> q = {work_[tet.v[0]], work_[tet.v[1]], work_[tet.v[2]], work_[tet.v[3]]};
      q[i] = x;
      if (Orient(q[0], q[1], q[2], q[3]) < 0.0) {
        t = tet.n[i];
        moved = true;
        break;
      }
    }
    if (!moved) return t;
  }
  // The walk should always terminate; fall back to a scan if rounding made it cycle.
  for (std::size_t k = 0; k < tets_.size(); ++k)
    if (alive_[k] && InConflict(static_cast<int>(k), p)) return static_cast<int>(k);
  throw Error(ErrorCode::kDegenerateGeometry, "Delaunay point location failed");
}

void Delaunay3::Insert(int p) {
  const int seed = Locate(p, last_);
  stamp_ += 2;
  const int in = stamp_, out = stamp_ + 1;
  std::vector<int> cavity = {seed};
  mark_[seed] = in;
  std::vector<std::pair<int, int>> boundary;
  for (std::size_t c = 0; c < cavity.size(); ++c) {
    const int t = cavity[c];
    for (int i = 0; i < 4; ++i) {
      const int nb = tets_[t].n[i];
      if (mark_[nb] == in) continue;
      if (mark_[nb] != out) {
        if (InConflict(nb, p)) {
          mark_[nb] = in;
          cavity.push_back(nb);
          continue;
        }
        mark_[nb] = out;
      }
      boundary.emplace_back(t, i);
    }
  }

  struct Pending {
    std::uint64_t key;
    int tet;
    int face;
  };
  std::vector<Pending> pending;
  pending.reserve(boundary.size() * 3);
  std::vector<int> created;
  created.reserve(boundary.size());
  for (const auto& [t, i] : boundary) {
    std::array<int, 4> v = tets_[t].v;
    const int nb = tets_[t].n[i];
    v[i] = p;
    const int nt = NewTet(v);
    created.push_back(nt);
    tets_[nt].n[i] = nb;
    for (int j = 0; j < 4; ++j)
      if (tets_[nb].n[j] == t) tets_[nb].n[j] = nt;
    for (int k = 0; k < 4; ++k) {
      if (k == i) continue;
      int e0 = -2, e1 = -2;
      for (int j = 0; j < 4; ++j) {
        if (j == i || j == k) continue;
        (e0 == -2 ? e0 : e1) = v[j];
      }
      if (e0 > e1) std::swap(e0, e1);
      const std::uint64_t key = (static_cast<std::uint64_t>(static_cast<std::uint32_t>(e0 + 1)) << 32) |
                                static_cast<std::uint32_t>(e1 + 1);
      pending.push_back({key, nt, k});
    }
  }
  std::sort(pending.begin(), pending.end(), [](const Pending& a, const Pending& b) {
    return a.key < b.key;
  });
  for (std::size_t k = 0; k + 1 < pending.size(); k += 2) {
    if (pending[k].key != pending[k + 1].key) {
      throw Error(ErrorCode::kDegenerateGeometry, "Delaunay cavity is not a topological ball");
    }
    tets_[pending[k].tet].n[pending[k].face] = pending[k + 1].tet;
    tets_[pending[k + 1].tet].n[pending[k + 1].face] = pending[k].tet;
  }
  for (int t : cavity) {
    alive_[t] = 0;
    free_.push_back(t);
  }
  last_ = created.front();
}

// ---------------------------------------------------------------------------

AlphaShape ComputeAlphaShape(std::span<const Vec3> points, double radius) {
  if (!(radius > 0.0)) throw Error(ErrorCode::kInvalidArgument, "alpha radius must be positive");
  const Delaunay3 dt(points);
  const auto& tets = dt.tets();
  std::vector<char> kept(tets.size(), 0);
  AlphaShape shape;
  shape.alpha = radius;
  for (std::size_t t = 0; t < tets.size(); ++t) {
    if (!dt.finite(static_cast<int>(t))) continue;
    if (dt.circumradius(static_cast<int>(t)) <= radius) {
      kept[t] = 1;
      ++shape.tetrahedra;
      shape.volume += dt.volume(static_cast<int>(t));
    }
  }
  for (std::size_t t = 0; t < tets.size(); ++t) {
    if (!kept[t]) continue;
    for (int i = 0; i < 4; ++i) {
      if (kept[tets[t].n[i]]) continue;
      Face f;
      for (int k = 0, m = 0; k < 4; ++k)
        if (k != i) f[m++] = tets[t].v[k];
      if (Delaunay3::Orient(dt.perturbed(f[0]), dt.perturbed(f[1]), dt.perturbed(f[2]),
                            dt.perturbed(tets[t].v[i])) > 0.0) {
        std::swap(f[1], f[2]);
      }
      shape.faces.push_back(f);
    }
  }
  std::sort(shape.faces.begin(), shape.faces.end());

  std::vector<int> parent(points.size());
  std::iota(parent.begin(), parent.end(), 0);
  const auto find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  std::vector<std::pair<int, int>> edges;
  for (const Face& f : shape.faces) {
    for (int k = 0; k < 3; ++k) {
      shape.vertices.push_back(f[k]);
      const int a = f[k], b = f[(k + 1) % 3];
      edges.emplace_back(std::min(a, b), std::max(a, b));
      parent[find(a)] = find(b);
    }
  }
  std::sort(shape.vertices.begin(), shape.vertices.end());
  shape.vertices.erase(std::unique(shape.vertices.begin(), shape.vertices.end()), shape.vertices.end());
  std::vector<int> roots;
  for (int v : shape.vertices) roots.push_back(find(v));
  std::sort(roots.begin(), roots.end());
  shape.components = static_cast<int>(std::unique(roots.begin(), roots.end()) - roots.begin());

  std::sort(edges.begin(), edges.end());
  shape.manifold = !shape.faces.empty();
  for (std::size_t k = 0; k < edges.size();) {
    std::size_t m = k;
    while (m < edges.size() && edges[m] == edges[k]) ++m;
    if (m - k != 2) shape.manifold = false;
    k = m;
  }
  return shape;
}

}  // namespace graspr

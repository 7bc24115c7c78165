#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "graspr/kinematics.hpp"

namespace graspr {

/// 3D Delaunay tetrahedralization by incremental Bowyer-Watson insertion with
/// an infinite vertex closing the convex hull.
///
/// Predicates run on a copy of the input perturbed by ~1e-9 of the bounding
/// box diagonal (deterministic per point index), which breaks the cospherical
/// and coplanar ties of grid-like input. Exact duplicates are merged onto their
/// first occurrence. Vertex ids in the output refer to input indices.
class Delaunay3 {
 public:
  static constexpr int kInfinite = -1;

  struct Tet {
    std::array<int, 4> v;  // kInfinite marks a hull tetrahedron
    std::array<int, 4> n;  // neighbor opposite v[i]
  };

  explicit Delaunay3(std::span<const Vec3> points);

  const std::vector<Tet>& tets() const { return tets_; }
  bool finite(int t) const;
  /// Circumradius of a finite tetrahedron (perturbed coordinates).
  double circumradius(int t) const;
  /// Signed volume of a finite tetrahedron in input coordinates. Slivers that
  /// the perturbation oriented against the input may come out negative; sums
  /// over a region still give its enclosed volume.
  double volume(int t) const;
  /// Perturbed coordinates used by the predicates.
  const Vec3& perturbed(int v) const { return work_[v]; }

  static double Orient(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d);
  /// Positive when e lies strictly inside the circumsphere of a positively
  /// oriented tetrahedron (a, b, c, d).
  static double InSphere(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d, const Vec3& e);

 private:
  void Insert(int p);
  int Locate(int p, int start);
  bool InConflict(int t, int p) const;
  int NewTet(const std::array<int, 4>& v);

  std::span<const Vec3> input_;
  std::vector<Vec3> work_;
  std::vector<Tet> tets_;
  std::vector<char> alive_;
  std::vector<int> free_;
  std::vector<int> mark_;
  int stamp_ = 0;
  int last_ = 0;
  std::uint64_t rng_ = 0x2545F4914F6CDD1DULL;
};

}  // namespace graspr

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "graspr/delaunay.hpp"
#include "graspr/error.hpp"
#include "graspr/geometry.hpp"
#include "support/oracles.hpp"

namespace graspr {
namespace {

using testing::BruteForceDistance;

std::vector<Vec3> CubeCorners(double side = 1.0) {
  std::vector<Vec3> pts;
  for (int i = 0; i < 8; ++i) pts.emplace_back((i & 1) * side, ((i >> 1) & 1) * side, ((i >> 2) & 1) * side);
  return pts;
}

TriMesh UnitCube() { return MakeBox(Vec3::Constant(0.5)).Transformed(Transform(Eigen::Translation3d(0.5, 0.5, 0.5))); }

Transform RandomRigid(std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Eigen::Quaterniond q(g(rng), g(rng), g(rng), g(rng));
  q.normalize();
  Transform t = Transform::Identity();
  t.linear() = q.toRotationMatrix();
  t.translation() = Vec3(g(rng), g(rng), g(rng));
  return t;
}

TEST(Primitives, ClosedAndOutward) {
  const TriMesh meshes[] = {MakeBox(Vec3(0.1, 0.2, 0.3)), MakeCylinder(0.03, 0.1), MakeIcosphere(0.05),
                            MakeTorus(0.05, 0.01), MakeCapsuleMesh({Vec3::Zero(), Vec3(0, 0, 0.1), 0.02})};
  for (const TriMesh& m : meshes) {
    EXPECT_TRUE(m.watertight());
    EXPECT_GT(SignedVolume(m), 0.0);
  }
  EXPECT_NEAR(MakeBox(Vec3(0.1, 0.2, 0.3)).Volume(), 0.2 * 0.4 * 0.6, 1e-15);
  const double r = 0.05;
  EXPECT_NEAR(MakeIcosphere(r, 4).Volume(), 4.0 / 3.0 * M_PI * r * r * r, 3e-3 * 4.0 / 3.0 * M_PI * r * r * r);
}

TEST(Primitives, VoxelRepairApproximatesOpenBox) {
  const TriMesh box = UnitCube();
  std::vector<Face> faces(box.faces().begin(), box.faces().end() - 1);
  const TriMesh open(box.vertices(), faces);
  EXPECT_FALSE(open.watertight());
  EXPECT_NEAR(open.Volume(), 1.0, 0.05);
}

TEST(ConvexHull, UnitCubeVolume) {
  const auto pts = CubeCorners();
  EXPECT_NEAR(ComputeConvexHull(pts).volume, 1.0, 1e-12);
}

TEST(ConvexHull, InteriorPointIsNotAVertex) {
  auto pts = CubeCorners();
  pts.emplace_back(0.5, 0.5, 0.5);
  const ConvexHull hull = ComputeConvexHull(pts);
  EXPECT_NEAR(hull.volume, 1.0, 1e-12);
  EXPECT_EQ(std::count(hull.vertices.begin(), hull.vertices.end(), 8), 0);
  EXPECT_EQ(hull.vertices.size(), 8u);
}

TEST(ConvexHull, ContainsRandomBallPoints) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> u;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Vec3> pts;
    for (int i = 0; i < 100; ++i) {
      const Vec3 d = Vec3(g(rng), g(rng), g(rng)).normalized();
      pts.push_back(d * std::cbrt(u(rng)));
    }
    const ConvexHull hull = ComputeConvexHull(pts);
    EXPECT_GT(hull.volume, 0.0);
    for (const Face& f : hull.faces) {
      const Vec3 n = (pts[f[1]] - pts[f[0]]).cross(pts[f[2]] - pts[f[0]]).normalized();
      for (const Vec3& p : pts) EXPECT_LE(n.dot(p - pts[f[0]]), 1e-9);
    }
  }
}

TEST(ConvexHull, RigidInvariantAndCubicInScale) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<Vec3> pts;
  for (int i = 0; i < 200; ++i) pts.emplace_back(u(rng), u(rng), u(rng));
  const double v = ComputeConvexHull(pts).volume;
  const Transform t = RandomRigid(rng);
  std::vector<Vec3> moved, scaled;
  for (const Vec3& p : pts) {
    moved.push_back(t * p);
    scaled.push_back(2.5 * p);
  }
  EXPECT_NEAR(ComputeConvexHull(moved).volume, v, 1e-9 * v);
  EXPECT_NEAR(ComputeConvexHull(scaled).volume, v * 2.5 * 2.5 * 2.5, 1e-9 * v);
}

TEST(ConvexHull, DegenerateInputThrows) {
  std::vector<Vec3> flat = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {1, 1, 0}, {0.3, 0.2, 0}};
  EXPECT_THROW(ComputeConvexHull(flat), Error);
  std::vector<Vec3> three = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
  EXPECT_THROW(ComputeConvexHull(three), Error);
}

TEST(Predicates, InSpherePositiveInsidePositiveTet) {
  const Vec3 a(0, 0, 0), b(1, 0, 0), c(0, 1, 0), d(0, 0, 1);
  ASSERT_GT(Delaunay3::Orient(a, b, c, d), 0.0);
  EXPECT_GT(Delaunay3::InSphere(a, b, c, d, Vec3(0.25, 0.25, 0.25)), 0.0);
  EXPECT_LT(Delaunay3::InSphere(a, b, c, d, Vec3(2, 2, 2)), 0.0);
  EXPECT_NEAR(Delaunay3::InSphere(a, b, c, d, Vec3(1, 1, 1)), 0.0, 1e-15);
}

TEST(Delaunay, EmptyCircumsphereOnRandomPoints) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<Vec3> pts;
  for (int i = 0; i < 300; ++i) pts.emplace_back(u(rng), u(rng), u(rng));
  const Delaunay3 dt(pts);
  double total = 0.0;
  for (std::size_t t = 0; t < dt.tets().size(); ++t) {
    if (!dt.finite(static_cast<int>(t))) continue;
    const auto& v = dt.tets()[t].v;
    const Vec3 &a = pts[v[0]], &b = pts[v[1]], &c = pts[v[2]], &d = pts[v[3]];
    total += dt.volume(static_cast<int>(t));
    // Oracle circumcenter by solving the 3x3 bisector system.
    Eigen::Matrix3d m;
    m.row(0) = 2 * (b - a);
    m.row(1) = 2 * (c - a);
    m.row(2) = 2 * (d - a);
    const Vec3 rhs(b.squaredNorm() - a.squaredNorm(), c.squaredNorm() - a.squaredNorm(),
                   d.squaredNorm() - a.squaredNorm());
    const Vec3 center = m.colPivHouseholderQr().solve(rhs);
    const double r = (center - a).norm();
    if (r > 2.0) continue;  // hull slivers are too ill-conditioned to compare
    EXPECT_NEAR(dt.circumradius(static_cast<int>(t)), r, 1e-5 * r);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (static_cast<int>(i) == v[0] || static_cast<int>(i) == v[1] || static_cast<int>(i) == v[2] ||
          static_cast<int>(i) == v[3])
        continue;
      EXPECT_GE((pts[i] - center).norm(), r * (1 - 1e-7));
    }
  }
  EXPECT_NEAR(total, ComputeConvexHull(pts).volume, 1e-9);
}

TEST(Delaunay, GridInputTriangulatesHull) {
  std::vector<Vec3> pts;
  for (int i = 0; i <= 10; ++i)
    for (int j = 0; j <= 10; ++j)
      for (int k = 0; k <= 10; ++k) pts.emplace_back(i * 0.1, j * 0.1, k * 0.1);
  pts.push_back(pts.front());  // exact duplicate is merged
  const Delaunay3 dt(pts);
  double total = 0.0;
  for (std::size_t t = 0; t < dt.tets().size(); ++t)
    if (dt.finite(static_cast<int>(t))) total += dt.volume(static_cast<int>(t));
  EXPECT_NEAR(total, 1.0, 1e-9);
}

TEST(AlphaShape, LargeRadiusIsConvexHull) {
  const auto pts = CubeCorners();
  const AlphaShape shape = ComputeAlphaShape(pts, 100.0);
  EXPECT_NEAR(shape.volume, 1.0, 1e-12);
  EXPECT_EQ(shape.vertices.size(), 8u);
  EXPECT_EQ(shape.faces.size(), 12u);
  EXPECT_TRUE(shape.manifold);
  EXPECT_EQ(shape.components, 1);
}

TEST(AlphaShape, GridInteriorNotOnBoundary) {
  std::vector<Vec3> pts;
  auto index = [](int i, int j, int k) { return (i * 11 + j) * 11 + k; };
  for (int i = 0; i <= 10; ++i)
    for (int j = 0; j <= 10; ++j)
      for (int k = 0; k <= 10; ++k) pts.emplace_back(i * 0.1, j * 0.1, k * 0.1);
  const AlphaShape shape = ComputeAlphaShape(pts, 0.15);
  EXPECT_NEAR(shape.volume, 1.0, 1e-9);
  EXPECT_TRUE(shape.manifold);
  for (int i = 1; i < 10; ++i)
    for (int j = 1; j < 10; ++j)
      for (int k = 1; k < 10; ++k)
        EXPECT_FALSE(std::binary_search(shape.vertices.begin(), shape.vertices.end(), index(i, j, k)));
  for (int v : shape.vertices) {
    const Vec3& p = pts[v];
    const bool on_face = (p.array() < 1e-12).any() || (p.array() > 1 - 1e-12).any();
    EXPECT_TRUE(on_face);
  }
}

TEST(AlphaShape, SeparatedClustersGiveTwoComponents) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-0.05, 0.05);
  std::vector<Vec3> pts;
  for (int i = 0; i < 400; ++i) pts.emplace_back(u(rng), u(rng), u(rng));
  for (int i = 0; i < 400; ++i) pts.emplace_back(1 + u(rng), u(rng), u(rng));
  const AlphaShape shape = ComputeAlphaShape(pts, 0.1);
  EXPECT_EQ(shape.components, 2);
  EXPECT_GT(shape.volume, 0.0);
}

TEST(AlphaShape, VolumeBoundedByHullAndMonotoneInRadius) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g;
  std::vector<Vec3> pts;
  for (int i = 0; i < 500; ++i) {
    const Vec3 d = Vec3(g(rng), g(rng), g(rng)).normalized();
    pts.push_back(d * (0.8 + 0.2 * std::abs(g(rng))));  // thick shell
  }
  const double hull = ComputeConvexHull(pts).volume;
  double previous = 0.0;
  for (double r : {0.05, 0.1, 0.2, 0.4, 0.8, 1e9}) {
    const double v = ComputeAlphaShape(pts, r).volume;
    EXPECT_LE(v, hull * (1 + 1e-12));
    EXPECT_GE(v, previous);
    previous = v;
  }
  EXPECT_NEAR(previous, hull, 1e-9);
}

TEST(AlphaShape, DegenerateInputThrows) {
  std::vector<Vec3> line = {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}, {3, 0, 0}};
  EXPECT_THROW(ComputeAlphaShape(line, 1.0), Error);
  EXPECT_THROW(ComputeAlphaShape(CubeCorners(), 0.0), Error);
}

TEST(DistanceToMesh, AnalyticCases) {
  const TriMesh cube = MakeBox(Vec3::Constant(0.5));
  EXPECT_EQ(DistanceToMesh(cube.vertices()[0], cube), 0.0);
  EXPECT_NEAR(DistanceToMesh(Vec3(0, 0, 2), cube), 1.5, 1e-15);
  EXPECT_THROW(DistanceToMesh(Vec3::Zero(), TriMesh()), Error);
}

TEST(DistanceToMesh, MatchesBruteForce) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(-0.2, 0.2);
  const TriMesh mesh = Merge(std::vector<TriMesh>{
      MakeTorus(0.06, 0.015), MakeIcosphere(0.03, 2).Transformed(Transform(Eigen::Translation3d(0.1, 0, 0)))});
  const MeshBvh bvh(mesh);
  for (int i = 0; i < 10000; ++i) {
    const Vec3 p(u(rng), u(rng), u(rng));
    const double expected = BruteForceDistance(p, mesh);
    ASSERT_NEAR(DistanceToMesh(p, bvh), expected, 1e-12);
  }
}

TEST(Collide, BasicCases) {
  const TriMesh cube = UnitCube();
  EXPECT_TRUE(Collide(cube, cube, 1e-3));
  const TriMesh far = cube.Transformed(Transform(Eigen::Translation3d(2, 0, 0)));
  EXPECT_FALSE(Collide(cube, far, 1e-3));
  EXPECT_FALSE(Collide(far, cube, 1e-3));
}

TEST(Collide, CapsuleGrazingFace) {
  const TriMesh cube = UnitCube();
  const MeshBvh bvh(cube);
  // Capsule parallel to the top face, surface 0.5 mm above it.
  const Capsule grazing{Vec3(0.2, 0.5, 1.0105), Vec3(0.8, 0.5, 1.0105), 0.01};
  EXPECT_TRUE(bvh.CapsuleWithin(grazing, 1e-3));
  EXPECT_NEAR(bvh.CapsuleSeparation(grazing), 0.0005, 1e-12);
  const Capsule clear{Vec3(0.2, 0.5, 1.012), Vec3(0.8, 0.5, 1.012), 0.01};
  EXPECT_FALSE(bvh.CapsuleWithin(clear, 1e-3));
  EXPECT_TRUE(Collide(cube, MakeCapsuleMesh(grazing, 24, 8), 1e-3));
}

TEST(CageRatio, CubeCases) {
  const TriMesh cube = UnitCube();
  const auto corners = CubeCorners();
  EXPECT_NEAR(ComputeCageRatio(corners, cube).ratio, 1.0, 1e-12);
  const std::vector<Vec3> alternating = {{0, 0, 0}, {1, 1, 0}, {1, 0, 1}, {0, 1, 1}};
  const CageRatio tet = ComputeCageRatio(alternating, cube);
  EXPECT_NEAR(tet.ratio, 1.0 / 3.0, 1e-9);
  EXPECT_FALSE(tet.degenerate_contacts);
  const std::vector<Vec3> three(alternating.begin(), alternating.begin() + 3);
  const CageRatio few = ComputeCageRatio(three, cube);
  EXPECT_EQ(few.ratio, 0.0);
  EXPECT_TRUE(few.degenerate_contacts);
}

TEST(CageRatio, RigidInvariant) {
  std::mt19937_64 rng(17);
  const TriMesh cube = UnitCube();
  const std::vector<Vec3> contacts = {{0, 0, 0}, {1, 1, 0}, {1, 0, 1}, {0, 1, 1}, {0.5, 0.5, 1}};
  const double r = ComputeCageRatio(contacts, cube).ratio;
  const Transform t = RandomRigid(rng);
  std::vector<Vec3> moved;
  for (const Vec3& p : contacts) moved.push_back(t * p);
  EXPECT_NEAR(ComputeCageRatio(moved, cube.Transformed(t)).ratio, r, 1e-9);
}

TEST(ContactPoints, Cases) {
  const TriMesh cube = UnitCube();
  const Capsule far{Vec3(5, 5, 5), Vec3(6, 5, 5), 0.01};
  EXPECT_TRUE(ContactPoints(std::vector<Capsule>{far}, cube, 1e-3).empty());

  // Pressed 0.5 mm into the centre of the top face; only that face's two
  // triangles (its four corners) come within tolerance.
  const Capsule pressed{Vec3(0.45, 0.5, 1.0095), Vec3(0.55, 0.5, 1.0095), 0.01};
  const auto pts = ContactPoints(std::vector<Capsule>{pressed}, cube, 1e-3);
  ASSERT_EQ(pts.size(), 4u);
  for (const Vec3& p : pts) EXPECT_DOUBLE_EQ(p.z(), 1.0);

  const Capsule envelope{Vec3(0.5, 0.5, 0.5), Vec3(0.5, 0.5, 0.5001), 1.0};
  EXPECT_EQ(ContactPoints(std::vector<Capsule>{envelope}, cube, 1e-3).size(), cube.vertices().size());
}

}  // namespace
}  // namespace graspr

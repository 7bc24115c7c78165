#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "graspr/geometry.hpp"

namespace graspr::testing {

// Point-segment distance by clamped projection.
inline double OracleSegment(const Vec3& p, const Vec3& a, const Vec3& b) {
  const Vec3 ab = b - a;
  const double t = std::clamp((p - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
  return (a + t * ab - p).norm();
}

// Plane projection when the foot lies inside, otherwise the nearest of the
// three clamped edge projections.
inline double OracleTriangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 n = (b - a).cross(c - a).normalized();
  const Vec3 foot = p - n * n.dot(p - a);
  const bool inside = n.dot((b - a).cross(foot - a)) >= 0 && n.dot((c - b).cross(foot - b)) >= 0 &&
                      n.dot((a - c).cross(foot - c)) >= 0;
  if (inside) return std::abs(n.dot(p - a));
  return std::min({OracleSegment(p, a, b), OracleSegment(p, b, c), OracleSegment(p, c, a)});
}

inline double BruteForceDistance(const Vec3& p, const TriMesh& mesh) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t f = 0; f < mesh.faces().size(); ++f) {
    const auto t = mesh.triangle(f);
    best = std::min(best, OracleTriangle(p, t[0], t[1], t[2]));
  }
  return best;
}

// Counts concordant pairs directly; ties count half.
inline double PairwiseAuc(const std::vector<double>& s, const std::vector<double>& y) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[i] != 1.0 || y[j] != 0.0) continue;
      den += 1.0;
      num += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
    }
  }
  return num / den;
}

// Max over coordinates of |analytic - fd| / max(|analytic|, |fd|, 1e-3), fd by central differences.
inline double MaxRelativeGradientError(const std::function<double(const Eigen::VectorXd&)>& f,
                                       const Eigen::VectorXd& x, const Eigen::VectorXd& analytic,
                                       double eps = 1e-6) {
  double worst = 0.0;
  Eigen::VectorXd probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + eps;
    const double up = f(probe);
    probe[i] = x[i] - eps;
    const double down = f(probe);
    probe[i] = x[i];
    const double fd = (up - down) / (2 * eps);
    worst = std::max(worst, std::abs(analytic[i] - fd) / std::max({std::abs(analytic[i]), std::abs(fd), 1e-3}));
  }
  return worst;
}

}  // namespace graspr::testing

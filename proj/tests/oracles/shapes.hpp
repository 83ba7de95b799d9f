#pragma once

// Deterministic shape and pose builders shared across the test suite.

#include "grasp/geometry.hpp"

#include <Eigen/Dense>

#include <random>
#include <vector>

namespace testshape {

using Eigen::Matrix3d;
using Eigen::Vector3d;
using grasp::geom::ConvexPart;
using grasp::geom::RigidTransform;

inline ConvexPart box_part(const Vector3d& half) {
  std::vector<Vector3d> corners;
  for (int sx : {-1, 1})
    for (int sy : {-1, 1})
      for (int sz : {-1, 1})
        corners.emplace_back(sx * half.x(), sy * half.y(), sz * half.z());
  return grasp::geom::make_convex_part(corners);
}

inline std::vector<Vector3d> random_cloud(int n, double radius, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, radius);
  std::vector<Vector3d> pts(n);
  for (Vector3d& p : pts) p = Vector3d(gauss(rng), gauss(rng), gauss(rng));
  return pts;
}

inline ConvexPart random_part(int n, double radius, std::mt19937_64& rng) {
  return grasp::geom::make_convex_part(random_cloud(n, radius, rng));
}

inline Matrix3d random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::Quaterniond q(gauss(rng), gauss(rng), gauss(rng), gauss(rng));
  q.normalize();
  return q.toRotationMatrix();
}

inline RigidTransform random_transform(double span, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uni(-span, span);
  RigidTransform t;
  t.R = random_rotation(rng);
  t.t = Vector3d(uni(rng), uni(rng), uni(rng));
  return t;
}

// Inscribed polytope of a sphere, from a deterministic spiral point set.
inline ConvexPart ball_part(double radius, int n = 80) {
  std::vector<Vector3d> pts;
  pts.reserve(n);
  const double golden = 3.14159265358979323846 * (3.0 - std::sqrt(5.0));
  for (int k = 0; k < n; ++k) {
    const double z = 1.0 - 2.0 * (k + 0.5) / n;
    const double r = std::sqrt(std::max(1.0 - z * z, 0.0));
    pts.emplace_back(radius * r * std::cos(golden * k), radius * r * std::sin(golden * k),
                     radius * z);
  }
  return grasp::geom::make_convex_part(pts);
}

}  // namespace testshape

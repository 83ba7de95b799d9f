#pragma once

#include <Eigen/Dense>

#include <array>
#include <span>
#include <vector>

namespace grasp::geom::detail {

struct HullMesh {
  std::vector<Eigen::Vector3d> vertices;
  std::vector<std::array<int, 3>> faces;  // outward-oriented triangles
};

/// Convex hull of a 3D point cloud via incremental quickhull. Near-duplicate
/// inputs (within merge_tol) are collapsed first. Throws GeometryError when
/// no 4 non-coplanar points remain.
HullMesh convex_hull(std::span<const Eigen::Vector3d> points, double merge_tol);

}  // namespace grasp::geom::detail

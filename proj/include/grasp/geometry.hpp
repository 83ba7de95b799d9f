#pragma once

#include <Eigen/Dense>

#include <array>
#include <span>
#include <stdexcept>
#include <vector>

namespace grasp::geom {

using Eigen::Matrix3d;
using Eigen::Vector3d;

/// Rigid transform (rotation + translation), applied as p' = R p + t.
struct RigidTransform {
  Matrix3d R = Matrix3d::Identity();
  Vector3d t = Vector3d::Zero();

  Vector3d apply(const Vector3d& p) const { return R * p + t; }
  Vector3d rotate(const Vector3d& v) const { return R * v; }
  RigidTransform inverse() const { return {R.transpose(), -(R.transpose() * t)}; }
  RigidTransform operator*(const RigidTransform& o) const { return {R * o.R, R * o.t + t}; }

  static RigidTransform identity() { return {}; }
};

/// Oriented bounding box in the part's local frame.
struct Obb {
  Vector3d center = Vector3d::Zero();
  Vector3d half_extents = Vector3d::Zero();
  Matrix3d rotation = Matrix3d::Identity();  // columns are box axes
};

/// A convex piece of geometry: hulled vertex set with triangle faces and a
/// precomputed OBB. Vertices are the hull's own vertices (interior points
/// removed at construction).
struct ConvexPart {
  std::vector<Vector3d> vertices;
  std::vector<std::array<int, 3>> faces;  // outward-oriented triangles
  Obb obb;
  double volume = 0.0;
  Vector3d centroid = Vector3d::Zero();
};

struct SphereProxy {
  Vector3d center_local = Vector3d::Zero();
  double radius = 0.0;
  int link_id = -1;
};

/// Result of a nearest-point query. `distance` is signed: negative means the
/// query point/body is penetrating. `normal` points from b toward a.
/// `part_index` identifies the part holding point_b in multi-part queries,
/// -1 where it does not apply.
struct NearestPointResult {
  Vector3d point_a = Vector3d::Zero();
  Vector3d point_b = Vector3d::Zero();
  double distance = 0.0;
  Vector3d normal = Vector3d::UnitZ();
  int part_index = -1;
};

struct GeometryError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Hull tolerance: input vertices closer than this are merged before hulling.
inline constexpr double kVertexMergeTol = 1e-9;

/// Builds a ConvexPart from an arbitrary point cloud: dedups vertices, takes
/// the 3D convex hull, computes volume/centroid and a PCA-based OBB.
/// Throws GeometryError if the cloud has fewer than 4 non-coplanar points.
ConvexPart make_convex_part(std::span<const Vector3d> points,
                            double merge_tol = kVertexMergeTol);

/// Translates/rotates every stored quantity of a part (vertices, OBB,
/// centroid) by a rigid transform, returning a new part.
ConvexPart transformed(const ConvexPart& part, const RigidTransform& pose);

/// GJK distance between two posed convex parts. Returns separating distance
/// with witness points when disjoint; distance 0 with a contact point when
/// touching or overlapping. Never returns negative values; use epa_depth for
/// penetration depth.
NearestPointResult gjk_distance(const ConvexPart& a, const RigidTransform& pose_a,
                                const ConvexPart& b, const RigidTransform& pose_b);

/// EPA penetration depth for overlapping parts: the minimum translation of
/// `a` along `direction` that separates the pair. Requires overlap
/// (gjk_distance == 0); throws GeometryError on disjoint input.
std::pair<double, Vector3d> epa_depth(const ConvexPart& a, const RigidTransform& pose_a,
                                      const ConvexPart& b, const RigidTransform& pose_b);

/// Signed distance between posed parts: GJK distance when disjoint,
/// minus EPA depth when overlapping. Optionally fills witness data
/// (for penetration, witnesses come from the EPA contact).
double signed_distance(const ConvexPart& a, const RigidTransform& pose_a,
                       const ConvexPart& b, const RigidTransform& pose_b,
                       NearestPointResult* out = nullptr);

/// Nearest point on a collection of parts (in their own frame) to p.
/// Signed distance is negative iff p lies inside some part; the witness is
/// the nearest surface point and `normal` the outward surface normal there.
/// Ties across parts resolve to the smallest part index.
NearestPointResult point_to_mesh(const Vector3d& p, std::span<const ConvexPart> parts);

/// Lower bound on the distance between a part and a ball, computed from the
/// part's OBB only. Exact when the part fills its box; may be negative.
double obb_sphere_distance(const Obb& obb, const RigidTransform& part_pose,
                           const Vector3d& center, double radius);

/// Broad-phase filter: keeps the parts whose OBB-to-sphere lower bound does
/// not exceed reference_dist. The part holding the true nearest point always
/// survives because the bound never overestimates.
std::vector<int> broadphase_cull(const SphereProxy& fingertip_sphere,
                                 const RigidTransform& sphere_pose,
                                 std::span<const ConvexPart> parts,
                                 double reference_dist);

/// Support point of a posed part in the given direction (world frame).
Vector3d support_point(const ConvexPart& part, const RigidTransform& pose,
                       const Vector3d& dir);

}  // namespace grasp::geom

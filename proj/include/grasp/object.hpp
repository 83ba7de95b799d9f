#pragma once

#include "grasp/geometry.hpp"

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace grasp::object {

using Eigen::Vector3d;

/// Rigid object as a union of convex parts. The frame origin is the gravity
/// center (uniform density), so mass_center is ~0 for loaded objects; it is
/// stored as the recomputed volume-weighted centroid of the parts.
struct ObjectModel {
  std::vector<geom::ConvexPart> parts;
  Vector3d mass_center = Vector3d::Zero();
  double scale = 1.0;
  std::string source;
  double bbox_diagonal = 0.0;  // meters; 2 * scale after normalization
};

struct ObjectError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Loads an OBJ-style text triangle mesh: one convex part per named group
/// (`g`/`o` lines), or a single part when the file has no groups. Parts are
/// hulled, the union is normalized so its bounding-box diagonal is 2 m,
/// multiplied by `scale`, and recentered so the gravity center is the origin.
/// A group whose hull volume exceeds its mesh volume by more than 5% is
/// rejected by name: convex decomposition is the caller's job.
ObjectModel load_object(const std::string& path, double scale);

/// Same contract as load_object, reading from an in-memory mesh text.
ObjectModel parse_object_text(const std::string& text, double scale,
                              const std::string& source_name);

/// Single-part analytic test shapes, normalized exactly like loaded meshes:
/// sphere, box, cylinder, capsule, flat_box. Unknown names throw.
ObjectModel make_primitive(const std::string& name, double scale);
const std::vector<std::string>& primitive_names();

/// Radius of the smallest origin-centered ball containing every part vertex.
double bounding_radius(const ObjectModel& obj);

/// Axis-aligned bounds over all part vertices, as (min, max) corners.
std::pair<Vector3d, Vector3d> bounding_box(const ObjectModel& obj);

}  // namespace grasp::object

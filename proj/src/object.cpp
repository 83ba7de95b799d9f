#include "grasp/object.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

namespace grasp::object {
namespace {

struct MeshGroup {
  std::string name;
  std::vector<std::array<int, 3>> tris;  // 0-based vertex ids
};

struct ParsedMesh {
  std::vector<Vector3d> vertices;
  std::vector<MeshGroup> groups;
};

[[noreturn]] void fail(const std::string& source, const std::string& what) {
  throw ObjectError(source + ": " + what);
}

// Leading integer of an `i`, `i/t`, `i/t/n`, or `i//n` face token, resolved
// against the vertices defined so far (negative counts from the end).
int face_index(const std::string& tok, int n_verts, const std::string& source) {
  const size_t slash = tok.find('/');
  const std::string head = slash == std::string::npos ? tok : tok.substr(0, slash);
  int idx = 0;
  try {
    idx = std::stoi(head);
  } catch (const std::exception&) {
    fail(source, "bad face index '" + tok + "'");
  }
  const int resolved = idx > 0 ? idx - 1 : n_verts + idx;
  if (idx == 0 || resolved < 0 || resolved >= n_verts)
    fail(source, "face index " + head + " outside the " + std::to_string(n_verts) +
                     " vertices defined so far");
  return resolved;
}

ParsedMesh parse_mesh(const std::string& text, const std::string& source) {
  ParsedMesh mesh;
  int current = -1;  // group receiving faces; created on demand
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag) || tag[0] == '#') continue;
    if (tag == "v") {
      Vector3d v;
      if (!(ls >> v.x() >> v.y() >> v.z())) fail(source, "malformed vertex line '" + line + "'");
      mesh.vertices.push_back(v);
    } else if (tag == "g" || tag == "o") {
      std::string name;
      ls >> name;
      if (name.empty()) fail(source, "unnamed group");
      current = -1;
      for (size_t i = 0; i < mesh.groups.size(); ++i)
        if (mesh.groups[i].name == name) current = static_cast<int>(i);
      if (current < 0) {
        current = static_cast<int>(mesh.groups.size());
        mesh.groups.push_back({name, {}});
      }
    } else if (tag == "f") {
      std::vector<int> poly;
      std::string tok;
      while (ls >> tok)
        poly.push_back(face_index(tok, static_cast<int>(mesh.vertices.size()), source));
      if (poly.size() < 3) fail(source, "face with fewer than 3 vertices");
      if (current < 0) {
        current = static_cast<int>(mesh.groups.size());
        mesh.groups.push_back({"default", {}});
      }
      for (size_t i = 2; i < poly.size(); ++i)
        mesh.groups[current].tris.push_back({poly[0], poly[static_cast<int>(i) - 1],
                                             poly[static_cast<int>(i)]});
    }
    // Normals, texture coordinates, materials, smoothing: ignored.
  }
  if (mesh.groups.empty()) fail(source, "mesh has no faces");
  return mesh;
}

// Divergence-theorem volume of a closed triangle soup; sign-free so the
// screen tolerates inward-wound files.
double mesh_volume(const ParsedMesh& mesh, const MeshGroup& g) {
  double v6 = 0.0;
  for (const auto& t : g.tris)
    v6 += mesh.vertices[t[0]].cross(mesh.vertices[t[1]]).dot(mesh.vertices[t[2]]);
  return std::abs(v6) / 6.0;
}

std::vector<Vector3d> group_points(const ParsedMesh& mesh, const MeshGroup& g) {
  std::vector<char> used(mesh.vertices.size(), 0);
  for (const auto& t : g.tris) used[t[0]] = used[t[1]] = used[t[2]] = 1;
  std::vector<Vector3d> pts;
  for (size_t i = 0; i < used.size(); ++i)
    if (used[i]) pts.push_back(mesh.vertices[i]);
  return pts;
}

// Shared tail of every construction path: rescale so the union's bounding-box
// diagonal is 2*scale, then move the volume-weighted centroid to the origin.
ObjectModel finish(std::vector<std::vector<Vector3d>> part_points, double scale,
                   const std::string& source) {
  Vector3d lo = Vector3d::Constant(1e300), hi = -lo;
  for (const auto& pts : part_points)
    for (const Vector3d& p : pts) {
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
  const double d0 = (hi - lo).norm();
  if (!(d0 > 0.0)) fail(source, "mesh has zero extent");
  if (!(scale > 0.0)) fail(source, "scale must be positive");
  const double k = 2.0 * scale / d0;

  ObjectModel m;
  m.scale = scale;
  m.source = source;
  double vol = 0.0;
  Vector3d weighted = Vector3d::Zero();
  for (auto& pts : part_points) {
    for (Vector3d& p : pts) p *= k;
    m.parts.push_back(geom::make_convex_part(pts));
    vol += m.parts.back().volume;
    weighted += m.parts.back().volume * m.parts.back().centroid;
  }
  const geom::RigidTransform recenter{Eigen::Matrix3d::Identity(), -weighted / vol};
  vol = 0.0;
  weighted = Vector3d::Zero();
  lo = Vector3d::Constant(1e300);
  hi = -lo;
  for (auto& part : m.parts) {
    part = geom::transformed(part, recenter);
    vol += part.volume;
    weighted += part.volume * part.centroid;
    for (const Vector3d& v : part.vertices) {
      lo = lo.cwiseMin(v);
      hi = hi.cwiseMax(v);
    }
  }
  m.mass_center = weighted / vol;
  m.bbox_diagonal = (hi - lo).norm();
  return m;
}

std::vector<Vector3d> spiral_sphere(double radius, int n, const Vector3d& center) {
  std::vector<Vector3d> pts;
  pts.reserve(n);
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < n; ++i) {
    const double z = 1.0 - 2.0 * (i + 0.5) / n;
    const double r = std::sqrt(std::max(1.0 - z * z, 0.0));
    pts.push_back(center + radius * Vector3d(r * std::cos(golden * i),
                                             r * std::sin(golden * i), z));
  }
  return pts;
}

std::vector<Vector3d> box_points(const Vector3d& half) {
  std::vector<Vector3d> pts;
  for (int sx : {-1, 1})
    for (int sy : {-1, 1})
      for (int sz : {-1, 1}) pts.emplace_back(sx * half.x(), sy * half.y(), sz * half.z());
  return pts;
}

}  // namespace

ObjectModel parse_object_text(const std::string& text, double scale,
                              const std::string& source_name) {
  const ParsedMesh mesh = parse_mesh(text, source_name);
  std::vector<std::vector<Vector3d>> part_points;
  for (const MeshGroup& g : mesh.groups) {
    std::vector<Vector3d> pts = group_points(mesh, g);
    geom::ConvexPart hull;
    try {
      hull = geom::make_convex_part(pts);
    } catch (const geom::GeometryError& e) {
      fail(source_name, "group '" + g.name + "': " + e.what());
    }
    const double mv = mesh_volume(mesh, g);
    if (hull.volume > 1.05 * mv)
      fail(source_name, "group '" + g.name + "' is not convex: hull volume " +
                            std::to_string(hull.volume) + " exceeds mesh volume " +
                            std::to_string(mv) + " by more than 5%");
    part_points.push_back(std::move(pts));
  }
  return finish(std::move(part_points), scale, source_name);
}

ObjectModel load_object(const std::string& path, double scale) {
  std::ifstream in(path);
  if (!in) throw ObjectError(path + ": cannot open mesh file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_object_text(buf.str(), scale, path);
}

const std::vector<std::string>& primitive_names() {
  static const std::vector<std::string> names = {"sphere", "box", "cylinder", "capsule",
                                                 "flat_box"};
  return names;
}

ObjectModel make_primitive(const std::string& name, double scale) {
  std::vector<Vector3d> pts;
  if (name == "sphere") {
    pts = spiral_sphere(1.0, 162, Vector3d::Zero());
  } else if (name == "box") {
    pts = box_points(Vector3d(1.0, 0.75, 0.55));
  } else if (name == "cylinder") {
    for (int i = 0; i < 32; ++i) {
      const double a = 2.0 * std::numbers::pi * i / 32.0;
      for (double z : {-0.9, 0.9}) pts.emplace_back(0.5 * std::cos(a), 0.5 * std::sin(a), z);
    }
  } else if (name == "capsule") {
    // Hull of two spheres; points on the facing hemispheres fall inside.
    for (double z : {-0.55, 0.55}) {
      auto cap = spiral_sphere(0.45, 96, Vector3d(0.0, 0.0, z));
      pts.insert(pts.end(), cap.begin(), cap.end());
    }
  } else if (name == "flat_box") {
    pts = box_points(Vector3d(1.0, 0.8, 0.12));
  } else {
    throw ObjectError("unknown primitive '" + name + "'");
  }
  return finish({std::move(pts)}, scale, "builtin:" + name);
}

double bounding_radius(const ObjectModel& obj) {
  double r = 0.0;
  for (const auto& part : obj.parts)
    for (const Vector3d& v : part.vertices) r = std::max(r, v.norm());
  return r;
}

std::pair<Vector3d, Vector3d> bounding_box(const ObjectModel& obj) {
  Vector3d lo = Vector3d::Constant(1e300), hi = -lo;
  for (const auto& part : obj.parts)
    for (const Vector3d& v : part.vertices) {
      lo = lo.cwiseMin(v);
      hi = hi.cwiseMax(v);
    }
  return {lo, hi};
}

}  // namespace grasp::object

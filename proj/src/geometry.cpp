#include "grasp/geometry.hpp"

#include "hull3d.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace grasp::geom {
namespace {

constexpr double kTouchTol = 1e-10;     // |v| below scale*this counts as contact
constexpr double kGjkRelTol = 1e-14;    // relative support-gap stop
constexpr int kGjkMaxIters = 128;
constexpr int kEpaMaxIters = 512;

double cloud_scale(const ConvexPart& a, const RigidTransform& pa,
                   const ConvexPart& b, const RigidTransform& pb) {
  double s = 1.0;
  s = std::max(s, pa.apply(a.centroid).norm() + 2.0 * a.obb.half_extents.norm());
  s = std::max(s, pb.apply(b.centroid).norm() + 2.0 * b.obb.half_extents.norm());
  return s;
}

struct SupportPoint {
  Vector3d w;  // point on the difference body A - B
  Vector3d a;
  Vector3d b;
};

struct SupportFn {
  const ConvexPart* pa;
  const ConvexPart* pb;
  RigidTransform ta;
  RigidTransform tb;

  SupportPoint operator()(const Vector3d& dir) const {
    SupportPoint s;
    s.a = support_point(*pa, ta, dir);
    s.b = support_point(*pb, tb, -dir);
    s.w = s.a - s.b;
    return s;
  }
};

// Closest point to the origin on the convex hull of up to four points,
// found by checking every vertex subset: solve the equality-constrained
// least-norm problem on the subset's affine hull and keep the best subset
// whose barycentric coordinates are nonnegative.
struct SimplexSolve {
  double dist2 = std::numeric_limits<double>::infinity();
  Vector3d v = Vector3d::Zero();
  std::vector<int> keep;        // indices into the input simplex
  std::vector<double> weights;  // barycentric coords, aligned with keep
  bool contains_origin = false;
};

SimplexSolve closest_on_simplex(const std::vector<SupportPoint>& simp) {
  const int n = static_cast<int>(simp.size());
  SimplexSolve best;
  for (int mask = 1; mask < (1 << n); ++mask) {
    std::vector<int> idx;
    for (int i = 0; i < n; ++i)
      if (mask & (1 << i)) idx.push_back(i);
    const int k = static_cast<int>(idx.size());

    Eigen::MatrixXd M(k + 1, k + 1);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(k + 1);
    for (int i = 0; i < k; ++i) {
      for (int j = 0; j < k; ++j) M(i, j) = simp[idx[i]].w.dot(simp[idx[j]].w);
      M(i, k) = 1.0;
      M(k, i) = 1.0;
    }
    M(k, k) = 0.0;
    rhs(k) = 1.0;
    Eigen::VectorXd sol = M.fullPivLu().solve(rhs);
    bool ok = sol.allFinite();
    for (int i = 0; ok && i < k; ++i)
      if (sol(i) < -1e-12) ok = false;
    if (!ok) continue;

    Vector3d v = Vector3d::Zero();
    for (int i = 0; i < k; ++i) v += sol(i) * simp[idx[i]].w;
    const double d2 = v.squaredNorm();
    if (d2 < best.dist2 - 1e-300 || (k < static_cast<int>(best.keep.size()) &&
                                     d2 <= best.dist2 * (1.0 + 1e-12))) {
      best.dist2 = d2;
      best.v = v;
      best.keep = idx;
      best.weights.assign(sol.data(), sol.data() + k);
      if (k == 4) best.contains_origin = true;
    }
  }
  return best;
}

struct GjkResult {
  double distance = 0.0;
  Vector3d witness_a = Vector3d::Zero();
  Vector3d witness_b = Vector3d::Zero();
  bool overlap = false;
  std::vector<SupportPoint> simplex;  // final simplex, for EPA seeding
};

GjkResult gjk_run(const SupportFn& support, double scale) {
  GjkResult res;
  std::vector<SupportPoint> simp;
  simp.push_back(support(Vector3d::UnitX()));
  Vector3d v = simp[0].w;

  for (int iter = 0; iter < kGjkMaxIters; ++iter) {
    SimplexSolve s = closest_on_simplex(simp);
    v = s.v;
    // Shrink to the supporting subset.
    std::vector<SupportPoint> reduced;
    for (int i : s.keep) reduced.push_back(simp[i]);
    simp = std::move(reduced);

    if (s.contains_origin || std::sqrt(s.dist2) < kTouchTol * scale) {
      res.overlap = true;
      res.distance = 0.0;
      Vector3d wa = Vector3d::Zero(), wb = Vector3d::Zero();
      for (size_t i = 0; i < simp.size(); ++i) {
        wa += s.weights[i] * simp[i].a;
        wb += s.weights[i] * simp[i].b;
      }
      res.witness_a = wa;
      res.witness_b = wb;
      res.simplex = simp;
      return res;
    }

    SupportPoint w = support(-v);
    const double gap = s.dist2 - v.dot(w.w);  // v.(v - w) >= 0 always
    bool repeat = false;
    for (const SupportPoint& p : simp)
      if ((p.w - w.w).norm() < 1e-14 * scale) repeat = true;
    if (gap <= kGjkRelTol * s.dist2 + 1e-300 || repeat || simp.size() == 4) {
      res.distance = std::sqrt(s.dist2);
      Vector3d wa = Vector3d::Zero(), wb = Vector3d::Zero();
      for (size_t i = 0; i < simp.size(); ++i) {
        wa += s.weights[i] * simp[i].a;
        wb += s.weights[i] * simp[i].b;
      }
      res.witness_a = wa;
      res.witness_b = wb;
      res.simplex = simp;
      return res;
    }
    simp.push_back(w);
  }
  // Max iterations: report the current estimate.
  SimplexSolve s = closest_on_simplex(simp);
  res.distance = std::sqrt(s.dist2);
  Vector3d wa = Vector3d::Zero(), wb = Vector3d::Zero();
  for (size_t i = 0; i < s.keep.size(); ++i) {
    wa += s.weights[i] * simp[s.keep[i]].a;
    wb += s.weights[i] * simp[s.keep[i]].b;
  }
  res.witness_a = wa;
  res.witness_b = wb;
  res.simplex = simp;
  return res;
}

// Expands a (possibly degenerate) GJK termination simplex to a genuine
// tetrahedron on the difference body, as EPA needs volume to start.
bool pad_to_tetrahedron(std::vector<SupportPoint>& simp, const SupportFn& support,
                        double scale) {
  const double tol = 1e-12 * scale;
  auto affinely_independent = [&](const SupportPoint& cand) {
    if (simp.empty()) return true;
    if (simp.size() == 1) return (cand.w - simp[0].w).norm() > tol;
    if (simp.size() == 2) {
      const Vector3d d = (simp[1].w - simp[0].w).normalized();
      const Vector3d r = cand.w - simp[0].w;
      return (r - d * d.dot(r)).norm() > tol;
    }
    const Vector3d n =
        (simp[1].w - simp[0].w).cross(simp[2].w - simp[0].w).normalized();
    return std::abs(n.dot(cand.w - simp[0].w)) > tol;
  };

  std::vector<Vector3d> dirs = {Vector3d::UnitX(),  -Vector3d::UnitX(),
                                Vector3d::UnitY(),  -Vector3d::UnitY(),
                                Vector3d::UnitZ(),  -Vector3d::UnitZ()};
  if (simp.size() == 2) {
    const Vector3d d = (simp[1].w - simp[0].w).normalized();
    const Vector3d t = std::abs(d.x()) < 0.9 ? Vector3d::UnitX() : Vector3d::UnitY();
    const Vector3d e1 = d.cross(t).normalized();
    const Vector3d e2 = d.cross(e1);
    dirs.insert(dirs.begin(), {e1, -e1, e2, -e2});
  }
  if (simp.size() == 3) {
    const Vector3d n =
        (simp[1].w - simp[0].w).cross(simp[2].w - simp[0].w).normalized();
    dirs.insert(dirs.begin(), {n, -n});
  }
  for (const Vector3d& d : dirs) {
    if (simp.size() == 4) break;
    SupportPoint cand = support(d);
    if (affinely_independent(cand)) simp.push_back(cand);
  }
  return simp.size() == 4;
}

struct EpaFace {
  std::array<int, 3> v{};
  Vector3d n = Vector3d::Zero();
  double d = 0.0;
  bool alive = true;
};

struct EpaResult {
  double depth = 0.0;
  Vector3d direction = Vector3d::UnitZ();  // translating A this way resolves it
  Vector3d witness_a = Vector3d::Zero();
  Vector3d witness_b = Vector3d::Zero();
};

bool lex_less(const Vector3d& a, const Vector3d& b) {
  if (a.x() != b.x()) return a.x() < b.x();
  if (a.y() != b.y()) return a.y() < b.y();
  return a.z() < b.z();
}

EpaResult epa_run(std::vector<SupportPoint> simp, const SupportFn& support, double scale) {
  if (!pad_to_tetrahedron(simp, support, scale))
    throw GeometryError("penetration query on a degenerate shape pair");

  std::vector<SupportPoint> verts = std::move(simp);
  // Orient the seed tetrahedron so all faces point away from its interior.
  const Vector3d interior = (verts[0].w + verts[1].w + verts[2].w + verts[3].w) / 4.0;
  std::vector<EpaFace> faces;
  const std::array<std::array<int, 3>, 4> tris = {{
      {0, 1, 2}, {0, 2, 3}, {0, 3, 1}, {1, 3, 2}}};
  auto make_face = [&](std::array<int, 3> t) {
    EpaFace f;
    f.v = t;
    Vector3d n = (verts[t[1]].w - verts[t[0]].w).cross(verts[t[2]].w - verts[t[0]].w);
    const double len = n.norm();
    f.n = len > 0 ? Vector3d(n / len) : Vector3d::UnitZ();
    f.d = f.n.dot(verts[t[0]].w);
    if (f.n.dot(interior) > f.d) {
      std::swap(f.v[1], f.v[2]);
      f.n = -f.n;
      f.d = -f.d;
    }
    return f;
  };
  for (const auto& t : tris) faces.push_back(make_face(t));

  const double grow_tol = 1e-10 * scale;
  int best_face = -1;
  for (int iter = 0; iter < kEpaMaxIters; ++iter) {
    // Nearest face to the origin; ties go to the lexicographically smallest
    // resolution direction (-n) so results are reproducible.
    best_face = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (int i = 0; i < static_cast<int>(faces.size()); ++i) {
      if (!faces[i].alive) continue;
      const double di = faces[i].d;
      if (di < best_d - 1e-12 * scale ||
          (di < best_d + 1e-12 * scale && best_face >= 0 &&
           lex_less(-faces[i].n, -faces[best_face].n))) {
        best_d = std::min(best_d, di);
        best_face = i;
      }
    }
    if (best_face < 0) throw GeometryError("penetration polytope lost all faces");

    const EpaFace& f = faces[best_face];
    SupportPoint w = support(f.n);
    if (f.n.dot(w.w) - f.d <= grow_tol) break;  // cannot expand further

    // Remove every face visible from w and re-triangulate the hole.
    const int wi = static_cast<int>(verts.size());
    verts.push_back(w);
    struct Edge {
      int u, v;
    };
    std::vector<Edge> horizon;
    for (EpaFace& g : faces) {
      if (!g.alive) continue;
      if (g.n.dot(w.w) - g.d > 1e-12 * scale) {
        g.alive = false;
        for (int e = 0; e < 3; ++e) horizon.push_back({g.v[e], g.v[(e + 1) % 3]});
      }
    }
    // Interior edges appear twice with opposite direction; drop both copies.
    std::vector<Edge> boundary;
    for (const Edge& e : horizon) {
      bool paired = false;
      for (const Edge& o : horizon)
        if (o.u == e.v && o.v == e.u) paired = true;
      if (!paired) boundary.push_back(e);
    }
    if (boundary.empty()) break;  // numerically flat expansion; keep last face
    for (const Edge& e : boundary) faces.push_back(make_face({e.u, e.v, wi}));
  }

  const EpaFace& f = faces[best_face];
  EpaResult out;
  out.depth = std::max(f.d, 0.0);
  out.direction = -f.n;
  // Witnesses: barycentric coordinates of the origin's projection onto the face.
  std::vector<SupportPoint> tri = {verts[f.v[0]], verts[f.v[1]], verts[f.v[2]]};
  SimplexSolve s = closest_on_simplex(tri);
  Vector3d wa = Vector3d::Zero(), wb = Vector3d::Zero();
  double wsum = 0.0;
  for (size_t i = 0; i < s.keep.size(); ++i) {
    wa += s.weights[i] * tri[s.keep[i]].a;
    wb += s.weights[i] * tri[s.keep[i]].b;
    wsum += s.weights[i];
  }
  if (wsum > 0.5) {
    out.witness_a = wa;
    out.witness_b = wb;
  } else {
    out.witness_a = tri[0].a;
    out.witness_b = tri[0].b;
  }
  return out;
}

// Ericson-style exact closest point on a triangle.
Vector3d closest_on_triangle(const Vector3d& p, const Vector3d& a, const Vector3d& b,
                             const Vector3d& c) {
  const Vector3d ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0 && d2 <= 0) return a;
  const Vector3d bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0 && d4 <= d3) return b;
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0 && d1 >= 0 && d3 <= 0) return a + ab * (d1 / (d1 - d3));
  const Vector3d cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0 && d5 <= d6) return c;
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0 && d2 >= 0 && d6 <= 0) return a + ac * (d2 / (d2 - d6));
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0 && d4 - d3 >= 0 && d5 - d6 >= 0)
    return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
  const double denom = 1.0 / (va + vb + vc);
  return a + ab * (vb * denom) + ac * (vc * denom);
}

struct PartQuery {
  double sdist = std::numeric_limits<double>::infinity();
  Vector3d point = Vector3d::Zero();
  Vector3d normal = Vector3d::UnitZ();
};

PartQuery query_part(const Vector3d& p, const ConvexPart& part) {
  PartQuery q;
  // Inside test against every face plane; for an interior point of a convex
  // body, the nearest boundary point is the foot on the least-deep plane.
  bool inside = true;
  double min_depth = std::numeric_limits<double>::infinity();
  Vector3d best_n = Vector3d::UnitZ();
  for (const auto& t : part.faces) {
    const Vector3d& a = part.vertices[t[0]];
    Vector3d n = (part.vertices[t[1]] - a).cross(part.vertices[t[2]] - a);
    const double len = n.norm();
    if (len < 1e-30) continue;
    n /= len;
    const double depth = n.dot(a) - n.dot(p);
    if (depth < -1e-12) {
      inside = false;
      break;
    }
    if (depth < min_depth) {
      min_depth = depth;
      best_n = n;
    }
  }
  if (inside && std::isfinite(min_depth)) {
    q.sdist = -min_depth;
    q.normal = best_n;
    q.point = p + best_n * min_depth;
    return q;
  }
  for (const auto& t : part.faces) {
    const Vector3d c =
        closest_on_triangle(p, part.vertices[t[0]], part.vertices[t[1]], part.vertices[t[2]]);
    const double d = (p - c).norm();
    if (d < q.sdist) {
      q.sdist = d;
      q.point = c;
    }
  }
  q.normal = q.sdist > 1e-14 ? Vector3d((p - q.point) / q.sdist) : Vector3d::UnitZ();
  return q;
}

}  // namespace

Vector3d support_point(const ConvexPart& part, const RigidTransform& pose,
                       const Vector3d& dir) {
  const Vector3d d_local = pose.R.transpose() * dir;
  double best = -std::numeric_limits<double>::infinity();
  const Vector3d* arg = &part.vertices.front();
  for (const Vector3d& v : part.vertices) {
    const double s = d_local.dot(v);
    if (s > best) {
      best = s;
      arg = &v;
    }
  }
  return pose.apply(*arg);
}

ConvexPart make_convex_part(std::span<const Vector3d> points, double merge_tol) {
  detail::HullMesh mesh = detail::convex_hull(points, merge_tol);
  ConvexPart part;
  part.vertices = std::move(mesh.vertices);
  part.faces = std::move(mesh.faces);

  // Volume and centroid by the divergence theorem over origin-based tets.
  double vol = 0.0;
  Vector3d cw = Vector3d::Zero();
  for (const auto& t : part.faces) {
    const Vector3d& a = part.vertices[t[0]];
    const Vector3d& b = part.vertices[t[1]];
    const Vector3d& c = part.vertices[t[2]];
    const double v6 = a.dot(b.cross(c));
    vol += v6;
    cw += v6 * (a + b + c);
  }
  part.volume = vol / 6.0;
  if (part.volume <= 0)
    throw GeometryError("hull volume is not positive; input nearly degenerate");
  part.centroid = cw / (4.0 * vol);

  // PCA box over hull vertices. Axis signs and order are pinned so repeated
  // loads give bit-identical boxes.
  Vector3d mean = Vector3d::Zero();
  for (const Vector3d& v : part.vertices) mean += v;
  mean /= static_cast<double>(part.vertices.size());
  Matrix3d cov = Matrix3d::Zero();
  for (const Vector3d& v : part.vertices) cov += (v - mean) * (v - mean).transpose();
  Eigen::SelfAdjointEigenSolver<Matrix3d> es(cov);
  Matrix3d axes;
  axes.col(0) = es.eigenvectors().col(2);
  axes.col(1) = es.eigenvectors().col(1);
  axes.col(2) = es.eigenvectors().col(0);
  for (int c = 0; c < 3; ++c) {
    int arg = 0;
    axes.col(c).cwiseAbs().maxCoeff(&arg);
    if (axes(arg, c) < 0) axes.col(c) = -axes.col(c);
  }
  if (axes.determinant() < 0) axes.col(2) = -axes.col(2);

  Vector3d lo = Vector3d::Constant(std::numeric_limits<double>::infinity());
  Vector3d hi = -lo;
  for (const Vector3d& v : part.vertices) {
    const Vector3d q = axes.transpose() * v;
    lo = lo.cwiseMin(q);
    hi = hi.cwiseMax(q);
  }
  part.obb.rotation = axes;
  part.obb.center = axes * ((lo + hi) / 2.0);
  part.obb.half_extents = (hi - lo) / 2.0;
  return part;
}

ConvexPart transformed(const ConvexPart& part, const RigidTransform& pose) {
  ConvexPart out = part;
  for (Vector3d& v : out.vertices) v = pose.apply(v);
  out.centroid = pose.apply(part.centroid);
  out.obb.center = pose.apply(part.obb.center);
  out.obb.rotation = pose.R * part.obb.rotation;
  return out;
}

NearestPointResult gjk_distance(const ConvexPart& a, const RigidTransform& pose_a,
                                const ConvexPart& b, const RigidTransform& pose_b) {
  const SupportFn support{&a, &b, pose_a, pose_b};
  GjkResult r = gjk_run(support, cloud_scale(a, pose_a, b, pose_b));
  NearestPointResult out;
  out.point_a = r.witness_a;
  out.point_b = r.witness_b;
  out.distance = r.distance;
  out.normal = r.distance > 1e-14 ? Vector3d((r.witness_a - r.witness_b) / r.distance)
                                  : Vector3d::UnitZ();
  return out;
}

std::pair<double, Vector3d> epa_depth(const ConvexPart& a, const RigidTransform& pose_a,
                                      const ConvexPart& b, const RigidTransform& pose_b) {
  const SupportFn support{&a, &b, pose_a, pose_b};
  const double scale = cloud_scale(a, pose_a, b, pose_b);
  GjkResult g = gjk_run(support, scale);
  if (!g.overlap) throw GeometryError("penetration depth queried on disjoint parts");
  EpaResult r = epa_run(std::move(g.simplex), support, scale);
  return {r.depth, r.direction};
}

double signed_distance(const ConvexPart& a, const RigidTransform& pose_a,
                       const ConvexPart& b, const RigidTransform& pose_b,
                       NearestPointResult* out) {
  const SupportFn support{&a, &b, pose_a, pose_b};
  const double scale = cloud_scale(a, pose_a, b, pose_b);
  GjkResult g = gjk_run(support, scale);
  if (!g.overlap) {
    if (out) {
      out->point_a = g.witness_a;
      out->point_b = g.witness_b;
      out->distance = g.distance;
      out->normal = g.distance > 1e-14
                        ? Vector3d((g.witness_a - g.witness_b) / g.distance)
                        : Vector3d::UnitZ();
    }
    return g.distance;
  }
  EpaResult r = epa_run(std::move(g.simplex), support, scale);
  if (out) {
    out->point_a = r.witness_a;
    out->point_b = r.witness_b;
    out->distance = -r.depth;
    out->normal = r.direction;
  }
  return -r.depth;
}

NearestPointResult point_to_mesh(const Vector3d& p, std::span<const ConvexPart> parts) {
  if (parts.empty()) throw GeometryError("point query against an empty part list");
  NearestPointResult best;
  best.distance = std::numeric_limits<double>::infinity();
  for (int i = 0; i < static_cast<int>(parts.size()); ++i) {
    PartQuery q = query_part(p, parts[i]);
    if (q.sdist < best.distance) {  // strict: ties keep the earlier part
      best.distance = q.sdist;
      best.point_b = q.point;
      best.normal = q.normal;
      best.part_index = i;
    }
  }
  best.point_a = p;
  return best;
}

double obb_sphere_distance(const Obb& obb, const RigidTransform& part_pose,
                           const Vector3d& center, double radius) {
  const Matrix3d box_rot = part_pose.R * obb.rotation;
  const Vector3d box_ctr = part_pose.apply(obb.center);
  const Vector3d q = box_rot.transpose() * (center - box_ctr);
  const Vector3d excess = q.cwiseAbs() - obb.half_extents;
  double dist;
  if ((excess.array() <= 0).all()) {
    dist = excess.maxCoeff();  // negative: inside the box
  } else {
    dist = excess.cwiseMax(0.0).norm();
  }
  return dist - radius;
}

std::vector<int> broadphase_cull(const SphereProxy& fingertip_sphere,
                                 const RigidTransform& sphere_pose,
                                 std::span<const ConvexPart> parts,
                                 double reference_dist) {
  const Vector3d c = sphere_pose.apply(fingertip_sphere.center_local);
  std::vector<int> keep;
  for (int i = 0; i < static_cast<int>(parts.size()); ++i) {
    const double lower =
        obb_sphere_distance(parts[i].obb, RigidTransform::identity(), c,
                            fingertip_sphere.radius);
    if (lower < reference_dist + 1e-9) keep.push_back(i);
  }
  return keep;
}

}  // namespace grasp::geom

#include "hull3d.hpp"

#include "grasp/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>

namespace grasp::geom::detail {
namespace {

using Eigen::Vector3d;

std::vector<Vector3d> merge_close(std::span<const Vector3d> points, double tol) {
  std::vector<Vector3d> pts(points.begin(), points.end());
  std::sort(pts.begin(), pts.end(), [](const Vector3d& a, const Vector3d& b) {
    return std::tie(a.x(), a.y(), a.z()) < std::tie(b.x(), b.y(), b.z());
  });
  std::vector<Vector3d> out;
  out.reserve(pts.size());
  for (const Vector3d& p : pts) {
    bool dup = false;
    // `out` stays sorted by x, so only a suffix can be within tol of p.
    for (auto it = out.rbegin(); it != out.rend(); ++it) {
      if (p.x() - it->x() > tol) break;
      if ((p - *it).norm() <= tol) {
        dup = true;
        break;
      }
    }
    if (!dup) out.push_back(p);
  }
  return out;
}

struct Face {
  std::array<int, 3> v{};
  std::array<int, 3> nb{};  // neighbor across edge (v[i], v[(i+1)%3])
  Vector3d n = Vector3d::Zero();
  double d = 0.0;  // plane: n.dot(x) == d
  bool alive = true;
  std::vector<int> outside;
  int far_idx = -1;
  double far_dist = 0.0;
};

class QuickHull {
 public:
  QuickHull(std::vector<Vector3d> pts, double eps) : pts_(std::move(pts)), eps_(eps) {}

  HullMesh run() {
    build_initial_tetrahedron();
    assign_initial_outside();
    std::vector<int> work;
    for (int f = 0; f < static_cast<int>(faces_.size()); ++f)
      if (!faces_[f].outside.empty()) work.push_back(f);
    while (!work.empty()) {
      const int fi = work.back();
      work.pop_back();
      if (!faces_[fi].alive || faces_[fi].outside.empty()) continue;
      std::vector<int> fresh = insert_apex(fi);
      for (int f : fresh)
        if (!faces_[f].outside.empty()) work.push_back(f);
    }
    return compact();
  }

 private:
  void set_plane(Face& f) {
    const Vector3d& a = pts_[f.v[0]];
    const Vector3d& b = pts_[f.v[1]];
    const Vector3d& c = pts_[f.v[2]];
    Vector3d n = (b - a).cross(c - a);
    const double len = n.norm();
    f.n = len > 0 ? Vector3d(n / len) : Vector3d::UnitZ();
    f.d = f.n.dot(a);
  }

  double dist_above(const Face& f, int p) const { return f.n.dot(pts_[p]) - f.d; }

  void build_initial_tetrahedron() {
    const int n = static_cast<int>(pts_.size());
    if (n < 4) throw GeometryError("convex hull needs 4 non-coplanar points");

    int i0 = 0;
    for (int i = 1; i < n; ++i)
      if (pts_[i].x() < pts_[i0].x()) i0 = i;
    int i1 = -1;
    double best = -1;
    for (int i = 0; i < n; ++i) {
      const double d = (pts_[i] - pts_[i0]).norm();
      if (d > best) best = d, i1 = i;
    }
    if (best <= eps_) throw GeometryError("convex hull needs 4 non-coplanar points");
    const Vector3d axis = (pts_[i1] - pts_[i0]).normalized();
    int i2 = -1;
    best = -1;
    for (int i = 0; i < n; ++i) {
      const Vector3d r = pts_[i] - pts_[i0];
      const double d = (r - axis * axis.dot(r)).norm();
      if (d > best) best = d, i2 = i;
    }
    if (best <= eps_) throw GeometryError("convex hull needs 4 non-coplanar points");
    const Vector3d nrm = (pts_[i1] - pts_[i0]).cross(pts_[i2] - pts_[i0]).normalized();
    int i3 = -1;
    best = -1;
    for (int i = 0; i < n; ++i) {
      const double d = std::abs(nrm.dot(pts_[i] - pts_[i0]));
      if (d > best) best = d, i3 = i;
    }
    if (best <= eps_) throw GeometryError("convex hull needs 4 non-coplanar points");

    interior_ = (pts_[i0] + pts_[i1] + pts_[i2] + pts_[i3]) / 4.0;
    const std::array<std::array<int, 3>, 4> tris = {{
        {i0, i1, i2}, {i0, i2, i3}, {i0, i3, i1}, {i1, i3, i2}}};
    for (const auto& t : tris) {
      Face f;
      f.v = t;
      set_plane(f);
      if (f.n.dot(interior_) > f.d) {
        std::swap(f.v[1], f.v[2]);
        set_plane(f);
      }
      faces_.push_back(std::move(f));
    }
    // Neighbor wiring via directed-edge lookup.
    for (int a = 0; a < 4; ++a)
      for (int e = 0; e < 3; ++e) {
        const int u = faces_[a].v[e], v = faces_[a].v[(e + 1) % 3];
        for (int b = 0; b < 4; ++b) {
          if (b == a) continue;
          for (int k = 0; k < 3; ++k)
            if (faces_[b].v[k] == v && faces_[b].v[(k + 1) % 3] == u) faces_[a].nb[e] = b;
        }
      }
  }

  void push_outside(int face, int p) {
    Face& f = faces_[face];
    const double d = dist_above(f, p);
    if (d <= eps_) return;
    f.outside.push_back(p);
    if (d > f.far_dist) {
      f.far_dist = d;
      f.far_idx = p;
    }
  }

  void assign_initial_outside() {
    for (int p = 0; p < static_cast<int>(pts_.size()); ++p) {
      int best_face = -1;
      double best_d = eps_;
      for (int f = 0; f < static_cast<int>(faces_.size()); ++f) {
        const double d = dist_above(faces_[f], p);
        if (d > best_d) {
          best_d = d;
          best_face = f;
        }
      }
      if (best_face >= 0) push_outside(best_face, p);
    }
  }

  // Inserts the farthest outside point of face `seed` as a hull vertex and
  // returns the indices of the faces created in its place.
  std::vector<int> insert_apex(int seed) {
    const int apex = faces_[seed].far_idx;
    const Vector3d& ap = pts_[apex];

    // Flood fill the faces visible from the apex; collect the horizon as
    // directed edges (u, v, outer_face).
    std::vector<int> visible{seed};
    std::vector<char> seen(faces_.size(), 0);
    seen[seed] = 1;
    struct HorizonEdge {
      int u, v, outer;
    };
    std::vector<HorizonEdge> horizon;
    for (size_t k = 0; k < visible.size(); ++k) {
      const int fi = visible[k];
      for (int e = 0; e < 3; ++e) {
        const int nb = faces_[fi].nb[e];
        if (seen[nb]) continue;
        if (faces_[nb].n.dot(ap) - faces_[nb].d > eps_) {
          seen[nb] = 1;
          visible.push_back(nb);
        } else {
          horizon.push_back({faces_[fi].v[e], faces_[fi].v[(e + 1) % 3], nb});
        }
      }
    }
    // Visiting order can re-test edges after their neighbor became visible;
    // drop horizon entries whose outer face ended up visible after all.
    std::erase_if(horizon, [&](const HorizonEdge& h) { return seen[h.outer] != 0; });

    std::vector<int> orphans;
    for (int fi : visible) {
      Face& f = faces_[fi];
      f.alive = false;
      for (int p : f.outside)
        if (p != apex) orphans.push_back(p);
      f.outside.clear();
    }

    // One new face per horizon edge, fanned around the apex.
    std::vector<int> fresh(horizon.size());
    std::vector<std::pair<int, int>> starts(horizon.size());  // (u, face)
    for (size_t h = 0; h < horizon.size(); ++h) {
      Face f;
      f.v = {horizon[h].u, horizon[h].v, apex};
      set_plane(f);
      if (f.n.dot(interior_) > f.d) {
        // Horizon orientation can flip on near-degenerate geometry.
        std::swap(f.v[0], f.v[1]);
        set_plane(f);
      }
      f.nb[0] = horizon[h].outer;
      fresh[h] = static_cast<int>(faces_.size());
      starts[h] = {f.v[0], fresh[h]};
      faces_.push_back(std::move(f));
      // Point the outer face's neighbor entry back at the new face.
      Face& outer = faces_[horizon[h].outer];
      for (int e = 0; e < 3; ++e)
        if (seen[outer.nb[e]]) {
          const int a = outer.v[e], b = outer.v[(e + 1) % 3];
          if ((a == horizon[h].v && b == horizon[h].u) ||
              (a == horizon[h].u && b == horizon[h].v))
            outer.nb[e] = fresh[h];
        }
    }
    // The horizon is a closed loop, so the new face after edge (u, v) is the
    // one starting at v, and the one before starts at some w with edge (w, u).
    auto find_start = [&](int vtx) {
      for (const auto& [u, fi] : starts)
        if (u == vtx) return fi;
      return -1;
    };
    for (size_t h = 0; h < horizon.size(); ++h) {
      Face& f = faces_[fresh[h]];
      const int nxt = find_start(f.v[1]);
      f.nb[1] = nxt >= 0 ? nxt : fresh[h];
      int prev = -1;
      for (size_t g = 0; g < horizon.size(); ++g)
        if (faces_[fresh[g]].v[1] == f.v[0]) prev = fresh[g];
      f.nb[2] = prev >= 0 ? prev : fresh[h];
    }

    for (int p : orphans) {
      int best_face = -1;
      double best_d = eps_;
      for (int fi : fresh) {
        const double d = dist_above(faces_[fi], p);
        if (d > best_d) {
          best_d = d;
          best_face = fi;
        }
      }
      if (best_face >= 0) push_outside(best_face, p);
    }
    return fresh;
  }

  HullMesh compact() const {
    std::vector<int> remap(pts_.size(), -1);
    HullMesh mesh;
    for (const Face& f : faces_) {
      if (!f.alive) continue;
      std::array<int, 3> tri{};
      for (int k = 0; k < 3; ++k) {
        int& r = remap[f.v[k]];
        if (r < 0) {
          r = static_cast<int>(mesh.vertices.size());
          mesh.vertices.push_back(pts_[f.v[k]]);
        }
        tri[k] = r;
      }
      mesh.faces.push_back(tri);
    }
    return mesh;
  }

  std::vector<Vector3d> pts_;
  double eps_;
  Vector3d interior_ = Vector3d::Zero();
  std::vector<Face> faces_;
};

}  // namespace

HullMesh convex_hull(std::span<const Eigen::Vector3d> points, double merge_tol) {
  std::vector<Vector3d> pts = merge_close(points, merge_tol);
  if (pts.size() < 4) throw GeometryError("convex hull needs 4 non-coplanar points");
  double diag = 0.0;
  Vector3d lo = pts.front(), hi = pts.front();
  for (const Vector3d& p : pts) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  diag = (hi - lo).norm();
  const double eps = std::max(64.0 * std::numeric_limits<double>::epsilon() * diag, 1e-300);
  return QuickHull(std::move(pts), eps).run();
}

}  // namespace grasp::geom::detail

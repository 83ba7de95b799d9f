#include "hullnd.hpp"

#include <grasp/geometry.hpp>

#include <Eigen/Dense>
#include <boost/multiprecision/cpp_int.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <utility>
#include <vector>

namespace grasp::hullnd {
namespace {

constexpr int kMaxDim = 8;
using Row = std::array<std::int64_t, kMaxDim>;

// Exact determinant sign of an n x n integer matrix (fraction-free
// elimination; divisions are exact). Only runs when the float filter is
// inconclusive, so speed barely matters.
int det_sign_exact(std::array<Row, kMaxDim>& m, int n) {
  using boost::multiprecision::cpp_int;
  std::array<std::array<cpp_int, kMaxDim>, kMaxDim> w;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) w[i][j] = m[i][j];
  int sign = 1;
  cpp_int prev = 1;
  for (int k = 0; k + 1 < n; ++k) {
    int pivot = -1;
    for (int i = k; i < n && pivot < 0; ++i)
      if (w[i][k] != 0) pivot = i;
    if (pivot < 0) return 0;
    if (pivot != k) {
      w[pivot].swap(w[k]);
      sign = -sign;
    }
    for (int i = k + 1; i < n; ++i)
      for (int j = k + 1; j < n; ++j)
        w[i][j] = (w[i][j] * w[k][k] - w[i][k] * w[k][j]) / prev;
    prev = w[k][k];
  }
  if (w[n - 1][n - 1] == 0) return 0;
  return w[n - 1][n - 1] < 0 ? -sign : sign;
}

// Determinant sign with a float fast path. The rows are small integers, so
// an LU determinant plus a backward-error bound decides all but near-ties.
int det_sign(std::array<Row, kMaxDim>& m, int n) {
  double fl[kMaxDim][kMaxDim];
  double norm_prod = 1.0;
  for (int i = 0; i < n; ++i) {
    double sq = 0.0;
    for (int j = 0; j < n; ++j) {
      fl[i][j] = static_cast<double>(m[i][j]);
      sq += fl[i][j] * fl[i][j];
    }
    norm_prod *= std::sqrt(sq);
  }
  double det = 1.0;
  for (int k = 0; k < n; ++k) {
    int pivot = k;
    for (int i = k + 1; i < n; ++i)
      if (std::abs(fl[i][k]) > std::abs(fl[pivot][k])) pivot = i;
    if (pivot != k) {
      for (int j = k; j < n; ++j) std::swap(fl[pivot][j], fl[k][j]);
      det = -det;
    }
    det *= fl[k][k];
    if (det == 0.0) break;
    for (int i = k + 1; i < n; ++i) {
      const double f = fl[i][k] / fl[k][k];
      for (int j = k + 1; j < n; ++j) fl[i][j] -= f * fl[k][j];
    }
  }
  if (std::abs(det) > 1e-9 * norm_prod) return det > 0.0 ? 1 : -1;
  return det_sign_exact(m, n);
}

// Quickhull facet record. neighbors[i] faces the ridge omitting vertices[i].
struct Rec {
  std::vector<int> vertices;  // sorted, d entries
  std::vector<int> neighbors;
  VectorXd normal;
  double offset = 0.0;
  int sign = 0;  // orient(vertices, p) times this is > 0 outside
  std::vector<int> outside;
  bool alive = true;
};

}  // namespace

Hull build_hull(const MatrixXd& points) {
  const int d = static_cast<int>(points.rows());
  const int n = static_cast<int>(points.cols());
  Hull hull;
  hull.dim = d;
  if (d < 2 || d > 6) throw geom::GeometryError("hull dimension must be 2..6");
  if (n < d + 1) {
    hull.degenerate = true;
    return hull;
  }

  // All incidence decisions use exact integer orientation tests on inputs
  // snapped to a power-of-two grid 2^-26 below the cloud extent. Floating
  // point survives only in heuristics (apex choice) and reported planes.
  const double extent = points.cwiseAbs().maxCoeff();
  const double grid =
      std::ldexp(1.0, std::max(std::ilogb(std::max(extent, 1e-300)) + 1, -320) -
                          26);
  Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic> lat(d, n);
  MatrixXd snapped(d, n);
  for (int c = 0; c < n; ++c)
    for (int r = 0; r < d; ++r) {
      lat(r, c) = std::llround(points(r, c) / grid);
      snapped(r, c) = static_cast<double>(lat(r, c)) * grid;
    }

  // Greedy affinely independent seed simplex: grow an orthonormal basis of
  // difference directions, always taking the point with the largest
  // residual. Residuals at grid scale mean a flat cloud, not a hull.
  std::vector<int> simplex = {0};
  MatrixXd basis(d, d);
  int rank = 0;
  while (rank < d) {
    int best = -1;
    double best_res = 4.0 * grid;
    VectorXd best_dir(d);
    for (int i = 0; i < n; ++i) {
      VectorXd v = snapped.col(i) - snapped.col(simplex[0]);
      v -= basis.leftCols(rank) * (basis.leftCols(rank).transpose() * v);
      const double res = v.norm();
      if (res > best_res) {
        best_res = res;
        best = i;
        best_dir = v / res;
      }
    }
    if (best < 0) {
      hull.degenerate = true;
      return hull;
    }
    basis.col(rank++) = best_dir;
    simplex.push_back(best);
  }

  VectorXd interior = VectorXd::Zero(d);
  for (int v : simplex) interior += snapped.col(v);
  interior /= static_cast<double>(simplex.size());

  // Orientation of the plane through facet vertices vs a query row; the
  // calibration row is the simplex centroid scaled by d+1 to stay integral.
  std::array<Row, kMaxDim> work;
  auto orient = [&](const std::vector<int>& vs, const Row& last) {
    for (int j = 1; j < d; ++j)
      for (int r = 0; r < d; ++r)
        work[j - 1][r] = lat(r, vs[j]) - lat(r, vs[0]);
    work[d - 1] = last;
    return det_sign(work, d);
  };
  auto point_row = [&](const std::vector<int>& vs, int p) {
    Row row{};
    for (int r = 0; r < d; ++r) row[r] = lat(r, p) - lat(r, vs[0]);
    return row;
  };
  Row centroid_sum{};
  for (int v : simplex)
    for (int r = 0; r < d; ++r) centroid_sum[r] += lat(r, v);

  std::vector<Rec> recs;
  auto make_facet = [&](std::vector<int> vs) {
    std::sort(vs.begin(), vs.end());
    Row centroid_row{};
    for (int r = 0; r < d; ++r)
      centroid_row[r] =
          centroid_sum[r] - static_cast<std::int64_t>(d + 1) * lat(r, vs[0]);
    const int s_int = orient(vs, centroid_row);
    if (s_int == 0)
      throw geom::GeometryError("hull facet through the interior point");

    Eigen::MatrixXd diff(d - 1, d);
    for (int j = 1; j < d; ++j)
      diff.row(j - 1) = (snapped.col(vs[j]) - snapped.col(vs[0])).transpose();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(diff, Eigen::ComputeFullV);
    VectorXd nrm = svd.matrixV().col(d - 1);
    double off = 0.0;
    for (int v : vs) off += nrm.dot(snapped.col(v));
    off /= static_cast<double>(vs.size());
    if (nrm.dot(interior) > off) {
      nrm = -nrm;
      off = -off;
    }
    Rec rec;
    rec.vertices = std::move(vs);
    rec.neighbors.assign(d, -1);
    rec.normal = std::move(nrm);
    rec.offset = off;
    rec.sign = -s_int;
    recs.push_back(std::move(rec));
    return static_cast<int>(recs.size()) - 1;
  };
  // Strictly outside the facet plane; 0 means on it, negative inside.
  auto side = [&](int id, int p) {
    return recs[id].sign * orient(recs[id].vertices, point_row(recs[id].vertices, p));
  };
  auto height = [&](int id, int p) {
    return recs[id].normal.dot(snapped.col(p)) - recs[id].offset;
  };

  // Seed simplex facets; the facet with id j omits simplex[j], so the
  // neighbor across the ridge omitting vertex v is the facet that omits v.
  for (int omit = 0; omit <= d; ++omit) {
    std::vector<int> vs;
    for (int j = 0; j <= d; ++j)
      if (j != omit) vs.push_back(simplex[j]);
    make_facet(std::move(vs));
  }
  for (int id = 0; id <= d; ++id)
    for (int i = 0; i < d; ++i) {
      const int v = recs[id].vertices[i];
      for (int j = 0; j <= d; ++j)
        if (simplex[j] == v) recs[id].neighbors[i] = j;
    }

  std::vector<int> work_list;
  for (int p = 0; p < n; ++p)
    for (int id = 0; id <= d; ++id)
      if (side(id, p) > 0) {
        if (recs[id].outside.empty()) work_list.push_back(id);
        recs[id].outside.push_back(p);
        break;
      }

  while (!work_list.empty()) {
    const int start = work_list.back();
    work_list.pop_back();
    if (!recs[start].alive || recs[start].outside.empty()) continue;

    int apex = -1;
    double apex_height = -std::numeric_limits<double>::infinity();
    for (int p : recs[start].outside) {
      const double h = height(start, p);
      if (h > apex_height) {
        apex_height = h;
        apex = p;
      }
    }

    // Exact visibility makes the visible region connected and its boundary
    // a closed ridge cycle, so BFS over neighbors finds all of it.
    std::vector<signed char> state(recs.size(), 0);  // 1 visible, -1 not
    std::vector<int> visible = {start}, stack = {start};
    state[start] = 1;
    struct Ridge {
      int inner = -1, pos = -1, outer = -1;
    };
    std::vector<Ridge> horizon;
    while (!stack.empty()) {
      const int cur = stack.back();
      stack.pop_back();
      for (int pos = 0; pos < d; ++pos) {
        const int nb = recs[cur].neighbors[pos];
        if (state[nb] == 0) {
          state[nb] = side(nb, apex) > 0 ? 1 : -1;
          if (state[nb] == 1) {
            visible.push_back(nb);
            stack.push_back(nb);
          }
        }
        if (state[nb] == -1) horizon.push_back({cur, pos, nb});
      }
    }

    std::vector<int> orphans;
    for (int id : visible)
      for (int p : recs[id].outside)
        if (p != apex) orphans.push_back(p);

    // One new facet per horizon ridge, linked to the surviving outer facet
    // and to sibling new facets through their apex-bearing ridges.
    std::map<std::vector<int>, std::pair<int, int>> half_ridge;
    std::vector<int> created;
    for (const Ridge& hz : horizon) {
      std::vector<int> vs;
      for (int i = 0; i < d; ++i)
        if (i != hz.pos) vs.push_back(recs[hz.inner].vertices[i]);
      vs.push_back(apex);
      const int id = make_facet(std::move(vs));
      created.push_back(id);

      int outer_pos = -1;
      for (int i = 0; i < d; ++i)
        if (recs[hz.outer].neighbors[i] == hz.inner) outer_pos = i;
      int apex_pos = -1;
      for (int i = 0; i < d; ++i)
        if (recs[id].vertices[i] == apex) apex_pos = i;
      if (outer_pos < 0 || apex_pos < 0)
        throw geom::GeometryError("hull adjacency lost across the horizon");
      recs[id].neighbors[apex_pos] = hz.outer;
      recs[hz.outer].neighbors[outer_pos] = id;

      for (int i = 0; i < d; ++i) {
        if (i == apex_pos) continue;
        std::vector<int> key;
        for (int j = 0; j < d; ++j)
          if (j != i) key.push_back(recs[id].vertices[j]);
        auto [it, fresh] = half_ridge.try_emplace(std::move(key), id, i);
        if (!fresh) {
          recs[id].neighbors[i] = it->second.first;
          recs[it->second.first].neighbors[it->second.second] = id;
          half_ridge.erase(it);  // a third sharer must fail the scan below
        }
      }
    }
    for (int id : created)
      for (int i = 0; i < d; ++i)
        if (recs[id].neighbors[i] < 0)
          throw geom::GeometryError("hull horizon is not closed");

    for (int id : visible) {
      recs[id].alive = false;
      recs[id].outside.clear();
    }
    // Orphans below every new facet are inside the grown hull: they and the
    // apex sit strictly above their dead facet's plane, so a segment from
    // the apex stays outside the old hull and can only exit a new facet.
    for (int p : orphans)
      for (int id : created)
        if (side(id, p) > 0) {
          if (recs[id].outside.empty()) work_list.push_back(id);
          recs[id].outside.push_back(p);
          break;
        }
  }

  // Closure invariant: every ridge joins exactly two live facets.
  std::vector<std::array<int, kMaxDim>> ridges;
  for (const Rec& rec : recs) {
    if (!rec.alive) continue;
    for (int omit = 0; omit < d; ++omit) {
      std::array<int, kMaxDim> ridge{};
      int w = 0;
      for (int i = 0; i < d; ++i)
        if (i != omit) ridge[w++] = rec.vertices[i];
      ridges.push_back(ridge);
    }
  }
  std::sort(ridges.begin(), ridges.end());
  for (size_t i = 0; i < ridges.size(); i += 2)
    if (i + 1 >= ridges.size() || ridges[i] != ridges[i + 1] ||
        (i + 2 < ridges.size() && ridges[i + 2] == ridges[i]))
      throw geom::GeometryError("hull facet complex is not closed");

  for (Rec& rec : recs)
    if (rec.alive)
      hull.facets.push_back(
          Facet{std::move(rec.vertices), std::move(rec.normal), rec.offset});
  return hull;
}

}  // namespace grasp::hullnd

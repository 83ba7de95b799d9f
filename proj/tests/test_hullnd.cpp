#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "../src/hullnd.hpp"
#include "grasp/geometry.hpp"
#include "oracles/hull_reference.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cstring>
#include <random>
#include <set>
#include <vector>

using Eigen::MatrixXd;
using Eigen::VectorXd;
using grasp::hullnd::build_hull;
using grasp::hullnd::Hull;

namespace {

MatrixXd random_cloud(std::mt19937_64& rng, int dim, int count) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  MatrixXd pts(dim, count);
  for (int c = 0; c < count; ++c)
    for (int r = 0; r < dim; ++r) pts(r, c) = gauss(rng);
  return pts;
}

std::set<std::vector<int>> facet_sets(const Hull& hull) {
  std::set<std::vector<int>> out;
  for (const auto& f : hull.facets) out.insert(f.vertices);
  return out;
}

// The builder snaps input to a power-of-two grid 2^-26 below the cloud
// extent and hulls that exactly; oracle thresholds must absorb the snap
// displacement plus plane-fit noise.
double builder_tol(const MatrixXd& pts) { return 1e-7 * pts.cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("simplex hull has one facet per omitted vertex") {
  std::mt19937_64 rng(83001);
  for (int dim = 2; dim <= 6; ++dim) {
    const MatrixXd pts = random_cloud(rng, dim, dim + 1);
    const Hull hull = build_hull(pts);
    REQUIRE_FALSE(hull.degenerate);
    CHECK(hull.facets.size() == static_cast<size_t>(dim) + 1);
    std::set<std::vector<int>> expect;
    for (int omit = 0; omit <= dim; ++omit) {
      std::vector<int> vs;
      for (int v = 0; v <= dim; ++v)
        if (v != omit) vs.push_back(v);
      expect.insert(vs);
    }
    CHECK(facet_sets(hull) == expect);
    const auto check = oracle::verify_hull(pts, hull, 10.0 * builder_tol(pts));
    CHECK(check.ok());
  }
}

TEST_CASE("hull facets match exhaustive facet enumeration on random clouds") {
  std::mt19937_64 rng(83002);
  for (int trial = 0; trial < 60; ++trial) {
    const int dim = 3 + trial % 4;
    const int count = dim + 2 + trial % 7;
    const MatrixXd pts = random_cloud(rng, dim, count);
    const Hull hull = build_hull(pts);
    REQUIRE_FALSE(hull.degenerate);
    CHECK(facet_sets(hull) == oracle::enumerate_facets(pts, builder_tol(pts)));
    CHECK(oracle::verify_hull(pts, hull, 10.0 * builder_tol(pts)).ok());
  }
}

TEST_CASE("interior points change nothing") {
  std::mt19937_64 rng(83003);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const int dim = 4 + trial % 3;
    const MatrixXd pts = random_cloud(rng, dim, dim + 4);
    MatrixXd padded(dim, pts.cols() + 10);
    padded.leftCols(pts.cols()) = pts;
    for (int extra = 0; extra < 10; ++extra) {
      VectorXd weights(pts.cols());
      for (int i = 0; i < weights.size(); ++i) weights(i) = unit(rng);
      weights /= weights.sum();
      padded.col(pts.cols() + extra) = pts * weights;
    }
    const Hull base = build_hull(pts);
    const Hull grown = build_hull(padded);
    CHECK(facet_sets(base) == facet_sets(grown));
    CHECK(oracle::verify_hull(padded, grown, 10.0 * builder_tol(padded)).ok());
  }
}

TEST_CASE("flat input reports degenerate instead of inventing facets") {
  std::mt19937_64 rng(83004);
  MatrixXd flat = random_cloud(rng, 5, 20);
  flat.row(4).setZero();
  MatrixXd lifted(6, 20);
  lifted.topRows(5) = flat;
  lifted.row(5) = 0.25 * flat.row(0) - 3.0 * flat.row(2);  // affine dependence
  const Hull hull = build_hull(lifted);
  CHECK(hull.degenerate);
  CHECK(hull.facets.empty());

  CHECK(build_hull(MatrixXd::Zero(4, 3)).degenerate);  // fewer points than dim+1
}

TEST_CASE("rebuilding the same cloud is bitwise identical") {
  std::mt19937_64 rng(83005);
  const MatrixXd pts = random_cloud(rng, 6, 30);
  const Hull a = build_hull(pts);
  const Hull b = build_hull(pts);
  REQUIRE(a.facets.size() == b.facets.size());
  for (size_t i = 0; i < a.facets.size(); ++i) {
    CHECK(a.facets[i].vertices == b.facets[i].vertices);
    CHECK(std::memcmp(a.facets[i].normal.data(), b.facets[i].normal.data(),
                      sizeof(double) * 6) == 0);
    CHECK(a.facets[i].offset == b.facets[i].offset);
  }
}

TEST_CASE("unit hypercube with joggle keeps faces at distance about 1") {
  // Exact cube corners are co-hyperplanar (non-simplicial facets); a small
  // deterministic joggle is the supported way to hull such inputs.
  std::mt19937_64 rng(83006);
  std::uniform_real_distribution<double> jog(-1e-7, 1e-7);
  for (int dim = 3; dim <= 4; ++dim) {
    MatrixXd pts(dim, 1 << dim);
    for (int c = 0; c < pts.cols(); ++c)
      for (int r = 0; r < dim; ++r)
        pts(r, c) = ((c >> r) & 1 ? 1.0 : -1.0) + jog(rng);
    const Hull hull = build_hull(pts);
    REQUIRE_FALSE(hull.degenerate);
    CHECK(oracle::verify_hull(pts, hull, 10.0 * builder_tol(pts)).ok());
    // Joggle bevels the flat faces, so offsets range up to the corner
    // distance, but the inscribed radius stays at the face distance 1.
    double min_off = 1e300;
    for (const auto& f : hull.facets) min_off = std::min(min_off, f.offset);
    CHECK(min_off == doctest::Approx(1.0).epsilon(1e-5));
  }
}

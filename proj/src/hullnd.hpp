// Incremental convex hull in R^d for modest point counts. Facets are
// simplicial; inputs with many co-hyperplanar points need a caller-side
// perturbation. Built for the 6D wrench sets behind the Q1 metric.
#pragma once

#include <Eigen/Dense>

#include <vector>

namespace grasp::hullnd {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct Facet {
  std::vector<int> vertices;  // d point indices, sorted
  VectorXd normal;            // unit, outward
  double offset = 0.0;        // normal . x = offset on the facet plane
};

struct Hull {
  int dim = 0;
  bool degenerate = false;  // affine rank < dim; facet list empty
  std::vector<Facet> facets;
};

/// Points are columns. Throws GeometryError when the facet structure cannot
/// be kept simplicial (co-hyperplanar inputs); degenerate flat inputs return
/// degenerate = true instead.
Hull build_hull(const MatrixXd& points);

}  // namespace grasp::hullnd

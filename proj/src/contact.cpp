#include "grasp/contact.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace grasp::contact {

Vector3d frame_seed(const Vector3d& n_unit) {
  return std::abs(n_unit.x()) > 0.99 ? Vector3d::UnitY() : Vector3d::UnitX();
}

ContactFrame build_frame(const Vector3d& p, const Vector3d& n_unit) {
  ContactFrame f;
  f.p = p;
  f.n = n_unit;
  const Vector3d seed = frame_seed(n_unit);
  f.d = n_unit.cross(seed).normalized();
  f.e = n_unit.cross(f.d);
  return f;
}

Eigen::Matrix<double, 6, 3> grasp_matrix(const Vector3d& p) {
  Eigen::Matrix<double, 6, 3> g;
  g.topRows<3>() = Eigen::Matrix3d::Identity();
  g.bottomRows<3>() << 0, -p.z(), p.y(), p.z(), 0, -p.x(), -p.y(), p.x(), 0;
  return g;
}

Matrix3Xd pyramid_edges(const ContactFrame& frame, double mu, int n_edges) {
  if (n_edges < 3) throw std::invalid_argument("friction pyramid needs >= 3 edges");
  if (!(mu > 0)) throw std::invalid_argument("friction coefficient must be positive");
  Matrix3Xd edges(3, n_edges);
  for (int j = 0; j < n_edges; ++j) {
    const double th = 2.0 * std::numbers::pi * j / n_edges;
    edges.col(j) = frame.n + mu * (std::cos(th) * frame.d + std::sin(th) * frame.e);
  }
  return edges;
}

Vector3d force_from_weights(const Matrix3Xd& edges, const Eigen::VectorXd& lambda) {
  if (lambda.size() != edges.cols())
    throw std::invalid_argument("weight count must match edge count");
  return edges * lambda;
}

MatrixXd wrench_basis(std::span<const ContactFrame> frames, double mu, int n_edges) {
  MatrixXd w(6, static_cast<int>(frames.size()) * n_edges);
  for (size_t i = 0; i < frames.size(); ++i)
    w.middleCols(static_cast<int>(i) * n_edges, n_edges) =
        grasp_matrix(frames[i].p) * pyramid_edges(frames[i], mu, n_edges);
  return w;
}

}  // namespace grasp::contact

#pragma once

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace grasp::contact {

using Eigen::Matrix3Xd;
using Eigen::MatrixXd;
using Eigen::Vector3d;

/// Right-handed contact frame at a surface point. `n` points into the object
/// (the direction a fingertip pushes); `d`, `e` span the tangent plane.
struct ContactFrame {
  Vector3d p = Vector3d::Zero();
  Vector3d n = Vector3d::UnitZ();
  Vector3d d = Vector3d::UnitX();
  Vector3d e = Vector3d::UnitY();
};

/// Tangent seed for a given normal: the x axis, or the y axis when the
/// normal is nearly parallel to x. Exposed so frame derivatives can reuse
/// the exact rule build_frame applies.
Vector3d frame_seed(const Vector3d& n_unit);

/// Builds the frame from a point and a unit inward normal. The seed choice
/// makes the frame a deterministic function of (p, n).
ContactFrame build_frame(const Vector3d& p, const Vector3d& n_unit);

/// 6x3 map from a force at p to the object wrench [f; p x f].
Eigen::Matrix<double, 6, 3> grasp_matrix(const Vector3d& p);

/// Friction-pyramid edge directions: column j is n + mu*(cos(2pi j/k) d +
/// sin(2pi j/k) e). Each edge has unit normal component and lies on the
/// friction-cone boundary; edge 0 is aligned with d.
Matrix3Xd pyramid_edges(const ContactFrame& frame, double mu, int n_edges);

/// Contact force from nonnegative edge weights: f = edges * lambda. The
/// normal component of f equals the weight sum.
Vector3d force_from_weights(const Matrix3Xd& edges,
                            const Eigen::VectorXd& lambda);

/// 6 x (m * n_edges) wrench basis: block i holds grasp_matrix(p_i) *
/// pyramid_edges(frame_i). A weight vector over all edges maps to the total
/// object wrench by one multiply.
MatrixXd wrench_basis(std::span<const ContactFrame> frames, double mu, int n_edges);

}  // namespace grasp::contact

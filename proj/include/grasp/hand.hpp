#pragma once

#include "grasp/geometry.hpp"

#include <Eigen/Dense>

#include <string>
#include <utility>
#include <vector>

namespace grasp::hand {

using Eigen::Matrix3d;
using Eigen::MatrixXd;
using Eigen::Vector3d;
using Eigen::VectorXd;

/// Articulated hand: a tree of links with one revolute joint each (except the
/// base link), per-link convex collision parts and sphere proxies.
struct HandModel {
  struct Joint {
    std::string name;
    int parent_link = -1;
    int child_link = -1;
    Vector3d origin = Vector3d::Zero();  // in the parent link frame
    Vector3d axis = Vector3d::UnitZ();   // unit, in the child link frame
    double lower = 0.0;
    double upper = 0.0;
  };
  struct Link {
    std::string name;
    int parent_joint = -1;  // -1 for the base link
    geom::ConvexPart part;
    std::vector<geom::SphereProxy> proxies;
    int tip_proxy = -1;  // proxy used as the fingertip contact sphere
  };

  std::string name;
  std::vector<Link> links;
  std::vector<Joint> joints;
  std::vector<int> fingertip_links;                 // links with a tip proxy
  std::vector<std::pair<int, int>> collision_pairs;  // checked for self-contact

  int dof() const { return static_cast<int>(joints.size()); }
  VectorXd lower_limits() const;
  VectorXd upper_limits() const;
};

/// Hand configuration: base rotation, base translation, joint angles.
struct HandPose {
  Matrix3d R = Matrix3d::Identity();
  Vector3d t = Vector3d::Zero();
  VectorXd q;
};

/// Optimizer state layout: [9 rotation entries (column-major), 3 translation,
/// n joint angles]. The 3x3 block is unconstrained; poses use its projection
/// onto the rotation group.
inline constexpr int kStateRotation = 0;
inline constexpr int kStateTranslation = 9;
inline constexpr int kStateJoints = 12;

struct RotationProjection {
  Matrix3d R = Matrix3d::Identity();
  bool fallback = false;  // set when the block was too degenerate for SVD use
};

/// Nearest rotation to an arbitrary 3x3 block (Frobenius norm), with a
/// determinant fix so the result is always proper. Falls back to column
/// orthonormalization for near-singular input and flags it.
RotationProjection project_rotation(const Matrix3d& raw);

/// Cached quantities for differentiating through the rotation projection.
struct PoseState {
  Matrix3d raw = Matrix3d::Identity();
  Matrix3d R = Matrix3d::Identity();
  Matrix3d a_inv = Matrix3d::Identity();  // ((tr S) I - S)^{-1}, S = R^T raw
  bool degenerate = false;
};

PoseState make_pose_state(const Matrix3d& raw);

/// 3x9 map from raw-block perturbations to the body-frame rotation tangent:
/// dR = R [w]x with w = J * dvec(raw), vec column-major.
Eigen::Matrix<double, 3, 9> rotation_tangent_jacobian(const PoseState& ps);

HandPose pose_from_state(const HandModel& model, const VectorXd& x);
VectorXd state_from_pose(const HandModel& model, const HandPose& pose);

/// Forward kinematics. `chain` poses exclude the floating base (joint motion
/// only); `world` composes the base on top. Joint origin/axis are reported in
/// the chain (base) frame for Jacobian assembly.
struct FkResult {
  std::vector<geom::RigidTransform> chain;
  std::vector<geom::RigidTransform> world;
  std::vector<Vector3d> joint_origin;  // base frame
  std::vector<Vector3d> joint_axis;    // base frame, unit
};

FkResult forward_kinematics(const HandModel& model, const HandPose& pose);

/// 3 x (12 + n) Jacobian of a world point rigidly attached to `link`.
MatrixXd point_jacobian(const HandModel& model, const PoseState& ps,
                        const HandPose& pose, const FkResult& fk, int link,
                        const Vector3d& point_world);

/// 3 x (12 + n) Jacobian of a world direction rigidly attached to `link`
/// (translation columns are zero).
MatrixXd direction_jacobian(const HandModel& model, const PoseState& ps,
                            const HandPose& pose, const FkResult& fk, int link,
                            const Vector3d& dir_world);

/// World centers and radii of the fingertip contact spheres, ordered like
/// model.fingertip_links.
std::vector<geom::SphereProxy> fingertip_spheres(const HandModel& model,
                                                 const FkResult& fk);
Vector3d fingertip_center(const HandModel& model, const FkResult& fk, int finger);

/// Quadratic hinge on joint-limit violation. Gradient has state layout,
/// rotation/translation columns zero.
double limit_energy(const HandModel& model, const HandPose& pose,
                    VectorXd* grad = nullptr);

/// Sphere-proxy self-penetration: sum of squared pairwise overlaps across
/// collision_pairs. Gradient has state layout.
double self_penetration_energy(const HandModel& model, const PoseState& ps,
                               const HandPose& pose, const FkResult& fk,
                               VectorXd* grad = nullptr);

/// Largest proxy-pair overlap across collision_pairs, 0 when clear. Used for
/// reporting; exact convex parts back the evaluation-time variant.
double self_penetration_proxy_depth(const HandModel& model, const FkResult& fk);

struct HandError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Parses the JSON hand description (see docs/formats.md).
HandModel parse_hand_spec(const std::string& json_text);

/// Built-in three-finger test hand, expressed in the JSON format.
const std::string& builtin_hand_json();
const HandModel& builtin_hand();

}  // namespace grasp::hand

#pragma once

#include "grasp/config.hpp"
#include "grasp/energy.hpp"
#include "grasp/hand.hpp"
#include "grasp/object.hpp"
#include "grasp/records.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <vector>

namespace grasp::pipeline {

using Eigen::Vector3d;
using Eigen::VectorXd;

/// Nearest-feature pair between one fingertip mesh and the object.
struct ContactWitness {
  Vector3d c_w = Vector3d::Zero();  // on the fingertip mesh, world frame
  Vector3d p_w = Vector3d::Zero();  // on the object surface, world frame
  Vector3d n = Vector3d::UnitZ();   // outward object normal at p_w
  double distance = 0.0;            // signed; negative when penetrating
  int link = -1;                    // fingertip link id
};

/// Per-fingertip nearest points against the object's convex parts, with the
/// OBB broad phase culling parts that provably cannot hold the minimum.
/// Witness order follows model.fingertip_links.
std::vector<ContactWitness> fine_contact_query(const hand::HandModel& model,
                                               const hand::FkResult& fk,
                                               const object::ObjectModel& object);

/// Sphere-proxy stage distance energy: sum over fingertips of
/// (d_i - alpha_i - offset)^2, d_i the signed center-to-surface distance and
/// alpha_i the tip radius. The surface point's own motion under the query is
/// finite-differenced with step fd_step; the fingertip motion is analytic.
/// The gradient, when requested, has the grasp-state layout.
double coarse_distance_energy(const hand::HandModel& model, const VectorXd& x,
                              const object::ObjectModel& object, double offset,
                              double fd_step, VectorXd* grad = nullptr);

/// Mesh-stage grasp surrogate: each witness is re-expressed in its link frame
/// and treated as rigidly attached, so the gradient sees only the rigid
/// motion of c_w, never the witness slide. Anchors stay fixed.
energy::SurrogateResult fine_grasp_surrogate(const hand::HandModel& model, const VectorXd& x,
                                             std::span<const ContactWitness> witnesses,
                                             std::span<const Vector3d> anchors);

/// Deterministic start states: roots on the object's inflated bounding
/// sphere, base z axis aimed at the object center with a random roll, joints
/// at mid-range with uniform jitter.
std::vector<VectorXd> init_poses(const hand::HandModel& model,
                                 const object::ObjectModel& object, int n,
                                 std::uint64_t seed, const InitParams& params);

/// Squeeze extrapolation: translation and joints move to 2x - x_p (joints
/// clamped to limits); the rotation applies the pre-grasp-to-grasp rotation
/// once more. x_p == x returns x up to rotation projection.
VectorXd squeeze_pose(const hand::HandModel& model, const VectorXd& x, const VectorXd& x_p);

/// Three-stage batch synthesis: sphere-proxy descent with the lower-level QP
/// energy, then two mesh-witness stages (offset kept, then removed) driving
/// the surrogate toward the proxy stage's contact points. Per-grasp failures
/// (non-finite energy or state) freeze that grasp and never abort the batch.
/// Records come back in input order and are identical for any worker count.
std::vector<records::GraspRecord> synthesize(const hand::HandModel& model,
                                             const object::ObjectModel& object,
                                             const RunConfig& cfg);

}  // namespace grasp::pipeline

#pragma once

#include "grasp/config.hpp"
#include "grasp/contact.hpp"

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace grasp::energy {

using Eigen::MatrixXd;
using Eigen::Vector3d;
using Eigen::VectorXd;

/// Unit target wrenches, one per column. Norm checked to 1e-8 on use.
struct TaskWrenchSet {
  Eigen::Matrix<double, 6, Eigen::Dynamic> directions;
};

/// The six pure-force closure targets [±e_k; 0].
TaskWrenchSet force_closure_directions();

/// Result of the lower-level QPs for one grasp. Column j of each matrix
/// belongs to direction j. `residuals` holds beta*t_j - W*lambda_j, so
/// per_direction(j) is its squared norm and is nonnegative by construction.
struct EnergyReport {
  double total = 0.0;
  VectorXd per_direction;
  MatrixXd contact_forces;  // edge weights lambda*, (m * n_edges) x s
  MatrixXd residuals;       // 6 x s
  MatrixXd duals;           // QP constraint multipliers, for warm starts
  std::vector<char> converged;
  bool all_converged = true;
  VectorXd gradient;  // filled by grasp_energy_gradient when requested
};

/// Solves the s lower-level QPs min |beta*t_j - W(x)*lambda|^2 over the
/// friction-pyramid weight polytope (per-contact sums in [0, 1], total sum
/// >= gamma_per_contact * m) as one shared batch. beta = 0 gives the
/// minimum-wrench baseline subject to the floor. Warm starts, when given,
/// must match the report layout from a previous call.
EnergyReport grasp_energy(std::span<const contact::ContactFrame> contacts,
                          const TaskWrenchSet& directions,
                          const EnergyParams& energy,
                          const ContactParams& contact_model,
                          const QpParams& qp,
                          const MatrixXd* warm_forces = nullptr,
                          const MatrixXd* warm_duals = nullptr);

/// Envelope gradient of the total energy: lambda* held fixed, the residual
/// differentiated through the wrench basis. jac_p[i] and jac_n[i] are the
/// 3 x D Jacobians of contact point and inward normal with respect to the
/// grasp variables; the result has D entries. The report must come from
/// grasp_energy on the same contacts and contact model.
VectorXd grasp_energy_gradient(std::span<const contact::ContactFrame> contacts,
                               const EnergyReport& report,
                               const ContactParams& contact_model,
                               std::span<const MatrixXd> jac_p,
                               std::span<const MatrixXd> jac_n);

/// Ferrari-Canny radius: largest origin-centered ball inside the convex hull
/// of achievable wrenches under per-contact normal-force caps of 1. The
/// wrench set is enumerated exactly (all per-contact edge choices) when
/// (n_edges + 1)^m <= 1000, and approximated from below by singles, pairwise
/// sums, and zero otherwise. Returns 0 when the hull is degenerate or the
/// origin is not strictly inside.
double q1_metric(std::span<const contact::ContactFrame> contacts,
                 const ContactParams& contact_model);

struct SurrogateResult {
  double value = 0.0;
  VectorXd gradient;
};

/// Sum of squared distances between moved points and fixed anchors, with its
/// exact gradient through the 3 x D point Jacobians. Serves both the
/// fine-stage grasp surrogate (anchors = coarse-stage contact points) and the
/// anchored distance energy.
SurrogateResult fine_stage_surrogate(std::span<const Vector3d> points,
                                     std::span<const Vector3d> anchors,
                                     std::span<const MatrixXd> jacobians);

}  // namespace grasp::energy

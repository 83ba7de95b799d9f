#pragma once

#include "grasp/config.hpp"
#include "grasp/hand.hpp"
#include "grasp/object.hpp"
#include "grasp/records.hpp"

#include <Eigen/Dense>

#include <span>
#include <string>
#include <vector>

namespace grasp::eval {

using Eigen::VectorXd;

/// Quasi-static verdict for one grasp record. Penetration and consistency
/// metrics are measured at the grasp pose x; the squeeze pose x_s drives the
/// fingertips past the surface by design, so gating penetration there would
/// reject every squeezed grasp.
struct EvalResult {
  bool success = false;
  Eigen::Matrix<double, 6, 1> per_direction_residuals =
      Eigen::Matrix<double, 6, 1>::Zero();  // unresisted wrench norms [N]
  double pd_mm = 0.0;
  double spd_mm = 0.0;
  double cdc_mm = 0.0;
  int contact_count = 0;
  std::string notes;
};

/// Statics success oracle. Contacts are fingertips within cfg.eval.contact_tol
/// of the surface (or penetrating) at x_s. Each gravity wrench
/// mass*g*(+-e_k, 0) must be resisted by pyramid forces whose total normal
/// magnitude stays under force_budget_factor * mass * g; success additionally
/// requires >= 2 contacts and pd_mm within penetration_tol. A contact-free
/// squeeze pose is a failure with a note, not an error.
EvalResult quasi_static_check(const hand::HandModel& model,
                              const records::GraspRecord& record,
                              const object::ObjectModel& object, const RunConfig& cfg);

/// Max hand-object penetration over all (link part, object part) pairs [mm].
double penetration_depth(const hand::HandModel& model, const VectorXd& x,
                         const object::ObjectModel& object);

/// Max penetration across non-adjacent link pairs, on the exact parts [mm].
double self_penetration_depth(const hand::HandModel& model, const VectorXd& x);

/// Signed fingertip-mesh distance to the object, one entry per finger [m].
std::vector<double> fingertip_distances(const hand::HandModel& model, const VectorXd& x,
                                        const object::ObjectModel& object);

/// Spread (max - min) of the per-finger signed distances [mm].
double contact_distance_consistency(const hand::HandModel& model, const VectorXd& x,
                                    const object::ObjectModel& object);

/// Percent of variance on the first principal component of the pose cloud
/// [axis-angle, translation, joints]. Axis-angle at the pi boundary picks the
/// representation with nonnegative first nonzero component. A zero-variance
/// cloud returns 100 and sets *degenerate when provided.
double first_variance_ratio(std::span<const records::GraspRecord> records,
                            bool* degenerate = nullptr);

/// ROC curve under the rule "lower energy predicts success". Thresholds
/// ascend starting from -inf, so the curve runs (0,0) -> (1,1) and tpr/fpr
/// are nondecreasing; auc is the trapezoidal integral of the stored points.
struct RocCurve {
  std::vector<double> thresholds;
  std::vector<double> tpr;
  std::vector<double> fpr;
  double auc = 0.0;
};

/// Throws std::invalid_argument on size mismatch, non-finite energies, or
/// single-class labels.
RocCurve roc_auc(std::span<const double> energies, std::span<const char> labels);

}  // namespace grasp::eval

#include "grasp/eval.hpp"

#include "grasp/contact.hpp"
#include "grasp/energy.hpp"
#include "grasp/geometry.hpp"
#include "grasp/pipeline.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace grasp::eval {
namespace {

using Eigen::Matrix3d;
using Eigen::MatrixXd;
using Eigen::Vector3d;

hand::FkResult fk_of(const hand::HandModel& model, const VectorXd& x) {
  return hand::forward_kinematics(model, hand::pose_from_state(model, x));
}

// Axis-angle embedding of the state's rotation block. At the pi boundary both
// sign charts describe the same rotation; the first nonzero component is made
// nonnegative so equal rotations embed to equal vectors.
Vector3d axis_angle_of(const VectorXd& x) {
  const Matrix3d raw = Eigen::Map<const Matrix3d>(x.data() + hand::kStateRotation);
  const Eigen::AngleAxisd aa(hand::project_rotation(raw).R);
  Vector3d v = aa.angle() * aa.axis();
  if (std::abs(aa.angle() - std::numbers::pi) < 1e-6) {
    for (int k = 0; k < 3; ++k) {
      if (v[k] > 0.0) break;
      if (v[k] < 0.0) {
        v = -v;
        break;
      }
    }
  }
  return v;
}

}  // namespace

double penetration_depth(const hand::HandModel& model, const VectorXd& x,
                         const object::ObjectModel& object) {
  const auto fk = fk_of(model, x);
  double depth = 0.0;
  for (size_t l = 0; l < model.links.size(); ++l)
    for (const auto& part : object.parts) {
      const double d = geom::signed_distance(model.links[l].part, fk.world[l], part,
                                             geom::RigidTransform{});
      depth = std::max(depth, -d);
    }
  return 1000.0 * depth;
}

double self_penetration_depth(const hand::HandModel& model, const VectorXd& x) {
  const auto fk = fk_of(model, x);
  double depth = 0.0;
  for (const auto& [i, j] : model.collision_pairs) {
    const double d = geom::signed_distance(model.links[i].part, fk.world[i],
                                           model.links[j].part, fk.world[j]);
    depth = std::max(depth, -d);
  }
  return 1000.0 * depth;
}

std::vector<double> fingertip_distances(const hand::HandModel& model, const VectorXd& x,
                                        const object::ObjectModel& object) {
  const auto fk = fk_of(model, x);
  std::vector<double> out;
  for (const auto& w : pipeline::fine_contact_query(model, fk, object))
    out.push_back(w.distance);
  return out;
}

double contact_distance_consistency(const hand::HandModel& model, const VectorXd& x,
                                    const object::ObjectModel& object) {
  const auto dists = fingertip_distances(model, x, object);
  if (dists.empty()) return 0.0;
  const auto [lo, hi] = std::minmax_element(dists.begin(), dists.end());
  return 1000.0 * (*hi - *lo);
}

EvalResult quasi_static_check(const hand::HandModel& model,
                              const records::GraspRecord& record,
                              const object::ObjectModel& object, const RunConfig& cfg) {
  const int dims = hand::kStateJoints + model.dof();
  if (record.x.size() != dims || record.x_s.size() != dims)
    throw std::invalid_argument("quasi_static_check: record poses do not match the hand");

  EvalResult out;
  out.pd_mm = penetration_depth(model, record.x, object);
  out.spd_mm = self_penetration_depth(model, record.x);
  out.cdc_mm = contact_distance_consistency(model, record.x, object);

  const double mg = cfg.eval.mass * cfg.eval.gravity;
  const double tau = cfg.eval.residual_rel_tol * mg;
  std::vector<std::string> notes;

  // Attached contacts at the squeeze pose.
  std::vector<contact::ContactFrame> frames;
  for (const auto& w : pipeline::fine_contact_query(model, fk_of(model, record.x_s), object))
    if (w.distance <= cfg.eval.contact_tol)
      frames.push_back(contact::build_frame(w.p_w, -w.n));
  out.contact_count = static_cast<int>(frames.size());

  bool resisted = false;
  if (frames.empty()) {
    out.per_direction_residuals.setConstant(mg);
    notes.push_back("no contacts at the squeeze pose");
  } else {
    // Resist each gravity wrench with edge weights rescaled so a per-contact
    // weight sum of 1 spends an equal share of the total force budget.
    const double cap = cfg.eval.force_budget_factor * mg / static_cast<double>(frames.size());
    energy::TaskWrenchSet targets;
    targets.directions.resize(6, 6);
    targets.directions.setZero();
    for (int j = 0; j < 6; ++j)
      targets.directions(j / 2, j) = (j % 2 == 0) ? -1.0 : 1.0;  // minus gravity
    EnergyParams ep;
    ep.beta = mg / cap;
    ep.gamma_per_contact = cfg.energy.gamma_per_contact;
    QpParams qp = cfg.qp;
    qp.eps_primal = cfg.eval.qp_eps;
    qp.eps_dual = cfg.eval.qp_eps;
    const auto report = energy::grasp_energy(frames, targets, ep, cfg.contact, qp);
    for (int j = 0; j < 6; ++j)
      out.per_direction_residuals[j] = cap * std::sqrt(std::max(report.per_direction[j], 0.0));
    if (!report.all_converged) notes.push_back("resistance qp unconverged");
    resisted = (out.per_direction_residuals.array() <= tau).all();
    if (!resisted) notes.push_back("gravity wrench residual above tolerance");
  }

  if (out.contact_count < 2) notes.push_back("fewer than two contacts");
  const bool shallow = out.pd_mm <= 1000.0 * cfg.eval.penetration_tol;
  if (!shallow) {
    std::ostringstream msg;
    msg << "penetration " << out.pd_mm << " mm above tolerance";
    notes.push_back(msg.str());
  }
  out.success = resisted && out.contact_count >= 2 && shallow;

  std::string joined;
  for (const auto& n : notes) {
    if (!joined.empty()) joined += "; ";
    joined += n;
  }
  out.notes = joined;
  return out;
}

double first_variance_ratio(std::span<const records::GraspRecord> records, bool* degenerate) {
  if (records.size() < 2)
    throw std::invalid_argument("first_variance_ratio: needs at least 2 records");
  const auto n = records[0].x.size();
  if (n < hand::kStateJoints)
    throw std::invalid_argument("first_variance_ratio: state too short");
  const auto dims = n - 6;  // 9 rotation entries collapse to 3 axis-angle ones
  MatrixXd X(dims, records.size());
  for (size_t i = 0; i < records.size(); ++i) {
    const auto& x = records[i].x;
    if (x.size() != n)
      throw std::invalid_argument("first_variance_ratio: mixed state sizes");
    X.col(i).head<3>() = axis_angle_of(x);
    X.col(i).tail(n - 9) = x.tail(n - 9);
  }
  X.colwise() -= X.rowwise().mean().eval();
  const MatrixXd cov = X * X.transpose() / static_cast<double>(records.size() - 1);
  const Eigen::SelfAdjointEigenSolver<MatrixXd> eig(cov);
  const VectorXd lambda = eig.eigenvalues().cwiseMax(0.0);
  const double total = lambda.sum();
  if (degenerate) *degenerate = false;
  if (!(total > 0.0)) {
    if (degenerate) *degenerate = true;
    return 100.0;
  }
  return 100.0 * lambda.maxCoeff() / total;
}

RocCurve roc_auc(std::span<const double> energies, std::span<const char> labels) {
  if (energies.size() != labels.size() || energies.size() < 2)
    throw std::invalid_argument("roc_auc: needs matched energies and labels");
  int pos = 0, neg = 0;
  for (size_t i = 0; i < energies.size(); ++i) {
    if (!std::isfinite(energies[i]))
      throw std::invalid_argument("roc_auc: non-finite energy");
    (labels[i] ? pos : neg) += 1;
  }
  if (pos == 0 || neg == 0)
    throw std::invalid_argument("roc_auc: both outcome classes required");

  std::vector<size_t> order(energies.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return energies[a] < energies[b]; });

  RocCurve curve;
  curve.thresholds.push_back(-std::numeric_limits<double>::infinity());
  curve.tpr.push_back(0.0);
  curve.fpr.push_back(0.0);
  int tp = 0, fp = 0;
  size_t i = 0;
  while (i < order.size()) {
    const double e = energies[order[i]];
    while (i < order.size() && energies[order[i]] == e) {
      (labels[order[i]] ? tp : fp) += 1;
      ++i;
    }
    curve.thresholds.push_back(e);
    curve.tpr.push_back(static_cast<double>(tp) / pos);
    curve.fpr.push_back(static_cast<double>(fp) / neg);
  }
  double auc = 0.0;
  for (size_t j = 0; j + 1 < curve.fpr.size(); ++j)
    auc += 0.5 * (curve.tpr[j] + curve.tpr[j + 1]) * (curve.fpr[j + 1] - curve.fpr[j]);
  curve.auc = auc;
  return curve;
}

}  // namespace grasp::eval

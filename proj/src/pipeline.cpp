#include "grasp/pipeline.hpp"

#include "grasp/contact.hpp"
#include "grasp/geometry.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <thread>
#include <vector>

namespace grasp::pipeline {
namespace {

using Eigen::Matrix3d;
using Eigen::MatrixXd;
using geom::RigidTransform;
using hand::FkResult;
using hand::HandModel;
using hand::HandPose;
using hand::PoseState;

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

struct Posed {
  PoseState ps;
  HandPose pose;
  FkResult fk;
};

Posed pose_hand(const HandModel& model, const VectorXd& x) {
  Posed p;
  p.ps = hand::make_pose_state(Eigen::Map<const Matrix3d>(x.data() + hand::kStateRotation));
  p.pose = hand::pose_from_state(model, x);
  p.fk = hand::forward_kinematics(model, p.pose);
  return p;
}

// Smallest sphere around the tip-proxy center containing the whole distal
// mesh. Culling with this radius keeps every part that could hold the
// mesh-level minimum, so the narrow phase matches an exhaustive scan.
double envelope_radius(const HandModel::Link& link) {
  const auto& tip = link.proxies[link.tip_proxy];
  double r = 0.0;
  for (const auto& v : link.part.vertices) r = std::max(r, (v - tip.center_local).norm());
  return r;
}

energy::SurrogateResult surrogate_at(const HandModel& model, const Posed& ph,
                                     std::span<const ContactWitness> witnesses,
                                     std::span<const Vector3d> anchors) {
  std::vector<Vector3d> points(witnesses.size());
  std::vector<MatrixXd> jac(witnesses.size());
  for (size_t i = 0; i < witnesses.size(); ++i) {
    points[i] = witnesses[i].c_w;
    jac[i] = hand::point_jacobian(model, ph.ps, ph.pose, ph.fk, witnesses[i].link,
                                  witnesses[i].c_w);
  }
  return energy::fine_stage_surrogate(points, anchors, jac);
}

// Coarse-stage contact points: nearest object surface point to each tip
// center. These become the anchors the mesh stages pull the witnesses toward.
std::vector<Vector3d> anchor_points(const HandModel& model, const Posed& ph,
                                    const object::ObjectModel& object) {
  std::vector<Vector3d> anchors;
  anchors.reserve(model.fingertip_links.size());
  for (size_t f = 0; f < model.fingertip_links.size(); ++f) {
    const Vector3d c = hand::fingertip_center(model, ph.fk, static_cast<int>(f));
    anchors.push_back(geom::point_to_mesh(c, object.parts).point_b);
  }
  return anchors;
}

// Persistent per-grasp QP state: the lower-level solves warm start from the
// previous iteration of the same grasp.
struct QpScratch {
  MatrixXd forces;
  MatrixXd duals;
  bool ready = false;
};

struct StageSetup {
  const char* name;
  bool meshes;     // false: sphere proxies, true: exact fingertip parts
  double offset;   // distance-energy standoff
  const StageSchedule* sched;
};

// Full objective at x. Anchors are only read in mesh stages.
double total_energy(const HandModel& model, const object::ObjectModel& object,
                    const RunConfig& cfg, const StageSetup& st,
                    std::span<const Vector3d> anchors, const VectorXd& x,
                    QpScratch& scratch, VectorXd* grad) {
  const Posed ph = pose_hand(model, x);
  const int dims = hand::kStateJoints + model.dof();
  if (grad) grad->setZero(dims);
  VectorXd g;
  double total = 0.0;

  double e = hand::limit_energy(model, ph.pose, grad ? &g : nullptr);
  total += cfg.weights.joint_limit * e;
  if (grad) *grad += cfg.weights.joint_limit * g;

  e = hand::self_penetration_energy(model, ph.ps, ph.pose, ph.fk, grad ? &g : nullptr);
  total += cfg.weights.self_penetration * e;
  if (grad) *grad += cfg.weights.self_penetration * g;

  if (!st.meshes) {
    // Hand-object hinge over every sphere proxy.
    for (size_t l = 0; l < model.links.size(); ++l) {
      for (const auto& proxy : model.links[l].proxies) {
        const Vector3d c = ph.fk.world[l].apply(proxy.center_local);
        const auto q = geom::point_to_mesh(c, object.parts);
        const double sd = q.distance - proxy.radius;
        if (sd >= 0.0) continue;
        total += cfg.weights.object_penetration * sd * sd;
        if (grad) {
          const MatrixXd jc =
              hand::point_jacobian(model, ph.ps, ph.pose, ph.fk, static_cast<int>(l), c);
          *grad += cfg.weights.object_penetration * 2.0 * sd * (q.normal.transpose() * jc).transpose();
        }
      }
    }

    // Tip-sphere distance energy plus the lower-level grasp energy on frames
    // taken from the nearest surface points.
    const int m = static_cast<int>(model.fingertip_links.size());
    std::vector<contact::ContactFrame> frames(m);
    std::vector<MatrixXd> jac_p(m), jac_n(m);
    const double h = cfg.pipeline.fd_step;
    for (int f = 0; f < m; ++f) {
      const int link = model.fingertip_links[f];
      const auto& tip = model.links[link].proxies[model.links[link].tip_proxy];
      const Vector3d c = ph.fk.world[link].apply(tip.center_local);
      const auto q0 = geom::point_to_mesh(c, object.parts);
      frames[f] = contact::build_frame(q0.point_b, -q0.normal);
      const double r = q0.distance - tip.radius - st.offset;
      total += cfg.weights.distance * r * r;
      if (grad) {
        // Surface point and outward normal as functions of the query point,
        // by central differences; the tip center itself moves analytically.
        Matrix3d dp, dn;
        for (int k = 0; k < 3; ++k) {
          const Vector3d step = h * Vector3d::Unit(k);
          const auto qp = geom::point_to_mesh(c + step, object.parts);
          const auto qm = geom::point_to_mesh(c - step, object.parts);
          dp.col(k) = (qp.point_b - qm.point_b) / (2.0 * h);
          dn.col(k) = (qp.normal - qm.normal) / (2.0 * h);
        }
        const MatrixXd jc =
            hand::point_jacobian(model, ph.ps, ph.pose, ph.fk, link, c);
        const Eigen::RowVector3d dd = q0.normal.transpose() * (Matrix3d::Identity() - dp);
        *grad += cfg.weights.distance * 2.0 * r * (dd * jc).transpose();
        jac_p[f] = dp * jc;
        jac_n[f] = -dn * jc;  // frame normal is the inward normal
      }
    }
    auto report = energy::grasp_energy(frames, energy::force_closure_directions(),
                                       cfg.energy, cfg.contact, cfg.qp,
                                       scratch.ready ? &scratch.forces : nullptr,
                                       scratch.ready ? &scratch.duals : nullptr);
    scratch.forces = report.contact_forces;
    scratch.duals = report.duals;
    scratch.ready = true;
    total += cfg.weights.grasp * report.total;
    if (grad)
      *grad += cfg.weights.grasp *
               energy::grasp_energy_gradient(frames, report, cfg.contact, jac_p, jac_n);
  } else {
    // Mesh-on-mesh hinge across every link part and object part.
    for (size_t l = 0; l < model.links.size(); ++l) {
      for (const auto& part : object.parts) {
        geom::NearestPointResult r;
        const double d = geom::signed_distance(model.links[l].part, ph.fk.world[l], part,
                                               RigidTransform{}, &r);
        if (d >= 0.0) continue;
        total += cfg.weights.object_penetration * d * d;
        if (grad) {
          const MatrixXd jc = hand::point_jacobian(model, ph.ps, ph.pose, ph.fk,
                                                   static_cast<int>(l), r.point_a);
          *grad += cfg.weights.object_penetration * 2.0 * d * (r.normal.transpose() * jc).transpose();
        }
      }
    }

    // Witness-based distance energy. The witness slide is not differentiated:
    // each witness is rigid on its link for the gradient.
    const auto witnesses = fine_contact_query(model, ph.fk, object);
    for (const auto& w : witnesses) {
      const double r = w.distance - st.offset;
      total += cfg.weights.distance * r * r;
      if (grad) {
        const MatrixXd jc =
            hand::point_jacobian(model, ph.ps, ph.pose, ph.fk, w.link, w.c_w);
        *grad += cfg.weights.distance * 2.0 * r * (w.n.transpose() * jc).transpose();
      }
    }

    auto sr = surrogate_at(model, ph, witnesses, anchors);
    total += cfg.weights.grasp * sr.value;
    if (grad) *grad += cfg.weights.grasp * sr.gradient;
  }
  return total;
}

// One descent step: each block moves against its gradient, scaled by the
// stage step and a cosine decay, with the block norm clipped at 1.
void apply_step(const HandModel& model, const StageSchedule& sched, int it,
                const VectorXd& grad, VectorXd& x) {
  const double t = sched.iters > 1 ? static_cast<double>(it) / sched.iters : 0.0;
  const double decay =
      sched.step_floor + (1.0 - sched.step_floor) * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
  const auto move = [&](int start, int len, double step) {
    const double norm = grad.segment(start, len).norm();
    x.segment(start, len) -= step * decay / std::max(1.0, norm) * grad.segment(start, len);
  };
  move(hand::kStateRotation, 9, sched.step_rotation);
  move(hand::kStateTranslation, 3, sched.step_translation);
  if (model.dof() > 0) {
    move(hand::kStateJoints, model.dof(), sched.step_joints);
    const VectorXd lo = model.lower_limits();
    const VectorXd hi = model.upper_limits();
    x.tail(model.dof()) = x.tail(model.dof()).cwiseMax(lo).cwiseMin(hi);
  }
}

records::GraspRecord run_grasp(const HandModel& model, const object::ObjectModel& object,
                               const RunConfig& cfg, const VectorXd& x0, int index) {
  records::GraspRecord rec;
  rec.index = index;
  rec.seed = cfg.seed;
  rec.object_id = object.source;
  rec.object_scale = object.scale;

  const StageSetup stages[3] = {
      {"coarse", false, cfg.pipeline.contact_offset, &cfg.pipeline.coarse},
      {"fine", true, cfg.pipeline.contact_offset, &cfg.pipeline.fine},
      {"final", true, 0.0, &cfg.pipeline.final_stage},
  };
  const int n_stages = cfg.pipeline.skip_fine_stages ? 1 : 3;
  const double travel_limit = 1e3;  // base translation beyond this is divergence

  VectorXd x = x0;
  std::vector<Vector3d> anchors;
  QpScratch scratch;
  bool failed = false;
  std::string note;
  bool have_pregrasp = false;

  for (int s = 0; s < n_stages; ++s) {
    const StageSetup& st = stages[s];
    records::StageTrace trace{st.name, st.sched->iters, kNan, kNan};
    if (!failed) {
      VectorXd grad;
      for (int it = 0; it < st.sched->iters; ++it) {
        const double e = total_energy(model, object, cfg, st, anchors, x, scratch, &grad);
        if (it == 0) trace.energy_start = e;
        if (!std::isfinite(e) || !grad.allFinite()) {
          failed = true;
          note = "non-finite energy";
          break;
        }
        const VectorXd before = x;
        apply_step(model, *st.sched, it, grad, x);
        if (!x.allFinite() ||
            x.segment(hand::kStateTranslation, 3).norm() > travel_limit) {
          x = before;
          failed = true;
          note = "diverged";
          break;
        }
      }
      if (!failed)
        trace.energy_end = total_energy(model, object, cfg, st, anchors, x, scratch, nullptr);
    }
    rec.stages.push_back(trace);
    if (failed) continue;
    if (s == 0) {
      anchors = anchor_points(model, pose_hand(model, x), object);
      if (cfg.pipeline.skip_fine_stages) {
        rec.x_p = x;
        have_pregrasp = true;
      }
    } else if (s == 1) {
      rec.x_p = x;  // pre-grasp pose: end of the offset mesh stage
      have_pregrasp = true;
    }
  }

  rec.x = x;
  if (!have_pregrasp) rec.x_p = x;
  rec.failed = failed;
  rec.note = note;
  rec.x_s = failed ? x : squeeze_pose(model, x, rec.x_p);

  if (!failed) {
    const Posed ph = pose_hand(model, x);
    const auto witnesses = fine_contact_query(model, ph.fk, object);
    rec.contacts.reserve(witnesses.size());
    for (const auto& w : witnesses) rec.contacts.push_back(contact::build_frame(w.p_w, -w.n));
    auto report = energy::grasp_energy(rec.contacts, energy::force_closure_directions(),
                                       cfg.energy, cfg.contact, cfg.qp);
    rec.energy_total = report.total;
    rec.per_direction = report.per_direction;
    rec.contact_forces = report.contact_forces;
  } else {
    rec.energy_total = kNan;
  }
  return rec;
}

}  // namespace

std::vector<ContactWitness> fine_contact_query(const HandModel& model, const FkResult& fk,
                                               const object::ObjectModel& object) {
  std::vector<ContactWitness> out;
  out.reserve(model.fingertip_links.size());
  for (int link : model.fingertip_links) {
    const auto& ln = model.links[link];
    const auto& tip = ln.proxies[ln.tip_proxy];
    const RigidTransform& lp = fk.world[link];

    // Reference distance from the tip sphere; the cull radius covers the
    // whole distal mesh so no minimum-holding part can be dropped.
    const Vector3d center = lp.apply(tip.center_local);
    const double reference = geom::point_to_mesh(center, object.parts).distance - tip.radius;
    const geom::SphereProxy probe{tip.center_local, envelope_radius(ln), link};
    const auto keep = geom::broadphase_cull(probe, lp, object.parts, reference);

    ContactWitness w;
    w.link = link;
    w.distance = std::numeric_limits<double>::infinity();
    for (int pi : keep) {
      geom::NearestPointResult r;
      const double d = geom::signed_distance(ln.part, lp, object.parts[pi],
                                             RigidTransform{}, &r);
      if (d < w.distance) {
        w.distance = d;
        w.c_w = r.point_a;
        w.p_w = r.point_b;
        w.n = r.normal;
      }
    }
    out.push_back(w);
  }
  return out;
}

double coarse_distance_energy(const HandModel& model, const VectorXd& x,
                              const object::ObjectModel& object, double offset,
                              double fd_step, VectorXd* grad) {
  const Posed ph = pose_hand(model, x);
  if (grad) grad->setZero(hand::kStateJoints + model.dof());
  double total = 0.0;
  for (int link : model.fingertip_links) {
    const auto& tip = model.links[link].proxies[model.links[link].tip_proxy];
    const Vector3d c = ph.fk.world[link].apply(tip.center_local);
    const auto q0 = geom::point_to_mesh(c, object.parts);
    const double r = q0.distance - tip.radius - offset;
    total += r * r;
    if (!grad) continue;
    Matrix3d dp;
    for (int k = 0; k < 3; ++k) {
      const Vector3d step = fd_step * Vector3d::Unit(k);
      dp.col(k) = (geom::point_to_mesh(c + step, object.parts).point_b -
                   geom::point_to_mesh(c - step, object.parts).point_b) /
                  (2.0 * fd_step);
    }
    const MatrixXd jc = hand::point_jacobian(model, ph.ps, ph.pose, ph.fk, link, c);
    const Eigen::RowVector3d dd = q0.normal.transpose() * (Matrix3d::Identity() - dp);
    *grad += 2.0 * r * (dd * jc).transpose();
  }
  return total;
}

energy::SurrogateResult fine_grasp_surrogate(const HandModel& model, const VectorXd& x,
                                             std::span<const ContactWitness> witnesses,
                                             std::span<const Vector3d> anchors) {
  return surrogate_at(model, pose_hand(model, x), witnesses, anchors);
}

std::vector<VectorXd> init_poses(const HandModel& model, const object::ObjectModel& object,
                                 int n, std::uint64_t seed, const InitParams& params) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> roll_draw(0.0, 2.0 * std::numbers::pi);
  std::uniform_real_distribution<double> jitter(-0.5, 0.5);

  const double ring = object::bounding_radius(object) + params.standoff;
  const VectorXd lo = model.lower_limits();
  const VectorXd hi = model.upper_limits();

  std::vector<VectorXd> states;
  states.reserve(n);
  for (int i = 0; i < n; ++i) {
    Vector3d u;
    do {
      u = Vector3d(gauss(rng), gauss(rng), gauss(rng));
    } while (u.norm() < 1e-9);
    u.normalize();
    const double roll = roll_draw(rng);

    HandPose pose;
    // Palm +z looks back at the object center; roll spins about that view axis.
    pose.R = (Eigen::Quaterniond::FromTwoVectors(Vector3d::UnitZ(), -u) *
              Eigen::AngleAxisd(roll, Vector3d::UnitZ()))
                 .toRotationMatrix();
    pose.t = ring * u;
    pose.q.resize(model.dof());
    for (int j = 0; j < model.dof(); ++j) {
      const double mid = 0.5 * (lo[j] + hi[j]);
      const double q = mid + params.joint_span_fraction * (hi[j] - lo[j]) * jitter(rng);
      pose.q[j] = std::clamp(q, lo[j], hi[j]);
    }
    states.push_back(hand::state_from_pose(model, pose));
  }
  return states;
}

VectorXd squeeze_pose(const HandModel& model, const VectorXd& x, const VectorXd& x_p) {
  const HandPose grasp = hand::pose_from_state(model, x);
  const HandPose pre = hand::pose_from_state(model, x_p);
  HandPose out;
  out.R = grasp.R * (pre.R.transpose() * grasp.R);
  out.t = 2.0 * grasp.t - pre.t;
  out.q = (2.0 * grasp.q - pre.q).cwiseMax(model.lower_limits()).cwiseMin(model.upper_limits());
  return hand::state_from_pose(model, out);
}

std::vector<records::GraspRecord> synthesize(const HandModel& model,
                                             const object::ObjectModel& object,
                                             const RunConfig& cfg) {
  validate(cfg);
  const auto starts = init_poses(model, object, cfg.batch, cfg.seed, cfg.init);
  std::vector<records::GraspRecord> out(cfg.batch);

  const int workers = std::min(std::max(cfg.workers, 1), cfg.batch);
  const auto run_slice = [&](int w) {
    for (int i = w; i < cfg.batch; i += workers)
      out[i] = run_grasp(model, object, cfg, starts[i], i);
  };
  if (workers == 1) {
    run_slice(0);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) pool.emplace_back(run_slice, w);
    for (auto& t : pool) t.join();
  }
  return out;
}

}  // namespace grasp::pipeline

#include "grasp/hand.hpp"

#include <json.hpp>

#include <cmath>
#include <numbers>
#include <set>

namespace grasp::hand {
namespace {

using nlohmann::json;

Matrix3d skew(const Vector3d& v) {
  Matrix3d m;
  m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return m;
}

bool is_ancestor_joint(const HandModel& model, int joint, int link) {
  int l = link;
  while (l >= 0) {
    const int j = model.links[l].parent_joint;
    if (j < 0) return false;
    if (j == joint) return true;
    l = model.joints[j].parent_link;
  }
  return false;
}

}  // namespace

VectorXd HandModel::lower_limits() const {
  VectorXd lo(dof());
  for (int j = 0; j < dof(); ++j) lo(j) = joints[j].lower;
  return lo;
}

VectorXd HandModel::upper_limits() const {
  VectorXd hi(dof());
  for (int j = 0; j < dof(); ++j) hi(j) = joints[j].upper;
  return hi;
}

RotationProjection project_rotation(const Matrix3d& raw) {
  RotationProjection out;
  Eigen::JacobiSVD<Matrix3d> svd(raw, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vector3d s = svd.singularValues();
  if (!(s(0) > 0) || s(2) < 1e-9 * s(0)) {
    // Near-singular block: orthonormalize columns instead, substituting fixed
    // axes where the input collapses, and report the fallback.
    out.fallback = true;
    Matrix3d m = raw;
    Vector3d c0 = m.col(0);
    if (c0.norm() < 1e-12) c0 = Vector3d::UnitX();
    c0.normalize();
    Vector3d c1 = m.col(1) - c0 * c0.dot(m.col(1));
    if (c1.norm() < 1e-12) {
      c1 = Vector3d::UnitY() - c0 * c0.y();
      if (c1.norm() < 1e-12) c1 = Vector3d::UnitZ() - c0 * c0.z();
    }
    c1.normalize();
    out.R.col(0) = c0;
    out.R.col(1) = c1;
    out.R.col(2) = c0.cross(c1);
    return out;
  }
  const Matrix3d uvt = svd.matrixU() * svd.matrixV().transpose();
  Matrix3d fix = Matrix3d::Identity();
  fix(2, 2) = uvt.determinant() < 0 ? -1.0 : 1.0;
  out.R = svd.matrixU() * fix * svd.matrixV().transpose();
  return out;
}

PoseState make_pose_state(const Matrix3d& raw) {
  PoseState ps;
  ps.raw = raw;
  RotationProjection proj = project_rotation(raw);
  ps.R = proj.R;
  ps.degenerate = proj.fallback;
  if (!ps.degenerate) {
    const Matrix3d s_full = ps.R.transpose() * raw;
    const Matrix3d s = 0.5 * (s_full + s_full.transpose());
    const Matrix3d a = s.trace() * Matrix3d::Identity() - s;
    // Eigenvalues of a are pairwise sums of the singular values; the guard in
    // project_rotation keeps them away from zero unless det(raw) < 0 made one
    // singular value count negative.
    if (std::abs(a.determinant()) < 1e-12) {
      ps.degenerate = true;
    } else {
      ps.a_inv = a.inverse();
    }
  }
  return ps;
}

Eigen::Matrix<double, 3, 9> rotation_tangent_jacobian(const PoseState& ps) {
  Eigen::Matrix<double, 3, 9> j = Eigen::Matrix<double, 3, 9>::Zero();
  if (ps.degenerate) return j;
  for (int l = 0; l < 3; ++l)
    for (int i = 0; i < 3; ++i) {
      const Vector3d r_i = ps.R.row(i).transpose();
      j.col(3 * l + i) = ps.a_inv * Vector3d::Unit(l).cross(r_i);
    }
  return j;
}

HandPose pose_from_state(const HandModel& model, const VectorXd& x) {
  if (x.size() != 12 + model.dof())
    throw HandError("state vector has wrong size for this hand");
  HandPose pose;
  pose.R = project_rotation(Eigen::Map<const Matrix3d>(x.data())).R;
  pose.t = x.segment<3>(kStateTranslation);
  pose.q = x.tail(model.dof());
  return pose;
}

VectorXd state_from_pose(const HandModel& model, const HandPose& pose) {
  VectorXd x(12 + model.dof());
  Eigen::Map<Matrix3d>(x.data()) = pose.R;
  x.segment<3>(kStateTranslation) = pose.t;
  x.tail(model.dof()) = pose.q;
  return x;
}

FkResult forward_kinematics(const HandModel& model, const HandPose& pose) {
  if (pose.q.size() != model.dof())
    throw HandError("joint vector has wrong size for this hand");
  FkResult fk;
  const int n_links = static_cast<int>(model.links.size());
  fk.chain.resize(n_links);
  fk.world.resize(n_links);
  fk.joint_origin.resize(model.dof());
  fk.joint_axis.resize(model.dof());
  const geom::RigidTransform base{pose.R, pose.t};
  for (int l = 0; l < n_links; ++l) {
    const int j = model.links[l].parent_joint;
    if (j < 0) {
      fk.chain[l] = geom::RigidTransform::identity();
    } else {
      const HandModel::Joint& joint = model.joints[j];
      const geom::RigidTransform& parent = fk.chain[joint.parent_link];
      geom::RigidTransform step;
      step.R = Eigen::AngleAxisd(pose.q(j), joint.axis).toRotationMatrix();
      step.t = joint.origin;
      fk.chain[l] = parent * step;
      fk.joint_origin[j] = parent.apply(joint.origin);
      fk.joint_axis[j] = fk.chain[l].R * joint.axis;
    }
    fk.world[l] = base * fk.chain[l];
  }
  return fk;
}

MatrixXd point_jacobian(const HandModel& model, const PoseState& ps,
                        const HandPose& pose, const FkResult& fk, int link,
                        const Vector3d& point_world) {
  MatrixXd j = MatrixXd::Zero(3, 12 + model.dof());
  const Vector3d v = pose.R.transpose() * (point_world - pose.t);  // chain frame
  j.block<3, 9>(0, kStateRotation) =
      -pose.R * skew(v) * rotation_tangent_jacobian(ps);
  j.block<3, 3>(0, kStateTranslation) = Matrix3d::Identity();
  for (int jo = 0; jo < model.dof(); ++jo) {
    if (!is_ancestor_joint(model, jo, link)) continue;
    j.col(kStateJoints + jo) =
        pose.R * fk.joint_axis[jo].cross(v - fk.joint_origin[jo]);
  }
  return j;
}

MatrixXd direction_jacobian(const HandModel& model, const PoseState& ps,
                            const HandPose& pose, const FkResult& fk, int link,
                            const Vector3d& dir_world) {
  MatrixXd j = MatrixXd::Zero(3, 12 + model.dof());
  const Vector3d v = pose.R.transpose() * dir_world;  // chain frame
  j.block<3, 9>(0, kStateRotation) =
      -pose.R * skew(v) * rotation_tangent_jacobian(ps);
  for (int jo = 0; jo < model.dof(); ++jo) {
    if (!is_ancestor_joint(model, jo, link)) continue;
    j.col(kStateJoints + jo) = pose.R * fk.joint_axis[jo].cross(v);
  }
  return j;
}

std::vector<geom::SphereProxy> fingertip_spheres(const HandModel& model,
                                                 const FkResult& fk) {
  std::vector<geom::SphereProxy> out;
  out.reserve(model.fingertip_links.size());
  for (int l : model.fingertip_links) {
    const HandModel::Link& link = model.links[l];
    const geom::SphereProxy& tip = link.proxies[link.tip_proxy];
    geom::SphereProxy s;
    s.center_local = fk.world[l].apply(tip.center_local);
    s.radius = tip.radius;
    s.link_id = l;
    out.push_back(s);
  }
  return out;
}

Vector3d fingertip_center(const HandModel& model, const FkResult& fk, int finger) {
  const int l = model.fingertip_links.at(finger);
  const HandModel::Link& link = model.links[l];
  return fk.world[l].apply(link.proxies[link.tip_proxy].center_local);
}

double limit_energy(const HandModel& model, const HandPose& pose, VectorXd* grad) {
  double e = 0.0;
  if (grad) grad->setZero(12 + model.dof());
  for (int j = 0; j < model.dof(); ++j) {
    const double lo = model.joints[j].lower, hi = model.joints[j].upper;
    const double over = std::max(pose.q(j) - hi, 0.0);
    const double under = std::max(lo - pose.q(j), 0.0);
    e += over * over + under * under;
    if (grad) (*grad)(kStateJoints + j) = 2.0 * over - 2.0 * under;
  }
  return e;
}

double self_penetration_energy(const HandModel& model, const PoseState& ps,
                               const HandPose& pose, const FkResult& fk,
                               VectorXd* grad) {
  double e = 0.0;
  if (grad) grad->setZero(12 + model.dof());
  for (const auto& [la, lb] : model.collision_pairs) {
    for (const geom::SphereProxy& pa : model.links[la].proxies) {
      const Vector3d ca = fk.world[la].apply(pa.center_local);
      for (const geom::SphereProxy& pb : model.links[lb].proxies) {
        const Vector3d cb = fk.world[lb].apply(pb.center_local);
        const double dist = (ca - cb).norm();
        const double overlap = pa.radius + pb.radius - dist;
        if (overlap <= 0) continue;
        e += overlap * overlap;
        if (grad && dist > 1e-12) {
          const Vector3d dir = (ca - cb) / dist;  // d(dist)/d(ca)
          const MatrixXd ja = point_jacobian(model, ps, pose, fk, la, ca);
          const MatrixXd jb = point_jacobian(model, ps, pose, fk, lb, cb);
          *grad += ja.transpose() * (-2.0 * overlap * dir) +
                   jb.transpose() * (2.0 * overlap * dir);
        }
      }
    }
  }
  return e;
}

double self_penetration_proxy_depth(const HandModel& model, const FkResult& fk) {
  double depth = 0.0;
  for (const auto& [la, lb] : model.collision_pairs)
    for (const geom::SphereProxy& pa : model.links[la].proxies)
      for (const geom::SphereProxy& pb : model.links[lb].proxies) {
        const Vector3d ca = fk.world[la].apply(pa.center_local);
        const Vector3d cb = fk.world[lb].apply(pb.center_local);
        depth = std::max(depth, pa.radius + pb.radius - (ca - cb).norm());
      }
  return depth;
}

HandModel parse_hand_spec(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw HandError(std::string("hand spec is not valid JSON: ") + e.what());
  }
  if (!doc.is_object() || doc.value("format_version", 0) != 1)
    throw HandError("hand spec must declare format_version 1");

  HandModel model;
  model.name = doc.value("name", "hand");
  if (!doc.contains("links") || !doc["links"].is_array() || doc["links"].empty())
    throw HandError("hand spec needs a non-empty 'links' array");

  std::map<std::string, int> link_index;
  for (const json& jl : doc["links"]) {
    HandModel::Link link;
    link.name = jl.at("name").get<std::string>();
    if (link_index.count(link.name))
      throw HandError("duplicate link name '" + link.name + "'");

    std::vector<Vector3d> cloud;
    for (const json& jv : jl.at("vertices"))
      cloud.emplace_back(jv.at(0).get<double>(), jv.at(1).get<double>(),
                         jv.at(2).get<double>());
    try {
      link.part = geom::make_convex_part(cloud);
    } catch (const geom::GeometryError& e) {
      throw HandError("link '" + link.name + "': " + e.what());
    }

    if (jl.contains("proxies"))
      for (const json& jp : jl["proxies"]) {
        geom::SphereProxy s;
        const json& c = jp.at("center");
        s.center_local = Vector3d(c.at(0).get<double>(), c.at(1).get<double>(),
                                  c.at(2).get<double>());
        s.radius = jp.at("radius").get<double>();
        if (!(s.radius > 0))
          throw HandError("link '" + link.name + "': proxy radius must be positive");
        s.link_id = static_cast<int>(model.links.size());
        link.proxies.push_back(s);
      }

    if (jl.contains("joint")) {
      const json& jj = jl["joint"];
      HandModel::Joint joint;
      joint.name = jj.value("name", link.name + "_joint");
      const std::string parent = jj.at("parent").get<std::string>();
      auto it = link_index.find(parent);
      if (it == link_index.end())
        throw HandError("link '" + link.name + "': parent '" + parent +
                        "' must be declared first");
      joint.parent_link = it->second;
      joint.child_link = static_cast<int>(model.links.size());
      const json& o = jj.at("origin");
      joint.origin = Vector3d(o.at(0).get<double>(), o.at(1).get<double>(),
                              o.at(2).get<double>());
      const json& a = jj.at("axis");
      joint.axis = Vector3d(a.at(0).get<double>(), a.at(1).get<double>(),
                            a.at(2).get<double>());
      if (joint.axis.norm() < 1e-12)
        throw HandError("joint '" + joint.name + "': axis must be nonzero");
      joint.axis.normalize();
      joint.lower = jj.at("lower").get<double>();
      joint.upper = jj.at("upper").get<double>();
      if (joint.lower > joint.upper)
        throw HandError("joint '" + joint.name + "': lower limit exceeds upper");
      link.parent_joint = static_cast<int>(model.joints.size());
      model.joints.push_back(joint);
    } else if (!model.links.empty()) {
      throw HandError("link '" + link.name + "': only the first link may omit 'joint'");
    }

    if (jl.contains("tip_proxy")) {
      link.tip_proxy = jl["tip_proxy"].get<int>();
      if (link.tip_proxy < 0 || link.tip_proxy >= static_cast<int>(link.proxies.size()))
        throw HandError("link '" + link.name + "': tip_proxy out of range");
      model.fingertip_links.push_back(static_cast<int>(model.links.size()));
    }

    link_index[link.name] = static_cast<int>(model.links.size());
    model.links.push_back(std::move(link));
  }

  std::set<std::pair<int, int>> exempt;
  for (const HandModel::Joint& j : model.joints)
    exempt.insert({std::min(j.parent_link, j.child_link),
                   std::max(j.parent_link, j.child_link)});
  if (doc.contains("ignore_collisions"))
    for (const json& jp : doc["ignore_collisions"]) {
      const auto a = link_index.find(jp.at(0).get<std::string>());
      const auto b = link_index.find(jp.at(1).get<std::string>());
      if (a == link_index.end() || b == link_index.end())
        throw HandError("ignore_collisions names an unknown link");
      exempt.insert({std::min(a->second, b->second), std::max(a->second, b->second)});
    }
  const int n_links = static_cast<int>(model.links.size());
  for (int i = 0; i < n_links; ++i)
    for (int k = i + 1; k < n_links; ++k)
      if (!exempt.count({i, k})) model.collision_pairs.push_back({i, k});

  return model;
}

const std::string& builtin_hand_json() {
  static const std::string text = [] {
    json doc;
    doc["format_version"] = 1;
    doc["name"] = "trident";

    auto arr = [](const Vector3d& v) { return json::array({v.x(), v.y(), v.z()}); };

    // Palm: hexagonal prism, top face carries the finger mounts.
    json palm;
    palm["name"] = "palm";
    json palm_verts = json::array();
    for (int k = 0; k < 6; ++k) {
      const double a = k * std::numbers::pi / 3.0;
      for (double z : {-0.015, 0.010})
        palm_verts.push_back(arr({0.048 * std::cos(a), 0.048 * std::sin(a), z}));
    }
    palm["vertices"] = palm_verts;
    json palm_proxies = json::array();
    palm_proxies.push_back({{"center", arr({0, 0, -0.002})}, {"radius", 0.012}});
    for (int k = 0; k < 3; ++k) {
      const double a = std::numbers::pi / 6.0 + k * 2.0 * std::numbers::pi / 3.0;
      palm_proxies.push_back(
          {{"center", arr({0.030 * std::cos(a), 0.030 * std::sin(a), -0.002})},
           {"radius", 0.012}});
    }
    palm["proxies"] = palm_proxies;
    doc["links"].push_back(palm);

    // Three identical two-segment fingers, mounted 120 degrees apart, curling
    // toward the palm axis (positive joint angle tips the segment inward).
    for (int f = 0; f < 3; ++f) {
      const double phi = std::numbers::pi / 2.0 + f * 2.0 * std::numbers::pi / 3.0;
      const Vector3d mount(0.040 * std::cos(phi), 0.040 * std::sin(phi), 0.010);
      const Vector3d axis(std::sin(phi), -std::cos(phi), 0.0);
      const std::string fn = "f" + std::to_string(f);

      json prox;
      prox["name"] = fn + "_proximal";
      prox["joint"] = {{"name", fn + "_base"},   {"parent", "palm"},
                       {"origin", arr(mount)},   {"axis", arr(axis)},
                       {"lower", -0.35},         {"upper", 1.40}};
      json pv = json::array();
      for (double x : {-0.008, 0.008})
        for (double y : {-0.008, 0.008})
          for (double z : {0.0, 0.050}) pv.push_back(arr({x, y, z}));
      prox["vertices"] = pv;
      prox["proxies"] = json::array(
          {{{"center", arr({0, 0, 0.0125})}, {"radius", 0.009}},
           {{"center", arr({0, 0, 0.0375})}, {"radius", 0.009}}});
      doc["links"].push_back(prox);

      json dist;
      dist["name"] = fn + "_distal";
      dist["joint"] = {{"name", fn + "_knuckle"}, {"parent", fn + "_proximal"},
                       {"origin", arr({0, 0, 0.050})}, {"axis", arr(axis)},
                       {"lower", -0.20},          {"upper", 1.50}};
      json dv = json::array();
      for (double x : {-0.008, 0.008})
        for (double y : {-0.008, 0.008})
          for (double z : {0.0, 0.040}) dv.push_back(arr({x, y, z}));
      // Rounded tip: dense point shell so mesh-stage contact behaves like the
      // tip sphere proxy.
      const Vector3d tip(0, 0, 0.048);
      const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
      for (int k = 0; k < 80; ++k) {
        const double z = 1.0 - 2.0 * (k + 0.5) / 80.0;
        const double r = std::sqrt(std::max(1.0 - z * z, 0.0));
        dv.push_back(arr(tip + 0.010 * Vector3d(r * std::cos(golden * k),
                                                r * std::sin(golden * k), z)));
      }
      dist["vertices"] = dv;
      dist["proxies"] = json::array(
          {{{"center", arr({0, 0, 0.016})}, {"radius", 0.009}},
           {{"center", arr({0, 0, 0.032})}, {"radius", 0.0095}},
           {{"center", arr(tip)}, {"radius", 0.010}}});
      dist["tip_proxy"] = 2;
      doc["links"].push_back(dist);
    }
    doc["ignore_collisions"] = json::array();
    return doc.dump(2);
  }();
  return text;
}

const HandModel& builtin_hand() {
  static const HandModel model = parse_hand_spec(builtin_hand_json());
  return model;
}

}  // namespace grasp::hand

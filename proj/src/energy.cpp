#include "grasp/energy.hpp"

#include "grasp/qpsolve.hpp"
#include "hullnd.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace grasp::energy {
namespace {

using Eigen::Matrix3d;
using Vector6d = Eigen::Matrix<double, 6, 1>;

Matrix3d skew(const Vector3d& v) {
  Matrix3d s;
  s << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return s;
}

std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

double signed_unit(std::uint64_t h) {
  return static_cast<double>(h >> 11) * (2.0 / 9007199254740992.0) - 1.0;
}

void check_directions(const TaskWrenchSet& directions) {
  if (directions.directions.cols() == 0)
    throw std::invalid_argument("task wrench set is empty");
  for (int j = 0; j < directions.directions.cols(); ++j)
    if (std::abs(directions.directions.col(j).norm() - 1.0) > 1e-8)
      throw std::invalid_argument("task wrench directions must be unit");
}

}  // namespace

TaskWrenchSet force_closure_directions() {
  TaskWrenchSet set;
  set.directions.resize(6, 6);
  set.directions.setZero();
  for (int axis = 0; axis < 3; ++axis) {
    set.directions(axis, 2 * axis) = 1.0;
    set.directions(axis, 2 * axis + 1) = -1.0;
  }
  return set;
}

EnergyReport grasp_energy(std::span<const contact::ContactFrame> contacts,
                          const TaskWrenchSet& directions,
                          const EnergyParams& energy,
                          const ContactParams& contact_model,
                          const QpParams& qp,
                          const MatrixXd* warm_forces,
                          const MatrixXd* warm_duals) {
  const int m = static_cast<int>(contacts.size());
  if (m < 1) throw std::invalid_argument("grasp energy needs at least one contact");
  check_directions(directions);
  const int s = static_cast<int>(directions.directions.cols());

  const MatrixXd W =
      contact::wrench_basis(contacts, contact_model.mu, contact_model.n_edges);
  const qp::SharedBatch batch = qp::assemble_lower_qp(
      W, m, directions.directions, energy.beta, energy.gamma_per_contact * m);
  const qp::BatchSolution sol = qp::solve_shared(batch, qp, warm_forces, warm_duals);

  EnergyReport report;
  report.contact_forces = sol.X;
  report.duals = sol.Y;
  report.converged = sol.converged;
  report.residuals.resize(6, s);
  report.per_direction.resize(s);
  for (int j = 0; j < s; ++j) {
    report.residuals.col(j) =
        energy.beta * directions.directions.col(j) - W * sol.X.col(j);
    report.per_direction(j) = report.residuals.col(j).squaredNorm();
    report.all_converged = report.all_converged && sol.converged[j];
  }
  report.total = report.per_direction.sum();
  return report;
}

VectorXd grasp_energy_gradient(std::span<const contact::ContactFrame> contacts,
                               const EnergyReport& report,
                               const ContactParams& contact_model,
                               std::span<const MatrixXd> jac_p,
                               std::span<const MatrixXd> jac_n) {
  const int m = static_cast<int>(contacts.size());
  const int k = contact_model.n_edges;
  const double mu = contact_model.mu;
  if (static_cast<int>(jac_p.size()) != m || static_cast<int>(jac_n.size()) != m)
    throw std::invalid_argument("need one point and one normal Jacobian per contact");
  if (report.contact_forces.rows() != static_cast<Eigen::Index>(m) * k)
    throw std::invalid_argument("report does not match contact count and edge count");
  const int dims = static_cast<int>(jac_p[0].cols());
  for (int i = 0; i < m; ++i)
    if (jac_p[i].rows() != 3 || jac_n[i].rows() != 3 ||
        jac_p[i].cols() != dims || jac_n[i].cols() != dims)
      throw std::invalid_argument("contact Jacobians must be 3 x dims");

  const int s = static_cast<int>(report.residuals.cols());
  VectorXd grad = VectorXd::Zero(dims);
  for (int i = 0; i < m; ++i) {
    const contact::ContactFrame& c = contacts[i];
    const Vector3d seed = contact::frame_seed(c.n);
    const double cnorm = c.n.cross(seed).norm();
    // Tangent sensitivities to the normal: d = (n x seed)/|n x seed|, e = n x d.
    const Matrix3d md =
        -(Matrix3d::Identity() - c.d * c.d.transpose()) * skew(seed) / cnorm;
    const Matrix3d me = -skew(c.d) + skew(c.n) * md;
    const Eigen::Matrix3Xd edges = contact::pyramid_edges(c, mu, k);

    for (int j = 0; j < s; ++j) {
      const Vector3d rf = report.residuals.col(j).head<3>();
      const Vector3d rt = report.residuals.col(j).tail<3>();
      const VectorXd lam = report.contact_forces.block(i * k, j, k, 1);
      double sum = 0.0, sum_cos = 0.0, sum_sin = 0.0;
      for (int e = 0; e < k; ++e) {
        const double theta = 2.0 * std::numbers::pi * e / k;
        sum += lam(e);
        sum_cos += lam(e) * std::cos(theta);
        sum_sin += lam(e) * std::sin(theta);
      }
      // d|r|^2 = -2 r . d(W lambda); force rows give g = rf + rt x p per unit
      // dn, torque rows add (f x rt) per unit dp.
      const Vector3d g = rf + rt.cross(c.p);
      const Vector3d an = sum * g + mu * sum_cos * md.transpose() * g +
                          mu * sum_sin * me.transpose() * g;
      const Vector3d ap = (edges * lam).cross(rt);
      grad.noalias() -= 2.0 * (jac_n[i].transpose() * an + jac_p[i].transpose() * ap);
    }
  }
  return grad;
}

double q1_metric(std::span<const contact::ContactFrame> contacts,
                 const ContactParams& contact_model) {
  const int m = static_cast<int>(contacts.size());
  if (m < 1) throw std::invalid_argument("q1 metric needs at least one contact");
  const int k = contact_model.n_edges;
  const MatrixXd W =
      contact::wrench_basis(contacts, contact_model.mu, contact_model.n_edges);

  // Achievable wrench set = Minkowski sum over contacts of conv({0, edges}).
  // Enumerating every per-contact choice spans it exactly; beyond the budget
  // we keep zero, singles, and pairwise sums (an inner approximation).
  std::vector<Vector6d> points;
  if (std::pow(k + 1.0, m) <= 1000.5) {
    std::vector<int> choice(m, 0);  // 0 = no force, c = edge c-1
    for (;;) {
      Vector6d w = Vector6d::Zero();
      for (int i = 0; i < m; ++i)
        if (choice[i] > 0) w += W.col(i * k + choice[i] - 1);
      points.push_back(w);
      int pos = 0;
      while (pos < m && ++choice[pos] > k) choice[pos++] = 0;
      if (pos == m) break;
    }
  } else {
    points.emplace_back(Vector6d::Zero());
    for (int c = 0; c < W.cols(); ++c) points.emplace_back(W.col(c));
    for (int i = 0; i < m; ++i)
      for (int j = i + 1; j < m; ++j)
        for (int a = 0; a < k; ++a)
          for (int b = 0; b < k; ++b)
            points.emplace_back(W.col(i * k + a) + W.col(j * k + b));
  }

  std::map<std::array<double, 6>, int> seen;
  MatrixXd cloud(6, static_cast<int>(points.size()));
  int n = 0;
  for (const Vector6d& w : points) {
    std::array<double, 6> key;
    Eigen::Map<Vector6d>(key.data()) = w;
    if (seen.emplace(key, n).second) cloud.col(n++) = w;
  }
  cloud.conservativeResize(6, n);

  // Sum sets are heavily co-hyperplanar; a deterministic joggle keeps the
  // hull simplicial. It displaces points by at most sqrt(6)*1e-6*scale, so
  // the floor below reports 0 for rank-deficient sets whose joggled hull is
  // a thin slab, while real closure radii sit orders of magnitude higher.
  const double scale = std::max(cloud.cwiseAbs().maxCoeff(), 1e-12);
  for (int c = 0; c < n; ++c)
    for (int r = 0; r < 6; ++r)
      cloud(r, c) +=
          1e-6 * scale *
          signed_unit(splitmix64(static_cast<std::uint64_t>(c) * 6u + r));

  const hullnd::Hull hull = hullnd::build_hull(cloud);
  if (hull.degenerate) return 0.0;
  double radius = std::numeric_limits<double>::infinity();
  for (const hullnd::Facet& f : hull.facets) radius = std::min(radius, f.offset);
  return radius > 1e-5 * scale ? radius : 0.0;
}

SurrogateResult fine_stage_surrogate(std::span<const Vector3d> points,
                                     std::span<const Vector3d> anchors,
                                     std::span<const MatrixXd> jacobians) {
  if (points.size() != anchors.size())
    throw std::invalid_argument("point and anchor counts differ");
  if (!jacobians.empty() && jacobians.size() != points.size())
    throw std::invalid_argument("need one Jacobian per point when given");

  SurrogateResult out;
  const int dims = jacobians.empty() ? 0 : static_cast<int>(jacobians[0].cols());
  out.gradient = VectorXd::Zero(dims);
  for (size_t i = 0; i < points.size(); ++i) {
    const Vector3d diff = points[i] - anchors[i];
    out.value += diff.squaredNorm();
    if (!jacobians.empty()) {
      if (jacobians[i].rows() != 3 || jacobians[i].cols() != dims)
        throw std::invalid_argument("point Jacobians must be 3 x dims");
      out.gradient.noalias() += 2.0 * jacobians[i].transpose() * diff;
    }
  }
  return out;
}

}  // namespace grasp::energy

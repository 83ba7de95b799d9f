#include "grasp/qpsolve.hpp"

#include <Eigen/Cholesky>

#include <cstring>
#include <limits>
#include <stdexcept>
#include <string>
#include <unordered_map>

namespace grasp::qp {
namespace {

void check_dims(const SharedBatch& b) {
  const auto n = b.P.rows();
  const auto m = b.A.rows();
  if (b.P.cols() != n || b.A.cols() != n)
    throw std::invalid_argument("qp: P/A dimension mismatch");
  if (b.Q.rows() != n || b.L.rows() != m || b.U.rows() != m)
    throw std::invalid_argument("qp: vector block dimension mismatch");
  if (b.Q.cols() != b.L.cols() || b.Q.cols() != b.U.cols() || b.Q.cols() < 1)
    throw std::invalid_argument("qp: batch width mismatch");
  if ((b.P - b.P.transpose()).cwiseAbs().maxCoeff() > 1e-9)
    throw std::invalid_argument("qp: P must be symmetric");
}

std::string group_key(const Problem& p) {
  std::string key;
  key.resize(sizeof(Eigen::Index) * 2 +
             sizeof(double) * (p.P.size() + p.A.size()));
  char* out = key.data();
  const Eigen::Index n = p.P.rows(), m = p.A.rows();
  std::memcpy(out, &n, sizeof(n));
  out += sizeof(n);
  std::memcpy(out, &m, sizeof(m));
  out += sizeof(m);
  std::memcpy(out, p.P.data(), sizeof(double) * p.P.size());
  out += sizeof(double) * p.P.size();
  std::memcpy(out, p.A.data(), sizeof(double) * p.A.size());
  return key;
}

}  // namespace

BatchSolution solve_shared(const SharedBatch& batch, const QpParams& params,
                           const MatrixXd* warm_x, const MatrixXd* warm_y) {
  check_dims(batch);
  const int n = static_cast<int>(batch.P.rows());
  const int m = static_cast<int>(batch.A.rows());
  const int b_cols = static_cast<int>(batch.Q.cols());
  const double rho = params.rho, sigma = params.sigma, alpha = params.alpha;

  const MatrixXd at = batch.A.transpose();
  MatrixXd k = batch.P + sigma * MatrixXd::Identity(n, n) + rho * (at * batch.A);
  Eigen::LLT<MatrixXd> llt(k);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("qp: P + sigma I + rho A'A is not positive definite");

  MatrixXd x = warm_x ? *warm_x : MatrixXd::Zero(n, b_cols);
  MatrixXd y = warm_y ? *warm_y : MatrixXd::Zero(m, b_cols);
  if (x.rows() != n || x.cols() != b_cols || y.rows() != m || y.cols() != b_cols)
    throw std::invalid_argument("qp: warm start dimension mismatch");
  MatrixXd z = batch.A * x;

  BatchSolution out;
  out.X.setZero(n, b_cols);
  out.Z.setZero(m, b_cols);
  out.Y.setZero(m, b_cols);
  out.iters.assign(b_cols, params.max_iters);
  out.converged.assign(b_cols, 0);
  std::vector<char> frozen(b_cols, 0);
  int n_frozen = 0;

  MatrixXd rhs(n, b_cols), xt(n, b_cols), zt(m, b_cols), zbar(m, b_cols);
  MatrixXd ax(m, b_cols), dual(n, b_cols);

  // Frozen columns keep riding in the live iterate (lockstep matrix algebra
  // stays column-count invariant); their reported solution is the snapshot
  // taken at the check where they first converged.
  auto snapshot = [&](int col, int iter, bool ok) {
    out.X.col(col) = x.col(col);
    out.Z.col(col) = z.col(col);
    out.Y.col(col) = y.col(col);
    out.iters[col] = iter;
    out.converged[col] = ok ? 1 : 0;
  };

  for (int iter = 1; iter <= params.max_iters; ++iter) {
    rhs.noalias() = at * (rho * z - y);
    rhs.noalias() += sigma * x - batch.Q;
    xt = llt.solve(rhs);
    zt.noalias() = batch.A * xt;

    x = alpha * xt + (1.0 - alpha) * x;
    zbar = alpha * zt + (1.0 - alpha) * z;
    z = (zbar + y / rho).cwiseMax(batch.L).cwiseMin(batch.U);
    y += rho * (zbar - z);

    if (iter % params.check_interval == 0 || iter == params.max_iters) {
      ax.noalias() = batch.A * x;
      dual.noalias() = batch.P * x;
      dual.noalias() += at * y;
      dual += batch.Q;
      for (int c = 0; c < b_cols; ++c) {
        if (frozen[c]) continue;
        const double rp = (ax.col(c) - z.col(c)).cwiseAbs().maxCoeff();
        const double rd = dual.col(c).cwiseAbs().maxCoeff();
        if (rp <= params.eps_primal && rd <= params.eps_dual) {
          frozen[c] = 1;
          ++n_frozen;
          snapshot(c, iter, true);
        } else if (iter == params.max_iters) {
          snapshot(c, iter, false);
        }
      }
      if (n_frozen == b_cols) break;
    }
  }
  return out;
}

Solution solve(const Problem& prob, const QpParams& params, const VectorXd* warm_x,
               const VectorXd* warm_y) {
  SharedBatch batch;
  batch.P = prob.P;
  batch.A = prob.A;
  batch.Q = prob.q;
  batch.L = prob.l;
  batch.U = prob.u;
  MatrixXd wx, wy;
  const MatrixXd* pwx = nullptr;
  const MatrixXd* pwy = nullptr;
  if (warm_x) {
    wx = *warm_x;
    pwx = &wx;
  }
  if (warm_y) {
    wy = *warm_y;
    pwy = &wy;
  }
  BatchSolution b = solve_shared(batch, params, pwx, pwy);
  Solution s;
  s.x = b.X.col(0);
  s.z = b.Z.col(0);
  s.y = b.Y.col(0);
  s.iters = b.iters[0];
  s.converged = b.converged[0] != 0;
  s.primal_residual = (prob.A * s.x - s.z).cwiseAbs().maxCoeff();
  s.dual_residual = (prob.P * s.x + prob.q + prob.A.transpose() * s.y)
                        .cwiseAbs()
                        .maxCoeff();
  return s;
}

std::vector<Solution> solve_many(std::span<const Problem> problems,
                                 const QpParams& params) {
  std::vector<Solution> out(problems.size());
  std::unordered_map<std::string, std::vector<int>> groups;
  for (int i = 0; i < static_cast<int>(problems.size()); ++i)
    groups[group_key(problems[i])].push_back(i);

  for (const auto& [key, idx] : groups) {
    const Problem& head = problems[idx.front()];
    SharedBatch batch;
    batch.P = head.P;
    batch.A = head.A;
    const int b_cols = static_cast<int>(idx.size());
    batch.Q.resize(head.P.rows(), b_cols);
    batch.L.resize(head.A.rows(), b_cols);
    batch.U.resize(head.A.rows(), b_cols);
    for (int c = 0; c < b_cols; ++c) {
      batch.Q.col(c) = problems[idx[c]].q;
      batch.L.col(c) = problems[idx[c]].l;
      batch.U.col(c) = problems[idx[c]].u;
    }
    BatchSolution b = solve_shared(batch, params);
    for (int c = 0; c < b_cols; ++c) {
      Solution& s = out[idx[c]];
      const Problem& p = problems[idx[c]];
      s.x = b.X.col(c);
      s.z = b.Z.col(c);
      s.y = b.Y.col(c);
      s.iters = b.iters[c];
      s.converged = b.converged[c] != 0;
      s.primal_residual = (p.A * s.x - s.z).cwiseAbs().maxCoeff();
      s.dual_residual =
          (p.P * s.x + p.q + p.A.transpose() * s.y).cwiseAbs().maxCoeff();
    }
  }
  return out;
}

SharedBatch assemble_lower_qp(const MatrixXd& wrench_basis, int n_contacts,
                              const MatrixXd& targets, double beta,
                              double gamma_total) {
  if (wrench_basis.rows() != 6)
    throw std::invalid_argument("wrench basis must have 6 rows");
  if (n_contacts < 1) throw std::invalid_argument("need at least one contact");
  const int k = static_cast<int>(wrench_basis.cols());
  if (k % n_contacts != 0)
    throw std::invalid_argument("wrench basis width must split evenly across contacts");
  const int n_edges = k / n_contacts;
  if (targets.rows() != 6 || targets.cols() < 1)
    throw std::invalid_argument("targets must be 6 x B");
  if (gamma_total > static_cast<double>(n_contacts) + 1e-12)
    throw std::invalid_argument(
        "total-weight floor exceeds the per-contact caps; lower QP infeasible");
  if (gamma_total < 0) throw std::invalid_argument("total-weight floor must be >= 0");

  const double inf = std::numeric_limits<double>::infinity();
  const int b_cols = static_cast<int>(targets.cols());
  SharedBatch batch;
  MatrixXd p = 2.0 * (wrench_basis.transpose() * wrench_basis);
  batch.P = 0.5 * (p + p.transpose());  // exact symmetry for the solver check
  batch.Q.resize(k, b_cols);
  for (int c = 0; c < b_cols; ++c)
    batch.Q.col(c) = -2.0 * beta * (wrench_basis.transpose() * targets.col(c));

  const int rows = n_contacts + 1 + k;
  batch.A = MatrixXd::Zero(rows, k);
  batch.L.resize(rows, b_cols);
  batch.U.resize(rows, b_cols);
  for (int i = 0; i < n_contacts; ++i) {
    batch.A.block(i, i * n_edges, 1, n_edges).setOnes();
    batch.L.row(i).setZero();
    batch.U.row(i).setConstant(1.0);
  }
  batch.A.row(n_contacts).setOnes();
  batch.L.row(n_contacts).setConstant(gamma_total);
  batch.U.row(n_contacts).setConstant(inf);
  batch.A.bottomRows(k).setIdentity();
  batch.L.bottomRows(k).setZero();
  batch.U.bottomRows(k).setConstant(inf);
  return batch;
}

VectorXd solution_wrench(const MatrixXd& wrench_basis, const VectorXd& lambda) {
  if (lambda.size() != wrench_basis.cols())
    throw std::invalid_argument("weight vector must match wrench basis width");
  return wrench_basis * lambda;
}

}  // namespace grasp::qp

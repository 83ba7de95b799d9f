#pragma once

#include "grasp/config.hpp"

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace grasp::qp {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Convex QP in constraint-interval form:
///   minimize 1/2 x'Px + q'x   subject to  l <= Ax <= u,
/// with P positive semidefinite. Bounds may be infinite.
struct Problem {
  MatrixXd P;
  VectorXd q;
  MatrixXd A;
  VectorXd l;
  VectorXd u;
};

struct Solution {
  VectorXd x;
  VectorXd z;  // Ax at the solution
  VectorXd y;  // constraint multipliers
  int iters = 0;
  bool converged = false;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
};

/// Operator-splitting solve of one problem. The linear system is reduced to
/// the positive-definite form P + sigma I + rho A'A, factored once.
Solution solve(const Problem& prob, const QpParams& params,
               const VectorXd* warm_x = nullptr, const VectorXd* warm_y = nullptr);

/// A batch sharing one (P, A) structure with per-column q, l, u. All columns
/// reuse a single factorization and advance in lockstep; each column's
/// iterates match a sequential solve of the same column.
struct SharedBatch {
  MatrixXd P;
  MatrixXd A;
  MatrixXd Q;  // n x B
  MatrixXd L;  // m x B
  MatrixXd U;  // m x B
};

struct BatchSolution {
  MatrixXd X;  // n x B
  MatrixXd Z;  // m x B
  MatrixXd Y;  // m x B
  std::vector<int> iters;
  std::vector<char> converged;
};

BatchSolution solve_shared(const SharedBatch& batch, const QpParams& params,
                           const MatrixXd* warm_x = nullptr,
                           const MatrixXd* warm_y = nullptr);

/// Solves a heterogeneous list by grouping problems with bitwise-equal (P, A)
/// into shared batches. Output order matches input order.
std::vector<Solution> solve_many(std::span<const Problem> problems,
                                 const QpParams& params);

/// Lower-level grasp QP over friction-pyramid edge weights, batched over
/// target wrenches:
///   minimize |beta * t_b - W lambda|^2  over lambda >= 0,
///   per-contact weight sums in [0, 1], total weight sum >= gamma_total.
/// W is the 6 x (m * n_edges) wrench basis. Throws std::invalid_argument when
/// gamma_total exceeds the reachable total m (the floor would be infeasible).
SharedBatch assemble_lower_qp(const MatrixXd& wrench_basis, int n_contacts,
                              const MatrixXd& targets, double beta,
                              double gamma_total);

/// Total wrench realized by a weight vector: wrench_basis * lambda.
VectorXd solution_wrench(const MatrixXd& wrench_basis, const VectorXd& lambda);

}  // namespace grasp::qp

#pragma once

#include <Eigen/Dense>

namespace pnpmpc {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Dense convex quadratic program
///   min 1/2 z'Hz + g'z   s.t.  Aeq z = beq,  Ain z <= bin
/// with H symmetric positive semidefinite.
struct QuadProgram {
  MatrixXd H;
  VectorXd g;
  MatrixXd Aeq;  // may be 0 x n
  VectorXd beq;
  MatrixXd Ain;  // may be 0 x n
  VectorXd bin;

  int num_vars() const { return static_cast<int>(g.size()); }
};

enum class QpStatus { Optimal, Infeasible, Unbounded, MaxIterations };

struct QpResult {
  QpStatus status = QpStatus::MaxIterations;
  VectorXd z;
  double objective = 0.0;
  VectorXd eq_duals;
  VectorXd in_duals;
  /// On infeasibility, a normalized dual (Farkas-style) direction built from
  /// the phase-1 multipliers.
  VectorXd farkas;
  int iterations = 0;
  double kkt_residual = 0.0;
};

struct QpOptions {
  double tol = 1e-9;
  int max_iterations = 100;
  bool allow_phase1 = true;  // internal: phase-1 recursion guard
};

QpResult solve(const QuadProgram& p, const QpOptions& opts = {});

}  // namespace pnpmpc

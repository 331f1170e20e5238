#pragma once

#include <Eigen/Dense>

namespace pnpmpc {

using Eigen::MatrixXd;

/// Stage weights for discrete-time LQ synthesis: Q >= 0, R > 0.
struct LqWeights {
  MatrixXd Q;
  MatrixXd R;
};

/// Solves the stationary Riccati equation
///   A'PA + Q - A'PB (R + B'PB)^-1 B'PA = P
/// by value iteration accelerated with doubling. Throws on divergence
/// (non-stabilizable pair) or if the residual exceeds 1e-9 * ||P||_F.
MatrixXd dare_solve(const MatrixXd& A, const MatrixXd& B, const LqWeights& w);

/// Stabilizing gain K = -(R + B'P B)^-1 B'P A; A + BK is verified Schur.
/// The minus sign makes the gain consistent with the control law u = v + K(x - xbar).
MatrixXd lq_gain(const MatrixXd& A, const MatrixXd& B, const LqWeights& w);

}  // namespace pnpmpc

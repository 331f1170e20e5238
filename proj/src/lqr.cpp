#include "pnpmpc/lqr.hpp"

#include <cmath>
#include <stdexcept>

#include "pnpmpc/linalg.hpp"

namespace pnpmpc {

namespace {

void validate(const MatrixXd& A, const MatrixXd& B, const LqWeights& w) {
  const auto n = A.rows();
  if (A.cols() != n) throw std::invalid_argument("dare_solve: A must be square");
  if (B.rows() != n) throw std::invalid_argument("dare_solve: B row mismatch");
  if (w.Q.rows() != n || w.Q.cols() != n) throw std::invalid_argument("dare_solve: Q must be n x n");
  if (w.R.rows() != B.cols() || w.R.cols() != B.cols())
    throw std::invalid_argument("dare_solve: R must be m x m");
  Eigen::LLT<MatrixXd> llt(w.R);
  if (llt.info() != Eigen::Success) throw std::invalid_argument("dare_solve: R must be positive definite");
}

double riccati_residual(const MatrixXd& A, const MatrixXd& B, const LqWeights& w, const MatrixXd& P) {
  MatrixXd BtPB = w.R + B.transpose() * P * B;
  MatrixXd res = A.transpose() * P * A + w.Q - A.transpose() * P * B * BtPB.ldlt().solve(B.transpose() * P * A) - P;
  return res.norm();
}

}  // namespace

MatrixXd dare_solve(const MatrixXd& A, const MatrixXd& B, const LqWeights& w) {
  validate(A, B, w);
  const auto n = A.rows();
  // Structure-preserving doubling: each pass squares the effective horizon,
  // so 100 passes cover the 1e5 plain-iteration budget many times over.
  MatrixXd Ak = A;
  MatrixXd Gk = B * w.R.ldlt().solve(B.transpose());
  MatrixXd Hk = w.Q;
  const MatrixXd I = MatrixXd::Identity(n, n);
  const int max_pass = 100;
  for (int it = 0; it < max_pass; ++it) {
    Eigen::PartialPivLU<MatrixXd> lu(I + Gk * Hk);
    MatrixXd W = lu.solve(Ak);          // (I + G H)^-1 A
    MatrixXd GH = lu.solve(Gk);         // (I + G H)^-1 G
    MatrixXd Hn = Hk + Ak.transpose() * Hk * W;
    MatrixXd Gn = Gk + Ak * GH * Ak.transpose();
    MatrixXd An = Ak * W;
    const double step = (Hn - Hk).norm();
    const double scale = std::max(1.0, Hn.norm());
    Ak = An;
    Gk = Gn;
    Hk = 0.5 * (Hn + Hn.transpose());
    if (!Hk.allFinite() || Hk.norm() > 1e14)
      throw std::runtime_error("dare_solve: iteration diverged (pair not stabilizable?)");
    if (step <= 1e-14 * scale) break;
  }
  const double res = riccati_residual(A, B, w, Hk);
  if (!(res <= 1e-9 * std::max(1.0, Hk.norm())))
    throw std::runtime_error("dare_solve: residual above tolerance after iteration budget");
  return Hk;
}

MatrixXd lq_gain(const MatrixXd& A, const MatrixXd& B, const LqWeights& w) {
  MatrixXd P = dare_solve(A, B, w);
  MatrixXd K = -(w.R + B.transpose() * P * B).ldlt().solve(B.transpose() * P * A);
  if (!is_schur(A + B * K)) throw std::runtime_error("lq_gain: closed loop failed the Schur check");
  return K;
}

}  // namespace pnpmpc

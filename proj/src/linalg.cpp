#include "pnpmpc/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <cstdint>
#include <cstring>

namespace pnpmpc {

double spectral_radius(const MatrixXd& A) {
  if (A.rows() == 0) return 0.0;
  Eigen::EigenSolver<MatrixXd> es(A, /*computeEigenvectors=*/false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

bool is_schur(const MatrixXd& A, double margin) {
  return spectral_radius(A) < 1.0 - margin;
}

MatrixXd pseudo_inverse(const MatrixXd& A, double tol) {
  Eigen::JacobiSVD<MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double cutoff = tol * std::max(1.0, sv.size() > 0 ? sv(0) : 0.0);
  VectorXd inv = VectorXd::Zero(sv.size());
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > cutoff) inv(i) = 1.0 / sv(i);
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

MatrixXd expm(const MatrixXd& A) {
  // Pade(6) with scaling and squaring; adequate for the well-conditioned
  // sampling-time-scaled matrices used here.
  const Eigen::Index n = A.rows();
  const double nrm = A.cwiseAbs().rowwise().sum().maxCoeff();
  int squarings = 0;
  if (nrm > 0.5) squarings = std::max(0, static_cast<int>(std::ceil(std::log2(nrm / 0.5))));
  MatrixXd As = A / std::pow(2.0, squarings);

  // Diagonal Pade(6) coefficients m!(2m-k)!/((2m)!k!(m-k)!).
  const double c[] = {1.0, 1.0 / 2.0, 5.0 / 44.0, 1.0 / 66.0, 1.0 / 792.0, 1.0 / 15840.0, 1.0 / 665280.0};
  MatrixXd A2 = As * As;
  MatrixXd A4 = A2 * A2;
  MatrixXd A6 = A4 * A2;
  MatrixXd U = As * (c[1] * MatrixXd::Identity(n, n) + c[3] * A2 + c[5] * A4);
  MatrixXd V = c[0] * MatrixXd::Identity(n, n) + c[2] * A2 + c[4] * A4 + c[6] * A6;
  MatrixXd E = (V - U).partialPivLu().solve(V + U);
  for (int i = 0; i < squarings; ++i) E = E * E;
  return E;
}

double inf_norm(const MatrixXd& A) {
  if (A.rows() == 0 || A.cols() == 0) return 0.0;
  return A.cwiseAbs().rowwise().sum().maxCoeff();
}

std::uint64_t fnv1a(const void* data, std::size_t len, std::uint64_t seed) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace pnpmpc

#pragma once

#include <Eigen/Dense>

namespace pnpmpc {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Spectral radius (magnitude of the largest eigenvalue).
double spectral_radius(const MatrixXd& A);

/// True if all eigenvalues lie strictly inside the unit circle (margin > 0
/// shrinks the circle to 1 - margin).
bool is_schur(const MatrixXd& A, double margin = 0.0);

/// Moore-Penrose pseudo-inverse via SVD, singular values below `tol` treated
/// as zero.
MatrixXd pseudo_inverse(const MatrixXd& A, double tol = 1e-12);

/// Matrix exponential (scaling-and-squaring with Pade approximation).
MatrixXd expm(const MatrixXd& A);

/// Induced infinity norm (max absolute row sum). For a single row this equals
/// the 1-norm of its entries.
double inf_norm(const MatrixXd& A);

/// FNV-1a over a byte range, for content hashing of controller data.
std::uint64_t fnv1a(const void* data, std::size_t len, std::uint64_t seed = 14695981039346656037ull);

}  // namespace pnpmpc

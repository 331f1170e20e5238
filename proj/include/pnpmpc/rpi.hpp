#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "pnpmpc/setops.hpp"

namespace pnpmpc {

/// Outer approximation of the minimal RPI set for z+ = F z + w, w in W.
struct RpiResult {
  Zonotope set;        // the RPI set Z(delta), centered at the origin
  double alpha = 0.0;  // contraction factor of the tail absorber
  int steps = 1;       // truncation depth s of the Minkowski series
  double delta = 0.0;  // certified Hausdorff distance to the mRPI
};

/// W = (+)_j A_ij X_j as a zonotope with block generators [A_i1 Xi_1 | ...],
/// collinear columns merged. An empty list yields the singleton {0}.
Zonotope disturbance_set(const std::vector<std::pair<MatrixXd, Zonotope>>& neighbors, int dim);

/// Computes an RPI zonotope within Hausdorff distance delta of the mRPI
/// (+)_{k>=0} F^k W. The truncated series (+)_{k<s} F^k W is completed with a
/// contractive box absorber covering the tail, which keeps the construction
/// valid when W is lower-dimensional. Throws if F is not Schur or the series
/// budget (s <= 200) is exhausted.
RpiResult mrpi_outer(const MatrixXd& F, const Zonotope& W, double delta);

/// Exact invariance check F*Z (+) W subseteq Z via support functions over the
/// faces of Z's H-representation (dim <= 6).
bool rpi_support_check(const MatrixXd& F, const Zonotope& W, const Zonotope& Z, double tol = kSetTol);

/// Monte-Carlo certificate: for `samples` vertex-biased pairs (z, w) with
/// z in Z, w in W, asserts F z + w in Z. Deterministic for a fixed seed.
bool rpi_check(const MatrixXd& F, const Zonotope& W, const Zonotope& Z, int samples,
               std::uint64_t seed = 0x5eed5eedULL);

}  // namespace pnpmpc

#pragma once

#include <Eigen/Dense>
#include <span>
#include <stdexcept>
#include <vector>

namespace pnpmpc {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Default absolute tolerance for membership and containment decisions.
inline constexpr double kSetTol = 1e-9;

/// Centrally symmetric set {center + generators * d, ||d||_inf <= scale}.
///
/// The scale is kept separate from the generator matrix so that a tightened
/// set can share its shape with the original while only the scale varies.
struct Zonotope {
  VectorXd center;      // n
  MatrixXd generators;  // n x e, e >= 0 (e = 0 is a singleton)
  double scale = 1.0;   // > 0

  Zonotope() = default;
  Zonotope(VectorXd c, MatrixXd g, double l = 1.0);

  int dim() const { return static_cast<int>(center.size()); }
  int num_generators() const { return static_cast<int>(generators.cols()); }

  /// Singleton {p}.
  static Zonotope singleton(const VectorXd& p);
  /// Origin-centered box with the given half widths.
  static Zonotope box(const VectorXd& half_widths);

  /// Same set with the scale folded into the generators (scale = 1).
  Zonotope normalized() const;
  /// Merges collinear generator columns (summed magnitudes) and drops zero
  /// columns; support functions are invariant under this merge.
  Zonotope deduped(double tol = 1e-12) const;
};

/// Polytope {x : normals * x <= offsets}.
struct HPolytope {
  MatrixXd normals;  // r x n, one row per face
  VectorXd offsets;  // r

  HPolytope() = default;
  HPolytope(MatrixXd F, VectorXd g);

  int dim() const { return static_cast<int>(normals.cols()); }
  int num_faces() const { return static_cast<int>(normals.rows()); }

  /// Origin-centered box with offsets normalized to 1.
  static HPolytope box(const VectorXd& half_widths);

  bool contains(const VectorXd& x, double tol = kSetTol) const;
};

/// Support function sup_{x in Z} c'x = c'p + l * ||Xi' c||_1.
double support(const Zonotope& Z, const VectorXd& c);

/// Support function of the linear image M*Z in direction c (avoids forming
/// the image).
double support(const Zonotope& Z, const MatrixXd& M, const VectorXd& c);

Zonotope minkowski_sum(const Zonotope& a, const Zonotope& b);

/// {M x : x in Z}.
Zonotope linear_image(const MatrixXd& M, const Zonotope& Z);

/// Exact H-representation. Requires dim <= 6 (facet count grows as
/// 2*C(e, n-1)) and a full-dimensional zonotope; degenerate inputs are
/// reported via std::domain_error.
HPolytope zonotope_to_hrep(const Zonotope& Z);

/// True iff x = p + Xi d for some ||d||_inf <= l, decided by a small linear
/// feasibility problem (with cheap sufficient accept/reject pre-checks).
bool zonotope_member(const Zonotope& Z, const VectorXd& x, double tol = kSetTol);

/// True iff the Minkowski sum of all parts is contained in P, decided
/// exactly by the support-function criterion on every face.
bool sum_in_polytope(std::span<const Zonotope> parts, const HPolytope& P, double tol = kSetTol);

}  // namespace pnpmpc

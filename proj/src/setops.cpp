#include "pnpmpc/setops.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "pnpmpc/linalg.hpp"
#include "pnpmpc/qp.hpp"

namespace pnpmpc {

Zonotope::Zonotope(VectorXd c, MatrixXd g, double l) : center(std::move(c)), generators(std::move(g)), scale(l) {
  if (generators.size() > 0 && generators.rows() != center.size())
    throw std::invalid_argument("Zonotope: generator rows must match center dimension");
  if (generators.size() == 0) generators.resize(center.size(), 0);
  if (!(scale > 0.0)) throw std::invalid_argument("Zonotope: scale must be positive");
}

Zonotope Zonotope::singleton(const VectorXd& p) { return Zonotope(p, MatrixXd(p.size(), 0), 1.0); }

Zonotope Zonotope::box(const VectorXd& half_widths) {
  return Zonotope(VectorXd::Zero(half_widths.size()), MatrixXd(half_widths.asDiagonal()), 1.0);
}

Zonotope Zonotope::normalized() const { return Zonotope(center, generators * scale, 1.0); }

Zonotope Zonotope::deduped(double tol) const {
  const int n = dim();
  const int e = num_generators();
  std::vector<VectorXd> kept;
  kept.reserve(e);
  for (int c = 0; c < e; ++c) {
    VectorXd g = generators.col(c);
    const double nrm = g.lpNorm<Eigen::Infinity>();
    if (nrm <= tol) continue;
    bool merged = false;
    for (auto& k : kept) {
      // collinear iff g = +/- s * k
      const double kn = k.lpNorm<Eigen::Infinity>();
      VectorXd diff = k / kn - g / nrm;
      VectorXd sum = k / kn + g / nrm;
      if (diff.lpNorm<Eigen::Infinity>() <= tol || sum.lpNorm<Eigen::Infinity>() <= tol) {
        k *= (kn + nrm) / kn;
        merged = true;
        break;
      }
    }
    if (!merged) kept.push_back(g);
  }
  MatrixXd G(n, static_cast<Eigen::Index>(kept.size()));
  for (std::size_t c = 0; c < kept.size(); ++c) G.col(static_cast<Eigen::Index>(c)) = kept[c];
  return Zonotope(center, std::move(G), scale);
}

HPolytope::HPolytope(MatrixXd F, VectorXd g) : normals(std::move(F)), offsets(std::move(g)) {
  if (normals.rows() != offsets.size())
    throw std::invalid_argument("HPolytope: one offset per face required");
}

HPolytope HPolytope::box(const VectorXd& half_widths) {
  const Eigen::Index n = half_widths.size();
  MatrixXd F(2 * n, n);
  F.setZero();
  for (Eigen::Index i = 0; i < n; ++i) {
    F(i, i) = 1.0 / half_widths(i);
    F(n + i, i) = -1.0 / half_widths(i);
  }
  return HPolytope(std::move(F), VectorXd::Ones(2 * n));
}

bool HPolytope::contains(const VectorXd& x, double tol) const {
  if (x.size() != dim()) throw std::invalid_argument("HPolytope::contains: dimension mismatch");
  return ((normals * x - offsets).array() <= tol).all();
}

double support(const Zonotope& Z, const VectorXd& c) {
  if (c.size() != Z.dim()) throw std::invalid_argument("support: dimension mismatch");
  return c.dot(Z.center) + Z.scale * (Z.generators.transpose() * c).lpNorm<1>();
}

double support(const Zonotope& Z, const MatrixXd& M, const VectorXd& c) {
  if (M.cols() != Z.dim() || M.rows() != c.size())
    throw std::invalid_argument("support: dimension mismatch");
  VectorXd d = M.transpose() * c;
  return d.dot(Z.center) + Z.scale * (Z.generators.transpose() * d).lpNorm<1>();
}

Zonotope minkowski_sum(const Zonotope& a, const Zonotope& b) {
  if (a.dim() != b.dim()) throw std::invalid_argument("minkowski_sum: dimension mismatch");
  MatrixXd G(a.dim(), a.num_generators() + b.num_generators());
  G.leftCols(a.num_generators()) = a.generators * a.scale;
  G.rightCols(b.num_generators()) = b.generators * b.scale;
  return Zonotope(a.center + b.center, std::move(G), 1.0).deduped();
}

Zonotope linear_image(const MatrixXd& M, const Zonotope& Z) {
  if (M.cols() != Z.dim()) throw std::invalid_argument("linear_image: dimension mismatch");
  return Zonotope(M * Z.center, M * Z.generators, Z.scale);
}

namespace {

// Unit normal of the hyperplane spanned by the given generator columns,
// or empty if they do not span an (n-1)-dimensional subspace.
VectorXd facet_normal(const MatrixXd& cols, double tol) {
  Eigen::JacobiSVD<MatrixXd> svd(cols.transpose(), Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const Eigen::Index n = cols.rows();
  if (n >= 2 && sv.size() >= n - 1 && sv(n - 2) <= tol * std::max(1.0, sv(0))) return {};
  return svd.matrixV().col(n - 1);
}

}  // namespace

HPolytope zonotope_to_hrep(const Zonotope& Z) {
  const int n = Z.dim();
  const int e = Z.num_generators();
  if (n > 6) throw std::invalid_argument("zonotope_to_hrep: dimension guard (n <= 6) exceeded");
  const MatrixXd G = Z.generators * Z.scale;
  if (e < n || Eigen::FullPivLU<MatrixXd>(G).rank() < n)
    throw std::domain_error("zonotope_to_hrep: degenerate (lower-dimensional) zonotope");

  if (n == 1) {
    MatrixXd F(2, 1);
    F << 1.0, -1.0;
    VectorXd g(2);
    g << support(Z, F.row(0).transpose()), support(Z, F.row(1).transpose());
    return HPolytope(std::move(F), std::move(g));
  }

  // Facet normals come from (n-1)-subsets of generators; iterate subsets
  // with a lexicographic index vector and dedupe parallel directions.
  std::vector<VectorXd> normals;
  std::vector<int> idx(n - 1);
  for (int i = 0; i < n - 1; ++i) idx[i] = i;
  const auto advance = [&]() {
    int i = n - 2;
    while (i >= 0 && idx[i] == e - (n - 1) + i) --i;
    if (i < 0) return false;
    ++idx[i];
    for (int j = i + 1; j < n - 1; ++j) idx[j] = idx[j - 1] + 1;
    return true;
  };
  MatrixXd sub(n, n - 1);
  do {
    for (int i = 0; i < n - 1; ++i) sub.col(i) = G.col(idx[i]);
    VectorXd c = facet_normal(sub, 1e-12);
    if (c.size() == 0) continue;
    bool dup = false;
    for (const auto& q : normals) {
      if ((q - c).lpNorm<Eigen::Infinity>() <= 1e-10 || (q + c).lpNorm<Eigen::Infinity>() <= 1e-10) {
        dup = true;
        break;
      }
    }
    if (!dup) normals.push_back(c);
  } while (advance());

  const auto r = static_cast<Eigen::Index>(normals.size());
  MatrixXd F(2 * r, n);
  VectorXd g(2 * r);
  for (Eigen::Index i = 0; i < r; ++i) {
    F.row(2 * i) = normals[static_cast<std::size_t>(i)].transpose();
    F.row(2 * i + 1) = -normals[static_cast<std::size_t>(i)].transpose();
    g(2 * i) = support(Z, normals[static_cast<std::size_t>(i)]);
    g(2 * i + 1) = support(Z, VectorXd(-normals[static_cast<std::size_t>(i)]));
  }
  return HPolytope(std::move(F), std::move(g));
}

bool zonotope_member(const Zonotope& Z, const VectorXd& x, double tol) {
  if (x.size() != Z.dim()) throw std::invalid_argument("zonotope_member: dimension mismatch");
  const int e = Z.num_generators();
  VectorXd b = x - Z.center;
  if (e == 0) return b.lpNorm<Eigen::Infinity>() <= tol;

  const MatrixXd& G = Z.generators;
  // Quick reject: separating direction from any coordinate axis.
  for (int j = 0; j < Z.dim(); ++j) {
    const double s = Z.scale * G.row(j).lpNorm<1>();
    if (std::abs(b(j)) > s + tol) return false;
  }
  // Quick accept: minimum-2-norm preimage already inside the box.
  MatrixXd Gp = pseudo_inverse(G);
  VectorXd d = Gp * b;
  const double scale_ref = std::max(1.0, b.lpNorm<Eigen::Infinity>());
  if ((G * d - b).lpNorm<Eigen::Infinity>() > tol * scale_ref) return false;  // b outside range(G)
  if (d.lpNorm<Eigen::Infinity>() <= Z.scale + tol) return true;

  // LP: minimize t subject to -t <= d_i <= t, G d = b; member iff t* <= l.
  QuadProgram p;
  const int nv = e + 1;
  p.H = MatrixXd::Zero(nv, nv);
  p.g = VectorXd::Zero(nv);
  p.g(e) = 1.0;
  p.Aeq = MatrixXd::Zero(Z.dim(), nv);
  p.Aeq.leftCols(e) = G;
  p.beq = b;
  p.Ain = MatrixXd::Zero(2 * e, nv);
  p.Ain.topLeftCorner(e, e) = MatrixXd::Identity(e, e);
  p.Ain.bottomLeftCorner(e, e) = -MatrixXd::Identity(e, e);
  p.Ain.col(e).setConstant(-1.0);
  p.bin = VectorXd::Zero(2 * e);
  QpResult res = solve(p);
  if (res.status == QpStatus::Infeasible) return false;
  if (res.status != QpStatus::Optimal)
    throw std::runtime_error("zonotope_member: feasibility LP did not converge");
  return res.z(e) <= Z.scale + tol;
}

bool sum_in_polytope(std::span<const Zonotope> parts, const HPolytope& P, double tol) {
  for (const auto& part : parts)
    if (part.dim() != P.dim()) throw std::invalid_argument("sum_in_polytope: dimension mismatch");
  for (int r = 0; r < P.num_faces(); ++r) {
    VectorXd f = P.normals.row(r).transpose();
    double s = 0.0;
    for (const auto& part : parts) s += support(part, f);
    if (s > P.offsets(r) + tol) return false;
  }
  return true;
}

}  // namespace pnpmpc

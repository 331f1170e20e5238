#include "pnpmpc/rpi.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "pnpmpc/linalg.hpp"

namespace pnpmpc {

Zonotope disturbance_set(const std::vector<std::pair<MatrixXd, Zonotope>>& neighbors, int dim) {
  Zonotope W = Zonotope::singleton(VectorXd::Zero(dim));
  for (const auto& [Aij, Xj] : neighbors) {
    if (Aij.rows() != dim || Aij.cols() != Xj.dim())
      throw std::invalid_argument("disturbance_set: coupling block dimension mismatch");
    W = minkowski_sum(W, linear_image(Aij, Xj));
  }
  return W;
}

namespace {
constexpr int kSeriesBudget = 200;
constexpr int kAbsorberBudget = 80;
constexpr double kAbsorberContraction = 0.5;
}  // namespace

RpiResult mrpi_outer(const MatrixXd& F, const Zonotope& W, double delta) {
  const int n = static_cast<int>(F.rows());
  if (F.cols() != n || W.dim() != n) throw std::invalid_argument("mrpi_outer: dimension mismatch");
  if (!(delta > 0.0)) throw std::invalid_argument("mrpi_outer: delta must be positive");
  if (W.center.lpNorm<Eigen::Infinity>() > 0.0)
    throw std::invalid_argument("mrpi_outer: W must be centered at the origin");

  const Zonotope Wn = W.normalized().deduped();
  if (Wn.num_generators() == 0) {
    return RpiResult{Zonotope::singleton(VectorXd::Zero(n)), 0.0, 1, 0.0};
  }
  if (!is_schur(F)) throw std::invalid_argument("mrpi_outer: F must be Schur");

  const MatrixXd& Gw = Wn.generators;
  // Cache F^k Gw for the head and |F^k| for the absorber bookkeeping.
  std::vector<MatrixXd> head{Gw};
  MatrixXd Fs = F;  // F^s
  for (int s = 1; s <= kSeriesBudget; ++s) {
    // Box cover of the tail hand-off F^s W: per-coordinate radii.
    MatrixXd FsG = Fs * Gw;
    VectorXd t = FsG.cwiseAbs().rowwise().sum();
    const double tmax = t.maxCoeff();

    if (tmax == 0.0) {
      // Nilpotent closed loop: the truncated series is exactly RPI.
      MatrixXd G(n, 0);
      for (const auto& h : head) {
        MatrixXd tmp(n, G.cols() + h.cols());
        tmp << G, h;
        G = std::move(tmp);
      }
      Zonotope Z(VectorXd::Zero(n), std::move(G), 1.0);
      return RpiResult{Z.deduped(), 0.0, s, 0.0};
    }

    // Degenerate tails are lifted to a full-dimensional box so the absorber
    // contraction test below is well posed; this only enlarges the cover.
    t = t.cwiseMax(1e-6 * tmax);

    // Find the absorber depth m with |F^m| t <= alpha * t coordinatewise.
    MatrixXd Fm = MatrixXd::Identity(n, n);
    double alpha = 0.0;
    int m = 0;
    VectorXd radius = VectorXd::Zero(n);
    std::vector<MatrixXd> absorber;
    for (int k = 1; k <= kAbsorberBudget; ++k) {
      absorber.push_back(Fm * MatrixXd(t.asDiagonal()));
      radius += (Fm.cwiseAbs() * t);
      Fm = F * Fm;
      alpha = ((Fm.cwiseAbs() * t).cwiseQuotient(t)).maxCoeff();
      if (alpha <= kAbsorberContraction) {
        m = k;
        break;
      }
    }
    if (m == 0) {
      Fs = F * Fs;
      head.push_back(FsG);
      continue;  // tail still too lively; deepen the series
    }
    radius /= (1.0 - alpha);
    const double certified = radius.norm();
    if (certified <= delta) {
      Eigen::Index cols = 0;
      for (const auto& h : head) cols += h.cols();
      cols += static_cast<Eigen::Index>(absorber.size()) * n;
      MatrixXd G(n, cols);
      Eigen::Index at = 0;
      for (const auto& h : head) {
        G.middleCols(at, h.cols()) = h;
        at += h.cols();
      }
      for (const auto& a : absorber) {
        G.middleCols(at, n) = a / (1.0 - alpha);
        at += n;
      }
      Zonotope Z(VectorXd::Zero(n), std::move(G), 1.0);
      return RpiResult{Z.deduped(), alpha, s, certified};
    }
    head.push_back(FsG);
    Fs = F * Fs;
  }
  throw std::runtime_error(
      "mrpi_outer: series budget exhausted (coupling too strong for the requested delta)");
}

bool rpi_support_check(const MatrixXd& F, const Zonotope& W, const Zonotope& Z, double tol) {
  const Zonotope FZ = linear_image(F, Z);
  const HPolytope H = zonotope_to_hrep(Z);
  for (int r = 0; r < H.num_faces(); ++r) {
    VectorXd f = H.normals.row(r).transpose();
    if (support(FZ, f) + support(W, f) > H.offsets(r) + tol) return false;
  }
  return true;
}

bool rpi_check(const MatrixXd& F, const Zonotope& W, const Zonotope& Z, int samples, std::uint64_t seed) {
  const int n = Z.dim();
  if (F.rows() != n || F.cols() != n || W.dim() != n)
    throw std::invalid_argument("rpi_check: dimension mismatch");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::bernoulli_distribution vertex(0.5);
  std::bernoulli_distribution sign(0.5);

  // Membership goes through the H-representation when available: with tens of
  // thousands of samples the per-point LP would dominate the run time.
  HPolytope Hz;
  bool have_hrep = false;
  if (n <= 6) {
    try {
      Hz = zonotope_to_hrep(Z);
      have_hrep = true;
    } catch (const std::domain_error&) {
    }
  }

  const auto sample_point = [&](const Zonotope& S) {
    VectorXd d(S.num_generators());
    for (Eigen::Index i = 0; i < d.size(); ++i)
      d(i) = vertex(rng) ? (sign(rng) ? 1.0 : -1.0) : unif(rng);
    return VectorXd(S.center + S.scale * (S.generators * d));
  };

  if (have_hrep) {
    // Batched evaluation: one face-times-points product instead of a matvec
    // per sample.
    const int block = 2048;
    MatrixXd pts(n, block);
    int filled = 0, done = 0;
    while (done < samples) {
      filled = std::min(block, samples - done);
      for (int c = 0; c < filled; ++c) pts.col(c) = F * sample_point(Z) + sample_point(W);
      MatrixXd vals = Hz.normals * pts.leftCols(filled);
      for (int c = 0; c < filled; ++c)
        if (((vals.col(c) - Hz.offsets).array() > kSetTol).any()) return false;
      done += filled;
    }
    return true;
  }

  for (int it = 0; it < samples; ++it) {
    VectorXd z = sample_point(Z);
    VectorXd w = sample_point(W);
    VectorXd next = F * z + w;
    if (!zonotope_member(Z, next, kSetTol)) return false;
  }
  return true;
}

}  // namespace pnpmpc

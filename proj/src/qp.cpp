#include "pnpmpc/qp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pnpmpc {

namespace {

void validate(const QuadProgram& p) {
  const int n = p.num_vars();
  if (p.H.rows() != n || p.H.cols() != n) throw std::invalid_argument("qp: H must be n x n");
  if ((p.H - p.H.transpose()).lpNorm<Eigen::Infinity>() > 1e-8 * (1.0 + p.H.lpNorm<Eigen::Infinity>()))
    throw std::invalid_argument("qp: H must be symmetric");
  if (p.Aeq.size() > 0 && p.Aeq.cols() != n) throw std::invalid_argument("qp: Aeq column mismatch");
  if (p.Aeq.rows() != p.beq.size()) throw std::invalid_argument("qp: beq size mismatch");
  if (p.Ain.size() > 0 && p.Ain.cols() != n) throw std::invalid_argument("qp: Ain column mismatch");
  if (p.Ain.rows() != p.bin.size()) throw std::invalid_argument("qp: bin size mismatch");
}

double objective_at(const QuadProgram& p, const VectorXd& z) {
  return 0.5 * z.dot(p.H * z) + p.g.dot(z);
}

// Solves [M Aeq'; Aeq 0] [dz; dy] = [b1; b2] with M positive definite,
// via the Schur complement on the equality block.
struct KktSolver {
  Eigen::LLT<MatrixXd> Mfac;
  MatrixXd MinvAeqT;  // n x ne
  Eigen::LLT<MatrixXd> Sfac;
  bool ok = false;

  void factor(const MatrixXd& M, const MatrixXd& Aeq) {
    Mfac.compute(M);
    ok = Mfac.info() == Eigen::Success;
    if (!ok) return;
    if (Aeq.rows() > 0) {
      MinvAeqT = Mfac.solve(Aeq.transpose());
      MatrixXd S = Aeq * MinvAeqT;
      S += 1e-12 * std::max(1.0, S.lpNorm<Eigen::Infinity>()) * MatrixXd::Identity(S.rows(), S.cols());
      Sfac.compute(S);
      ok = Sfac.info() == Eigen::Success;
    }
  }

  void solve(const MatrixXd& M, const MatrixXd& Aeq, const VectorXd& b1, const VectorXd& b2,
             VectorXd& dz, VectorXd& dy) const {
    if (Aeq.rows() == 0) {
      dz = Mfac.solve(b1);
      dz += Mfac.solve(b1 - M * dz);  // one refinement pass
      dy.resize(0);
      return;
    }
    VectorXd Minvb1 = Mfac.solve(b1);
    dy = Sfac.solve(Aeq * Minvb1 - b2);
    dz = Minvb1 - MinvAeqT * dy;
    // Refine against the full KKT block system.
    VectorXd r1 = b1 - M * dz - Aeq.transpose() * dy;
    VectorXd r2 = b2 - Aeq * dz;
    VectorXd Minvr1 = Mfac.solve(r1);
    VectorXd ddy = Sfac.solve(Aeq * Minvr1 - r2);
    dz += Minvr1 - MinvAeqT * ddy;
    dy += ddy;
  }
};

QpResult solve_equality_only(const QuadProgram& p, const QpOptions& opts) {
  const int n = p.num_vars();
  const double reg = 1e-11 * std::max(1.0, p.H.lpNorm<Eigen::Infinity>());
  MatrixXd M = p.H + reg * MatrixXd::Identity(n, n);
  KktSolver kkt;
  kkt.factor(M, p.Aeq);
  QpResult res;
  if (!kkt.ok) {
    res.status = QpStatus::Unbounded;
    return res;
  }
  VectorXd dz, dy;
  kkt.solve(M, p.Aeq, -p.g, p.beq, dz, dy);
  res.z = dz;
  res.eq_duals = dy;
  res.in_duals.resize(0);
  VectorXd rd = p.H * dz + p.g + (p.Aeq.rows() > 0 ? VectorXd(p.Aeq.transpose() * dy) : VectorXd::Zero(n));
  VectorXd re = p.Aeq.rows() > 0 ? VectorXd(p.Aeq * dz - p.beq) : VectorXd();
  res.kkt_residual = std::max(rd.lpNorm<Eigen::Infinity>(), re.size() ? re.lpNorm<Eigen::Infinity>() : 0.0);
  if (res.kkt_residual > 1e-6 || dz.lpNorm<Eigen::Infinity>() > 1e12) {
    // Singular reduced Hessian with a descent direction left over.
    res.status = QpStatus::Unbounded;
    return res;
  }
  res.objective = objective_at(p, dz);
  res.status = QpStatus::Optimal;
  res.iterations = 1;
  (void)opts;
  return res;
}

// Elastic phase-1: min 1'u + 1'(v+ + v-)  s.t.  Ain z - u <= bin, u >= 0,
// Aeq z + v+ - v- = beq, v+- >= 0. Always feasible; optimum 0 iff p feasible.
QpResult phase1(const QuadProgram& p, const QpOptions& opts) {
  const int n = p.num_vars();
  const int mi = static_cast<int>(p.Ain.rows());
  const int me = static_cast<int>(p.Aeq.rows());
  const int nv = n + mi + 2 * me;
  QuadProgram lp;
  lp.H = MatrixXd::Zero(nv, nv);
  lp.g = VectorXd::Zero(nv);
  lp.g.segment(n, mi + 2 * me).setOnes();
  lp.Aeq = MatrixXd::Zero(me, nv);
  if (me > 0) {
    lp.Aeq.leftCols(n) = p.Aeq;
    lp.Aeq.block(0, n + mi, me, me) = MatrixXd::Identity(me, me);
    lp.Aeq.block(0, n + mi + me, me, me) = -MatrixXd::Identity(me, me);
  }
  lp.beq = p.beq;
  lp.Ain = MatrixXd::Zero(mi + mi + 2 * me, nv);
  lp.bin = VectorXd::Zero(mi + mi + 2 * me);
  if (mi > 0) {
    lp.Ain.topLeftCorner(mi, n) = p.Ain;
    lp.Ain.block(0, n, mi, mi) = -MatrixXd::Identity(mi, mi);
    lp.bin.head(mi) = p.bin;
  }
  lp.Ain.block(mi, n, mi + 2 * me, mi + 2 * me) = -MatrixXd::Identity(mi + 2 * me, mi + 2 * me);
  QpOptions o = opts;
  o.allow_phase1 = false;
  o.max_iterations = std::max(opts.max_iterations, 200);
  return solve(lp, o);
}

}  // namespace

namespace {

// Crossover: re-solves the equality KKT system on the active set identified
// by the interior-point iterate. Near weakly-active constraints the IP error
// scales as sqrt(mu); the polished point is exact to linear-solve precision.
// Returns false (leaving the result untouched) when the guess fails to
// validate.
bool polish_active_set(const QuadProgram& p, QpResult& res) {
  const int n = p.num_vars();
  const int mi = static_cast<int>(p.Ain.rows());
  const int me = static_cast<int>(p.Aeq.rows());
  std::vector<int> active;
  for (int i = 0; i < mi; ++i) {
    const double s = p.bin(i) - p.Ain.row(i).dot(res.z);
    if (res.in_duals(i) > s) active.push_back(i);
  }
  const int na = static_cast<int>(active.size());
  const int dim = n + me + na;
  MatrixXd K = MatrixXd::Zero(dim, dim);
  VectorXd rhs(dim);
  K.topLeftCorner(n, n) = p.H;
  rhs.head(n) = -p.g;
  if (me > 0) {
    K.block(n, 0, me, n) = p.Aeq;
    K.block(0, n, n, me) = p.Aeq.transpose();
    rhs.segment(n, me) = p.beq;
  }
  for (int i = 0; i < na; ++i) {
    K.block(n + me + i, 0, 1, n) = p.Ain.row(active[static_cast<std::size_t>(i)]);
    K.block(0, n + me + i, n, 1) = p.Ain.row(active[static_cast<std::size_t>(i)]).transpose();
    rhs(n + me + i) = p.bin(active[static_cast<std::size_t>(i)]);
  }
  Eigen::FullPivLU<MatrixXd> lu(K);
  if (!lu.isInvertible()) return false;
  const VectorXd sol = lu.solve(rhs);
  const VectorXd z = sol.head(n);
  const VectorXd lam_act = sol.tail(na);
  const double scale = 1.0 + p.bin.lpNorm<Eigen::Infinity>();
  if (((p.Ain * z - p.bin).array() > 1e-9 * scale).any()) return false;
  if ((lam_act.array() < -1e-9).any()) return false;
  res.z = z;
  if (me > 0) res.eq_duals = sol.segment(n, me);
  VectorXd lam = VectorXd::Zero(mi);
  for (int i = 0; i < na; ++i) lam(active[static_cast<std::size_t>(i)]) = std::max(0.0, lam_act(i));
  res.in_duals = std::move(lam);
  res.objective = objective_at(p, res.z);
  VectorXd rd = p.H * res.z + p.g + p.Ain.transpose() * res.in_duals;
  if (me > 0) rd += p.Aeq.transpose() * res.eq_duals;
  res.kkt_residual = rd.lpNorm<Eigen::Infinity>();
  return true;
}

}  // namespace

QpResult solve(const QuadProgram& p, const QpOptions& opts) {
  validate(p);
  const int n = p.num_vars();
  const int mi = static_cast<int>(p.Ain.rows());
  const int me = static_cast<int>(p.Aeq.rows());

  if (mi == 0) return solve_equality_only(p, opts);

  QpResult res;
  const double hscale = std::max(1.0, p.H.lpNorm<Eigen::Infinity>());
  const double reg = 1e-11 * hscale;

  // Starting point: z = 0, positive slacks and duals.
  VectorXd z = VectorXd::Zero(n);
  VectorXd y = VectorXd::Zero(me);
  VectorXd s = (p.bin - p.Ain * z).cwiseMax(1.0);
  VectorXd lam = VectorXd::Ones(mi);

  const double bscale = 1.0 + std::max({p.g.lpNorm<Eigen::Infinity>(), p.bin.size() ? p.bin.lpNorm<Eigen::Infinity>() : 0.0,
                                        p.beq.size() ? p.beq.lpNorm<Eigen::Infinity>() : 0.0});
  double best_kkt = std::numeric_limits<double>::infinity();
  VectorXd best_z = z, best_y = y, best_lam = lam;
  int no_progress = 0;

  for (int it = 0; it < opts.max_iterations; ++it) {
    VectorXd rd = p.H * z + p.g + p.Ain.transpose() * lam;
    if (me > 0) rd += p.Aeq.transpose() * y;
    VectorXd re = me > 0 ? VectorXd(p.Aeq * z - p.beq) : VectorXd();
    VectorXd ri = p.Ain * z + s - p.bin;
    const double mu = lam.dot(s) / mi;
    const double dinf = rd.lpNorm<Eigen::Infinity>();
    const double pinf = std::max(ri.lpNorm<Eigen::Infinity>(), me > 0 ? re.lpNorm<Eigen::Infinity>() : 0.0);
    res.iterations = it;
    const double kkt_now = std::max({dinf, pinf, mu});
    if (kkt_now < 0.9 * best_kkt) {
      best_kkt = kkt_now;
      best_z = z;
      best_y = y;
      best_lam = lam;
      no_progress = 0;
    } else {
      ++no_progress;
    }
    res.kkt_residual = best_kkt;

    if (kkt_now <= opts.tol * bscale) {
      res.status = QpStatus::Optimal;
      res.z = z;
      res.eq_duals = y;
      res.in_duals = lam;
      res.objective = objective_at(p, z);
      res.kkt_residual = kkt_now;
      polish_active_set(p, res);
      return res;
    }
    if (z.lpNorm<Eigen::Infinity>() > 1e13) {
      res.status = QpStatus::Unbounded;
      res.z = z;
      return res;
    }
    if (no_progress > 25) break;  // endgame stall (typically a degenerate LP)

    VectorXd d = lam.cwiseQuotient(s);
    MatrixXd M = p.H + reg * MatrixXd::Identity(n, n) + p.Ain.transpose() * d.asDiagonal() * p.Ain;
    KktSolver kkt;
    kkt.factor(M, p.Aeq);
    if (!kkt.ok) break;

    const auto newton = [&](const VectorXd& rc, VectorXd& dz, VectorXd& dy, VectorXd& dlam, VectorXd& ds) {
      VectorXd b1 = -rd - p.Ain.transpose() * VectorXd((lam.cwiseProduct(ri) - rc).cwiseQuotient(s));
      VectorXd b2 = me > 0 ? VectorXd(-re) : VectorXd();
      kkt.solve(M, p.Aeq, b1, b2, dz, dy);
      ds = -ri - p.Ain * dz;
      dlam = -(rc + lam.cwiseProduct(ds)).cwiseQuotient(s);
    };
    const auto max_step = [](const VectorXd& v, const VectorXd& dv) {
      double a = 1.0;
      for (Eigen::Index i = 0; i < v.size(); ++i)
        if (dv(i) < 0) a = std::min(a, -v(i) / dv(i));
      return a;
    };

    // Predictor (affine scaling).
    VectorXd dz_a, dy_a, dlam_a, ds_a;
    newton(lam.cwiseProduct(s), dz_a, dy_a, dlam_a, ds_a);
    const double ap_a = max_step(s, ds_a);
    const double ad_a = max_step(lam, dlam_a);
    const double mu_aff = (lam + ad_a * dlam_a).dot(s + ap_a * ds_a) / mi;
    const double sigma = std::pow(std::max(0.0, mu_aff / std::max(mu, 1e-300)), 3.0);

    // Corrector.
    VectorXd rc = lam.cwiseProduct(s) + dlam_a.cwiseProduct(ds_a) - VectorXd::Constant(mi, sigma * mu);
    VectorXd dz, dy, dlam, ds;
    newton(rc, dz, dy, dlam, ds);
    const double tau = 0.995;
    const double ap = std::min(1.0, tau * max_step(s, ds));
    const double ad = std::min(1.0, tau * max_step(lam, dlam));
    z += ap * dz;
    s += ap * ds;
    lam += ad * dlam;
    if (me > 0) y += ad * dy;
  }

  // A stalled endgame whose best iterate still meets the 1e-7 KKT contract
  // (degenerate vertex optima) is accepted as optimal.
  if (best_kkt <= 1e-7 * bscale) {
    res.status = QpStatus::Optimal;
    res.z = best_z;
    res.eq_duals = best_y;
    res.in_duals = best_lam;
    res.objective = objective_at(p, best_z);
    res.kkt_residual = best_kkt;
    polish_active_set(p, res);
    return res;
  }

  // Ambiguous exit: decide feasibility with the elastic phase-1 LP.
  if (opts.allow_phase1) {
    QpResult ph = phase1(p, opts);
    if (ph.status == QpStatus::Optimal && ph.objective > 1e-7 * bscale) {
      res.status = QpStatus::Infeasible;
      res.z = ph.z.head(n);
      VectorXd cert(me + mi);
      if (me > 0) cert.head(me) = ph.eq_duals;
      cert.tail(mi) = ph.in_duals.head(mi);
      const double nrm = cert.lpNorm<Eigen::Infinity>();
      res.farkas = nrm > 0 ? VectorXd(cert / nrm) : cert;
      return res;
    }
    if (ph.status == QpStatus::Optimal && ph.objective <= 1e-7 * bscale) {
      // Feasible but the main iteration struggled; restart once from the
      // phase-1 point.
      QpOptions o = opts;
      o.allow_phase1 = false;
      QuadProgram shifted = p;
      VectorXd z0 = ph.z.head(n);
      shifted.g = p.g + p.H * z0;
      shifted.beq = p.beq - (me > 0 ? VectorXd(p.Aeq * z0) : VectorXd::Zero(0));
      shifted.bin = p.bin - p.Ain * z0;
      QpResult r2 = solve(shifted, o);
      if (r2.status == QpStatus::Optimal) {
        r2.z += z0;
        r2.objective = objective_at(p, r2.z);
        return r2;
      }
    }
  }
  res.status = QpStatus::MaxIterations;
  res.z = z;
  res.eq_duals = y;
  res.in_duals = lam;
  res.objective = objective_at(p, z);
  return res;
}

}  // namespace pnpmpc

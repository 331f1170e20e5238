#include "pnpmpc/mpc.hpp"

#include <cmath>
#include <iostream>
#include <mutex>
#include <set>
#include <stdexcept>

#include "pnpmpc/qp.hpp"

namespace pnpmpc {

namespace {

// Stacked prediction operators for x(k) = A^k x0 + sum_j A^(k-1-j) (B u(j) + c),
// k = 0..N: x_stack = Tx * x0 + Tu * u_stack + Tc * c.
struct Prediction {
  MatrixXd Tx;  // (N+1)n x n
  MatrixXd Tu;  // (N+1)n x Nm
  MatrixXd Tc;  // (N+1)n x n
};

Prediction build_prediction(const MatrixXd& A, const MatrixXd& B, int N) {
  const int n = static_cast<int>(A.rows());
  const int m = static_cast<int>(B.cols());
  Prediction P;
  P.Tx = MatrixXd::Zero((N + 1) * n, n);
  P.Tu = MatrixXd::Zero((N + 1) * n, N * m);
  P.Tc = MatrixXd::Zero((N + 1) * n, n);
  MatrixXd Ak = MatrixXd::Identity(n, n);
  P.Tx.topRows(n) = Ak;
  for (int k = 1; k <= N; ++k) {
    // row block k reuses block k-1: x(k) = A x(k-1) + B u(k-1) + c
    P.Tx.middleRows(k * n, n) = A * P.Tx.middleRows((k - 1) * n, n);
    P.Tu.middleRows(k * n, n) = A * P.Tu.middleRows((k - 1) * n, n);
    P.Tu.block(k * n, (k - 1) * m, n, m) = B;
    P.Tc.middleRows(k * n, n) = A * P.Tc.middleRows((k - 1) * n, n) + MatrixXd::Identity(n, n);
  }
  return P;
}

// Largest lambda in (0, 1] such that target_x + lambda * X_f stays inside the
// tightened state set and the auxiliary law stays inside V around target_u.
// Scaling preserves invariance (A_K is linear), so the terminal theory holds
// for the shifted problem; returns 0 when the target itself has no room.
double terminal_shrink_factor(const TubeController& ctrl, const VectorXd& tx, const VectorXd& tu) {
  double lam = 1.0;
  for (int r = 0; r < ctrl.Xhat_hrep.num_faces(); ++r) {
    const VectorXd f = ctrl.Xhat_hrep.normals.row(r).transpose();
    const double room = ctrl.Xhat_hrep.offsets(r) - f.dot(tx);
    if (room <= 1e-12) return 0.0;
    const double s = polytope_support(ctrl.terminal_set, f);
    if (s > 1e-12) lam = std::min(lam, room / s);
  }
  for (int r = 0; r < ctrl.V.num_faces(); ++r) {
    const VectorXd h = ctrl.V.normals.row(r).transpose();
    const double room = ctrl.V.offsets(r) - h.dot(tu);
    if (room <= 1e-12) return 0.0;
    const double s = polytope_support(ctrl.terminal_set, VectorXd(ctrl.aux_gain.transpose() * h));
    if (s > 1e-12) lam = std::min(lam, room / s);
  }
  return lam;
}

void warn_terminal_dropped(int area) {
  static std::mutex mu;
  static std::set<int> seen;
  std::lock_guard<std::mutex> lock(mu);
  if (seen.insert(area).second)
    std::cerr << "[mpc] warning: tracking target leaves the tightened sets of area " << area
              << "; solving without a terminal constraint (further warnings suppressed)\n";
}

}  // namespace

MpcResult mpc_step(const TubeController& ctrl, const Subsystem& sub, const VectorXd& x,
                   const Target& target) {
  const int n = sub.nx();
  const int m = sub.nu();
  const int N = ctrl.horizon;
  if (x.size() != n) throw std::invalid_argument("mpc_step: state dimension mismatch");
  if (target.x.size() != n || target.u.size() != m)
    throw std::invalid_argument("mpc_step: target dimension mismatch");

  const VectorXd c = target.x - sub.A * target.x - sub.B * target.u;
  const Prediction P = build_prediction(sub.A, sub.B, N);
  const VectorXd tc = P.Tc * c;

  const Zonotope& Z = ctrl.Z.set;
  const int e = Z.num_generators();
  const int nv = n + N * m + e;
  const auto x0_cols = [&](auto&& M) { return M.middleCols(0, n); };
  const auto v_cols = [&](auto&& M) { return M.middleCols(n, N * m); };

  // Map z = [xhat0; v; d] to the stacked nominal states.
  MatrixXd G = MatrixXd::Zero((N + 1) * n, nv);
  x0_cols(G) = P.Tx;
  v_cols(G) = P.Tu;

  // Quadratic cost around the target.
  VectorXd xs_t((N + 1) * n);
  for (int k = 0; k <= N; ++k) xs_t.segment(k * n, n) = target.x;
  VectorXd vs_t(N * m);
  for (int k = 0; k < N; ++k) vs_t.segment(k * m, m) = target.u;

  MatrixXd Qbar = MatrixXd::Zero((N + 1) * n, (N + 1) * n);
  for (int k = 0; k < N; ++k) Qbar.block(k * n, k * n, n, n) = ctrl.stage_weights.Q;
  Qbar.block(N * n, N * n, n, n) = ctrl.terminal_cost;
  MatrixXd Rbar = MatrixXd::Zero(N * m, N * m);
  for (int k = 0; k < N; ++k) Rbar.block(k * m, k * m, m, m) = ctrl.stage_weights.R;

  QuadProgram qp;
  qp.H = MatrixXd::Zero(nv, nv);
  qp.H = 2.0 * (G.transpose() * Qbar * G);
  MatrixXd Mv = MatrixXd::Zero(N * m, nv);
  v_cols(Mv) = MatrixXd::Identity(N * m, N * m);
  qp.H += 2.0 * (Mv.transpose() * Rbar * Mv);
  qp.g = 2.0 * (G.transpose() * (Qbar * (tc - xs_t)) - Mv.transpose() * (Rbar * vs_t));

  // Tube membership: xhat0 + Xi_z d = x (the predicted offset tc is zero in
  // the first block, so row block 0 of G is just xhat0).
  qp.Aeq = MatrixXd::Zero(n, nv);
  qp.Aeq.leftCols(n) = MatrixXd::Identity(n, n);
  if (e > 0) qp.Aeq.rightCols(e) = Z.generators;
  qp.beq = x - Z.center;

  // Inequalities: tightened state rows for k = 0..N-1, tightened inputs,
  // shifted terminal set, generator box.
  const int rx = ctrl.Xhat_hrep.num_faces();
  const int rv = ctrl.V.num_faces();
  bool use_terminal = ctrl.terminal_set.num_faces() > 0;
  double lambda = 1.0;
  if (use_terminal) {
    lambda = terminal_shrink_factor(ctrl, target.x, target.u);
    if (lambda <= 1e-9) {
      warn_terminal_dropped(sub.id);
      use_terminal = false;
    }
  }
  const int rf = use_terminal ? ctrl.terminal_set.num_faces() : 0;
  const int rows = N * rx + N * rv + rf + 2 * e;
  qp.Ain = MatrixXd::Zero(rows, nv);
  qp.bin = VectorXd::Zero(rows);
  int at = 0;
  for (int k = 0; k < N; ++k) {
    qp.Ain.middleRows(at, rx) = ctrl.Xhat_hrep.normals * G.middleRows(k * n, n);
    qp.bin.segment(at, rx) =
        ctrl.Xhat_hrep.offsets - ctrl.Xhat_hrep.normals * tc.segment(k * n, n);
    at += rx;
  }
  for (int k = 0; k < N; ++k) {
    qp.Ain.block(at, n + k * m, rv, m) = ctrl.V.normals;
    qp.bin.segment(at, rv) = ctrl.V.offsets;
    at += rv;
  }
  if (use_terminal) {
    qp.Ain.middleRows(at, rf) = ctrl.terminal_set.normals * G.middleRows(N * n, n);
    qp.bin.segment(at, rf) = lambda * ctrl.terminal_set.offsets +
                             ctrl.terminal_set.normals * (target.x - tc.segment(N * n, n));
    at += rf;
  }
  if (e > 0) {
    qp.Ain.block(at, n + N * m, e, e) = MatrixXd::Identity(e, e);
    qp.bin.segment(at, e).setConstant(Z.scale);
    at += e;
    qp.Ain.block(at, n + N * m, e, e) = -MatrixXd::Identity(e, e);
    qp.bin.segment(at, e).setConstant(Z.scale);
  }

  QpResult res = solve(qp);
  MpcResult out;
  if (res.status == QpStatus::Infeasible) {
    out.status = MpcStatus::Infeasible;
    return out;
  }
  if (res.status != QpStatus::Optimal) {
    out.status = MpcStatus::SolverError;
    return out;
  }

  out.status = MpcStatus::Feasible;
  MpcSolution& sol = out.solution;
  sol.xhat0 = res.z.head(n);
  sol.v0 = res.z.segment(n, m);
  sol.u = sol.v0 + ctrl.K * (x - sol.xhat0);
  const VectorXd xs = G * res.z + tc;
  sol.nominal_x.resize(n, N + 1);
  for (int k = 0; k <= N; ++k) sol.nominal_x.col(k) = xs.segment(k * n, n);
  sol.nominal_v.resize(m, N);
  for (int k = 0; k < N; ++k) sol.nominal_v.col(k) = res.z.segment(n + k * m, m);
  double cost = 0.0;
  for (int k = 0; k < N; ++k) {
    const VectorXd dx = sol.nominal_x.col(k) - target.x;
    const VectorXd dv = sol.nominal_v.col(k) - target.u;
    cost += dx.dot(ctrl.stage_weights.Q * dx) + dv.dot(ctrl.stage_weights.R * dv);
  }
  const VectorXd dN = sol.nominal_x.col(N) - target.x;
  cost += dN.dot(ctrl.terminal_cost * dN);
  sol.cost = cost;
  return out;
}

CentralResult centralized_mpc_step(const std::vector<const Subsystem*>& subs,
                                   const std::vector<CentralWeights>& weights,
                                   const VectorXd& x_all, const std::vector<Target>& targets,
                                   int horizon) {
  const int M = static_cast<int>(subs.size());
  if (M == 0 || weights.size() != subs.size() || targets.size() != subs.size())
    throw std::invalid_argument("centralized_mpc_step: inconsistent inputs");
  const int N = horizon;

  // Assemble the collective model.
  std::vector<int> xoff(M + 1, 0), uoff(M + 1, 0);
  for (int i = 0; i < M; ++i) {
    xoff[i + 1] = xoff[i] + subs[i]->nx();
    uoff[i + 1] = uoff[i] + subs[i]->nu();
  }
  const int n = xoff[M];
  const int m = uoff[M];
  if (x_all.size() != n) throw std::invalid_argument("centralized_mpc_step: state size mismatch");

  std::map<int, int> index;
  for (int i = 0; i < M; ++i) index[subs[i]->id] = i;
  MatrixXd A = MatrixXd::Zero(n, n);
  MatrixXd B = MatrixXd::Zero(n, m);
  VectorXd xt(n), ut(m);
  for (int i = 0; i < M; ++i) {
    A.block(xoff[i], xoff[i], subs[i]->nx(), subs[i]->nx()) = subs[i]->A;
    B.block(xoff[i], uoff[i], subs[i]->nx(), subs[i]->nu()) = subs[i]->B;
    for (const auto& [j, Aij] : subs[i]->couplings) {
      const auto it = index.find(j);
      if (it == index.end())
        throw std::invalid_argument("centralized_mpc_step: coupling to missing subsystem");
      A.block(xoff[i], xoff[it->second], Aij.rows(), Aij.cols()) = Aij;
    }
    xt.segment(xoff[i], subs[i]->nx()) = targets[i].x;
    ut.segment(uoff[i], subs[i]->nu()) = targets[i].u;
  }
  const VectorXd c = xt - A * xt - B * ut;

  const Prediction P = build_prediction(A, B, N);
  const VectorXd free_resp = P.Tx * x_all + P.Tc * c;  // x_stack at u = 0

  MatrixXd Qbar = MatrixXd::Zero((N + 1) * n, (N + 1) * n);
  MatrixXd Rbar = MatrixXd::Zero(N * m, N * m);
  for (int k = 0; k < N; ++k)
    for (int i = 0; i < M; ++i) {
      Qbar.block(k * n + xoff[i], k * n + xoff[i], subs[i]->nx(), subs[i]->nx()) =
          weights[i].weights.Q;
      Rbar.block(k * m + uoff[i], k * m + uoff[i], subs[i]->nu(), subs[i]->nu()) =
          weights[i].weights.R;
    }
  for (int i = 0; i < M; ++i)
    Qbar.block(N * n + xoff[i], N * n + xoff[i], subs[i]->nx(), subs[i]->nx()) = weights[i].terminal;

  VectorXd xs_t((N + 1) * n);
  for (int k = 0; k <= N; ++k) xs_t.segment(k * n, n) = xt;
  VectorXd vs_t(N * m);
  for (int k = 0; k < N; ++k) vs_t.segment(k * m, m) = ut;

  QuadProgram qp;
  qp.H = 2.0 * (P.Tu.transpose() * Qbar * P.Tu + Rbar);
  qp.g = 2.0 * (P.Tu.transpose() * (Qbar * (free_resp - xs_t)) - Rbar * vs_t);

  // Original constraints: states for k = 1..N, inputs for k = 0..N-1.
  int rx_total = 0, ru_total = 0;
  for (int i = 0; i < M; ++i) {
    rx_total += subs[i]->X_hrep.num_faces();
    ru_total += subs[i]->U.num_faces();
  }
  qp.Ain = MatrixXd::Zero(N * rx_total + N * ru_total, N * m);
  qp.bin = VectorXd::Zero(qp.Ain.rows());
  int at = 0;
  for (int k = 1; k <= N; ++k) {
    for (int i = 0; i < M; ++i) {
      const auto& Xh = subs[i]->X_hrep;
      const int r = Xh.num_faces();
      qp.Ain.middleRows(at, r) = Xh.normals * P.Tu.middleRows(k * n + xoff[i], subs[i]->nx());
      qp.bin.segment(at, r) =
          Xh.offsets - Xh.normals * free_resp.segment(k * n + xoff[i], subs[i]->nx());
      at += r;
    }
  }
  for (int k = 0; k < N; ++k) {
    for (int i = 0; i < M; ++i) {
      const auto& Uh = subs[i]->U;
      const int r = Uh.num_faces();
      qp.Ain.block(at, k * m + uoff[i], r, subs[i]->nu()) = Uh.normals;
      qp.bin.segment(at, r) = Uh.offsets;
      at += r;
    }
  }

  QpResult res = solve(qp);
  CentralResult out;
  if (res.status == QpStatus::Infeasible) {
    out.status = MpcStatus::Infeasible;
    return out;
  }
  if (res.status != QpStatus::Optimal) {
    out.status = MpcStatus::SolverError;
    return out;
  }
  out.status = MpcStatus::Feasible;
  out.u = res.z.head(m);
  const VectorXd xs = P.Tu * res.z + free_resp;
  double cost = 0.0;
  for (int k = 0; k < N; ++k) {
    const VectorXd dx = xs.segment(k * n, n) - xt;
    const VectorXd dv = res.z.segment(k * m, m) - ut;
    cost += dx.dot(Qbar.block(0, 0, n, n) * dx) + dv.dot(Rbar.block(0, 0, m, m) * dv);
  }
  const VectorXd dN = xs.segment(N * n, n) - xt;
  cost += dN.dot(Qbar.block(N * n, N * n, n, n) * dN);
  out.cost = cost;
  return out;
}

}  // namespace pnpmpc

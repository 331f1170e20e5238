#include "pnpmpc/tube_synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

#include "pnpmpc/linalg.hpp"
#include "pnpmpc/qp.hpp"

namespace pnpmpc {

namespace {

constexpr double kSeriesTol = 1e-12;  // summand cutoff for the coupling series
constexpr int kSeriesCap = 50000;

// sum_k ||R F^k M||_inf for Schur F, truncated when summands fall below
// kSeriesTol; aborts early once the partial sum crosses `abort_above`.
double coupling_series(const MatrixXd& R, const MatrixXd& F, const MatrixXd& M, double abort_above) {
  double total = 0.0;
  MatrixXd RFk = R;
  for (int k = 0; k < kSeriesCap; ++k) {
    const double term = inf_norm(RFk * M);
    total += term;
    if (total >= abort_above) return total;
    if (term < kSeriesTol && k > 4) break;
    RFk = RFk * F;
  }
  return total;
}

}  // namespace

std::vector<int> Subsystem::neighbor_ids() const {
  std::vector<int> out;
  out.reserve(couplings.size());
  for (const auto& [j, Aij] : couplings)
    if (inf_norm(Aij) > 0.0) out.push_back(j);
  return out;
}

double alpha_metric(const Subsystem& sub, const NeighborShapes& shapes, const MatrixXd& K) {
  const MatrixXd F = sub.A + sub.B * K;
  if (!is_schur(F)) throw std::invalid_argument("alpha_metric: closed loop is not Schur");
  double alpha = 0.0;
  for (const int j : sub.neighbor_ids()) {
    const auto it = shapes.find(j);
    if (it == shapes.end()) throw std::invalid_argument("alpha_metric: missing neighbor shape");
    const MatrixXd Fj_pinv = pseudo_inverse(it->second.hrep.normals);
    alpha += coupling_series(sub.X_hrep.normals, F, sub.couplings.at(j) * Fj_pinv, 1.0 + 1e3);
    if (alpha >= 1.0 + 1e3) break;
  }
  return alpha;
}

LhatResult lhat(const Subsystem& sub, const NeighborShapes& shapes, const MatrixXd& K, double delta,
                const MatrixXd& Xihat) {
  const MatrixXd F = sub.A + sub.B * K;
  if (!is_schur(F)) throw std::invalid_argument("lhat: closed loop is not Schur");
  const int rbar = sub.X_hrep.num_faces();
  LhatResult out;
  out.per_row.resize(rbar);
  out.value = std::numeric_limits<double>::infinity();
  for (int r = 0; r < rbar; ++r) {
    const MatrixXd frow = sub.X_hrep.normals.row(r);
    const double denom = inf_norm(frow * Xihat);
    if (denom <= 0.0)
      throw std::invalid_argument("lhat: tightened shape degenerate along a constraint row");
    double series = 0.0;
    for (const int j : sub.neighbor_ids()) {
      const Zonotope Xj = shapes.at(j).zono.normalized();
      series += coupling_series(frow, F, sub.couplings.at(j) * Xj.generators, 10.0);
    }
    out.per_row(r) = (1.0 - series) / denom;
    const double corrected = out.per_row(r) - inf_norm(frow) * delta / denom;
    out.value = std::min(out.value, corrected);
  }
  return out;
}

BetaResult beta_metric(const MatrixXd& K, const RpiResult& Z, const HPolytope& U) {
  BetaResult out;
  out.shrink.resize(U.num_faces());
  for (int r = 0; r < U.num_faces(); ++r) {
    out.shrink(r) = support(Z.set, K, U.normals.row(r).transpose());
  }
  out.beta = U.num_faces() > 0 ? out.shrink.maxCoeff() : 0.0;
  return out;
}

double polytope_support(const HPolytope& P, const VectorXd& c) {
  QuadProgram lp;
  const int n = P.dim();
  lp.H = MatrixXd::Zero(n, n);
  lp.g = -c;
  lp.Ain = P.normals;
  lp.bin = P.offsets;
  QpResult res = solve(lp);
  if (res.status != QpStatus::Optimal)
    throw std::runtime_error("polytope_support: LP failed (unbounded or infeasible polytope)");
  return c.dot(res.z);
}

TerminalIngredients terminal_ingredients(const MatrixXd& A, const MatrixXd& B, const Zonotope& Xhat,
                                         const HPolytope& V, const LqWeights& w) {
  TerminalIngredients out;
  out.P_f = dare_solve(A, B, w);
  out.K_aux = -(w.R + B.transpose() * out.P_f * B).ldlt().solve(B.transpose() * out.P_f * A);
  const MatrixXd Ak = A + B * out.K_aux;
  if (!is_schur(Ak)) throw std::runtime_error("terminal_ingredients: auxiliary loop not Schur");

  const HPolytope Xh = zonotope_to_hrep(Xhat);
  const int rx = Xh.num_faces();
  const int rv = V.num_faces();
  MatrixXd C(rx + rv, A.rows());
  VectorXd c(rx + rv);
  C.topRows(rx) = Xh.normals;
  c.head(rx) = Xh.offsets;
  C.bottomRows(rv) = V.normals * out.K_aux;
  c.tail(rv) = V.offsets;
  if ((c.array() <= 1e-12).any())
    throw std::runtime_error("terminal_ingredients: empty terminal set (origin excluded)");

  // Backward-reachability fixed point: append pre-image rows until every new
  // one is redundant over the current set.
  MatrixXd On = C;
  VectorXd ofs = c;
  MatrixXd CAk = C;
  const int budget = 100;
  bool converged = false;
  for (int it = 0; it < budget && !converged; ++it) {
    CAk = CAk * Ak;
    converged = true;
    std::vector<int> fresh;
    for (int r = 0; r < CAk.rows(); ++r) {
      const VectorXd f = CAk.row(r).transpose();
      HPolytope cur{On, ofs};
      if (polytope_support(cur, f) > c(r) + 1e-10) {
        fresh.push_back(r);
        converged = false;
      }
    }
    if (!fresh.empty()) {
      MatrixXd On2(On.rows() + fresh.size(), On.cols());
      VectorXd o2(ofs.size() + fresh.size());
      On2.topRows(On.rows()) = On;
      o2.head(ofs.size()) = ofs;
      for (std::size_t i = 0; i < fresh.size(); ++i) {
        On2.row(On.rows() + static_cast<Eigen::Index>(i)) = CAk.row(fresh[i]);
        o2(ofs.size() + static_cast<Eigen::Index>(i)) = c(fresh[i]);
      }
      On = std::move(On2);
      ofs = std::move(o2);
    }
  }
  if (!converged)
    throw std::runtime_error("terminal_ingredients: invariant-set fixed point exceeded its budget");

  // Prune redundant rows so the MPC carries a compact terminal set.
  for (Eigen::Index r = 0; r < On.rows();) {
    MatrixXd rest(On.rows() - 1, On.cols());
    VectorXd ro(ofs.size() - 1);
    Eigen::Index at = 0;
    for (Eigen::Index q = 0; q < On.rows(); ++q) {
      if (q == r) continue;
      rest.row(at) = On.row(q);
      ro(at) = ofs(q);
      ++at;
    }
    bool redundant = false;
    try {
      redundant = polytope_support(HPolytope{rest, ro}, On.row(r).transpose()) <= ofs(r) + 1e-12;
    } catch (const std::runtime_error&) {
      redundant = false;  // removing the row unbounds the set; keep it
    }
    if (redundant) {
      On = std::move(rest);
      ofs = std::move(ro);
    } else {
      ++r;
    }
  }
  out.X_f = HPolytope{On, ofs};
  return out;
}

namespace {

struct EvalPoint {
  bool valid = false;
  double alpha = 0.0;
  double lhat_value = 0.0;
  double beta = 0.0;
  double merit = std::numeric_limits<double>::infinity();
  double violation = std::numeric_limits<double>::infinity();
  MatrixXd K;
  LqWeights w;
  double delta = 0.0;
};

EvalPoint evaluate_candidate(const Subsystem& sub, const NeighborShapes& shapes, const Zonotope& W,
                             const LqWeights& w, double delta, double mu_a, double mu_b,
                             double margin, double min_lhat) {
  EvalPoint ev;
  ev.w = w;
  ev.delta = delta;
  try {
    ev.K = lq_gain(sub.A, sub.B, w);
  } catch (const std::exception&) {
    return ev;
  }
  const MatrixXd F = sub.A + sub.B * ev.K;
  if (!is_schur(F, 1e-6)) return ev;
  try {
    ev.alpha = alpha_metric(sub, shapes, ev.K);
    if (ev.alpha >= 1.0) {
      // Keep a graded penalty so the search can still descend toward the
      // feasible region.
      ev.valid = true;
      ev.lhat_value = 0.0;
      ev.beta = 0.0;
      ev.violation = (ev.alpha - (1.0 - margin)) + 2.0;
      ev.merit = 1e3 + 10.0 * ev.violation;
      return ev;
    }
    ev.lhat_value = lhat(sub, shapes, ev.K, delta, sub.X.generators).value;
    const RpiResult Z = mrpi_outer(F, W, delta);
    ev.beta = beta_metric(ev.K, Z, sub.U).beta;
  } catch (const std::exception&) {
    return ev;
  }
  ev.valid = true;
  const double va = std::max(0.0, ev.alpha - (1.0 - margin));
  const double vl = std::max(0.0, std::max(margin, min_lhat) - ev.lhat_value);
  const double vb = std::max(0.0, ev.beta - (1.0 - margin));
  ev.violation = va + vl + vb;
  ev.merit = ev.violation == 0.0 ? mu_a * ev.alpha + mu_b * ev.beta : 1e3 + 10.0 * ev.violation;
  return ev;
}

}  // namespace

TuneResult tune_gain(const Subsystem& sub, const NeighborShapes& shapes, double mu_alpha,
                     double mu_beta, const DesignOptions& opts) {
  if (mu_alpha < 0 || mu_beta < 0) throw std::invalid_argument("tune_gain: weights must be >= 0");
  const int n = sub.nx();
  const int m = sub.nu();
  std::vector<std::pair<MatrixXd, Zonotope>> blocks;
  for (const int j : sub.neighbor_ids()) blocks.emplace_back(sub.couplings.at(j), shapes.at(j).zono);
  const Zonotope W = disturbance_set(blocks, n);

  // Search in log10 of the diagonal weights. The tube accuracy delta stays
  // at its configured value: the objective is weakly monotone in delta, so a
  // free delta merely slides to the search boundary.
  const int nv = n + m;
  VectorXd seed0 = VectorXd::Zero(nv);
  if (opts.seed_weights.Q.size() > 0) {
    for (int i = 0; i < n; ++i) seed0(i) = std::log10(std::max(1e-8, opts.seed_weights.Q(i, i)));
    for (int i = 0; i < m; ++i) seed0(n + i) = std::log10(std::max(1e-8, opts.seed_weights.R(i, i)));
  }
  std::vector<VectorXd> seeds{seed0};
  {
    VectorXd s1 = seed0;
    s1(0) += 2.0;
    if (n > 1) s1(1) += 1.0;
    seeds.push_back(s1);
    VectorXd s2 = seed0;
    for (int i = 0; i < m; ++i) s2(n + i) += 2.0;
    seeds.push_back(s2);
    VectorXd s3 = seed0;
    s3(0) += 1.0;
    if (n > 1) s3(1) += 2.0;
    for (int i = 2; i < n; ++i) s3(i) -= 1.0;
    for (int i = 0; i < m; ++i) s3(n + i) += 1.0;
    seeds.push_back(s3);
  }

  int evals = 0;
  EvalPoint best;
  EvalPoint least_infeasible;
  const auto eval_at = [&](const VectorXd& x) {
    LqWeights w;
    w.Q = MatrixXd::Zero(n, n);
    w.R = MatrixXd::Zero(m, m);
    for (int i = 0; i < n; ++i) w.Q(i, i) = std::pow(10.0, std::clamp(x(i), -8.0, 8.0));
    for (int i = 0; i < m; ++i) w.R(i, i) = std::pow(10.0, std::clamp(x(n + i), -8.0, 8.0));
    const double delta = opts.delta;
    ++evals;
    EvalPoint ev = evaluate_candidate(sub, shapes, W, w, delta, mu_alpha, mu_beta,
                                      opts.feas_margin, opts.min_lhat);
    if (ev.valid && ev.violation < least_infeasible.violation) least_infeasible = ev;
    if (ev.merit < best.merit) best = ev;
    return ev;
  };

  const int per_seed = std::max(20, opts.tune_budget / static_cast<int>(seeds.size()));
  for (const auto& s : seeds) {
    VectorXd x = s;
    EvalPoint cur = eval_at(x);
    double step = 0.5;
    int local = 1;
    while (local < per_seed && step > 2e-3) {
      bool improved = false;
      for (int k = 0; k < nv && local < per_seed; ++k) {
        for (const double sg : {1.0, -1.0}) {
          if (local >= per_seed) break;
          VectorXd xt = x;
          xt(k) += sg * step;
          EvalPoint ev = eval_at(xt);
          ++local;
          if (ev.merit < cur.merit) {
            cur = ev;
            x = xt;
            improved = true;
          }
        }
      }
      if (!improved) step *= 0.5;
    }
  }

  TuneResult out;
  out.evaluations = evals;
  if (best.valid && best.violation == 0.0) {
    out.feasible = true;
    out.weights = best.w;
    out.delta = best.delta;
    out.K = best.K;
    out.alpha = best.alpha;
    out.lhat_value = best.lhat_value;
    out.beta = best.beta;
    out.objective = best.merit;
  } else {
    out.feasible = false;
    const EvalPoint& p = least_infeasible.valid ? least_infeasible : best;
    out.alpha = p.alpha;
    out.lhat_value = p.lhat_value;
    out.beta = p.beta;
    if (!p.valid)
      out.dominant_violation = "no-feasible-gain";
    else if (p.alpha >= 1.0 - opts.feas_margin)
      out.dominant_violation = "alpha>=1";
    else if (p.lhat_value <= opts.feas_margin)
      out.dominant_violation = "Lhat<=0";
    else
      out.dominant_violation = "beta>=1";
  }
  return out;
}

DesignOutcome design_controller(const Subsystem& sub, const NeighborShapes& shapes,
                                const DesignOptions& opts) {
  DesignOutcome out;
  LqWeights w;
  double delta = opts.delta;
  MatrixXd K;

  if (opts.fixed_weights.has_value()) {
    w = *opts.fixed_weights;
    try {
      K = lq_gain(sub.A, sub.B, w);
    } catch (const std::exception&) {
      out.reject_step = "1:tune-gain";
      out.reject_reason = "no-feasible-gain";
      return out;
    }
  } else {
    TuneResult tuned = tune_gain(sub, shapes, opts.mu_alpha, opts.mu_beta, opts);
    if (!tuned.feasible) {
      out.reject_step = "1:tune-gain";
      out.reject_reason =
          tuned.dominant_violation.empty() ? "no-feasible-gain" : tuned.dominant_violation;
      return out;
    }
    w = tuned.weights;
    delta = tuned.delta;
    K = tuned.K;
  }

  TubeController ctrl;
  ctrl.K = K;
  ctrl.delta = delta;
  ctrl.horizon = opts.horizon;
  ctrl.stage_weights = w;

  // Step: alpha gate.
  ctrl.alpha = alpha_metric(sub, shapes, K);
  if (!(ctrl.alpha < 1.0)) {
    out.reject_step = "1:alpha";
    out.reject_reason = "alpha>=1";
    return out;
  }
  // Step 2: disturbance set and RPI tube.
  std::vector<std::pair<MatrixXd, Zonotope>> blocks;
  for (const int j : sub.neighbor_ids()) blocks.emplace_back(sub.couplings.at(j), shapes.at(j).zono);
  const Zonotope W = disturbance_set(blocks, sub.nx());
  try {
    ctrl.Z = mrpi_outer(sub.A + sub.B * K, W, delta);
  } catch (const std::exception&) {
    out.reject_step = "2:rpi";
    out.reject_reason = "no-feasible-gain";
    return out;
  }
  // Step 3: state tightening with lhat chosen at its upper bound.
  const LhatResult L = lhat(sub, shapes, K, delta, sub.X.generators);
  ctrl.lhat = L.value;
  if (!(ctrl.lhat > 0.0)) {
    out.reject_step = "3:lhat";
    out.reject_reason = "Lhat<=0";
    return out;
  }
  ctrl.Xhat = Zonotope(VectorXd::Zero(sub.nx()), sub.X.generators, ctrl.lhat * sub.X.scale);
  ctrl.Xhat_hrep = HPolytope{sub.X_hrep.normals, ctrl.lhat * sub.X_hrep.offsets};
  // Step 4: input tightening.
  const BetaResult bres = beta_metric(K, ctrl.Z, sub.U);
  ctrl.beta = bres.beta;
  if (!(ctrl.beta < 1.0)) {
    out.reject_step = "4:beta";
    out.reject_reason = "beta>=1";
    return out;
  }
  ctrl.V = HPolytope{sub.U.normals, sub.U.offsets - bres.shrink};
  // Step 5: terminal ingredients.
  try {
    TerminalIngredients ti = terminal_ingredients(sub.A, sub.B, ctrl.Xhat, ctrl.V, w);
    ctrl.terminal_cost = ti.P_f;
    ctrl.aux_gain = ti.K_aux;
    ctrl.terminal_set = ti.X_f;
  } catch (const std::exception&) {
    out.reject_step = "5:terminal";
    out.reject_reason = "empty-terminal-set";
    return out;
  }

  if (!verify_tightening(sub, ctrl))
    throw std::logic_error("design_controller: tightening inclusions failed verification");
  out.controller = std::move(ctrl);
  return out;
}

SmallGainResult smallgain_certificate(const std::vector<const Subsystem*>& subs,
                                      const std::map<int, MatrixXd>& gains) {
  SmallGainResult out;
  const int M = static_cast<int>(subs.size());
  std::map<int, int> index;
  for (int i = 0; i < M; ++i) {
    out.order.push_back(subs[i]->id);
    index[subs[i]->id] = i;
  }
  out.gamma = MatrixXd::Zero(M, M);
  for (int i = 0; i < M; ++i) {
    const Subsystem& si = *subs[i];
    const MatrixXd& K = gains.at(si.id);
    const MatrixXd F = si.A + si.B * K;
    if (!is_schur(F)) throw std::invalid_argument("smallgain_certificate: a closed loop is not Schur");
    for (const int j : si.neighbor_ids()) {
      const auto it = index.find(j);
      if (it == index.end()) throw std::invalid_argument("smallgain_certificate: dangling neighbor id");
      const Subsystem& sj = *subs[it->second];
      const MatrixXd Fj_pinv = pseudo_inverse(sj.X_hrep.normals);
      out.gamma(i, it->second) =
          coupling_series(si.X_hrep.normals, F, si.couplings.at(j) * Fj_pinv, 1e6);
    }
  }
  out.rho = spectral_radius(out.gamma);
  out.schur = out.rho < 1.0;
  return out;
}

bool verify_tightening(const Subsystem& sub, const TubeController& ctrl, double tol) {
  const std::array<Zonotope, 2> state_parts{ctrl.Xhat, ctrl.Z.set};
  if (!sum_in_polytope(state_parts, sub.X_hrep, tol)) return false;
  const Zonotope KZ = linear_image(ctrl.K, ctrl.Z.set);
  for (int r = 0; r < sub.U.num_faces(); ++r) {
    const VectorXd h = sub.U.normals.row(r).transpose();
    if (polytope_support(ctrl.V, h) + support(KZ, h) > sub.U.offsets(r) + tol) return false;
  }
  return true;
}

}  // namespace pnpmpc

#include "pnpmpc/powernet.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "pnpmpc/linalg.hpp"

namespace pnpmpc::powernet {

void AreaParams::validate() const {
  if (!(H > 0 && R > 0 && D > 0 && Tt > 0 && Tg > 0))
    throw std::invalid_argument("AreaParams: physical constants must be positive");
  if (!(theta_bound > 0 && u_bound > 0))
    throw std::invalid_argument("AreaParams: constraint bounds must be positive");
  for (const double b : extra_bounds)
    if (!(b > 0)) throw std::invalid_argument("AreaParams: state bounds must be positive");
  for (const auto& [j, P] : tie)
    if (!(P > 0)) throw std::invalid_argument("AreaParams: tie coefficients must be positive");
}

ContinuousArea build_area(const AreaParams& p) {
  p.validate();
  double tie_sum = 0.0;
  for (const auto& [j, P] : p.tie) tie_sum += P;
  const double H2 = 2.0 * p.H;

  ContinuousArea c;
  c.A = MatrixXd::Zero(4, 4);
  c.A(0, 1) = 1.0;
  c.A(1, 0) = -tie_sum / H2;
  c.A(1, 1) = -p.D / H2;
  c.A(1, 2) = 1.0 / H2;
  c.A(2, 2) = -1.0 / p.Tt;
  c.A(2, 3) = 1.0 / p.Tt;
  c.A(3, 1) = -1.0 / (p.R * p.Tg);
  c.A(3, 3) = -1.0 / p.Tg;
  c.B = MatrixXd::Zero(4, 1);
  c.B(3, 0) = 1.0 / p.Tg;
  c.L = MatrixXd::Zero(4, 1);
  c.L(1, 0) = -1.0 / H2;
  for (const auto& [j, P] : p.tie) {
    MatrixXd Aij = MatrixXd::Zero(4, 4);
    Aij(1, 0) = P / H2;
    c.A_ij[j] = Aij;
  }
  return c;
}

Subsystem discretize(int id, const ContinuousArea& cont, const AreaParams& p, double T) {
  if (!(T > 0)) throw std::invalid_argument("discretize: sampling time must be positive");
  const int n = static_cast<int>(cont.A.rows());
  // Augmented exponential exp([[A, I], [0, 0]] T) = [[A_d, Phi1], [0, I]]
  // gives the exact input integral Phi1 = int_0^T exp(A s) ds.
  MatrixXd aug = MatrixXd::Zero(2 * n, 2 * n);
  aug.topLeftCorner(n, n) = cont.A;
  aug.topRightCorner(n, n) = MatrixXd::Identity(n, n);
  const MatrixXd E = expm(aug * T);
  const MatrixXd Ad = E.topLeftCorner(n, n);
  const MatrixXd Phi1 = E.topRightCorner(n, n);

  Subsystem s;
  s.id = id;
  s.A = Ad;
  s.B = Phi1 * cont.B;
  s.load_gain = Phi1 * cont.L;
  for (const auto& [j, Aij] : cont.A_ij) s.couplings[j] = Phi1 * Aij;

  VectorXd bounds(4);
  bounds << p.theta_bound, p.extra_bounds[0], p.extra_bounds[1], p.extra_bounds[2];
  s.X = Zonotope::box(bounds);
  s.X_hrep = HPolytope::box(bounds);
  s.U = HPolytope::box(VectorXd::Constant(1, p.u_bound));
  return s;
}

double tie_power(double P_ij, double theta_i, double theta_j) {
  return P_ij * (theta_i - theta_j);
}

void agc_target(double load, VectorXd& x_target, VectorXd& u_target) {
  x_target.resize(4);
  x_target << 0.0, 0.0, load, load;
  u_target = VectorXd::Constant(1, load);
}

void attach_rebuilder(Network& net, std::map<int, AreaParams> params, double sample_time) {
  net.param_dependent = true;
  net.rebuild = [params = std::move(params), sample_time](int id, const Network& n) {
    const Subsystem& stored = n.subsystems.at(id);
    auto it = params.find(id);
    if (it == params.end()) return stored;  // no parameter data: keep as stored
    AreaParams p = it->second;
    // The tie list follows the network's current coupling topology.
    std::erase_if(p.tie, [&](const auto& kv) { return stored.couplings.count(kv.first) == 0; });
    for (const auto& [j, Aij] : stored.couplings)
      if (p.tie.count(j) == 0)
        throw std::invalid_argument("powernet rebuild: coupling without a registered tie parameter");
    Subsystem fresh = discretize(id, build_area(p), p, sample_time);
    return fresh;
  };
}

PnpOutcome plug_area(Network& net, std::map<int, AreaParams>& params, double sample_time, int id,
                     AreaParams p, const DesignOptions& opts) {
  if (params.count(id) != 0 || net.has(id))
    throw std::invalid_argument("plug_area: id already present");
  for (const auto& [j, P] : p.tie)
    if (!net.has(j)) throw std::invalid_argument("plug_area: tie to unknown area");

  std::map<int, AreaParams> updated = params;
  updated[id] = p;
  for (const auto& [j, P] : p.tie) updated.at(j).tie[id] = P;
  attach_rebuilder(net, updated, sample_time);

  Subsystem fresh = discretize(id, build_area(p), p, sample_time);
  std::map<int, MatrixXd> incoming;
  for (const auto& [j, P] : p.tie) {
    AreaParams pj = updated.at(j);
    // exact block the successor will carry after its rebuild
    incoming[j] = discretize(j, build_area(pj), pj, sample_time).couplings.at(id);
  }
  PnpOutcome out = plug_in(net, std::move(fresh), incoming, opts);
  if (out.ok) {
    params = std::move(updated);
  } else {
    attach_rebuilder(net, params, sample_time);  // restore the old registry
  }
  return out;
}

PnpOutcome unplug_area(Network& net, std::map<int, AreaParams>& params, double sample_time, int id,
                       const DesignOptions& opts) {
  PnpOutcome out = unplug(net, id, opts);
  if (out.ok) {
    params.erase(id);
    for (auto& [j, pj] : params) pj.tie.erase(id);
    attach_rebuilder(net, params, sample_time);
  }
  return out;
}

Scenario make_network(const std::map<int, AreaParams>& params, double sample_time) {
  Scenario sc;
  sc.sample_time = sample_time;
  sc.params = params;
  for (const auto& [id, p] : params) {
    // Tie symmetry: P_ij must match P_ji when both sides list it.
    for (const auto& [j, P] : p.tie) {
      if (params.count(j) == 0) throw std::invalid_argument("make_network: tie to unknown area");
      const auto& other = params.at(j).tie;
      const auto back = other.find(id);
      if (back != other.end() && std::abs(back->second - P) > 1e-12)
        throw std::invalid_argument("make_network: asymmetric tie coefficients");
      if (id < j) sc.ties.emplace_back(id, j, P);
    }
    sc.network.subsystems[id] = discretize(id, build_area(p), p, sample_time);
  }
  attach_rebuilder(sc.network, params, sample_time);
  return sc;
}

Scenario scenario(int id, double sample_time) {
  if (id < 1 || id > 3) throw std::invalid_argument("scenario: id must be 1, 2 or 3");
  std::map<int, AreaParams> P;
  P[1] = AreaParams{12.0, 0.05, 0.7, 0.65, 0.1, 0.1, 0.5, {1.0, 2.5, 2.5}, {}};
  P[2] = AreaParams{10.0, 0.0625, 0.9, 0.4, 0.1, 0.1, 0.65, {1.0, 2.5, 2.5}, {}};
  P[3] = AreaParams{8.0, 0.08, 0.9, 0.3, 0.1, 0.1, 0.65, {1.0, 2.5, 2.5}, {}};
  P[4] = AreaParams{8.0, 0.08, 0.7, 0.6, 0.1, 0.1, 0.55, {1.0, 2.5, 2.5}, {}};
  P[5] = AreaParams{10.0, 0.05, 0.86, 0.8, 0.15, 0.1, 0.5, {1.0, 2.5, 2.5}, {}};

  const auto connect = [&](int a, int b, double Pab) {
    P[a].tie[b] = Pab;
    P[b].tie[a] = Pab;
  };
  connect(1, 2, 4.0);
  connect(2, 3, 2.0);
  connect(3, 4, 2.0);
  if (id >= 2) {
    connect(4, 5, 3.0);
    connect(2, 5, 3.0);
  }

  if (id == 1) P.erase(5);
  if (id == 3) {
    // Scenario 2 without area 4: ties through 4 disappear.
    P.erase(4);
    P[3].tie.erase(4);
    P[5].tie.erase(4);
  }

  Scenario sc = make_network(P, sample_time);

  auto& ev = sc.schedule.events;
  if (id == 1) {
    ev = {{5, 1, +0.15}, {15, 2, -0.15}, {20, 3, +0.12}, {40, 3, -0.12}, {40, 4, +0.28}};
  } else if (id == 2) {
    ev = {{5, 1, +0.10},  {15, 2, -0.17}, {20, 1, +0.05}, {20, 2, +0.12},
          {20, 3, -0.10}, {30, 3, +0.10}, {40, 4, +0.08}, {40, 5, -0.15}};
  } else {
    ev = {{5, 1, +0.12}, {15, 2, -0.15}, {20, 5, +0.20},
          {40, 2, +0.15}, {40, 3, +0.13}, {40, 5, -0.20}};
  }
  std::stable_sort(ev.begin(), ev.end(),
                   [](const LoadEvent& a, const LoadEvent& b) { return a.time < b.time; });
  return sc;
}

}  // namespace pnpmpc::powernet

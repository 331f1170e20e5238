#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "pnpmpc/mpc.hpp"
#include "pnpmpc/powernet.hpp"

using namespace pnpmpc;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

MatrixXd scalar(double v) { return MatrixXd::Constant(1, 1, v); }

Target zero_target(int n, int m) { return Target{VectorXd::Zero(n), VectorXd::Zero(m)}; }

// Scalar subsystem with huge constraint sets, for comparisons against the
// unconstrained LQ law.
Subsystem loose_scalar(double a, double b) {
  Subsystem s;
  s.id = 1;
  s.A = scalar(a);
  s.B = scalar(b);
  s.X = Zonotope::box(VectorXd::Constant(1, 1e6));
  s.X_hrep = HPolytope::box(VectorXd::Constant(1, 1e6));
  s.U = HPolytope::box(VectorXd::Constant(1, 1e6));
  return s;
}

}  // namespace

TEST_CASE("mpc_step: state inside the tube keeps the nominal at the origin") {
  // coupled scalar subsystem so the tube has volume
  Subsystem s;
  s.id = 1;
  s.A = scalar(0.9);
  s.B = scalar(1.0);
  s.couplings[2] = scalar(0.1);
  s.X = Zonotope::box(VectorXd::Constant(1, 1.0));
  s.X_hrep = HPolytope::box(VectorXd::Constant(1, 1.0));
  s.U = HPolytope::box(VectorXd::Constant(1, 1.0));
  NeighborShapes shapes;
  shapes[2] = NeighborShape{HPolytope::box(VectorXd::Constant(1, 1.0)),
                            Zonotope::box(VectorXd::Constant(1, 1.0))};
  DesignOutcome d = design_controller(s, shapes);
  REQUIRE(d.ok());
  const TubeController& c = *d.controller;

  const double zedge = support(c.Z.set, VectorXd::Constant(1, 1.0));
  REQUIRE(zedge > 0.01);
  const VectorXd x = VectorXd::Constant(1, 0.8 * zedge);
  MpcResult r = mpc_step(c, s, x, zero_target(1, 1));
  REQUIRE(r.status == MpcStatus::Feasible);
  CHECK(r.solution.xhat0.norm() <= 1e-6);
  CHECK(r.solution.v0.norm() <= 1e-6);
  CHECK((r.solution.u - c.K * x).lpNorm<Eigen::Infinity>() <= 1e-5);

  // far outside the feasibility region
  MpcResult rf = mpc_step(c, s, VectorXd::Constant(1, 50.0), zero_target(1, 1));
  CHECK(rf.status == MpcStatus::Infeasible);
}

TEST_CASE("mpc_step approaches the unconstrained LQ law on loose sets") {
  Subsystem s = loose_scalar(1.0, 1.0);
  DesignOptions opts;
  opts.fixed_weights = LqWeights{scalar(1.0), scalar(1.0)};
  opts.horizon = 30;
  DesignOutcome d = design_controller(s, {}, opts);
  REQUIRE(d.ok());
  const TubeController& c = *d.controller;

  const MatrixXd K0 = oracles::finite_lq_gain(s.A, s.B, scalar(1.0), scalar(1.0),
                                              c.terminal_cost, 30);
  for (const double x0 : {-2.0, -0.5, 1.0, 3.0}) {
    const VectorXd x = VectorXd::Constant(1, x0);
    MpcResult r = mpc_step(c, s, x, zero_target(1, 1));
    REQUIRE(r.status == MpcStatus::Feasible);
    CHECK(r.solution.u(0) == doctest::Approx((K0 * x)(0)).epsilon(1e-4));
  }
}

TEST_CASE("mpc_step: nominal trajectory satisfies the nominal dynamics exactly") {
  auto sc = powernet::scenario(1);
  auto outcomes = design_all(sc.network, {});
  for (auto& [id, dd] : outcomes) REQUIRE(dd.ok());
  const Subsystem& s = sc.network.subsystems.at(1);
  const TubeController& c = sc.network.controllers.at(1);

  Target t;
  powernet::agc_target(0.15, t.x, t.u);
  VectorXd x = VectorXd::Zero(4);
  x(0) = 0.01;
  MpcResult r = mpc_step(c, s, x, t);
  REQUIRE(r.status == MpcStatus::Feasible);
  const VectorXd cterm = t.x - s.A * t.x - s.B * t.u;
  for (int k = 0; k < c.horizon; ++k) {
    const VectorXd res = r.solution.nominal_x.col(k + 1) -
                         (s.A * r.solution.nominal_x.col(k) + s.B * r.solution.nominal_v.col(k) + cterm);
    CHECK(res.lpNorm<Eigen::Infinity>() <= 1e-8);
  }
  // tube membership of the optimized split
  CHECK(zonotope_member(c.Z.set, VectorXd(x - r.solution.xhat0), 1e-7));
  // tightened constraints hold along the nominal trajectory
  for (int k = 0; k < c.horizon; ++k) {
    CHECK(c.Xhat_hrep.contains(r.solution.nominal_x.col(k), 1e-7));
    CHECK(c.V.contains(r.solution.nominal_v.col(k), 1e-7));
  }
}

TEST_CASE("centralized_mpc_step: origin equilibrium and decoupled separation") {
  // two decoupled scalar subsystems
  Subsystem s1 = loose_scalar(0.8, 1.0);
  Subsystem s2 = loose_scalar(0.5, 1.0);
  s2.id = 2;
  std::vector<CentralWeights> w(2);
  w[0].weights = LqWeights{scalar(1.0), scalar(1.0)};
  w[0].terminal = dare_solve(s1.A, s1.B, w[0].weights);
  w[1].weights = LqWeights{scalar(2.0), scalar(0.5)};
  w[1].terminal = dare_solve(s2.A, s2.B, w[1].weights);
  std::vector<Target> tgts{zero_target(1, 1), zero_target(1, 1)};

  VectorXd x0 = VectorXd::Zero(2);
  CentralResult r0 = centralized_mpc_step({&s1, &s2}, w, x0, tgts, 10);
  REQUIRE(r0.status == MpcStatus::Feasible);
  CHECK(r0.u.lpNorm<Eigen::Infinity>() <= 1e-7);

  // separation: block solution equals per-subsystem solutions
  VectorXd x(2);
  x << 1.5, -0.7;
  CentralResult r = centralized_mpc_step({&s1, &s2}, w, x, tgts, 10);
  REQUIRE(r.status == MpcStatus::Feasible);
  CentralResult ra = centralized_mpc_step({&s1}, {w[0]}, x.head(1), {tgts[0]}, 10);
  CentralResult rb = centralized_mpc_step({&s2}, {w[1]}, x.tail(1), {tgts[1]}, 10);
  CHECK(r.u(0) == doctest::Approx(ra.u(0)).epsilon(1e-7));
  CHECK(r.u(1) == doctest::Approx(rb.u(0)).epsilon(1e-7));

  // infeasibility: tight state box unreachable next step
  Subsystem tight = s1;
  tight.X = Zonotope::box(VectorXd::Constant(1, 0.1));
  tight.X_hrep = HPolytope::box(VectorXd::Constant(1, 0.1));
  tight.U = HPolytope::box(VectorXd::Constant(1, 0.01));
  CentralResult ri = centralized_mpc_step({&tight}, {w[0]}, VectorXd::Constant(1, 10.0),
                                          {zero_target(1, 1)}, 5);
  CHECK(ri.status == MpcStatus::Infeasible);
}

TEST_CASE("mpc cost decreases along the regulation closed loop") {
  // Lyapunov decrease (Eq-38-style) for one coupled power area under
  // zero load, starting from a feasible state, with the neighbor frozen at 0.
  auto sc = powernet::scenario(1);
  auto outcomes = design_all(sc.network, {});
  for (auto& [id, dd] : outcomes) REQUIRE(dd.ok());
  const Subsystem& s = sc.network.subsystems.at(3);
  const TubeController& c = sc.network.controllers.at(3);

  VectorXd x = VectorXd::Zero(4);
  x(0) = 0.02;
  x(1) = 0.05;
  double prev_cost = -1.0;
  VectorXd prev_stage = VectorXd::Zero(1);
  for (int t = 0; t < 25; ++t) {
    MpcResult r = mpc_step(c, s, x, zero_target(4, 1));
    REQUIRE(r.status == MpcStatus::Feasible);
    if (t > 0) {
      const double decrease = prev_cost - r.solution.cost;
      CHECK(decrease >= prev_stage(0) - 1e-6);
    }
    const VectorXd dx = r.solution.nominal_x.col(0);
    const VectorXd dv = r.solution.nominal_v.col(0);
    prev_stage(0) = dx.dot(c.stage_weights.Q * dx) + dv.dot(c.stage_weights.R * dv);
    prev_cost = r.solution.cost;
    x = s.A * x + s.B * r.solution.u;  // no disturbance: isolated regulation run
  }
  CHECK(x.lpNorm<Eigen::Infinity>() <= 1e-3);
}

#include <doctest.h>

#include <cmath>

#include "pnpmpc/linalg.hpp"
#include "pnpmpc/tube_synth.hpp"

using namespace pnpmpc;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

MatrixXd scalar(double v) { return MatrixXd::Constant(1, 1, v); }

// Scalar subsystem with one neighbor coupling `g`, state box [-1, 1],
// input box [-u, u].
Subsystem scalar_subsystem(double a, double b, double g, double ubound = 1.0) {
  Subsystem s;
  s.id = 1;
  s.A = scalar(a);
  s.B = scalar(b);
  if (g != 0.0) s.couplings[2] = scalar(g);
  s.X = Zonotope::box(VectorXd::Constant(1, 1.0));
  s.X_hrep = HPolytope::box(VectorXd::Constant(1, 1.0));
  s.U = HPolytope::box(VectorXd::Constant(1, ubound));
  return s;
}

NeighborShapes unit_neighbor() {
  NeighborShapes out;
  out[2] = NeighborShape{HPolytope::box(VectorXd::Constant(1, 1.0)),
                         Zonotope::box(VectorXd::Constant(1, 1.0))};
  return out;
}

}  // namespace

TEST_CASE("alpha_metric: empty sum and scalar geometric series") {
  Subsystem iso = scalar_subsystem(0.5, 0.0, 0.0);
  CHECK(alpha_metric(iso, {}, scalar(0.0)) == doctest::Approx(0.0));

  Subsystem s = scalar_subsystem(0.5, 0.0, 0.1);
  CHECK(alpha_metric(s, unit_neighbor(), scalar(0.0)) == doctest::Approx(0.2).epsilon(1e-9));

  Subsystem unstable = scalar_subsystem(1.5, 0.0, 0.1);
  CHECK_THROWS_AS(alpha_metric(unstable, unit_neighbor(), scalar(0.0)), std::invalid_argument);
}

TEST_CASE("lhat: scalar arithmetic, empty coupling, nonpositive case") {
  Subsystem s = scalar_subsystem(0.5, 0.0, 0.1);
  LhatResult L = lhat(s, unit_neighbor(), scalar(0.0), 0.1, s.X.generators);
  CHECK(L.per_row(0) == doctest::Approx(0.8).epsilon(1e-9));
  CHECK(L.value == doctest::Approx(0.7).epsilon(1e-9));

  Subsystem iso = scalar_subsystem(0.5, 0.0, 0.0);
  LhatResult L0 = lhat(iso, {}, scalar(0.0), 0.0, iso.X.generators);
  CHECK(L0.value == doctest::Approx(1.0));

  Subsystem heavy = scalar_subsystem(0.5, 0.0, 1.0);
  LhatResult Lh = lhat(heavy, unit_neighbor(), scalar(0.0), 0.0, heavy.X.generators);
  CHECK(Lh.value <= 0.0);
}

TEST_CASE("beta_metric: zero gain, scalar value, oversized tube") {
  HPolytope U = HPolytope::box(VectorXd::Constant(1, 1.0));
  RpiResult Z;
  Z.set = Zonotope::box(VectorXd::Constant(1, 0.3));
  BetaResult b0 = beta_metric(scalar(0.0), Z, U);
  CHECK(b0.beta == doctest::Approx(0.0));

  BetaResult b1 = beta_metric(scalar(0.5), Z, U);
  CHECK(b1.beta == doctest::Approx(0.15).epsilon(1e-12));

  Z.set = Zonotope::box(VectorXd::Constant(1, 3.0));
  BetaResult b2 = beta_metric(scalar(0.5), Z, U);
  CHECK(b2.beta == doctest::Approx(1.5).epsilon(1e-12));
  CHECK(b2.beta >= 1.0);
}

TEST_CASE("terminal_ingredients: stable uncontrolled, integrator, empty input set") {
  LqWeights w{scalar(1.0), scalar(1.0)};
  // a = 0.5, b = 0: already invariant, X_f = Xhat
  Zonotope Xhat = Zonotope::box(VectorXd::Constant(1, 1.0));
  HPolytope V = HPolytope::box(VectorXd::Constant(1, 1.0));
  TerminalIngredients t1 = terminal_ingredients(scalar(0.5), scalar(0.0), Xhat, V, w);
  CHECK(t1.K_aux.norm() == doctest::Approx(0.0));
  CHECK(polytope_support(t1.X_f, VectorXd::Constant(1, 1.0)) == doctest::Approx(1.0).epsilon(1e-8));

  // a = b = 1: K_aux ~ -0.618, X_f = [-xbar, xbar], xbar = min(1, 0.5/0.618)
  HPolytope Vs = HPolytope::box(VectorXd::Constant(1, 0.5));
  TerminalIngredients t2 = terminal_ingredients(scalar(1.0), scalar(1.0), Xhat, Vs, w);
  const double kaux = -(1.0 + std::sqrt(5.0)) / (3.0 + std::sqrt(5.0));
  CHECK(t2.K_aux(0, 0) == doctest::Approx(kaux).epsilon(1e-9));
  const double xbar = std::min(1.0, 0.5 / std::abs(kaux));
  CHECK(polytope_support(t2.X_f, VectorXd::Constant(1, 1.0)) == doctest::Approx(xbar).epsilon(1e-7));
  CHECK(polytope_support(t2.X_f, VectorXd::Constant(1, -1.0)) == doctest::Approx(xbar).epsilon(1e-7));

  // invariance and admissibility spot checks
  const MatrixXd Ak = scalar(1.0) + scalar(1.0) * t2.K_aux;
  for (double x = -xbar; x <= xbar; x += xbar / 4) {
    CHECK(t2.X_f.contains(Ak * VectorXd::Constant(1, x), 1e-8));
    CHECK(Vs.contains(t2.K_aux * VectorXd::Constant(1, x), 1e-8));
    // terminal cost decrease along the auxiliary law
    const VectorXd xv = VectorXd::Constant(1, x);
    const VectorXd xn = Ak * xv;
    const double dec = xn.dot(t2.P_f * xn) - xv.dot(t2.P_f * xv);
    const VectorXd un = t2.K_aux * xv;
    CHECK(dec <= -(xv.dot(w.Q * xv) + un.dot(w.R * un)) + 1e-8);
  }

  HPolytope empty{MatrixXd::Identity(1, 1), VectorXd::Constant(1, -0.1)};
  CHECK_THROWS_AS(terminal_ingredients(scalar(1.0), scalar(1.0), Xhat, empty, w),
                  std::runtime_error);
}

TEST_CASE("design_controller: decoupled stable scalar subsystem") {
  Subsystem s = scalar_subsystem(0.5, 1.0, 0.0);
  DesignOutcome d = design_controller(s, {});
  REQUIRE(d.ok());
  const TubeController& c = *d.controller;
  CHECK(c.Z.set.num_generators() == 0);  // tube degenerates to {0}
  CHECK(c.lhat == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(c.beta == doctest::Approx(0.0));
  // V = U
  CHECK((c.V.offsets - s.U.offsets).lpNorm<Eigen::Infinity>() <= 1e-12);
  CHECK(verify_tightening(s, c));
}

TEST_CASE("design_controller: overwhelming coupling is rejected with the alpha reason") {
  Subsystem s = scalar_subsystem(0.9, 1.0, 1.5);
  DesignOptions opts;
  opts.tune_budget = 120;
  DesignOutcome d = design_controller(s, unit_neighbor(), opts);
  REQUIRE_FALSE(d.ok());
  CHECK(d.reject_reason == "alpha>=1");
}

TEST_CASE("design_controller: coupled scalar succeeds and satisfies inclusions") {
  Subsystem s = scalar_subsystem(1.0, 1.0, 0.1);
  DesignOutcome d = design_controller(s, unit_neighbor());
  REQUIRE(d.ok());
  const TubeController& c = *d.controller;
  CHECK(c.alpha < 1.0);
  CHECK(c.lhat > 0.0);
  CHECK(c.beta < 1.0);
  CHECK(verify_tightening(s, c));
  CHECK(rpi_support_check(s.A + s.B * c.K, disturbance_set({{scalar(0.1), unit_neighbor()[2].zono}}, 1),
                          c.Z.set));
}

TEST_CASE("tune_gain: decoupled feasible at zero objective, coupled beats the seed") {
  Subsystem iso = scalar_subsystem(0.5, 1.0, 0.0);
  TuneResult t0 = tune_gain(iso, {}, 1.0, 1.0);
  REQUIRE(t0.feasible);
  CHECK(t0.objective == doctest::Approx(0.0));

  Subsystem s = scalar_subsystem(1.0, 1.0, 0.1);
  // seed objective as an upper-bound oracle
  DesignOptions opts;
  TuneResult t1 = tune_gain(s, unit_neighbor(), 1.0, 1.0, opts);
  REQUIRE(t1.feasible);
  MatrixXd Kseed = lq_gain(s.A, s.B, LqWeights{scalar(1.0), scalar(1.0)});
  const double alpha_seed = alpha_metric(s, unit_neighbor(), Kseed);
  const RpiResult Zseed =
      mrpi_outer(s.A + s.B * Kseed, disturbance_set({{scalar(0.1), unit_neighbor()[2].zono}}, 1), 1e-4);
  const double beta_seed = beta_metric(Kseed, Zseed, s.U).beta;
  CHECK(t1.objective <= alpha_seed + beta_seed + 1e-9);
  CHECK(t1.alpha < 1.0);
  CHECK(t1.lhat_value > 0.0);
  CHECK(t1.beta < 1.0);

  Subsystem heavy = scalar_subsystem(0.9, 1.0, 1.5);
  DesignOptions small;
  small.tune_budget = 80;
  TuneResult t2 = tune_gain(heavy, unit_neighbor(), 1.0, 1.0, small);
  CHECK_FALSE(t2.feasible);
}

TEST_CASE("lhat monotonicity under neighbor set growth") {
  Subsystem one = scalar_subsystem(0.5, 0.0, 0.1);
  NeighborShapes shapes = unit_neighbor();
  const double L1 = lhat(one, shapes, scalar(0.0), 1e-4, one.X.generators).value;

  Subsystem two = one;
  two.couplings[3] = scalar(0.05);
  shapes[3] = shapes[2];
  const double L2 = lhat(two, shapes, scalar(0.0), 1e-4, two.X.generators).value;
  CHECK(L2 < L1);
}

TEST_CASE("smallgain_certificate: decoupled, symmetric chain, Gershgorin consistency") {
  Subsystem a = scalar_subsystem(0.5, 0.0, 0.0);
  Subsystem b = a;
  b.id = 2;
  std::map<int, MatrixXd> gains{{1, scalar(0.0)}, {2, scalar(0.0)}};
  SmallGainResult g0 = smallgain_certificate({&a, &b}, gains);
  CHECK(g0.rho == doctest::Approx(0.0));
  CHECK(g0.schur);

  Subsystem c1 = scalar_subsystem(0.5, 0.0, 0.1);
  c1.couplings.clear();
  c1.couplings[2] = scalar(0.1);
  Subsystem c2 = c1;
  c2.id = 2;
  c2.couplings.clear();
  c2.couplings[1] = scalar(0.1);
  SmallGainResult g1 = smallgain_certificate({&c1, &c2}, gains);
  CHECK(g1.gamma(0, 1) == doctest::Approx(0.2).epsilon(1e-9));
  CHECK(g1.rho == doctest::Approx(0.2).epsilon(1e-9));
  CHECK(g1.schur);
}

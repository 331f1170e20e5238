#pragma once

#include <array>
#include <map>
#include <vector>

#include "pnpmpc/pnp.hpp"
#include "pnpmpc/tube_synth.hpp"

namespace pnpmpc::powernet {

/// One generation area of the AGC model. State x = (dtheta, domega, dPm, dPv),
/// input u = dPref, exogenous load dPL.
struct AreaParams {
  double H = 10.0;   // inertia constant (sec)
  double R = 0.05;   // speed regulation
  double D = 1.0;    // load-frequency coefficient
  double Tt = 0.5;   // turbine time constant (sec)
  double Tg = 0.1;   // governor time constant (sec)
  double theta_bound = 0.1;
  double u_bound = 0.5;
  // The model only constrains dtheta; full-rank state boxes need bounds on
  // the remaining states. These are artifact defaults, wide relative to the
  // simulated excursions, and configurable per area.
  std::array<double, 3> extra_bounds{1.0, 2.5, 2.5};  // |domega|, |dPm|, |dPv|
  std::map<int, double> tie;                          // j -> P_ij

  void validate() const;
};

/// Continuous-time area matrices.
struct ContinuousArea {
  MatrixXd A;                      // 4 x 4
  MatrixXd B;                      // 4 x 1
  MatrixXd L;                      // 4 x 1 load gain
  std::map<int, MatrixXd> A_ij;    // tie couplings
};

/// Load step events, applied cumulatively at exact sample instants.
struct LoadEvent {
  double time = 0.0;
  int area = 0;
  double dP = 0.0;
};
struct LoadSchedule {
  std::vector<LoadEvent> events;  // sorted by time
};

/// Continuous-time matrices exactly per the linearized AGC area model,
/// including the tie-dependent entry -(sum_j P_ij)/(2 H) in the omega row.
ContinuousArea build_area(const AreaParams& p);

/// Exact discretization treating u, the load, and neighbor states as
/// zero-order-held exogenous signals: A_d = exp(A T), and the integral
/// operator int_0^T exp(A s) ds applied to B, L and every coupling block.
Subsystem discretize(int id, const ContinuousArea& cont, const AreaParams& p, double T);

/// Tie-line power exchanged between areas: P_ij (theta_i - theta_j).
double tie_power(double P_ij, double theta_i, double theta_j);

struct Scenario {
  Network network;
  LoadSchedule schedule;
  std::map<int, AreaParams> params;
  std::vector<std::tuple<int, int, double>> ties;  // (i, j, P_ij), i < j
  double sample_time = 1.0;
};

/// The three case-study networks: 1 = four areas in a chain (ties 1-2, 2-3,
/// 3-4); 2 = plus area 5 tied to 2 and 4; 3 = scenario 2 without area 4.
Scenario scenario(int id, double sample_time = 1.0);

/// Builds a network from explicit parameters and symmetric ties.
Scenario make_network(const std::map<int, AreaParams>& params, double sample_time);

/// Target equilibrium (x^O, u^O) = ((0, 0, dPL, dPL), dPL) for a measured load.
void agc_target(double load, VectorXd& x_target, VectorXd& u_target);

/// Attaches the parameter-dependent rebuild hook (local A depends on the sum
/// of tie coefficients) to the network; marks it param_dependent.
void attach_rebuilder(Network& net, std::map<int, AreaParams> params, double sample_time);

/// Plugs a new generation area into a designed power network: registers its
/// parameters, symmetrizes ties, computes the exact coupling blocks on both
/// sides, and runs the transactional plug-in (redesigning the successors).
/// The params registry is updated only on success.
PnpOutcome plug_area(Network& net, std::map<int, AreaParams>& params, double sample_time, int id,
                     AreaParams p, const DesignOptions& opts = {});

/// Unplugs an area from a power network (parameter-dependent: successors are
/// rebuilt and redesigned transactionally). The params registry keeps the
/// removed area's record only on rejection.
PnpOutcome unplug_area(Network& net, std::map<int, AreaParams>& params, double sample_time, int id,
                       const DesignOptions& opts = {});

}  // namespace pnpmpc::powernet

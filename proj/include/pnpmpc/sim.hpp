#pragma once

#include <functional>
#include <map>
#include <vector>

#include "pnpmpc/mpc.hpp"
#include "pnpmpc/pnp.hpp"
#include "pnpmpc/powernet.hpp"

namespace pnpmpc {

enum class SimMode { Decentralized, Centralized };

struct AreaSample {
  VectorXd x;      // plant state at this step
  VectorXd u;      // applied input
  double load = 0.0;
  VectorXd v0;     // nominal input (equals u in centralized mode)
  VectorXd xhat0;  // nominal state (equals x in centralized mode)
  double cost = 0.0;
};

struct SimStep {
  double t = 0.0;
  std::map<int, AreaSample> per_area;
  std::map<int, double> loads;
};

struct SimTrace {
  std::vector<int> area_ids;
  std::vector<SimStep> steps;   // one entry per control step, truncated on failure
  SimStep final_state;          // state reached at t_end (no control computed)
  bool feasible = true;
  int failed_area = -1;         // -1 means the centralized problem failed
  double failed_time = -1.0;
};

struct SimOptions {
  double sample_time = 1.0;
  int horizon = 20;  // centralized horizon
  /// Maps the measured load to the tracking target; zero targets by default.
  std::function<Target(const Subsystem&, double)> target_policy;
  std::map<int, VectorXd> initial_state;  // zero by default
};

/// Closed-loop simulation of the coupled plant under decentralized tube MPC
/// or the centralized baseline. MPC solves for different areas run in
/// parallel within each step; the plant update uses the exact discrete
/// dynamics including coupling and load.
SimTrace simulate(const Network& net, const powernet::LoadSchedule& schedule, double t_end,
                  SimMode mode, const SimOptions& opts = {});

}  // namespace pnpmpc

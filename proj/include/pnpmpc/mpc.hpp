#pragma once

#include <vector>

#include "pnpmpc/tube_synth.hpp"

namespace pnpmpc {

/// Tracking target pair; (0, 0) recovers the regulation problem. The target
/// is expected to be an equilibrium of the load-augmented nominal model, so
/// the nominal prediction uses the affine offset c = x_t - A x_t - B u_t.
struct Target {
  VectorXd x;
  VectorXd u;
};

enum class MpcStatus { Feasible, Infeasible, SolverError };

struct MpcSolution {
  VectorXd v0;     // first nominal input
  VectorXd xhat0;  // optimized nominal initial state
  VectorXd u;      // applied input v0 + K (x - xhat0)
  double cost = 0.0;
  MatrixXd nominal_x;  // n x (N+1)
  MatrixXd nominal_v;  // m x N
};

struct MpcResult {
  MpcStatus status = MpcStatus::SolverError;
  MpcSolution solution;
};

/// Solves the local tube MPC problem at state x and applies the tube law.
/// Tube membership is encoded with generator auxiliary variables
/// x - xhat0 = Xi_z d, ||d||_inf <= l. Infeasibility (x outside the
/// feasibility region) is reported, never clipped.
MpcResult mpc_step(const TubeController& ctrl, const Subsystem& sub, const VectorXd& x,
                   const Target& target);

struct CentralWeights {
  LqWeights weights;
  MatrixXd terminal;
};

struct CentralResult {
  MpcStatus status = MpcStatus::SolverError;
  VectorXd u;  // stacked first inputs
  double cost = 0.0;
};

/// Plain (non-tube) MPC on the assembled collective model with the original
/// constraints; the baseline the decentralized scheme is compared against.
CentralResult centralized_mpc_step(const std::vector<const Subsystem*>& subs,
                                   const std::vector<CentralWeights>& weights,
                                   const VectorXd& x_all, const std::vector<Target>& targets,
                                   int horizon);

}  // namespace pnpmpc

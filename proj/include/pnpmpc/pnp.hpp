#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "pnpmpc/tube_synth.hpp"

namespace pnpmpc {

/// Registry of coupled subsystems with their tube controllers. Neighbor
/// topology is derived from the stored nonzero coupling blocks.
struct Network {
  std::map<int, Subsystem> subsystems;
  std::map<int, TubeController> controllers;
  bool param_dependent = false;
  /// Rebuilds a subsystem's local matrices after its coupling set changed
  /// (identity for networks whose local dynamics do not depend on neighbors).
  std::function<Subsystem(int, const Network&)> rebuild;

  std::vector<int> ids() const;
  bool has(int i) const { return subsystems.count(i) != 0; }
  std::vector<int> neighbors(int i) const;
  NeighborShapes shapes_for(int i) const;
  Subsystem rebuilt(int i) const;  // applies the hook (or identity)
};

/// S_i = {j : i in N_j}.
std::set<int> successors(const Network& net, int i);

struct PnpOutcome {
  bool ok = false;
  std::vector<int> designed;  // controllers created or replaced, ascending
  std::string reject_step;
  std::string reject_reason;
  int reject_id = -1;
};

/// Adds a subsystem: designs its controller, then redesigns exactly the
/// controllers of its successors (the owners of the `incoming` coupling
/// blocks A_{j,new}). Transactional: on any rejection the network is left
/// untouched.
PnpOutcome plug_in(Network& net, Subsystem new_sub, const std::map<int, MatrixXd>& incoming,
                   const DesignOptions& opts = {});

/// Removes subsystem k. Without parameter dependence no controller changes
/// (optionally retunes successors when `retune` is set, keeping the old
/// controller where retuning fails). With parameter dependence the
/// successors' local matrices are rebuilt and their controllers redesigned;
/// rejection is transactional.
PnpOutcome unplug(Network& net, int k, const DesignOptions& opts = {}, bool retune = false);

/// Designs every controller in the network (independent designs run in
/// parallel). Returns per-id outcomes; successful designs are stored.
std::map<int, DesignOutcome> design_all(Network& net, const DesignOptions& opts = {});

/// Small-gain certificate over the whole network (requires all controllers).
SmallGainResult network_smallgain(const Network& net);

/// Content hash over every field of a controller, for change audits.
std::uint64_t controller_hash(const TubeController& c);

}  // namespace pnpmpc

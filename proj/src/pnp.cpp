#include "pnpmpc/pnp.hpp"

#include <atomic>
#include <stdexcept>

#include "pnpmpc/linalg.hpp"
#include "pnpmpc/parallel.hpp"

namespace pnpmpc {

std::vector<int> Network::ids() const {
  std::vector<int> out;
  out.reserve(subsystems.size());
  for (const auto& [id, s] : subsystems) out.push_back(id);
  return out;
}

std::vector<int> Network::neighbors(int i) const {
  return subsystems.at(i).neighbor_ids();
}

NeighborShapes Network::shapes_for(int i) const {
  NeighborShapes shapes;
  for (const int j : neighbors(i)) {
    const Subsystem& sj = subsystems.at(j);
    shapes[j] = NeighborShape{sj.X_hrep, sj.X};
  }
  return shapes;
}

Subsystem Network::rebuilt(int i) const {
  if (rebuild) return rebuild(i, *this);
  return subsystems.at(i);
}

std::set<int> successors(const Network& net, int i) {
  if (!net.has(i)) throw std::invalid_argument("successors: unknown subsystem id");
  std::set<int> out;
  for (const auto& [j, sj] : net.subsystems) {
    if (j == i) continue;
    for (const int nb : sj.neighbor_ids())
      if (nb == i) out.insert(j);
  }
  return out;
}

namespace {

// Designs the given ids on a scratch network in parallel; returns the first
// rejection (by ascending id) if any.
PnpOutcome design_ids(Network& net, const std::vector<int>& ids, const DesignOptions& opts) {
  std::vector<DesignOutcome> results(ids.size());
  parallel_for(static_cast<int>(ids.size()), [&](int idx) {
    const int id = ids[static_cast<std::size_t>(idx)];
    results[static_cast<std::size_t>(idx)] =
        design_controller(net.subsystems.at(id), net.shapes_for(id), opts);
  });
  PnpOutcome out;
  for (std::size_t idx = 0; idx < ids.size(); ++idx) {
    if (!results[idx].ok()) {
      out.reject_id = ids[idx];
      out.reject_step = results[idx].reject_step;
      out.reject_reason = results[idx].reject_reason;
      return out;
    }
  }
  for (std::size_t idx = 0; idx < ids.size(); ++idx)
    net.controllers[ids[idx]] = std::move(*results[idx].controller);
  out.ok = true;
  out.designed = ids;
  return out;
}

}  // namespace

PnpOutcome plug_in(Network& net, Subsystem new_sub, const std::map<int, MatrixXd>& incoming,
                   const DesignOptions& opts) {
  const int nid = new_sub.id;
  if (net.has(nid)) throw std::invalid_argument("plug_in: id already present");
  for (const auto& [j, Aij] : new_sub.couplings)
    if (!net.has(j)) throw std::invalid_argument("plug_in: coupling references unknown id");
  for (const auto& [j, Ajn] : incoming) {
    if (!net.has(j)) throw std::invalid_argument("plug_in: incoming block references unknown id");
    if (Ajn.rows() != net.subsystems.at(j).nx() || Ajn.cols() != new_sub.nx())
      throw std::invalid_argument("plug_in: incoming block dimension mismatch");
  }

  Network scratch = net;
  scratch.subsystems[nid] = std::move(new_sub);
  std::vector<int> redesign{nid};
  for (const auto& [j, Ajn] : incoming) {
    if (inf_norm(Ajn) == 0.0) continue;
    scratch.subsystems.at(j).couplings[nid] = Ajn;
    redesign.push_back(j);
  }
  std::sort(redesign.begin(), redesign.end());
  // Local matrices may depend on the coupling set; refresh every touched
  // subsystem before redesign.
  for (const int id : redesign) scratch.subsystems.at(id) = scratch.rebuilt(id);

  PnpOutcome out = design_ids(scratch, redesign, opts);
  if (out.ok) net = std::move(scratch);
  return out;
}

PnpOutcome unplug(Network& net, int k, const DesignOptions& opts, bool retune) {
  if (!net.has(k)) throw std::invalid_argument("unplug: unknown subsystem id");
  const std::set<int> succ = successors(net, k);

  Network scratch = net;
  scratch.subsystems.erase(k);
  scratch.controllers.erase(k);
  for (auto& [j, sj] : scratch.subsystems) sj.couplings.erase(k);

  PnpOutcome out;
  std::vector<int> ids(succ.begin(), succ.end());
  if (scratch.param_dependent) {
    for (const int j : ids) scratch.subsystems.at(j) = scratch.rebuilt(j);
    out = design_ids(scratch, ids, opts);
    if (!out.ok) return out;
  } else {
    out.ok = true;
    if (retune) {
      for (const int j : ids) {
        DesignOutcome d = design_controller(scratch.subsystems.at(j), scratch.shapes_for(j), opts);
        if (d.ok()) {
          scratch.controllers[j] = std::move(*d.controller);
          out.designed.push_back(j);
        }
        // A failed retune keeps the previous controller, which stays valid:
        // removing a neighbor cannot break the design inequalities.
      }
    }
  }
  net = std::move(scratch);
  return out;
}

std::map<int, DesignOutcome> design_all(Network& net, const DesignOptions& opts) {
  const std::vector<int> ids = net.ids();
  std::vector<DesignOutcome> results(ids.size());
  parallel_for(static_cast<int>(ids.size()), [&](int idx) {
    const int id = ids[static_cast<std::size_t>(idx)];
    results[static_cast<std::size_t>(idx)] =
        design_controller(net.subsystems.at(id), net.shapes_for(id), opts);
  });
  std::map<int, DesignOutcome> out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (results[i].ok()) net.controllers[ids[i]] = *results[i].controller;
    out[ids[i]] = std::move(results[i]);
  }
  return out;
}

SmallGainResult network_smallgain(const Network& net) {
  std::vector<const Subsystem*> subs;
  std::map<int, MatrixXd> gains;
  for (const auto& [id, s] : net.subsystems) {
    subs.push_back(&s);
    gains[id] = net.controllers.at(id).K;
  }
  return smallgain_certificate(subs, gains);
}

namespace {

void hash_bytes(std::uint64_t& h, const void* p, std::size_t len) { h = fnv1a(p, len, h); }

void hash_matrix(std::uint64_t& h, const MatrixXd& M) {
  const Eigen::Index r = M.rows(), c = M.cols();
  hash_bytes(h, &r, sizeof(r));
  hash_bytes(h, &c, sizeof(c));
  if (M.size() > 0) hash_bytes(h, M.data(), sizeof(double) * static_cast<std::size_t>(M.size()));
}

void hash_scalar(std::uint64_t& h, double v) { hash_bytes(h, &v, sizeof(v)); }

void hash_zonotope(std::uint64_t& h, const Zonotope& Z) {
  hash_matrix(h, Z.center);
  hash_matrix(h, Z.generators);
  hash_scalar(h, Z.scale);
}

void hash_polytope(std::uint64_t& h, const HPolytope& P) {
  hash_matrix(h, P.normals);
  hash_matrix(h, P.offsets);
}

}  // namespace

std::uint64_t controller_hash(const TubeController& c) {
  std::uint64_t h = 14695981039346656037ull;
  hash_matrix(h, c.K);
  hash_scalar(h, c.delta);
  hash_zonotope(h, c.Z.set);
  hash_scalar(h, c.Z.alpha);
  hash_scalar(h, static_cast<double>(c.Z.steps));
  hash_scalar(h, c.Z.delta);
  hash_zonotope(h, c.Xhat);
  hash_polytope(h, c.Xhat_hrep);
  hash_polytope(h, c.V);
  hash_polytope(h, c.terminal_set);
  hash_matrix(h, c.terminal_cost);
  hash_matrix(h, c.aux_gain);
  hash_scalar(h, static_cast<double>(c.horizon));
  hash_matrix(h, c.stage_weights.Q);
  hash_matrix(h, c.stage_weights.R);
  hash_scalar(h, c.alpha);
  hash_scalar(h, c.lhat);
  hash_scalar(h, c.beta);
  return h;
}

}  // namespace pnpmpc

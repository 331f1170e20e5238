#include "pnpmpc/sim.hpp"

#include <cmath>
#include <stdexcept>

#include "pnpmpc/parallel.hpp"

namespace pnpmpc {

SimTrace simulate(const Network& net, const powernet::LoadSchedule& schedule, double t_end,
                  SimMode mode, const SimOptions& opts) {
  const std::vector<int> ids = net.ids();
  const int M = static_cast<int>(ids.size());
  if (M == 0) throw std::invalid_argument("simulate: empty network");
  const double T = opts.sample_time;
  const int steps = static_cast<int>(std::llround(t_end / T));
  if (std::abs(steps * T - t_end) > 1e-9)
    throw std::invalid_argument("simulate: t_end must be a multiple of the sampling time");

  if (mode == SimMode::Decentralized)
    for (const int id : ids)
      if (net.controllers.count(id) == 0)
        throw std::invalid_argument("simulate: missing controller for decentralized mode");

  SimTrace trace;
  trace.area_ids = ids;
  std::map<int, VectorXd> x;
  std::map<int, double> load;
  for (const int id : ids) {
    const Subsystem& s = net.subsystems.at(id);
    x[id] = opts.initial_state.count(id) ? opts.initial_state.at(id) : VectorXd::Zero(s.nx());
    load[id] = 0.0;
  }

  // Centralized bookkeeping (block offsets per area).
  std::map<int, int> offset;
  int ntot = 0;
  std::vector<CentralWeights> cw;
  if (mode == SimMode::Centralized) {
    for (const int id : ids) {
      offset[id] = ntot;
      ntot += net.subsystems.at(id).nx();
      const TubeController* c = net.controllers.count(id) ? &net.controllers.at(id) : nullptr;
      CentralWeights w;
      if (c) {
        w.weights = c->stage_weights;
        w.terminal = c->terminal_cost;
      } else {
        const int nx = net.subsystems.at(id).nx();
        const int nu = net.subsystems.at(id).nu();
        w.weights = LqWeights{MatrixXd::Identity(nx, nx), MatrixXd::Identity(nu, nu)};
        w.terminal = dare_solve(net.subsystems.at(id).A, net.subsystems.at(id).B, w.weights);
      }
      cw.push_back(std::move(w));
    }
  }

  std::size_t next_event = 0;
  auto events = schedule.events;

  for (int t = 0; t < steps; ++t) {
    const double now = t * T;
    while (next_event < events.size() && events[next_event].time <= now + 1e-9) {
      load[events[next_event].area] += events[next_event].dP;
      ++next_event;
    }

    SimStep step;
    step.t = now;
    step.loads = load;

    std::map<int, VectorXd> u;
    if (mode == SimMode::Decentralized) {
      std::vector<MpcResult> results(M);
      parallel_for(M, [&](int idx) {
        const int id = ids[static_cast<std::size_t>(idx)];
        const Subsystem& s = net.subsystems.at(id);
        Target tgt = opts.target_policy ? opts.target_policy(s, load.at(id))
                                        : Target{VectorXd::Zero(s.nx()), VectorXd::Zero(s.nu())};
        results[static_cast<std::size_t>(idx)] = mpc_step(net.controllers.at(id), s, x.at(id), tgt);
      });
      for (int idx = 0; idx < M; ++idx) {
        const int id = ids[static_cast<std::size_t>(idx)];
        const MpcResult& r = results[static_cast<std::size_t>(idx)];
        if (r.status != MpcStatus::Feasible) {
          trace.feasible = false;
          trace.failed_area = id;
          trace.failed_time = now;
          return trace;
        }
        step.per_area[id] = AreaSample{x.at(id), r.solution.u, load.at(id), r.solution.v0,
                                       r.solution.xhat0, r.solution.cost};
        u[id] = r.solution.u;
      }
    } else {
      VectorXd x_all(ntot);
      std::map<int, Target> tgts;
      for (const int id : ids) {
        x_all.segment(offset.at(id), net.subsystems.at(id).nx()) = x.at(id);
        const Subsystem& s = net.subsystems.at(id);
        tgts[id] = opts.target_policy ? opts.target_policy(s, load.at(id))
                                      : Target{VectorXd::Zero(s.nx()), VectorXd::Zero(s.nu())};
      }
      std::vector<const Subsystem*> subs;
      std::vector<Target> tvec;
      for (std::size_t i = 0; i < ids.size(); ++i) {
        subs.push_back(&net.subsystems.at(ids[i]));
        tvec.push_back(tgts.at(ids[i]));
      }
      CentralResult r = centralized_mpc_step(subs, cw, x_all, tvec, opts.horizon);
      if (r.status != MpcStatus::Feasible) {
        trace.feasible = false;
        trace.failed_area = -1;
        trace.failed_time = now;
        return trace;
      }
      int uoff = 0;
      for (const int id : ids) {
        const int nu = net.subsystems.at(id).nu();
        u[id] = r.u.segment(uoff, nu);
        uoff += nu;
        step.per_area[id] = AreaSample{x.at(id), u.at(id), load.at(id), u.at(id),
                                       x.at(id), r.cost};
      }
    }

    // Plant update with the exact discrete collective dynamics.
    std::map<int, VectorXd> xn;
    for (const int id : ids) {
      const Subsystem& s = net.subsystems.at(id);
      VectorXd next = s.A * x.at(id) + s.B * u.at(id);
      if (s.load_gain.size() > 0) next += s.load_gain * VectorXd::Constant(1, load.at(id));
      for (const auto& [j, Aij] : s.couplings) next += Aij * x.at(j);
      xn[id] = next;
    }
    x = std::move(xn);
    trace.steps.push_back(std::move(step));
  }

  SimStep final_step;
  final_step.t = steps * T;
  final_step.loads = load;
  for (const int id : ids)
    final_step.per_area[id] = AreaSample{x.at(id), VectorXd::Zero(net.subsystems.at(id).nu()),
                                         load.at(id), VectorXd::Zero(net.subsystems.at(id).nu()),
                                         x.at(id), 0.0};
  trace.final_state = std::move(final_step);
  return trace;
}

}  // namespace pnpmpc

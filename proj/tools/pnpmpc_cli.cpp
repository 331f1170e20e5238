// Command-line front end: design tube controllers for a power network,
// simulate the closed loop, and run plug-and-play operations on snapshots.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>

#include "pnpmpc/pnp.hpp"
#include "pnpmpc/powernet.hpp"
#include "pnpmpc/serialize.hpp"
#include "pnpmpc/sim.hpp"

namespace fs = std::filesystem;
using namespace pnpmpc;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRejected = 2;
constexpr int kExitInfeasible = 3;

std::string fmt12(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

struct CommonOptions {
  int scenario = 0;
  std::string network_file;
  std::string snapshot_file;
  std::string out_dir = ".";
  int horizon = 20;
  double delta = 1e-4;
  double mu_alpha = 1.0;
  double mu_beta = 1.0;
  double t_end = 100.0;
  std::string mode = "dec";
  std::uint64_t seed = 1;
};

DesignOptions design_options(const CommonOptions& c) {
  DesignOptions d;
  d.horizon = c.horizon;
  d.delta = c.delta;
  d.mu_alpha = c.mu_alpha;
  d.mu_beta = c.mu_beta;
  return d;
}

Snapshot load_problem(const CommonOptions& c) {
  if (c.scenario != 0) {
    powernet::Scenario sc = powernet::scenario(c.scenario);
    Snapshot s;
    s.network = std::move(sc.network);
    s.params = std::move(sc.params);
    s.ties = std::move(sc.ties);
    s.schedule = std::move(sc.schedule);
    s.sample_time = sc.sample_time;
    return s;
  }
  if (!c.network_file.empty()) {
    std::ifstream in(c.network_file);
    if (!in) throw std::runtime_error("cannot open network file: " + c.network_file);
    return network_from_definition(json::parse(in));
  }
  if (!c.snapshot_file.empty()) return load_snapshot(c.snapshot_file);
  throw std::runtime_error("one of --scenario, --network or --snapshot is required");
}

void write_atomic(const fs::path& path, const std::string& body) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << body;
  }
  fs::rename(tmp, path);
}

json design_report(const Snapshot& snap, const std::map<int, DesignOutcome>& outcomes,
                   std::uint64_t seed) {
  json areas = json::object();
  bool all_ok = true;
  for (const auto& [id, d] : outcomes) {
    json a;
    if (d.ok()) {
      const TubeController& c = *d.controller;
      a["status"] = "ok";
      a["alpha"] = c.alpha;
      a["lhat"] = c.lhat;
      a["beta"] = c.beta;
      a["delta"] = c.delta;
      a["K"] = to_json(c.K);
      a["rpi_generators"] = c.Z.set.num_generators();
      a["rpi_steps"] = c.Z.steps;
      a["rpi_delta_certified"] = c.Z.delta;
      a["terminal_faces"] = c.terminal_set.num_faces();
      a["controller_hash"] = controller_hash(c);
    } else {
      all_ok = false;
      a["status"] = "rejected";
      a["step"] = d.reject_step;
      a["reason"] = d.reject_reason;
    }
    areas[std::to_string(id)] = std::move(a);
  }
  json rep;
  rep["areas"] = std::move(areas);
  rep["all_designed"] = all_ok;
  if (all_ok) {
    SmallGainResult g = network_smallgain(snap.network);
    rep["gamma_spectral_radius"] = g.rho;
    rep["smallgain_schur"] = g.schur;
  }
  // Sampled cross-check that each X zonotope and H-rep describe the same set.
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  bool shapes_consistent = true;
  for (const auto& [id, s] : snap.network.subsystems) {
    for (int k = 0; k < 200; ++k) {
      VectorXd d(s.X.num_generators());
      for (Eigen::Index i = 0; i < d.size(); ++i) d(i) = u(rng);
      const VectorXd x = s.X.center + s.X.scale * (s.X.generators * d);
      if (!s.X_hrep.contains(x, 1e-9)) shapes_consistent = false;
    }
  }
  rep["state_shape_crosscheck"] = shapes_consistent;
  return rep;
}

int cmd_design(const CommonOptions& c) {
  Snapshot snap = load_problem(c);
  const auto outcomes = design_all(snap.network, design_options(c));
  const json rep = design_report(snap, outcomes, c.seed);
  fs::create_directories(c.out_dir);
  write_atomic(fs::path(c.out_dir) / "design_report.json", rep.dump(1) + "\n");
  bool all_ok = rep.at("all_designed");
  if (all_ok) write_atomic(fs::path(c.out_dir) / "snapshot.json", to_json(snap).dump(1) + "\n");
  std::cout << rep.dump(1) << "\n";
  if (!all_ok) {
    for (const auto& [id, d] : outcomes)
      if (!d.ok())
        std::cerr << "design rejected for area " << id << " at step " << d.reject_step << " ("
                  << d.reject_reason << ")\n";
    return kExitRejected;
  }
  return kExitOk;
}

void write_trace_csv(const fs::path& dir, const SimTrace& tr,
                     const std::vector<std::tuple<int, int, double>>& ties) {
  std::ofstream csv(dir / "trace.csv");
  csv << "t,area,x1,x2,x3,x4,u,load,vopt,cost\n";
  for (const auto& st : tr.steps) {
    for (const auto& [id, a] : st.per_area) {
      csv << fmt12(st.t) << "," << id;
      for (int i = 0; i < 4; ++i) csv << "," << fmt12(i < a.x.size() ? a.x(i) : 0.0);
      csv << "," << fmt12(a.u(0)) << "," << fmt12(a.load) << "," << fmt12(a.v0(0)) << ","
          << fmt12(a.cost) << "\n";
    }
  }
  std::ofstream tw(dir / "ties.csv");
  tw << "t,i,j,ptie\n";
  for (const auto& st : tr.steps) {
    for (const auto& [i, j, P] : ties) {
      if (st.per_area.count(i) == 0 || st.per_area.count(j) == 0) continue;
      const double p = powernet::tie_power(P, st.per_area.at(i).x(0), st.per_area.at(j).x(0));
      tw << fmt12(st.t) << "," << i << "," << j << "," << fmt12(p) << "\n";
    }
  }
}

json sim_summary(const SimTrace& tr, const Snapshot& snap) {
  json per_area = json::object();
  for (const int id : tr.area_ids) {
    double max_th = 0.0, max_u = 0.0;
    for (const auto& st : tr.steps) {
      const auto& a = st.per_area.at(id);
      max_th = std::max(max_th, std::abs(a.x(0)));
      max_u = std::max(max_u, std::abs(a.u(0)));
    }
    json a;
    a["max_abs_theta"] = max_th;
    a["max_abs_u"] = max_u;
    const auto& p = snap.params;
    if (p.count(id)) {
      a["theta_margin"] = p.at(id).theta_bound - max_th;
      a["u_margin"] = p.at(id).u_bound - max_u;
    }
    if (tr.feasible) {
      const auto& fin = tr.final_state.per_area.at(id);
      a["final_abs_omega"] = std::abs(fin.x(1));
      a["final_state_norm"] = fin.x.norm();
    }
    per_area[std::to_string(id)] = std::move(a);
  }
  json rep;
  rep["feasible"] = tr.feasible;
  if (!tr.feasible) {
    rep["failed_area"] = tr.failed_area;
    rep["failed_time"] = tr.failed_time;
  }
  rep["per_area"] = std::move(per_area);
  if (tr.feasible) {
    double max_tie = 0.0;
    for (const auto& [i, j, P] : snap.ties) {
      if (tr.final_state.per_area.count(i) == 0 || tr.final_state.per_area.count(j) == 0) continue;
      max_tie = std::max(max_tie, std::abs(powernet::tie_power(
                                      P, tr.final_state.per_area.at(i).x(0),
                                      tr.final_state.per_area.at(j).x(0))));
    }
    rep["final_max_abs_tie_power"] = max_tie;
  }
  return rep;
}

int cmd_simulate(const CommonOptions& c, bool auto_design) {
  Snapshot snap = load_problem(c);
  const bool designed = snap.network.controllers.size() == snap.network.subsystems.size() &&
                        !snap.network.subsystems.empty();
  if (!designed) {
    if (!auto_design)
      throw std::runtime_error("network has no controllers; run design first or pass --auto-design");
    const auto outcomes = design_all(snap.network, design_options(c));
    for (const auto& [id, d] : outcomes)
      if (!d.ok()) {
        std::cerr << "design rejected for area " << id << " (" << d.reject_reason << ")\n";
        return kExitRejected;
      }
  }
  SimOptions opts;
  opts.sample_time = snap.sample_time;
  opts.horizon = c.horizon;
  opts.target_policy = [](const Subsystem&, double load) {
    Target t;
    powernet::agc_target(load, t.x, t.u);
    return t;
  };
  const SimMode mode = c.mode == "cen" ? SimMode::Centralized : SimMode::Decentralized;
  SimTrace tr = simulate(snap.network, snap.schedule, c.t_end, mode, opts);

  fs::create_directories(c.out_dir);
  write_trace_csv(c.out_dir, tr, snap.ties);
  const json rep = sim_summary(tr, snap);
  write_atomic(fs::path(c.out_dir) / "summary.json", rep.dump(1) + "\n");
  std::cout << rep.dump(1) << "\n";
  return tr.feasible ? kExitOk : kExitInfeasible;
}

int cmd_pnp(const CommonOptions& c, const std::string& op, const std::string& area_file,
            int target_id) {
  if (c.snapshot_file.empty()) throw std::runtime_error("pnp requires --snapshot");
  Snapshot snap = load_snapshot(c.snapshot_file);
  if (snap.network.controllers.size() != snap.network.subsystems.size())
    throw std::runtime_error("snapshot is not fully designed; run design first");

  double rho_before = network_smallgain(snap.network).rho;
  PnpOutcome out;
  if (op == "plug") {
    if (area_file.empty()) throw std::runtime_error("plug requires --area FILE");
    std::ifstream in(area_file);
    if (!in) throw std::runtime_error("cannot open area file: " + area_file);
    const json aj = json::parse(in);
    const int id = aj.at("id");
    powernet::AreaParams p;
    p.H = aj.at("H");
    p.R = aj.at("R");
    p.D = aj.at("D");
    p.Tt = aj.at("Tt");
    p.Tg = aj.at("Tg");
    p.theta_bound = aj.value("theta_bound", 0.1);
    p.u_bound = aj.value("u_bound", 0.5);
    if (aj.contains("extra_bounds")) {
      const auto eb = aj.at("extra_bounds").get<std::vector<double>>();
      if (eb.size() != 3) throw std::runtime_error("extra_bounds must have 3 entries");
      p.extra_bounds = {eb[0], eb[1], eb[2]};
    }
    if (aj.contains("ties"))
      for (const auto& [key, val] : aj.at("ties").items()) p.tie[std::stoi(key)] = val.get<double>();
    out = powernet::plug_area(snap.network, snap.params, snap.sample_time, id, p, design_options(c));
    if (out.ok)
      for (const auto& [j, P] : snap.params.at(id).tie) {
        const int a = std::min(id, j), b = std::max(id, j);
        snap.ties.emplace_back(a, b, P);
      }
  } else if (op == "unplug") {
    if (target_id < 0) throw std::runtime_error("unplug requires --id");
    if (!snap.network.has(target_id)) throw std::runtime_error("unknown subsystem id");
    out = powernet::unplug_area(snap.network, snap.params, snap.sample_time, target_id,
                                design_options(c));
    if (out.ok)
      std::erase_if(snap.ties, [&](const auto& t) {
        return std::get<0>(t) == target_id || std::get<1>(t) == target_id;
      });
  } else {
    throw std::runtime_error("--op must be plug or unplug");
  }

  json rep;
  rep["operation"] = op;
  rep["ok"] = out.ok;
  rep["redesigned"] = out.designed;
  rep["gamma_rho_before"] = rho_before;
  if (out.ok) {
    rep["gamma_rho_after"] = network_smallgain(snap.network).rho;
    write_atomic(c.snapshot_file, to_json(snap).dump(1) + "\n");
  } else {
    rep["reject_step"] = out.reject_step;
    rep["reject_reason"] = out.reject_reason;
    rep["reject_area"] = out.reject_id;
  }
  fs::create_directories(c.out_dir);
  write_atomic(fs::path(c.out_dir) / "pnp_report.json", rep.dump(1) + "\n");
  std::cout << rep.dump(1) << "\n";
  return out.ok ? kExitOk : kExitRejected;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decentralized plug-and-play tube MPC for multi-area power networks"};
  app.require_subcommand(1);

  CommonOptions c;
  bool auto_design = false;
  std::string op, area_file;
  int target_id = -1;

  const auto add_common = [&](CLI::App* sub, bool with_sim_flags) {
    sub->add_option("--scenario", c.scenario, "Case-study scenario (1, 2 or 3)")
        ->check(CLI::Range(1, 3));
    sub->add_option("--network", c.network_file, "Custom network definition (JSON)");
    sub->add_option("--snapshot", c.snapshot_file, "Designed network snapshot (JSON)");
    sub->add_option("--out", c.out_dir, "Output directory");
    sub->add_option("--horizon", c.horizon, "Prediction horizon");
    sub->add_option("--delta", c.delta, "Tube accuracy delta");
    sub->add_option("--mu-alpha", c.mu_alpha, "Tuning weight on alpha");
    sub->add_option("--mu-beta", c.mu_beta, "Tuning weight on beta");
    sub->add_option("--seed", c.seed, "Random seed for sampled cross-checks");
    if (with_sim_flags) {
      sub->add_option("--mode", c.mode, "dec or cen")->check(CLI::IsMember({"dec", "cen"}));
      sub->add_option("--t-end", c.t_end, "Simulation end time (s)");
    }
  };

  CLI::App* design = app.add_subcommand("design", "Design all local tube controllers");
  add_common(design, false);

  CLI::App* sim = app.add_subcommand("simulate", "Run the closed loop and write CSV traces");
  add_common(sim, true);
  sim->add_flag("--auto-design", auto_design, "Design controllers before simulating");

  CLI::App* pnp = app.add_subcommand("pnp", "Plug in or unplug a subsystem on a snapshot");
  add_common(pnp, false);
  pnp->add_option("--op", op, "plug or unplug")->required()->check(CLI::IsMember({"plug", "unplug"}));
  pnp->add_option("--area", area_file, "New area definition (JSON) for plug");
  pnp->add_option("--id", target_id, "Subsystem id for unplug");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (design->parsed()) return cmd_design(c);
    if (sim->parsed()) return cmd_simulate(c, auto_design);
    if (pnp->parsed()) return cmd_pnp(c, op, area_file, target_id);
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}

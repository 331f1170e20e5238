#include "pnpmpc/serialize.hpp"

#include <fstream>
#include <stdexcept>

namespace pnpmpc {

json to_json(const MatrixXd& M) {
  json j;
  j["rows"] = M.rows();
  j["cols"] = M.cols();
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(M.size()));
  for (Eigen::Index r = 0; r < M.rows(); ++r)
    for (Eigen::Index c = 0; c < M.cols(); ++c) data.push_back(M(r, c));
  j["data"] = std::move(data);
  return j;
}

MatrixXd matrix_from_json(const json& j) {
  const Eigen::Index rows = j.at("rows"), cols = j.at("cols");
  const auto data = j.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(data.size()) != rows * cols)
    throw std::invalid_argument("matrix_from_json: size mismatch");
  MatrixXd M(rows, cols);
  std::size_t at = 0;
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) M(r, c) = data[at++];
  return M;
}

json to_json(const Zonotope& Z) {
  return json{{"center", to_json(MatrixXd(Z.center))}, {"generators", to_json(Z.generators)},
              {"scale", Z.scale}};
}

Zonotope zonotope_from_json(const json& j) {
  return Zonotope(matrix_from_json(j.at("center")).col(0), matrix_from_json(j.at("generators")),
                  j.at("scale").get<double>());
}

json to_json(const HPolytope& P) {
  return json{{"normals", to_json(P.normals)}, {"offsets", to_json(MatrixXd(P.offsets))}};
}

HPolytope hpolytope_from_json(const json& j) {
  return HPolytope(matrix_from_json(j.at("normals")), matrix_from_json(j.at("offsets")).col(0));
}

json to_json(const Subsystem& s) {
  json couplings = json::object();
  for (const auto& [id, M] : s.couplings) couplings[std::to_string(id)] = to_json(M);
  return json{{"id", s.id},
              {"A", to_json(s.A)},
              {"B", to_json(s.B)},
              {"couplings", std::move(couplings)},
              {"X", to_json(s.X)},
              {"X_hrep", to_json(s.X_hrep)},
              {"U", to_json(s.U)},
              {"load_gain", to_json(s.load_gain)}};
}

Subsystem subsystem_from_json(const json& j) {
  Subsystem s;
  s.id = j.at("id");
  s.A = matrix_from_json(j.at("A"));
  s.B = matrix_from_json(j.at("B"));
  for (const auto& [key, val] : j.at("couplings").items())
    s.couplings[std::stoi(key)] = matrix_from_json(val);
  s.X = zonotope_from_json(j.at("X"));
  s.X_hrep = hpolytope_from_json(j.at("X_hrep"));
  s.U = hpolytope_from_json(j.at("U"));
  s.load_gain = matrix_from_json(j.at("load_gain"));
  return s;
}

json to_json(const TubeController& c) {
  return json{{"K", to_json(c.K)},
              {"delta", c.delta},
              {"Z_set", to_json(c.Z.set)},
              {"Z_alpha", c.Z.alpha},
              {"Z_steps", c.Z.steps},
              {"Z_delta", c.Z.delta},
              {"Xhat", to_json(c.Xhat)},
              {"Xhat_hrep", to_json(c.Xhat_hrep)},
              {"V", to_json(c.V)},
              {"terminal_set", to_json(c.terminal_set)},
              {"terminal_cost", to_json(c.terminal_cost)},
              {"aux_gain", to_json(c.aux_gain)},
              {"horizon", c.horizon},
              {"Q", to_json(c.stage_weights.Q)},
              {"R", to_json(c.stage_weights.R)},
              {"alpha", c.alpha},
              {"lhat", c.lhat},
              {"beta", c.beta}};
}

TubeController controller_from_json(const json& j) {
  TubeController c;
  c.K = matrix_from_json(j.at("K"));
  c.delta = j.at("delta");
  c.Z.set = zonotope_from_json(j.at("Z_set"));
  c.Z.alpha = j.at("Z_alpha");
  c.Z.steps = j.at("Z_steps");
  c.Z.delta = j.at("Z_delta");
  c.Xhat = zonotope_from_json(j.at("Xhat"));
  c.Xhat_hrep = hpolytope_from_json(j.at("Xhat_hrep"));
  c.V = hpolytope_from_json(j.at("V"));
  c.terminal_set = hpolytope_from_json(j.at("terminal_set"));
  c.terminal_cost = matrix_from_json(j.at("terminal_cost"));
  c.aux_gain = matrix_from_json(j.at("aux_gain"));
  c.horizon = j.at("horizon");
  c.stage_weights.Q = matrix_from_json(j.at("Q"));
  c.stage_weights.R = matrix_from_json(j.at("R"));
  c.alpha = j.at("alpha");
  c.lhat = j.at("lhat");
  c.beta = j.at("beta");
  return c;
}

namespace {

json params_to_json(const powernet::AreaParams& p) {
  json ties = json::object();
  for (const auto& [j, P] : p.tie) ties[std::to_string(j)] = P;
  return json{{"H", p.H},           {"R", p.R},
              {"D", p.D},           {"Tt", p.Tt},
              {"Tg", p.Tg},         {"theta_bound", p.theta_bound},
              {"u_bound", p.u_bound},
              {"extra_bounds", std::vector<double>{p.extra_bounds[0], p.extra_bounds[1], p.extra_bounds[2]}},
              {"ties", std::move(ties)}};
}

powernet::AreaParams params_from_json(const json& j) {
  powernet::AreaParams p;
  p.H = j.at("H");
  p.R = j.at("R");
  p.D = j.at("D");
  p.Tt = j.at("Tt");
  p.Tg = j.at("Tg");
  p.theta_bound = j.value("theta_bound", 0.1);
  p.u_bound = j.value("u_bound", 0.5);
  if (j.contains("extra_bounds")) {
    const auto eb = j.at("extra_bounds").get<std::vector<double>>();
    if (eb.size() != 3) throw std::invalid_argument("extra_bounds must have 3 entries");
    p.extra_bounds = {eb[0], eb[1], eb[2]};
  }
  if (j.contains("ties"))
    for (const auto& [key, val] : j.at("ties").items()) p.tie[std::stoi(key)] = val.get<double>();
  return p;
}

}  // namespace

json to_json(const Snapshot& s) {
  json subs = json::object(), ctrls = json::object(), params = json::object();
  for (const auto& [id, sub] : s.network.subsystems) subs[std::to_string(id)] = to_json(sub);
  for (const auto& [id, c] : s.network.controllers) ctrls[std::to_string(id)] = to_json(c);
  for (const auto& [id, p] : s.params) params[std::to_string(id)] = params_to_json(p);
  json ties = json::array();
  for (const auto& [i, j, P] : s.ties) ties.push_back(json::array({i, j, P}));
  json loads = json::array();
  for (const auto& ev : s.schedule.events)
    loads.push_back(json{{"time", ev.time}, {"area", ev.area}, {"dP", ev.dP}});
  return json{{"format", "pnp-dempc-snapshot-v1"},
              {"param_dependent", s.network.param_dependent},
              {"sample_time", s.sample_time},
              {"subsystems", std::move(subs)},
              {"controllers", std::move(ctrls)},
              {"params", std::move(params)},
              {"ties", std::move(ties)},
              {"loads", std::move(loads)}};
}

Snapshot snapshot_from_json(const json& j) {
  if (j.value("format", "") != "pnp-dempc-snapshot-v1")
    throw std::invalid_argument("snapshot: unknown format tag");
  Snapshot s;
  s.sample_time = j.value("sample_time", 1.0);
  for (const auto& [key, val] : j.at("subsystems").items())
    s.network.subsystems[std::stoi(key)] = subsystem_from_json(val);
  for (const auto& [key, val] : j.at("controllers").items())
    s.network.controllers[std::stoi(key)] = controller_from_json(val);
  for (const auto& [key, val] : j.at("params").items())
    s.params[std::stoi(key)] = params_from_json(val);
  for (const auto& t : j.at("ties"))
    s.ties.emplace_back(t.at(0).get<int>(), t.at(1).get<int>(), t.at(2).get<double>());
  if (j.contains("loads"))
    for (const auto& ev : j.at("loads"))
      s.schedule.events.push_back({ev.at("time"), ev.at("area"), ev.at("dP")});
  if (j.value("param_dependent", false) && !s.params.empty())
    powernet::attach_rebuilder(s.network, s.params, s.sample_time);
  return s;
}

void save_snapshot(const Snapshot& s, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_snapshot: cannot open " + path);
  out << to_json(s).dump(1) << "\n";
}

Snapshot load_snapshot(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_snapshot: cannot open " + path);
  json j = json::parse(in);
  return snapshot_from_json(j);
}

Snapshot network_from_definition(const json& j) {
  std::map<int, powernet::AreaParams> params;
  for (const auto& area : j.at("areas")) {
    const int id = area.at("id");
    params[id] = params_from_json(area);
  }
  // Symmetrize ties listed on one side only.
  for (auto& [id, p] : params)
    for (const auto& [jd, P] : p.tie) {
      auto it = params.find(jd);
      if (it == params.end()) throw std::invalid_argument("network definition: tie to unknown area");
      it->second.tie.emplace(id, P);  // no overwrite; symmetry checked later
    }
  const double T = j.value("sample_time", 1.0);
  powernet::Scenario sc = powernet::make_network(params, T);
  Snapshot s;
  s.network = std::move(sc.network);
  s.params = std::move(sc.params);
  s.ties = std::move(sc.ties);
  s.sample_time = T;
  if (j.contains("loads"))
    for (const auto& ev : j.at("loads"))
      s.schedule.events.push_back({ev.at("time"), ev.at("area"), ev.at("dP")});
  std::stable_sort(s.schedule.events.begin(), s.schedule.events.end(),
                   [](const auto& a, const auto& b) { return a.time < b.time; });
  return s;
}

}  // namespace pnpmpc

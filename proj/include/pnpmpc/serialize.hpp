#pragma once

#include <string>

#include <json.hpp>

#include "pnpmpc/pnp.hpp"
#include "pnpmpc/powernet.hpp"

namespace pnpmpc {

using nlohmann::json;

json to_json(const MatrixXd& M);
MatrixXd matrix_from_json(const json& j);

json to_json(const Zonotope& Z);
Zonotope zonotope_from_json(const json& j);

json to_json(const HPolytope& P);
HPolytope hpolytope_from_json(const json& j);

json to_json(const Subsystem& s);
Subsystem subsystem_from_json(const json& j);

json to_json(const TubeController& c);
TubeController controller_from_json(const json& j);

/// Full network snapshot. Power networks also carry their area parameters
/// and sampling time so the parameter-dependent rebuild hook can be
/// re-attached on load.
struct Snapshot {
  Network network;
  std::map<int, powernet::AreaParams> params;  // empty for generic networks
  std::vector<std::tuple<int, int, double>> ties;
  powernet::LoadSchedule schedule;
  double sample_time = 1.0;
};

json to_json(const Snapshot& s);
Snapshot snapshot_from_json(const json& j);

void save_snapshot(const Snapshot& s, const std::string& path);
Snapshot load_snapshot(const std::string& path);

/// Parses a user network definition:
/// {"areas": [{"id", "H", "R", "D", "Tt", "Tg", "theta_bound", "u_bound",
///             "extra_bounds": [w, pm, pv], "ties": {"j": P_ij}}, ...],
///  "sample_time": 1.0, "loads": [{"time", "area", "dP"}, ...]}
/// Ties may be listed on either side; they are symmetrized on load.
Snapshot network_from_definition(const json& j);

}  // namespace pnpmpc

// Integration tests for the command-line tool: every exit code path, the
// CSV schema, and byte-level determinism.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

#ifndef CLI_PATH
#error "CLI_PATH must be defined"
#endif

int run_cli(const std::string& args) {
  const std::string cmd = std::string(CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WEXITSTATUS(rc);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "pnpmpc_cli_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("design: scenario 1 exits 0 with all alphas below one") {
  const fs::path dir = scratch("design_ok");
  REQUIRE(run_cli("design --scenario 1 --out " + dir.string()) == 0);
  const json rep = json::parse(slurp(dir / "design_report.json"));
  CHECK(rep.at("all_designed") == true);
  CHECK(rep.at("gamma_spectral_radius").get<double>() < 1.0);
  CHECK(rep.at("state_shape_crosscheck") == true);
  for (const auto& [id, a] : rep.at("areas").items()) {
    CHECK(a.at("status") == "ok");
    CHECK(a.at("alpha").get<double>() < 1.0);
    CHECK(a.at("delta").get<double>() == 1e-4);
  }
  CHECK(fs::exists(dir / "snapshot.json"));
}

TEST_CASE("design: malformed JSON exits 1") {
  const fs::path dir = scratch("design_bad");
  std::ofstream(dir / "broken.json") << "{ not json";
  CHECK(run_cli("design --network " + (dir / "broken.json").string() + " --out " + dir.string()) == 1);
}

TEST_CASE("design: overwhelming coupling exits 2 with the alpha reason") {
  const fs::path dir = scratch("design_reject");
  json net;
  net["areas"] = json::array();
  json a1{{"id", 1}, {"H", 10.0}, {"R", 0.05}, {"D", 0.9}, {"Tt", 0.5}, {"Tg", 0.1},
          {"theta_bound", 0.1}, {"u_bound", 0.5}, {"ties", {{"2", 400.0}}}};
  json a2 = a1;
  a2["id"] = 2;
  a2["ties"] = json{{"1", 400.0}};
  net["areas"].push_back(a1);
  net["areas"].push_back(a2);
  std::ofstream(dir / "heavy.json") << net.dump();
  REQUIRE(run_cli("design --network " + (dir / "heavy.json").string() + " --out " + dir.string()) == 2);
  const json rep = json::parse(slurp(dir / "design_report.json"));
  bool saw_alpha_reason = false;
  for (const auto& [id, a] : rep.at("areas").items())
    if (a.at("status") == "rejected" && a.at("reason") == "alpha>=1") saw_alpha_reason = true;
  CHECK(saw_alpha_reason);
}

TEST_CASE("simulate: schema, zero-load trace, determinism") {
  const fs::path dir = scratch("sim");
  REQUIRE(run_cli("design --scenario 1 --out " + dir.string()) == 0);
  const std::string snap = (dir / "snapshot.json").string();

  // zero-load run: strip the schedule from the snapshot
  json s = json::parse(slurp(dir / "snapshot.json"));
  s["loads"] = json::array();
  std::ofstream(dir / "noload.json") << s.dump();
  REQUIRE(run_cli("simulate --snapshot " + (dir / "noload.json").string() + " --t-end 10 --out " +
                  (dir / "zero").string()) == 0);
  {
    std::ifstream csv(dir / "zero" / "trace.csv");
    std::string header;
    std::getline(csv, header);
    CHECK(header == "t,area,x1,x2,x3,x4,u,load,vopt,cost");
    std::string line;
    while (std::getline(csv, line)) {
      std::stringstream ss(line);
      std::string field;
      std::getline(ss, field, ',');  // t
      std::getline(ss, field, ',');  // area
      for (int i = 0; i < 4; ++i) {
        std::getline(ss, field, ',');
        CHECK(std::abs(std::stod(field)) <= 1e-9);
      }
    }
  }

  // same config twice: byte-identical CSVs
  REQUIRE(run_cli("simulate --snapshot " + snap + " --t-end 20 --seed 7 --out " +
                  (dir / "a").string()) == 0);
  REQUIRE(run_cli("simulate --snapshot " + snap + " --t-end 20 --seed 7 --out " +
                  (dir / "b").string()) == 0);
  CHECK(slurp(dir / "a" / "trace.csv") == slurp(dir / "b" / "trace.csv"));
  CHECK(slurp(dir / "a" / "ties.csv") == slurp(dir / "b" / "ties.csv"));
  {
    std::ifstream tw(dir / "a" / "ties.csv");
    std::string header;
    std::getline(tw, header);
    CHECK(header == "t,i,j,ptie");
  }

  // both modes produce the same schema
  REQUIRE(run_cli("simulate --snapshot " + snap + " --mode cen --t-end 10 --out " +
                  (dir / "cen").string()) == 0);
  std::ifstream cen(dir / "cen" / "trace.csv");
  std::string header;
  std::getline(cen, header);
  CHECK(header == "t,area,x1,x2,x3,x4,u,load,vopt,cost");
}

TEST_CASE("simulate: scenario 2 tie file includes the area-5 pairs") {
  const fs::path dir = scratch("sim_s2");
  REQUIRE(run_cli("simulate --scenario 2 --auto-design --t-end 5 --out " + dir.string()) == 0);
  const std::string ties = slurp(dir / "ties.csv");
  CHECK(ties.find("0,2,5,") != std::string::npos);
  CHECK(ties.find("0,4,5,") != std::string::npos);
}

TEST_CASE("simulate: an unabsorbable load makes the run exit 3 with a truncated trace") {
  const fs::path dir = scratch("sim_infeasible");
  json net;
  net["areas"] = json::array({json{{"id", 1}, {"H", 10.0}, {"R", 0.05}, {"D", 0.9}, {"Tt", 0.5},
                                   {"Tg", 0.1}, {"theta_bound", 0.1}, {"u_bound", 0.5}}});
  net["loads"] = json::array({json{{"time", 2.0}, {"area", 1}, {"dP", 5.0}}});
  std::ofstream(dir / "toy.json") << net.dump();
  REQUIRE(run_cli("simulate --network " + (dir / "toy.json").string() +
                  " --auto-design --t-end 20 --out " + dir.string()) == 3);
  const json rep = json::parse(slurp(dir / "summary.json"));
  CHECK(rep.at("feasible") == false);
  CHECK(rep.at("failed_area") == 1);
  // trace rows stop at the failure time
  std::ifstream csv(dir / "trace.csv");
  std::string line;
  int rows = 0;
  std::getline(csv, line);
  while (std::getline(csv, line)) ++rows;
  CHECK(rows < 20);
}

TEST_CASE("pnp: plug, rejected plug, unplug, unknown id") {
  const fs::path dir = scratch("pnp");
  REQUIRE(run_cli("design --scenario 1 --out " + dir.string()) == 0);
  const fs::path snap = dir / "snapshot.json";

  std::ofstream(dir / "area5.json")
      << json{{"id", 5}, {"H", 10.0}, {"R", 0.05}, {"D", 0.86}, {"Tt", 0.8}, {"Tg", 0.15},
              {"theta_bound", 0.1}, {"u_bound", 0.5}, {"ties", {{"2", 3.0}, {"4", 3.0}}}}
             .dump();

  // rejected plug first: snapshot must remain byte-identical
  const std::string before = slurp(snap);
  std::ofstream(dir / "heavy5.json")
      << json{{"id", 5}, {"H", 10.0}, {"R", 0.05}, {"D", 0.86}, {"Tt", 0.8}, {"Tg", 0.15},
              {"theta_bound", 0.1}, {"u_bound", 0.5}, {"ties", {{"1", 400.0}}}}
             .dump();
  REQUIRE(run_cli("pnp --snapshot " + snap.string() + " --op plug --area " +
                  (dir / "heavy5.json").string() + " --out " + dir.string()) == 2);
  CHECK(slurp(snap) == before);
  {
    const json rep = json::parse(slurp(dir / "pnp_report.json"));
    CHECK(rep.at("ok") == false);
    CHECK(rep.at("reject_reason") == "alpha>=1");
  }

  // successful plug updates the snapshot and reports the redesign set
  REQUIRE(run_cli("pnp --snapshot " + snap.string() + " --op plug --area " +
                  (dir / "area5.json").string() + " --out " + dir.string()) == 0);
  {
    const json rep = json::parse(slurp(dir / "pnp_report.json"));
    CHECK(rep.at("ok") == true);
    CHECK(rep.at("redesigned") == json::array({2, 4, 5}));
    CHECK(rep.at("gamma_rho_after").get<double>() < 1.0);
  }

  // unplug area 4 from the now-5-area snapshot
  REQUIRE(run_cli("pnp --snapshot " + snap.string() + " --op unplug --id 4 --out " +
                  dir.string()) == 0);
  {
    const json rep = json::parse(slurp(dir / "pnp_report.json"));
    CHECK(rep.at("redesigned") == json::array({3, 5}));
  }

  CHECK(run_cli("pnp --snapshot " + snap.string() + " --op unplug --id 99 --out " +
                dir.string()) == 1);
}

TEST_CASE("worker cap env var is honored") {
  const fs::path dir = scratch("threads");
  const std::string cmd = std::string("PNP_DEMPC_THREADS=1 ") + CLI_PATH +
                          " design --scenario 1 --out " + dir.string() + " >/dev/null 2>&1";
  CHECK(WEXITSTATUS(std::system(cmd.c_str())) == 0);
}

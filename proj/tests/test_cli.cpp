#include <catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <string>

#ifndef SCORE_CLI_PATH
#error "SCORE_CLI_PATH must point at the built command line binary"
#endif

namespace {

/// Runs the CLI with the given arguments, discarding its output, and
/// returns the process exit code.
int run_cli(const std::string& args) {
  const std::string cmd =
      std::string("\"") + SCORE_CLI_PATH + "\" " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  return WEXITSTATUS(status);
}

void write_file(const std::string& path, const std::string& body) {
  std::ofstream out(path);
  REQUIRE(out.good());
  out << body;
}

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  return nlohmann::json::parse(in);
}

}  // namespace

TEST_CASE("--version exits cleanly", "[cli]") {
  CHECK(run_cli("--version") == 0);
}

TEST_CASE("certifying the isotropic shrink returns success and a report",
          "[cli]") {
  const std::string cfg = "cli_iso_cfg.json";
  const std::string rep = "cli_iso_report.json";
  write_file(cfg, R"({
    "mode": "certify",
    "system": {"kind": "linear", "diag": [-1.0, -1.0]},
    "candidate": {"source": "identity"},
    "rho": 1.0,
    "psgld": {"k_steps": 120, "block_size": 16, "n_blocks": 40},
    "seed": 11
  })");
  CHECK(run_cli("certify --config " + cfg + " --report " + rep) == 0);

  const nlohmann::json j = read_json(rep);
  CHECK(j.at("mode") == "certify");
  CHECK(j.at("result").at("decision") == "CERTIFIED");
  CHECK(j.at("result").at("degenerate") == true);
  CHECK(std::abs(j.at("result").at("ci_upper").get<double>() + 2.0) <=
        1e-9);
  // the echoed config must itself be loadable
  CHECK(j.at("config").at("seed") == 11);
  std::remove(cfg.c_str());
  std::remove(rep.c_str());
}

TEST_CASE("a supercritical level is rejected with exit code 1", "[cli]") {
  const std::string cfg = "cli_rej_cfg.json";
  const std::string rep = "cli_rej_report.json";
  write_file(cfg, R"({
    "mode": "certify",
    "system": {"kind": "scalar_cubic"},
    "candidate": {"source": "identity"},
    "rho": 1.21,
    "psgld": {"k_steps": 60, "block_size": 8, "n_blocks": 20},
    "seed": 3
  })");
  CHECK(run_cli("certify --config " + cfg + " --report " + rep) == 1);
  const nlohmann::json j = read_json(rep);
  CHECK(j.at("result").at("decision") == "REJECTED");
  CHECK(j.at("result").contains("counterexample"));
  std::remove(cfg.c_str());
  std::remove(rep.c_str());
}

TEST_CASE("search mode reports the bracketed level", "[cli]") {
  const std::string cfg = "cli_search_cfg.json";
  const std::string rep = "cli_search_report.json";
  write_file(cfg, R"({
    "mode": "search",
    "system": {"kind": "scalar_cubic"},
    "candidate": {"source": "identity"},
    "search": {"rel_tol": 0.02},
    "psgld": {"k_steps": 80, "block_size": 8, "n_blocks": 24},
    "seed": 19
  })");
  CHECK(run_cli("search --config " + cfg + " --report " + rep) == 0);
  const nlohmann::json j = read_json(rep);
  const double rho_star = j.at("result").at("rho_star").get<double>();
  CHECK(rho_star >= 0.85);
  CHECK(rho_star < 1.0);
  CHECK(j.at("result").at("trace").is_array());
  CHECK(j.at("result").at("trace").size() >= 3);
  std::remove(cfg.c_str());
  std::remove(rep.c_str());
}

TEST_CASE("block maxima export lands on disk as CSV", "[cli]") {
  const std::string cfg = "cli_export_cfg.json";
  const std::string csv = "cli_export_blockmax.csv";
  write_file(cfg, R"({
    "mode": "certify",
    "system": {"kind": "linear", "diag": [-1.0, -3.0]},
    "candidate": {"source": "identity"},
    "rho": 1.0,
    "psgld": {"k_steps": 150, "block_size": 16, "n_blocks": 30,
              "eta": 0.02, "temperature": 0.1},
    "seed": 5
  })");
  run_cli("certify --config " + cfg + " --export-blockmax " + csv);
  std::ifstream in(csv);
  REQUIRE(in.good());
  std::string header;
  std::getline(in, header);
  CHECK(header.find("block") != std::string::npos);
  int rows = 0;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) {
      ++rows;
    }
  }
  CHECK(rows >= 1);
  std::remove(cfg.c_str());
  std::remove(csv.c_str());
}

TEST_CASE("configuration errors exit with code 3", "[cli]") {
  const std::string cfg = "cli_bad_cfg.json";
  write_file(cfg, R"({"mode": "certify", "rho_max": 2.0})");
  CHECK(run_cli("certify --config " + cfg) == 3);
  std::remove(cfg.c_str());
  CHECK(run_cli("certify --config definitely_missing.json") == 3);
}

TEST_CASE("validate mode checks a config without running it", "[cli]") {
  const std::string cfg = "cli_validate_cfg.json";
  write_file(cfg, R"({
    "mode": "validate",
    "system": {"kind": "dense_hurwitz", "dimension": 4},
    "psgld": {"eta": 0.01, "temperature": "auto"}
  })");
  CHECK(run_cli("validate --config " + cfg) == 0);
  std::remove(cfg.c_str());
}

TEST_CASE("command line seed overrides the config seed", "[cli]") {
  const std::string cfg = "cli_seed_cfg.json";
  const std::string rep_a = "cli_seed_a.json";
  const std::string rep_b = "cli_seed_b.json";
  write_file(cfg, R"({
    "mode": "certify",
    "system": {"kind": "linear", "diag": [-1.0, -3.0]},
    "candidate": {"source": "identity"},
    "rho": 1.0,
    "psgld": {"k_steps": 100, "block_size": 8, "n_blocks": 20,
              "eta": 0.02, "temperature": 0.1},
    "seed": 7
  })");
  run_cli("certify --config " + cfg + " --seed 123 --report " + rep_a);
  run_cli("certify --config " + cfg + " --report " + rep_b);
  const nlohmann::json a = read_json(rep_a);
  const nlohmann::json b = read_json(rep_b);
  CHECK(a.at("config").at("seed") == 123);
  CHECK(b.at("config").at("seed") == 7);
  std::remove(cfg.c_str());
  std::remove(rep_a.c_str());
  std::remove(rep_b.c_str());
}

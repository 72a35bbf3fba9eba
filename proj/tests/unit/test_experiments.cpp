#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "trotter24/errors.hpp"
#include "trotter24/experiments.hpp"

using namespace trotter24;

namespace {

int error_line(const std::string& text) {
  try {
    parse_experiment_config(text);
  } catch (const ConfigError& e) {
    return e.line();
  }
  return -1;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("trotter24_unit_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("config defaults") {
  const ExperimentConfig c = parse_experiment_config("{}");
  CHECK(c.model == ModelKind::IsingX);
  CHECK(c.num_sites == 10);
  CHECK(c.epsilon == 1e-3);
  CHECK(c.t_fin == 2.0);
  const ExperimentConfig r = parse_experiment_config(R"({"model": "ising_ramp"})");
  CHECK(r.t_ini == -3.0);
  CHECK(r.t_fin == 3.0);
}

TEST_CASE("config errors carry the offending line") {
  CHECK(error_line("{\n  \"L\": 6,\n  \"bogus\": 1\n}") == 3);
  CHECK(error_line("{\n  \"L\": 6,\n  \"epsilon\": \"small\"\n}") == 3);
  CHECK(error_line("{\n  \"sweep\": {\n    \"c_values\": [0.8,\n      1.5]\n  }\n}") == 4);
  CHECK(error_line("{\n  \"L\": 6\n  \"x\": 1\n}") == 3);
  CHECK(error_line("{\n  \"safety_c\": 0\n}") == 2);
  CHECK(error_line("{\"t_ini\": 2, \"t_fin\": 1}") >= 0);
  CHECK_THROWS_AS(load_experiment_config("/nonexistent/trotter24.json"), ConfigError);
}

TEST_CASE("resolved config round trips") {
  const ExperimentConfig c = parse_experiment_config(
      R"({"model": "ising_ramp", "L": 6, "mode": "observable", "epsilon": 0.01, "record": ["m_x", "m_z"],
          "compare": {"m_values": [1, 2]}, "sweep": {"c_values": [0.9]}})");
  const nlohmann::json j = resolved_config(c);
  const ExperimentConfig back = parse_experiment_config(j.dump());
  CHECK(resolved_config(back) == j);
  CHECK(back.mode == ControllerMode::Observable);
  CHECK(back.record.size() == 2);
}

TEST_CASE("zero-length run writes an empty trace") {
  ExperimentConfig c = parse_experiment_config(R"({"L": 4, "t_ini": 1.0, "t_fin": 1.0})");
  c.out_dir = scratch("zero").string();
  std::ostringstream out;
  CHECK(cmd_run(c, out) == 0);
  std::istringstream lines(slurp(std::filesystem::path(c.out_dir) / "trace.jsonl"));
  std::string line;
  int count = 0;
  while (std::getline(lines, line)) ++count;
  CHECK(count == 1);
}

TEST_CASE("run traces are byte-identical across invocations") {
  ExperimentConfig c = parse_experiment_config(R"({"L": 6, "epsilon": 0.01, "record": ["m_x", "m_y"]})");
  c.out_dir = scratch("det_a").string();
  std::ostringstream sink;
  REQUIRE(cmd_run(c, sink) == 0);
  const std::string first = slurp(std::filesystem::path(c.out_dir) / "trace.jsonl");
  c.out_dir = scratch("det_b").string();
  c.threads = 3;
  REQUIRE(cmd_run(c, sink) == 0);
  CHECK(first == slurp(std::filesystem::path(c.out_dir) / "trace.jsonl"));
  CHECK(first.size() > 100);
}

TEST_CASE("builders") {
  const ExperimentConfig c = parse_experiment_config(R"({"L": 5, "initial_state": "+x"})");
  CHECK(build_hamiltonian(c).num_sites() == 5);
  CHECK(build_initial_state(c).num_sites() == 5);
  CHECK(build_observable(c, "m_z").num_sites() == 5);
  CHECK(loglog_slope({1.0, 2.0, 4.0}, {1.0, 8.0, 64.0}) == doctest::Approx(3.0));
}

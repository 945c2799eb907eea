#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "driftlab/errors.hpp"
#include "driftlab/harness.hpp"

using namespace driftlab;

namespace {
std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}
std::string tmpdir(const std::string& tag) {
  return std::string("/tmp/driftlab-test-") + tag;
}
}  // namespace

TEST_CASE("config round-trips losslessly and rejects unknown keys") {
  ExperimentConfig cfg = ExperimentConfig::make("solve");
  cfg.set("grid_n", "32");
  cfg.set("sigma0", "0.7");
  const std::string text = cfg.canonical();
  ExperimentConfig back = ExperimentConfig::from_text(text, "round-trip");
  CHECK(back.canonical() == text);
  CHECK(back.hash() == cfg.hash());
  CHECK(back.num("sigma0") == 0.7);

  CHECK_THROWS_AS(cfg.set("no_such_key", "1"), ConfigInvalid);
  CHECK_THROWS_AS(ExperimentConfig::from_text("kind = solve\nbogus = 1\n"),
                  ConfigInvalid);
  // the diagnostic carries the line number
  try {
    ExperimentConfig::from_text("kind = solve\nbogus = 1\n", "file.cfg");
    CHECK(false);
  } catch (const ConfigInvalid& e) {
    CHECK(std::string(e.what()).find("file.cfg:2") != std::string::npos);
  }
  CHECK_THROWS_AS(ExperimentConfig::from_text("field = hardy\n"),
                  ConfigInvalid);  // missing kind
  CHECK_THROWS_AS(ExperimentConfig::make("nonsense"), ConfigInvalid);

  ExperimentConfig bad = ExperimentConfig::make("solve");
  bad.set("grid_n", "forty");
  CHECK_THROWS_AS(bad.num("grid_n"), ConfigInvalid);
}

TEST_CASE("zero-field solve experiment emits the heat-oracle column") {
  ExperimentConfig cfg = ExperimentConfig::make("solve");
  cfg.set("field", "zero");
  cfg.set("grid_n", "32");
  cfg.set("grid_steps", "40");
  cfg.set("out", tmpdir("solve-zero"));
  const RunManifest man = run_experiment(cfg);
  CHECK(man.outputs.count("solve") == 1);
  const std::string csv = slurp(man.outputs.at("solve"));
  CHECK(csv.find("max_rel_err") != std::string::npos);
  // parse the value from the second line
  std::istringstream lines(csv);
  std::string header, row;
  std::getline(lines, header);
  std::getline(lines, row);
  // max_rel_err is the 8th column
  std::istringstream cells(row);
  std::string cell;
  for (int i = 0; i < 8; ++i) std::getline(cells, cell, ',');
  CHECK(std::stod(cell) <= 0.02);
  CHECK(slurp(tmpdir("solve-zero") + "/manifest.json").find("config_hash") !=
        std::string::npos);
  CHECK(!slurp(tmpdir("solve-zero") + "/config.cfg").empty());
}

TEST_CASE("zero-field simulate experiment emits the Brownian baseline") {
  ExperimentConfig cfg = ExperimentConfig::make("simulate");
  cfg.set("field", "zero");
  cfg.set("N", "400");
  cfg.set("T", "0.25");
  cfg.set("ht", "0.0078125");
  cfg.set("out", tmpdir("sim-zero"));
  const RunManifest man = run_experiment(cfg);
  const std::string csv = slurp(man.outputs.at("simulate"));
  CHECK(csv.find("msd") != std::string::npos);
  CHECK(csv.find("expected_msd") != std::string::npos);
}

TEST_CASE("reruns of the same config are byte-identical") {
  for (int round = 0; round < 2; ++round) {
    ExperimentConfig cfg = ExperimentConfig::make("formbound");
    cfg.set("budget", "4");
    cfg.set("out", tmpdir("det-" + std::to_string(round)));
    run_experiment(cfg);
  }
  CHECK(slurp(tmpdir("det-0") + "/formbound.csv") ==
        slurp(tmpdir("det-1") + "/formbound.csv"));
  CHECK(!slurp(tmpdir("det-0") + "/formbound.csv").empty());
}

TEST_CASE("stability violations surface from corrupt grid configs") {
  ExperimentConfig cfg = ExperimentConfig::make("solve");
  cfg.set("field", "zero");
  cfg.set("grid_n", "32");
  cfg.set("grid_steps", "5");  // h_t far above the bound
  cfg.set("out", tmpdir("bad-grid"));
  CHECK_THROWS_AS(run_experiment(cfg), StabilityViolation);
}

TEST_CASE("mollify experiment reports the schedule row") {
  ExperimentConfig cfg = ExperimentConfig::make("mollify");
  cfg.set("m", "4");
  cfg.set("divisions", "48");
  cfg.set("box_cap", "2");
  cfg.set("spacing", "0.5");
  cfg.set("out", tmpdir("mollify"));
  const RunManifest man = run_experiment(cfg);
  const std::string csv = slurp(man.outputs.at("mollify"));
  CHECK(csv.find("eps_m") != std::string::npos);
  CHECK(csv.find("c_m") != std::string::npos);
  CHECK(man.constants.count("C_S") == 1);
}

TEST_CASE("criterion names and bounds") {
  CHECK(criterion_count() == 13);
  CHECK(criterion_name(1) == "heat-kernel-oracle");
  CHECK(criterion_name(13) == "determinism");
  CHECK_THROWS_AS(criterion_name(0), InvalidParameter);
  CHECK_THROWS_AS(criterion_name(14), InvalidParameter);
}

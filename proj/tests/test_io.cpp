#include <doctest.h>

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "hmmlab/cli.hpp"
#include "hmmlab/config.hpp"
#include "hmmlab/io.hpp"
#include "hmmlab/stats.hpp"
#include "oracle_helpers.hpp"

using namespace hmmlab;
namespace fs = std::filesystem;

namespace {

nlohmann::json tiny_config() {
  nlohmann::json j;
  j["scenario"] = "tiny";
  j["seed"] = 11;
  j["model"] = {{"family", "gaussian_mean"},
                {"states", 2},
                {"sigma", 1.0},
                {"box_lower", {-2.0, -2.0}},
                {"box_upper", {2.0, 2.0}},
                {"transition", {{0.75, 0.25}, {0.25, 0.75}}}};
  j["theta0"] = {-0.5, 0.5};
  j["simulate"] = {{"n_grid", {16}}, {"replicates", 2}};
  return j;
}

std::string slurp(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  REQUIRE(in);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("model configs round-trip bit exactly through text") {
  ModelConfig config;
  config.family = "gaussian_mean";
  config.states = 2;
  config.sigma = 0.1 + 0.2;  // not exactly representable as 0.3
  config.box_lower = Eigen::Vector2d(-1.0 / 3.0, -2.0);
  config.box_upper = Eigen::Vector2d(0.1, 1e-17 + 1.0);
  config.transition.resize(2, 2);
  config.transition << 0.9, 0.09999999999999998, 0.5, 0.5;

  const std::string text = model_to_json(config).dump();
  const ModelConfig back = model_from_json(nlohmann::json::parse(text), "/model");

  CHECK(std::memcmp(&back.sigma, &config.sigma, sizeof(double)) == 0);
  for (int i = 0; i < 2; ++i) {
    CHECK(std::memcmp(&back.box_lower[i], &config.box_lower[i], sizeof(double)) == 0);
    CHECK(std::memcmp(&back.box_upper[i], &config.box_upper[i], sizeof(double)) == 0);
  }
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 2; ++c) {
      const double a = back.transition(r, c), b = config.transition(r, c);
      CHECK(std::memcmp(&a, &b, sizeof(double)) == 0);
    }
}

TEST_CASE("unknown keys are rejected with their path") {
  nlohmann::json j = tiny_config();
  j["bogus"] = 1;
  CHECK_THROWS_WITH_AS(parse_experiment_config(j), "unknown key at /bogus",
                       ConfigError);

  nlohmann::json nested = tiny_config();
  nested["model"]["sigmaa"] = 2.0;
  try {
    parse_experiment_config(nested);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("/model/sigmaa") != std::string::npos);
  }

  nlohmann::json deep = tiny_config();
  deep["posterior"] = {{"mcmc", {{"iterationz", 100}}}};
  try {
    parse_experiment_config(deep);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("/posterior/mcmc/iterationz") !=
          std::string::npos);
  }
}

TEST_CASE("config hash ignores key order") {
  nlohmann::json a = nlohmann::json::parse(R"({"scenario":"x","seed":1})");
  nlohmann::json b = nlohmann::json::parse(R"({"seed":1,"scenario":"x"})");
  CHECK(config_hash(a) == config_hash(b));
  b["seed"] = 2;
  CHECK(config_hash(a) != config_hash(b));
}

TEST_CASE("simulate runs are byte-identical under one seed") {
  const ExperimentConfig config = parse_experiment_config(tiny_config());
  RunContext ctx;
  ctx.exec = Exec::serial();

  ctx.out_dir = fresh_dir("hmmlab_det_a");
  const fs::path dir_a = run_simulate(config, ctx);
  ctx.out_dir = fresh_dir("hmmlab_det_b");
  const fs::path dir_b = run_simulate(config, ctx);

  for (const auto& entry : fs::directory_iterator(dir_a)) {
    const std::string name = entry.path().filename().string();
    if (name == "manifest.json") continue;  // carries wall-clock timestamps
    CHECK(slurp(entry.path()) == slurp(dir_b / name));
  }
  CHECK(fs::exists(dir_a / "path_n16_rep0.csv"));
  CHECK(fs::exists(dir_a / "filter_trace_n16.csv"));
  CHECK(fs::exists(dir_a / "manifest.json"));
}

TEST_CASE("simulate requires a nonempty n grid") {
  nlohmann::json j = tiny_config();
  j["simulate"]["n_grid"] = nlohmann::json::array();
  CHECK_THROWS_AS(parse_experiment_config(j), ConfigError);

  nlohmann::json missing = tiny_config();
  missing.erase("simulate");
  const ExperimentConfig config = parse_experiment_config(missing);
  RunContext ctx;
  ctx.out_dir = fresh_dir("hmmlab_nosim");
  CHECK_THROWS_AS(run_simulate(config, ctx), ConfigError);
}

TEST_CASE("report merges manifests and rejects bad input") {
  const ExperimentConfig config = parse_experiment_config(tiny_config());
  RunContext ctx;
  ctx.exec = Exec::serial();
  ctx.out_dir = fresh_dir("hmmlab_report");
  const fs::path run_dir = run_simulate(config, ctx);

  SUBCASE("empty input") {
    CHECK_THROWS_AS(run_report({}, ctx.out_dir), ConfigError);
  }
  SUBCASE("single run gives one row") {
    const fs::path summary = run_report({run_dir}, ctx.out_dir);
    const std::string text = slurp(summary);
    CHECK(std::count(text.begin(), text.end(), '\n') == 2);  // header + 1 row
    CHECK(text.find("tiny,simulate") != std::string::npos);
  }
  SUBCASE("row count equals input count") {
    const fs::path summary = run_report({run_dir, run_dir, run_dir}, ctx.out_dir);
    const std::string text = slurp(summary);
    CHECK(std::count(text.begin(), text.end(), '\n') == 4);
  }
  SUBCASE("mixed tool versions fail") {
    const fs::path copy = fresh_dir("hmmlab_report_copy");
    fs::copy(run_dir, copy / "tiny", fs::copy_options::recursive);
    nlohmann::json manifest = read_json(copy / "tiny" / "manifest.json");
    manifest["tool_version"] = "hmmlab 0.0.0";
    write_json(copy / "tiny" / "manifest.json", manifest);
    CHECK_THROWS_AS(run_report({run_dir, copy / "tiny"}, ctx.out_dir), ConfigError);
  }
}

TEST_CASE("filter trace CSV carries filters and increments per step") {
  const HmmSpec spec = oracles::gauss2_spec();
  const Param theta = Eigen::Vector2d(-0.5, 0.5);
  const PathPair path = simulate_path(spec, theta, 8, 3u);
  const FilterTrace trace = run_filter(spec, theta, path.observations);
  const fs::path file = fs::temp_directory_path() / "hmmlab_trace.csv";
  write_filter_trace_csv(file, trace);
  const std::string text = slurp(file);
  CHECK(text.rfind("t,p1,p2,increment\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 9);
}

TEST_CASE("test functions survive serialization") {
  const HmmSpec spec = oracles::iid_gauss_spec();
  TestFunction test;
  test.kind = TestKind::composite;
  test.theta0 = Eigen::VectorXd::Constant(1, 0.25);
  test.members.push_back({Eigen::VectorXd::Constant(1, -0.25), 0.015625, 1, 0.125});
  test.members.push_back({Eigen::VectorXd::Constant(1, 0.75), 0.02, 2, 0.11});
  const TestFunction back = test_function_from_json(test_function_to_json(test));
  REQUIRE(back.members.size() == 2);
  CHECK(back.kind == TestKind::composite);
  CHECK(back.theta0 == test.theta0);
  CHECK(back.members[1].critical_value == test.members[1].critical_value);

  const PathPair path = simulate_path(spec, test.theta0, 50, 77u);
  CHECK(test.decide(spec, path.observations) ==
        back.decide(spec, path.observations));
}

TEST_CASE("cli process exit codes") {
  const fs::path dir = fresh_dir("hmmlab_cli_proc");
  const fs::path config_file = dir / "config.json";
  write_json(config_file, tiny_config());

  const std::string base = std::string(HMMLAB_CLI_PATH);
  const std::string quiet = " > /dev/null 2>&1";

  int rc = std::system(
      (base + " simulate --config " + config_file.string() + " --out " +
       (dir / "runs").string() + " --threads 1" + quiet)
          .c_str());
  CHECK(WEXITSTATUS(rc) == 0);

  nlohmann::json bad = tiny_config();
  bad["simulate"]["n_gridd"] = {4};
  write_json(dir / "bad.json", bad);
  rc = std::system((base + " simulate --config " + (dir / "bad.json").string() +
                    " --out " + (dir / "runs").string() + quiet)
                       .c_str());
  CHECK(WEXITSTATUS(rc) == 2);

  rc = std::system((base + " report --out " + (dir / "runs").string() + " " +
                    (dir / "missing_run").string() + quiet)
                       .c_str());
  CHECK(WEXITSTATUS(rc) == 2);
}

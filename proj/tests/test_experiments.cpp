#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "stablerates/experiments.hpp"

using namespace stable;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path temp_dir(const std::string& tag) {
  const fs::path p = fs::temp_directory_path() / ("stable_rates_test_" + tag);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("config validation produces field-level errors", "[experiments]") {
  experiments::ExperimentConfig cfg;
  cfg.experiment = "nope";
  CHECK_THROWS_AS(experiments::validate(cfg), experiments::ConfigError);

  cfg.experiment = "quadratic_bm";
  cfg.n_ladder = {8, 8};
  try {
    experiments::validate(cfg);
    FAIL("expected ConfigError");
  } catch (const experiments::ConfigError& e) {
    CHECK(e.field == "n_ladder");
  }

  cfg.n_ladder = {4, 8};
  cfg.replicas = 10;
  try {
    experiments::validate(cfg);
    FAIL("expected ConfigError");
  } catch (const experiments::ConfigError& e) {
    CHECK(e.field == "replicas");
  }

  cfg.replicas = 500;
  cfg.grid_size = 17;  // < 8 * 8
  try {
    experiments::validate(cfg);
    FAIL("expected ConfigError");
  } catch (const experiments::ConfigError& e) {
    CHECK(e.field == "grid_size");
  }

  cfg.grid_size = 64;
  CHECK_NOTHROW(experiments::validate(cfg));

  experiments::ExperimentConfig fbm_cfg;
  fbm_cfg.experiment = "quadratic_fbm";
  fbm_cfg.hurst = 0.4;
  fbm_cfg.replicas = 500;
  CHECK_THROWS_AS(experiments::validate(fbm_cfg), experiments::ConfigError);
}

TEST_CASE("config JSON parsing and overrides", "[experiments]") {
  experiments::ExperimentConfig cfg;
  experiments::apply_json_text(cfg, R"({"experiment":"lemma61","hurst":0.3,"q":2,
                                        "n_ladder":[32,64,128],"seed":42})");
  CHECK(cfg.experiment == "lemma61");
  CHECK(cfg.hurst == 0.3);
  CHECK(cfg.q == 2);
  CHECK(cfg.seed == 42);

  CHECK_THROWS_AS(experiments::apply_json_text(cfg, R"({"banana": 1})"),
                  experiments::ConfigError);
  CHECK_THROWS_AS(experiments::apply_json_text(cfg, "{not json"), experiments::ConfigError);
  CHECK_THROWS_AS(experiments::apply_json_text(cfg, R"({"replicas":"many"})"),
                  experiments::ConfigError);
}

TEST_CASE("run smoke: small quadratic_bm writes all files", "[experiments]") {
  experiments::ExperimentConfig cfg;
  cfg.experiment = "quadratic_bm";
  cfg.n_ladder = {4, 8};
  cfg.replicas = 100;
  cfg.grid_size = 64;
  cfg.seed = 5;
  cfg.output_path = temp_dir("smoke").string();
  const auto result = experiments::run(cfg);
  for (const char* name : {"distances.csv", "bounds.csv", "ratefit.csv", "manifest.json"})
    CHECK(fs::exists(fs::path(cfg.output_path) / name));
  CHECK_FALSE(result.truncated);

  // manifest round-trips the exact config
  const auto manifest = nlohmann::json::parse(slurp(fs::path(cfg.output_path) / "manifest.json"));
  CHECK(manifest["schema_version"] == 1);
  CHECK(manifest["config"]["experiment"] == "quadratic_bm");
  CHECK(manifest["config"]["replicas"] == 100);
  CHECK(manifest["config"]["seed"] == 5);
  CHECK(manifest["config"]["n_ladder"] == nlohmann::json::array({4, 8}));
}

TEST_CASE("CSV bodies are byte-identical across thread counts", "[experiments]") {
  auto body = [](int threads, const std::string& tag) {
    experiments::ExperimentConfig cfg;
    cfg.experiment = "weighted_qv";
    cfg.hurst = 0.4;
    cfg.weight = "cos";
    cfg.n_ladder = {8, 16, 32};
    cfg.replicas = 400;
    cfg.seed = 99;
    cfg.threads = threads;
    cfg.output_path = temp_dir(tag).string();
    experiments::run(cfg);
    std::string all;
    for (const char* name : {"distances.csv", "bounds.csv", "ratefit.csv"})
      all += slurp(fs::path(cfg.output_path) / name);
    return all;
  };
  const std::string t1 = body(1, "det1");
  const std::string t4 = body(4, "det4");
  CHECK(t1 == t4);
}

TEST_CASE("combinatorics run emits the documented row counts", "[experiments]") {
  experiments::ExperimentConfig cfg;
  cfg.experiment = "combinatorics";
  cfg.q = 2;
  cfg.m = 0;
  cfg.d = 1;
  cfg.output_path = temp_dir("comb").string();
  experiments::run(cfg);
  const std::string csv = slurp(fs::path(cfg.output_path) / "combinatorics.csv");
  int a_rows = 0, b_rows = 0;
  std::istringstream ss(csv);
  std::string line;
  std::getline(ss, line);  // header
  while (std::getline(ss, line)) {
    if (line.rfind("A,", 0) == 0) ++a_rows;
    if (line.rfind("B,", 0) == 0) ++b_rows;
  }
  CHECK(a_rows == 2);
  CHECK(b_rows == 5);
}

TEST_CASE("constants run contains the sigma(1/2) = 2 row", "[experiments]") {
  experiments::ExperimentConfig cfg;
  cfg.experiment = "constants";
  cfg.output_path = temp_dir("const").string();
  experiments::run(cfg);
  const std::string csv = slurp(fs::path(cfg.output_path) / "constants.csv");
  CHECK(csv.find("sigma_H,0.5,2\n") != std::string::npos);
  CHECK(csv.find("c_H,0.5,0.70710678118654") != std::string::npos);
}

TEST_CASE("rate_fit subcommand consumes a distances CSV", "[experiments]") {
  const fs::path dir = temp_dir("rfit");
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "in.csv");
    out << "metric,n,H,experiment,estimate,std_error\n";
    for (int n : {8, 16, 32, 64})
      out << "wasserstein1," << n << ",0.5,demo," << 2.0 * std::pow(n, -0.5) << ",0\n";
  }
  experiments::ExperimentConfig cfg;
  cfg.experiment = "rate_fit";
  cfg.input_path = (dir / "in.csv").string();
  cfg.output_path = (dir / "out").string();
  experiments::run(cfg);
  const std::string csv = slurp(fs::path(cfg.output_path) / "ratefit.csv");
  CHECK(csv.find("demo,wasserstein1,-0.5") != std::string::npos);
}

TEST_CASE("runtime budget triggers truncation flag", "[experiments]") {
  experiments::ExperimentConfig cfg;
  cfg.experiment = "weighted_qv";
  cfg.hurst = 0.4;
  cfg.n_ladder = {16, 32, 64, 128};
  cfg.replicas = 2000;
  cfg.seed = 1;
  cfg.max_seconds = 1e-9;
  cfg.output_path = temp_dir("trunc").string();
  const auto result = experiments::run(cfg);
  CHECK(result.truncated);
  const auto manifest = nlohmann::json::parse(slurp(fs::path(cfg.output_path) / "manifest.json"));
  CHECK(manifest["truncated"] == true);
}

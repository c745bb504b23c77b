#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "stablerates/distances.hpp"

namespace stable::experiments {

/// Configuration error carrying the offending field (CLI maps this to exit
/// code 2 with a field-level message).
struct ConfigError : std::runtime_error {
  std::string field;
  std::string message;
  ConfigError(std::string f, std::string msg)
      : std::runtime_error(f + ": " + msg), field(std::move(f)), message(std::move(msg)) {}
};

struct ExperimentConfig {
  std::string experiment;  // quadratic_bm | quadratic_fbm | weighted_qv |
                           // bounds_prop36 | weighted_bounds | lemma61 |
                           // combinatorics | constants | rate_fit
  double hurst = 0.5;
  std::vector<int> n_ladder = {8, 16, 32, 64};
  int replicas = 10000;
  int grid_size = 0;  // 0: derived as 8 * max(n_ladder)
  std::uint64_t seed = 12345;
  std::string weight = "cos";
  std::string output_path = "out";
  int threads = 1;
  double alpha = 0.5;       // Kolmogorov-transfer exponent
  int q = 2, m = 0, d = 1;  // combinatorics / lemma61 parameters
  std::string input_path;   // rate_fit input CSV
  double max_seconds = 0.0; // runtime budget; 0 = unlimited
  int quad_points = 2048;   // A_n quadrature grid
};

/// Reads a JSON config document; unknown keys are rejected.
ExperimentConfig config_from_json_file(const std::string& path);
void apply_json_text(ExperimentConfig& cfg, const std::string& json_text);

/// Field-level validation; throws ConfigError.
void validate(const ExperimentConfig& cfg);

struct RunResult {
  std::vector<std::string> files;
  bool truncated = false;
  bool all_pass = true;  // conjunction of every emitted `pass` column
};

/// Runs one experiment: writes distances.csv, bounds.csv, ratefit.csv and
/// manifest.json under output_path (plus constants.csv / combinatorics.csv
/// for those experiments). Deterministic given (config, seed) for any
/// thread count.
RunResult run(const ExperimentConfig& cfg);

/// Two-sample bootstrap standard error of a metric (200 resamples).
double bootstrap_se(
    const std::function<double(const distances::EmpiricalSample&,
                               const distances::EmpiricalSample&)>& metric,
    const distances::EmpiricalSample& xs, const distances::EmpiricalSample& ys,
    int resamples = 200, std::uint64_t seed = 0x5eedb007ULL);

/// CF frequency grid of the stable-convergence test.
inline const std::vector<double> kCfLambdas = {0.5, 1.0, 2.0};
inline const std::vector<double> kCfMus = {0.0, 1.0};

}  // namespace stable::experiments

#pragma once

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "ubu/core.hpp"
#include "ubu/estimator.hpp"
#include "ubu/models.hpp"

namespace ubu {

/// Raised for anything wrong with user-supplied configuration or data files;
/// the CLI maps it to exit code 1 (runtime failures map to 2).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ModelSection {
  std::string kind;  // gaussian | multinomial | poisson
  // gaussian
  int d = 10;
  double kappa = 4.0;
  // multinomial: either IDX image/label paths or a synthetic draw
  std::string images_path;
  std::string labels_path;
  long subsample = 2000;
  int downscale = 4;  // 28 -> 7 mean pooling
  int classes = 3;
  int pixels = 9;     // synthetic covariate count (before the intercept)
  long n_data = 200;  // synthetic dataset size
  double sigma0_sq = 0.1;
  // poisson: either a match CSV or a synthetic round-robin season
  std::string matches_path;
  int teams = 8;
  int rounds = 20;
  double sigma_sq = 0.1;
  std::uint64_t data_seed = 1;
};

struct SamplerSection {
  std::string method;  // ububu | ububu-sg | ububu-approx | rhmc
  bool precondition = true;
  RunConfig run;
  // rhmc; h <= 0 requests the pilot autotuner
  double rhmc_h = 0.0;
  double rhmc_E_L = 0.0;
  double rhmc_alpha = 0.7;
  long rhmc_K = 2000;
  long rhmc_burn_in = 200;
};

struct DiagnosticsSection {
  std::vector<std::string> test_functions = {"coords", "norm_sq"};
  int runs = 8;     // independent estimator repetitions
  int n_boot = 1000;
};

struct ExperimentConfig {
  std::string id = "experiment";
  ModelSection model;
  SamplerSection sampler;
  DiagnosticsSection diagnostics;
  std::string output_dir = "out";
  std::uint64_t seed = 0;
};

/// Parses and validates a JSON experiment file.  Unknown keys and every
/// constraint violation are rejected with a message naming the field.
ExperimentConfig load_experiment_config(const std::string& path);

/// Deterministic digest of the effective configuration, stamped into every
/// output file so a result row can be traced to its inputs.
std::string canonical_config(const ExperimentConfig& cfg);
std::uint64_t config_hash(const ExperimentConfig& cfg);

// ---------------------------------------------------------------------------
// Dataset ingestion.

struct MnistData {
  Mat X;                   // n x (pixels + 1), values in [0,1], intercept last
  std::vector<int> labels; // 1-based class labels
  int rows = 0;
  int cols = 0;
  // Raw subsampled bytes, kept so the dataset can be re-serialized losslessly.
  std::vector<std::uint8_t> raw_images;
  std::vector<std::uint8_t> raw_labels;
};

/// Reads IDX image/label files (big-endian, magics 2051 and 2049), keeps the
/// first `subsample` images, mean-pools by `downscale`, scales pixels to
/// [0,1] and appends an intercept column.
MnistData ingest_mnist(const std::string& images_path, const std::string& labels_path,
                       long subsample, int downscale);

/// Writes the retained raw images/labels back out in IDX format.
void write_mnist(const std::string& images_path, const std::string& labels_path,
                 const MnistData& data);

struct MatchData {
  std::vector<SoccerGame> games;
  std::vector<std::string> team_names;  // index = team id
  int n_teams = 0;
  int n_weeks = 0;
};

/// Reads a match CSV with header round,home,away,hg,ag.
MatchData ingest_matches(const std::string& csv_path);
void write_matches(const std::string& csv_path, const MatchData& data);

std::uint64_t dataset_hash(const MnistData& data);
std::uint64_t dataset_hash(const MatchData& data);

// ---------------------------------------------------------------------------
// Model construction and commands.

struct BuiltModel {
  std::shared_ptr<const Potential> target;  // what the samplers run on
  HessianEig hstar;                         // Hessian of `target` at its mode
  std::string name;
  double kappa = 0.0;  // condition number of the original model at its mode
};

BuiltModel build_model(const ExperimentConfig& cfg);

/// Names and the stacked evaluation of the configured test functions.
struct TestSuite {
  std::vector<std::string> names;
  TestFn f;
};

TestSuite build_test_suite(const DiagnosticsSection& diag, int dim);

/// Runs the configured sampler, writes results.csv (one row per test-function
/// component) and dlevels.csv (per-level difference samples) under
/// cfg.output_dir.  Returns the process exit code.
int cmd_run(const ExperimentConfig& cfg);

/// Coupled two-level strong-convergence study; writes strong_order.csv with
/// per-stepsize RMS gaps and per-kernel fitted slopes.
int cmd_strong_order(const ExperimentConfig& cfg);

/// Aggregates results.csv files under results_dir into a gradients-per-ESS
/// histogram and a per-mode summary with bootstrap confidence intervals.
int cmd_ess_report(const std::string& results_dir, const std::string& output_dir,
                   int n_boot = 1000);

}  // namespace ubu

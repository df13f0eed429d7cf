#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "ubu/io.hpp"

namespace {

ubu::ExperimentConfig load_with_overrides(const std::string& config_path,
                                          long long seed_override, int threads,
                                          const std::string& output_override) {
  ubu::ExperimentConfig cfg = ubu::load_experiment_config(config_path);
  if (seed_override >= 0) {
    cfg.seed = static_cast<std::uint64_t>(seed_override);
    cfg.sampler.run.seed = cfg.seed;
  }
  if (threads > 0) cfg.sampler.run.threads = threads;
  if (!output_override.empty()) cfg.output_dir = output_override;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multilevel kinetic Langevin sampling benchmark"};
  app.require_subcommand(1);

  std::string config_path, output_dir, results_dir;
  long long seed_override = -1;
  int threads = 0;

  CLI::App* run = app.add_subcommand("run", "Run the configured sampler");
  run->add_option("--config", config_path, "Experiment JSON file")->required();
  run->add_option("--seed", seed_override, "Override the config seed");
  run->add_option("--threads", threads, "Worker cap (results invariant to it)");
  run->add_option("--output", output_dir, "Override the output directory");

  CLI::App* so = app.add_subcommand("strong-order", "Coupled-path convergence study");
  so->add_option("--config", config_path, "Experiment JSON file")->required();
  so->add_option("--seed", seed_override, "Override the config seed");
  so->add_option("--threads", threads, "Worker cap (results invariant to it)");
  so->add_option("--output", output_dir, "Override the output directory");

  CLI::App* ess = app.add_subcommand("ess-report", "Aggregate gradients-per-ESS");
  ess->add_option("--results", results_dir, "Directory holding results.csv files")
      ->required();
  ess->add_option("--output", output_dir, "Output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed())
      return ubu::cmd_run(load_with_overrides(config_path, seed_override, threads, output_dir));
    if (so->parsed())
      return ubu::cmd_strong_order(
          load_with_overrides(config_path, seed_override, threads, output_dir));
    return ubu::cmd_ess_report(results_dir, output_dir);
  } catch (const ubu::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << "\n";
    return 2;
  }
}

// Benchmarks the replicate-parallel estimator against the serial reference
// (the same code pinned to one worker) and verifies they produce identical
// results.

#include <chrono>
#include <iostream>

#include <CLI11.hpp>
#include <omp.h>

#include "ubu/diagnostics.hpp"
#include "ubu/estimator.hpp"
#include "ubu/models.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Serial vs parallel chain benchmark"};
  int d = 50;
  double kappa = 4.0;
  long N = 64, K = 200;
  std::uint64_t seed = 1;
  int threads = 0;
  app.add_option("--d", d, "Target dimension");
  app.add_option("--kappa", kappa, "Condition number");
  app.add_option("--N", N, "Level-0 replicates");
  app.add_option("--K", K, "Retained samples per chain");
  app.add_option("--seed", seed, "Seed");
  app.add_option("--threads", threads, "Parallel worker count (0 = all)");
  CLI11_PARSE(app, argc, argv);

  ubu::GaussianTarget target(d, kappa);
  ubu::HessianEig hstar = ubu::hessian_at_min(target, ubu::Vec::Zero(d));
  ubu::RunConfig cfg;
  cfg.h0 = 0.4;
  cfg.gamma = std::sqrt(hstar.m());
  cfg.N = N;
  cfg.K = K;
  cfg.seed = seed;
  const ubu::TestFn f = [](const ubu::PhaseState& z) { return z.x; };

  const auto timed = [&](int nt) {
    cfg.threads = nt;
    const auto t0 = std::chrono::steady_clock::now();
    ubu::EstimatorReport rep = ubu::run_estimator(target, hstar, cfg, f);
    const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return std::pair<ubu::EstimatorReport, double>(std::move(rep), dt);
  };

  const auto [serial, t_serial] = timed(1);
  const int nt = threads > 0 ? threads : omp_get_max_threads();
  const auto [parallel, t_parallel] = timed(nt);

  const double diff = (serial.s - parallel.s).norm();
  std::cout << "serial (1 worker):   " << t_serial << " s\n";
  std::cout << "parallel (" << nt << " workers): " << t_parallel << " s\n";
  std::cout << "speedup: " << t_serial / t_parallel << "\n";
  std::cout << "|S_serial - S_parallel| = " << diff << "\n";
  if (diff != 0.0) {
    std::cerr << "mismatch between serial and parallel results\n";
    return 2;
  }
  return 0;
}

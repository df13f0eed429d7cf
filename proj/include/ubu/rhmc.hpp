#pragma once

#include "ubu/couplings.hpp"
#include "ubu/core.hpp"
#include "ubu/inexact.hpp"
#include "ubu/models.hpp"

namespace ubu {

/// Randomized Hamiltonian Monte Carlo with partial velocity refreshment:
/// a geometric number of leapfrog steps, Metropolis correction with velocity
/// flip on rejection, then v <- alpha v + sqrt(1 - alpha^2) Z.
struct RhmcConfig {
  double h = 0.1;
  double E_L = 10.0;   // expected leapfrog steps per iteration, >= 1
  double alpha = 0.7;  // velocity refresh retention
  long K = 1000;       // retained iterations
  long burn_in = 0;
  InitDistribution mu0 = InitDistribution::GaussianApprox;
  std::uint64_t seed = 0;
};

struct RhmcResult {
  Vec mean_f;        // mean of f over the K retained iterations
  Vec var_f;         // within-chain sample variance of f
  double accept_rate;
  double mean_leapfrog;
  WorkCounter work;
};

RhmcResult run_rhmc(const Potential& pot, const HessianEig& hstar, const RhmcConfig& cfg,
                    std::uint64_t tag, const TestFn& f);

/// Pilot-run step size search aiming for acceptance in [0.60, 0.70], with
/// the trajectory length set to E_L h ~ 1/sqrt(m).
struct RhmcTuning {
  double h;
  double E_L;
  double accept_rate;
};

RhmcTuning tune_rhmc(const Potential& pot, const HessianEig& hstar, double h_init,
                     std::uint64_t seed);

}  // namespace ubu

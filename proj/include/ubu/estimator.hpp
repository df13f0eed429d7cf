#pragma once

#include <vector>

#include "ubu/couplings.hpp"
#include "ubu/core.hpp"
#include "ubu/models.hpp"

namespace ubu {

/// Randomized number of coupled pairs per level.  Levels up to L run a
/// deterministic count ceil(c_{l,l+1} N); beyond L the count is a keyed
/// Bernoulli(c_{l,l+1} N) draw, and l_max is the deepest level that came up.
struct LevelSchedule {
  int L = 0;
  int l_max = 0;
  std::vector<long> n_pairs;  // indexed by level, 0 .. l_max

  long pairs_at(int level) const {
    return (level >= 0 && level <= l_max) ? n_pairs[level] : 0;
  }
};

LevelSchedule make_schedule(long N, double c_N, double phi_N, std::uint64_t seed);

/// Expected pair count c_{l,l+1} N at a level.
double expected_pairs(long N, double c_N, double phi_N, int level);

/// Burn-in lengths from the convexity constants of the target: m and M are
/// the extreme Hessian eigenvalues at the minimizer.
struct BurnIn {
  long B0;
  long B;
};

BurnIn default_burn_in(double h0, double gamma, double m, double M);

/// Everything produced by one estimator run; kept at full granularity so the
/// diagnostics can compute variance decompositions without rerunning chains.
struct EstimatorReport {
  LevelSchedule schedule;
  long B0 = 0;
  long B = 0;
  std::vector<Vec> d0;                    // level-0 replicate means, N entries
  std::vector<std::vector<Vec>> d_pairs;  // d_pairs[l][r] for l < L
  std::vector<Vec> d_tail;                // joint-coupling differences, levels L..l_max
  Vec s;                                  // Richardson estimator S(c_R)
  Vec s_plain;                            // S(0)
  WorkCounter work;
};

/// Recombines replicate-level outputs into the estimator value for a given
/// Richardson weight.
Vec assemble_s(const EstimatorReport& rep, long N, double c_N, double phi_N, double c_R);

/// Runs the full multilevel estimator for the configured gradient mode.
/// Deterministic in cfg.seed, independent of cfg.threads.
EstimatorReport run_estimator(const Potential& pot, const HessianEig& hstar,
                              const RunConfig& cfg, const TestFn& f);

/// Chain parameters implied by a run configuration, with burn-in resolved
/// against the Hessian spectrum.
ChainParams resolve_chain_params(const RunConfig& cfg, const HessianEig& hstar);

}  // namespace ubu

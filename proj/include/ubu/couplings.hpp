#pragma once

#include <functional>
#include <vector>

#include "ubu/core.hpp"
#include "ubu/inexact.hpp"
#include "ubu/integrators.hpp"
#include "ubu/models.hpp"

namespace ubu {

/// Vector-valued test function evaluated on retained samples; all chains in a
/// run must see the same output length.
using TestFn = std::function<Vec(const PhaseState&)>;

/// Chain schedule parameters shared by the level drivers.  B0 and B must be
/// resolved to concrete non-negative values; level l burns in B0 + l B
/// coarse-unit steps and then retains K samples spaced one coarse unit apart.
struct ChainParams {
  double h0;
  double gamma;
  long B0;
  long B;
  long K;
  GradientMode mode;
  long tau;
  long N_b;
  InitDistribution mu0;
  std::uint64_t seed;
};

/// The four standard normals consumed by one integrator step.
struct NoiseQuad {
  Vec xi1, xi2, xi3, xi4;
};

/// Synchronized Gaussian noise across discretization levels.  The finest
/// level (top) draws fresh keyed variates; each coarser level's step k is the
/// deterministic coarsening of the finer level's steps off + 2k and
/// off + 2k + 1, so all levels are driven by one Brownian path.
class NoiseTree {
 public:
  /// offsets[j - first] gives, for level j < top, the index of the first step
  /// of level j + 1 that level j overlaps with.
  NoiseTree(const ChainParams& p, int first, int top, std::uint64_t tag, int dim,
            std::vector<long> offsets);

  NoiseQuad quad(int level, long step) const;

 private:
  std::uint64_t seed_;
  std::uint64_t tag_;
  int first_;
  int top_;
  int dim_;
  std::vector<long> offsets_;
  std::vector<OUCoeffs> fine_half_;    // per level < top: coeffs at h_{l+1}/2
  std::vector<OUCoeffs> coarse_half_;  // per level < top: coeffs at h_{l+1}
};

/// Synchronized subsample batches across levels: the finest level draws fresh
/// batches; a coarser level's step takes one of the two overlapping finer
/// batches by a keyed fair coin.
class OmegaTree {
 public:
  OmegaTree(const ChainParams& p, int first, int top, std::uint64_t tag, int n_data,
            std::vector<long> offsets);

  std::vector<int> batch(int level, long step) const;

 private:
  std::uint64_t seed_;
  std::uint64_t tag_;
  int first_;
  int top_;
  int n_data_;
  long n_b_;
  std::vector<long> offsets_;
};

/// Total fine-kernel step count of the level-j chain within a coupled ladder
/// whose finest level is top.
long ladder_total_steps(const ChainParams& p, int level, int top);

/// Step index of level j+1 at which level j's run begins.
long ladder_offset(const ChainParams& p, int level, int top);

struct LadderResult {
  /// Per-level sample means of f, levels first .. last+1 in order.
  std::vector<Vec> level_means;
};

/// Runs the jointly coupled ladder of levels first, ..., last+1 (coarsest to
/// finest) and returns each level's mean of f over its K retained samples.
/// With exact gradients every level starts independently from mu0; with
/// subsampled or quadratic gradients the finest level starts from the
/// Gaussian approximation and each coarser level branches off the finer one,
/// running the exactly-invariant Gaussian kernel until its own window starts.
/// Adjacent level pairs are distributed as the two-level coupling, so a
/// single pair is obtained with last == first.
LadderResult run_ladder(const Potential& pot, const HessianEig& hstar,
                        const ChainParams& p, int first, int last, std::uint64_t tag,
                        const TestFn& f, WorkCounter* work);

/// Mean of f over the K retained level-0 samples: a single chain from mu0
/// with exact gradients, or K independent Gaussian-approximation draws for
/// the inexact modes.
Vec run_level0(const Potential& pot, const HessianEig& hstar, const ChainParams& p,
               std::uint64_t tag, const TestFn& f, WorkCounter* work);

/// Draw from the initial distribution (keyed, deterministic in tag/level).
PhaseState draw_init(const HessianEig& hstar, InitDistribution mu0, std::uint64_t seed,
                     int level, std::uint64_t tag);

/// Draw from the Gaussian approximation N(x*, (H*)^{-1}) x N(0, I).
PhaseState draw_mu_g(const HessianEig& hstar, std::uint64_t seed, int level,
                     std::uint64_t tag, long step);

}  // namespace ubu

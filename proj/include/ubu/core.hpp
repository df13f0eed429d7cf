#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace ubu {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Position-velocity pair z = (x, v), the state every kernel acts on.
struct PhaseState {
  Vec x;
  Vec v;

  int dim() const { return static_cast<int>(x.size()); }
  void check() const {
    if (x.size() != v.size() || x.size() < 1)
      throw std::invalid_argument("PhaseState: x and v must have equal length >= 1");
  }
};

/// Parameters of the weighted norm ||z||^2_{a,b} = ||x||^2 + 2b<x,v> + a||v||^2.
struct WeightedNormParams {
  double a;
  double b;
  void check() const {
    if (!(a > 0.0 && b > 0.0 && b * b < a))
      throw std::invalid_argument("WeightedNormParams: need a>0, b>0, b^2<a");
  }
};

double weighted_norm_sq(const PhaseState& z, const WeightedNormParams& p);

// ---------------------------------------------------------------------------
// Keyed, counter-based randomness.  Every random quantity in the project is a
// pure function of a NoiseKey plus a draw index, so coupled chains and
// parallel workers can address the exact same variates without shared state.

enum class Stream : std::uint64_t {
  Level0Chain = 1,
  PairCoupling = 2,
  TailCoupling = 3,
  InitState = 4,
  Schedule = 5,
  MuGDraw = 6,
  Rhmc = 7,
  Synthetic = 8,
  Bootstrap = 9,
  Generic = 10,
};

// Slots within a chain step.
inline constexpr std::int32_t kSlotXi1 = 0;
inline constexpr std::int32_t kSlotXi2 = 1;
inline constexpr std::int32_t kSlotXi3 = 2;
inline constexpr std::int32_t kSlotXi4 = 3;
inline constexpr std::int32_t kSlotBatch = 4;
inline constexpr std::int32_t kSlotCoin = 5;
inline constexpr std::int32_t kSlotInit = 6;

struct NoiseKey {
  std::uint64_t seed = 0;
  std::int32_t level = 0;
  std::int64_t replicate = 0;
  std::int64_t step = 0;
  std::int32_t slot = 0;
};

/// Packs a stream purpose and up to two indices into a replicate tag so that
/// unrelated uses of the same (seed, level, step, slot) never collide.
std::uint64_t stream_tag(Stream purpose, std::int64_t a = 0, std::int64_t b = 0);

/// j-th raw 64-bit word of the stream addressed by key.
std::uint64_t key_word(const NoiseKey& key, std::uint64_t j);

/// Uniform variate in (0,1), deterministic in (key, j).
double key_uniform(const NoiseKey& key, std::uint64_t j);

/// n i.i.d. standard normal variates, deterministic in key.
Vec draw_gaussians(const NoiseKey& key, int n);

/// Standard normal from a single stream position.
double draw_gaussian(const NoiseKey& key, std::uint64_t j);

/// n_b indices uniform on {1,...,n_data}, with replacement, deterministic in key.
std::vector<int> draw_batch(const NoiseKey& key, int n_data, int n_b);

/// Fair coin, deterministic in key.
bool draw_coin(const NoiseKey& key, std::uint64_t j = 0);

// ---------------------------------------------------------------------------

enum class GradientMode { Exact, Svrg, Approx };

enum class InitDistribution { MapDirac, GaussianApprox };

std::string to_string(GradientMode m);

/// Run configuration shared by the multilevel estimator drivers.
/// B0 and B are counts of coarse-kernel steps; negative values mean
/// "derive the default burn-in from the target's Hessian spectrum".
struct RunConfig {
  double h0 = 0.5;
  double gamma = 1.0;
  long B0 = -1;
  long B = -1;
  long K = 100;
  long N = 64;
  double c_N = 1.0 / 16.0;
  double phi_N = 4.0;
  double c_R = 0.25;
  GradientMode mode = GradientMode::Exact;
  long tau = 2;
  long N_b = 1;
  InitDistribution mu0 = InitDistribution::MapDirac;
  std::uint64_t seed = 0;
  int threads = 0;  // 0 = all available; results are invariant to this.

  void validate() const;
};

/// Default Richardson parameter for each gradient mode.
double default_c_R(GradientMode mode);

}  // namespace ubu

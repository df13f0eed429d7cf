#include "ubu/core.hpp"

#include <cmath>

namespace ubu {

double weighted_norm_sq(const PhaseState& z, const WeightedNormParams& p) {
  p.check();
  if (z.x.size() != z.v.size())
    throw std::invalid_argument("weighted_norm_sq: dimension mismatch between x and v");
  return z.x.squaredNorm() + 2.0 * p.b * z.x.dot(z.v) + p.a * z.v.squaredNorm();
}

namespace {

// 64-bit finalizer (murmur3 variant); bijective with full avalanche.
inline std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 33;
  z *= 0xff51afd7ed558ccdULL;
  z ^= z >> 33;
  z *= 0xc4ceb9fe1a85ec53ULL;
  z ^= z >> 33;
  return z;
}

}  // namespace

std::uint64_t stream_tag(Stream purpose, std::int64_t a, std::int64_t b) {
  std::uint64_t h = mix64(static_cast<std::uint64_t>(purpose) + 0x9e3779b97f4a7c15ULL);
  h = mix64(h ^ (static_cast<std::uint64_t>(a) * 0xbf58476d1ce4e5b9ULL));
  h = mix64(h ^ (static_cast<std::uint64_t>(b) * 0x94d049bb133111ebULL));
  return h;
}

std::uint64_t key_word(const NoiseKey& key, std::uint64_t j) {
  std::uint64_t h = mix64(key.seed + 0x9e3779b97f4a7c15ULL);
  h = mix64(h ^ (static_cast<std::uint64_t>(key.level) * 0xd6e8feb86659fd93ULL));
  h = mix64(h ^ (key.replicate * 0xa0761d6478bd642fULL));
  h = mix64(h ^ (static_cast<std::uint64_t>(key.step) * 0xe7037ed1a0b428dbULL));
  h = mix64(h ^ (static_cast<std::uint64_t>(key.slot) * 0x8ebc6af09c88c6e3ULL));
  return mix64(h ^ (j * 0x589965cc75374cc3ULL));
}

double key_uniform(const NoiseKey& key, std::uint64_t j) {
  // 53-bit mantissa, offset by half an ulp so the result is in (0,1).
  return (static_cast<double>(key_word(key, j) >> 11) + 0.5) * 0x1.0p-53;
}

namespace {

// Wichura's AS241 (PPND16): inverse standard normal CDF, ~1e-16 accurate.
double inverse_normal_cdf(double p) {
  const double q = p - 0.5;
  if (std::fabs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q *
           (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
                 6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r +
               1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r +
             1.3314166789178437745e2) * r + 3.3871328727963666080e0) /
           (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
                 3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r +
               5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r +
             4.2313330701600911252e1) * r + 1.0);
  }
  double r = (q < 0.0) ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double val;
  if (r <= 5.0) {
    r -= 1.6;
    val = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r +
              3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r +
            4.63033784615654529590e0) * r + 1.42343711074968357734e0) /
          (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
              6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r +
            2.05319162663775882187e0) * r + 1.0);
  } else {
    r -= 5.0;
    val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
              2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r +
            5.46378491116411436990e0) * r + 6.65790464350110377720e0) /
          (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
              1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
            5.99832206555887937690e-1) * r + 1.0);
  }
  return (q < 0.0) ? -val : val;
}

}  // namespace

double draw_gaussian(const NoiseKey& key, std::uint64_t j) {
  return inverse_normal_cdf(key_uniform(key, j));
}

Vec draw_gaussians(const NoiseKey& key, int n) {
  if (n < 1) throw std::invalid_argument("draw_gaussians: n must be >= 1");
  Vec out(n);
  for (int i = 0; i < n; ++i) out[i] = inverse_normal_cdf(key_uniform(key, i));
  return out;
}

std::vector<int> draw_batch(const NoiseKey& key, int n_data, int n_b) {
  if (n_data < 1 || n_b < 1) throw std::invalid_argument("draw_batch: need n_data, n_b >= 1");
  std::vector<int> out(n_b);
  for (int i = 0; i < n_b; ++i)
    out[i] = 1 + static_cast<int>(key_word(key, i) % static_cast<std::uint64_t>(n_data));
  return out;
}

bool draw_coin(const NoiseKey& key, std::uint64_t j) { return (key_word(key, j) & 1u) != 0; }

std::string to_string(GradientMode m) {
  switch (m) {
    case GradientMode::Exact: return "exact";
    case GradientMode::Svrg: return "svrg";
    case GradientMode::Approx: return "approx";
  }
  return "?";
}

double default_c_R(GradientMode mode) {
  switch (mode) {
    case GradientMode::Exact: return 0.25;
    case GradientMode::Svrg: return 1.0 / (2.0 * std::sqrt(2.0));
    case GradientMode::Approx: return 0.5;
  }
  return 0.25;
}

void RunConfig::validate() const {
  if (!(h0 > 0.0)) throw std::invalid_argument("RunConfig: h0 must be > 0");
  if (!(gamma > 0.0)) throw std::invalid_argument("RunConfig: gamma must be > 0");
  if (!(phi_N > 2.0)) throw std::invalid_argument("RunConfig: phi_N must be > 2");
  if (!(c_N > 0.0)) throw std::invalid_argument("RunConfig: c_N must be > 0");
  if (!(c_R >= 0.0 && c_R < 1.0 / std::sqrt(phi_N)))
    throw std::invalid_argument("RunConfig: c_R must lie in [0, phi_N^{-1/2})");
  if (K < 1) throw std::invalid_argument("RunConfig: K must be >= 1");
  if (N < 1) throw std::invalid_argument("RunConfig: N must be >= 1");
  if (mode != GradientMode::Exact) {
    if (tau < 2 || tau % 2 != 0)
      throw std::invalid_argument("RunConfig: tau must be even and >= 2 for inexact gradients");
    if (N_b < 1) throw std::invalid_argument("RunConfig: N_b must be >= 1");
  }
}

}  // namespace ubu

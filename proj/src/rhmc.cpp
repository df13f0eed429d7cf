#include "ubu/rhmc.hpp"

#include <cmath>

namespace ubu {

namespace {

constexpr std::int32_t kSlotGeom = 10;
constexpr std::int32_t kSlotAccept = 11;
constexpr std::int32_t kSlotRefresh = 12;

long geometric_steps(double u, double E_L) {
  if (E_L <= 1.0) return 1;
  // Support {1, 2, ...} with mean E_L.
  return 1 + static_cast<long>(std::floor(std::log(u) / std::log(1.0 - 1.0 / E_L)));
}

}  // namespace

RhmcResult run_rhmc(const Potential& pot, const HessianEig& hstar, const RhmcConfig& cfg,
                    std::uint64_t tag, const TestFn& f) {
  if (!(cfg.h > 0.0) || cfg.E_L < 1.0 || !(cfg.alpha >= 0.0 && cfg.alpha < 1.0) ||
      cfg.K < 1 || cfg.burn_in < 0)
    throw std::invalid_argument("run_rhmc: bad configuration");
  const int d = pot.dim();
  const auto stag = static_cast<std::int64_t>(tag);
  PhaseState z = draw_init(hstar, cfg.mu0, cfg.seed, 0, tag);

  RhmcResult out;
  out.accept_rate = 0.0;
  out.mean_leapfrog = 0.0;
  Vec sum, sumsq;
  Vec g = pot.grad(z.x);
  out.work.full_grads += 1;
  const long total = cfg.burn_in + cfg.K;
  long accepts = 0, leapfrogs = 0;
  for (long i = 0; i < total; ++i) {
    const NoiseKey kg{cfg.seed, 0, stag, i, kSlotGeom};
    const long L = geometric_steps(key_uniform(kg, 0), cfg.E_L);
    leapfrogs += L;
    PhaseState w = z;
    Vec gw = g;
    const double h0 = pot.value(z.x) + 0.5 * z.v.squaredNorm();
    for (long j = 0; j < L; ++j) {
      w.v -= 0.5 * cfg.h * gw;
      w.x += cfg.h * w.v;
      gw = pot.grad(w.x);
      out.work.full_grads += 1;
      w.v -= 0.5 * cfg.h * gw;
    }
    const double h1 = pot.value(w.x) + 0.5 * w.v.squaredNorm();
    const NoiseKey ka{cfg.seed, 0, stag, i, kSlotAccept};
    if (std::log(key_uniform(ka, 0)) < h0 - h1) {
      z = w;
      g = gw;
      ++accepts;
    } else {
      z.v = -z.v;
    }
    const NoiseKey kr{cfg.seed, 0, stag, i, kSlotRefresh};
    const Vec zeta = draw_gaussians(kr, d);
    z.v = cfg.alpha * z.v + std::sqrt(1.0 - cfg.alpha * cfg.alpha) * zeta;
    if (i >= cfg.burn_in) {
      const Vec val = f(z);
      if (sum.size() == 0) {
        sum = val;
        sumsq = val.cwiseProduct(val);
      } else {
        sum += val;
        sumsq += val.cwiseProduct(val);
      }
    }
  }
  out.mean_f = sum / static_cast<double>(cfg.K);
  if (cfg.K > 1)
    out.var_f = (sumsq - static_cast<double>(cfg.K) * out.mean_f.cwiseProduct(out.mean_f)) /
                static_cast<double>(cfg.K - 1);
  else
    out.var_f = Vec::Zero(sum.size());
  out.accept_rate = static_cast<double>(accepts) / static_cast<double>(total);
  out.mean_leapfrog = static_cast<double>(leapfrogs) / static_cast<double>(total);
  return out;
}

RhmcTuning tune_rhmc(const Potential& pot, const HessianEig& hstar, double h_init,
                     std::uint64_t seed) {
  const double m = hstar.m();
  double h = h_init > 0.0 ? h_init : 1.0 / std::sqrt(hstar.M());
  RhmcConfig pilot;
  pilot.alpha = 0.7;
  pilot.K = 300;
  pilot.burn_in = 50;
  pilot.seed = seed;
  double acc = 0.0;
  const TestFn probe = [](const PhaseState& z) { return Vec::Constant(1, z.x[0]); };
  for (int it = 0; it < 40; ++it) {
    pilot.h = h;
    pilot.E_L = std::max(1.0, 1.0 / (std::sqrt(m) * h));
    const RhmcResult r =
        run_rhmc(pot, hstar, pilot, stream_tag(Stream::Rhmc, 1000 + it), probe);
    acc = r.accept_rate;
    if (acc > 0.70)
      h *= 1.25;
    else if (acc < 0.60)
      h /= 1.25;
    else
      break;
  }
  return {h, std::max(1.0, 1.0 / (std::sqrt(m) * h)), acc};
}

}  // namespace ubu

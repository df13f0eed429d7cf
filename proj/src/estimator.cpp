#include "ubu/estimator.hpp"

#include <omp.h>

#include <cmath>

namespace ubu {

double expected_pairs(long N, double c_N, double phi_N, int level) {
  return c_N * std::pow(phi_N, -level) * static_cast<double>(N);
}

LevelSchedule make_schedule(long N, double c_N, double phi_N, std::uint64_t seed) {
  LevelSchedule sched;
  int l = 0;
  while (expected_pairs(N, c_N, phi_N, l) > 1.0) ++l;
  sched.L = l;
  sched.n_pairs.resize(sched.L + 1);
  for (int j = 0; j < sched.L; ++j)
    sched.n_pairs[j] = static_cast<long>(std::ceil(expected_pairs(N, c_N, phi_N, j)));
  sched.n_pairs[sched.L] = 1;
  sched.l_max = sched.L;
  const auto tag = static_cast<std::int64_t>(stream_tag(Stream::Schedule));
  for (int j = sched.L + 1;; ++j) {
    const double p = expected_pairs(N, c_N, phi_N, j);
    if (p < 1e-300) break;
    const double u = key_uniform(NoiseKey{seed, j, tag, 0, 0}, 0);
    sched.n_pairs.push_back(u < p ? 1 : 0);
    if (u < p) sched.l_max = j;
  }
  sched.n_pairs.resize(sched.l_max + 1);
  return sched;
}

BurnIn default_burn_in(double h0, double gamma, double m, double M) {
  const double c_mu0 = 2.0;
  const double b = 16.0 * std::log(4.0) * gamma / (m * h0);
  const double arg = (c_mu0 + 1.0) / (std::sqrt(M) * gamma * h0 * h0);
  const double b0 = 16.0 * gamma / (m * h0) * std::log(arg);
  BurnIn out;
  out.B = static_cast<long>(std::ceil(std::max(b, 1.0)));
  out.B0 = static_cast<long>(std::ceil(std::max(b0, 1.0)));
  return out;
}

ChainParams resolve_chain_params(const RunConfig& cfg, const HessianEig& hstar) {
  cfg.validate();
  ChainParams p;
  p.h0 = cfg.h0;
  p.gamma = cfg.gamma;
  p.K = cfg.K;
  p.mode = cfg.mode;
  p.tau = cfg.tau;
  p.N_b = cfg.N_b;
  p.mu0 = cfg.mu0;
  p.seed = cfg.seed;
  const BurnIn bi = default_burn_in(cfg.h0, cfg.gamma, hstar.m(), hstar.M());
  p.B0 = cfg.B0 >= 0 ? cfg.B0 : bi.B0;
  p.B = cfg.B >= 0 ? cfg.B : bi.B;
  return p;
}

Vec assemble_s(const EstimatorReport& rep, long N, double c_N, double phi_N, double c_R) {
  const int L = rep.schedule.L;
  Vec s = Vec::Zero(rep.d0.empty() ? 0 : rep.d0[0].size());
  for (const Vec& d : rep.d0) s += d;
  s /= static_cast<double>(N);
  for (int l = 0; l < L; ++l) {
    Vec sl = Vec::Zero(s.size());
    for (const Vec& d : rep.d_pairs[l]) sl += d;
    s += sl / static_cast<double>(rep.d_pairs[l].size());
  }
  // Tail: level L contributes D / (1 - c_R); deeper levels contribute
  // inverse-probability-weighted residuals against the extrapolated value.
  const Vec& dL = rep.d_tail[0];
  s += dL / (1.0 - c_R);
  for (int l = L + 1; l <= rep.schedule.l_max; ++l) {
    if (rep.schedule.pairs_at(l) == 0) continue;
    const double w = 1.0 / expected_pairs(N, c_N, phi_N, l);
    s += w * (rep.d_tail[l - L] - std::pow(c_R, l - L) * dL);
  }
  return s;
}

EstimatorReport run_estimator(const Potential& pot, const HessianEig& hstar,
                              const RunConfig& cfg, const TestFn& f) {
  const ChainParams params = resolve_chain_params(cfg, hstar);
  EstimatorReport rep;
  rep.B0 = params.B0;
  rep.B = params.B;
  rep.schedule = make_schedule(cfg.N, cfg.c_N, cfg.phi_N, cfg.seed);
  const int L = rep.schedule.L;

  const int nt = cfg.threads > 0 ? cfg.threads : omp_get_max_threads();

  rep.d0.resize(cfg.N);
  std::vector<WorkCounter> works0(cfg.N);
#pragma omp parallel for schedule(dynamic) num_threads(nt)
  for (long r = 0; r < cfg.N; ++r)
    rep.d0[r] = run_level0(pot, hstar, params, stream_tag(Stream::Level0Chain, r + 1), f,
                           &works0[r]);
  for (const WorkCounter& w : works0) rep.work += w;

  rep.d_pairs.resize(L);
  for (int l = 0; l < L; ++l) {
    const long n = rep.schedule.pairs_at(l);
    rep.d_pairs[l].resize(n);
    std::vector<WorkCounter> works(n);
#pragma omp parallel for schedule(dynamic) num_threads(nt)
    for (long r = 0; r < n; ++r) {
      const LadderResult lr = run_ladder(pot, hstar, params, l, l,
                                         stream_tag(Stream::PairCoupling, l, r + 1), f,
                                         &works[r]);
      rep.d_pairs[l][r] = lr.level_means[1] - lr.level_means[0];
    }
    for (const WorkCounter& w : works) rep.work += w;
  }

  // Joint coupling of the remaining levels; deeper-than-l_max levels came up
  // zero in the schedule and contribute nothing.
  {
    WorkCounter w;
    const LadderResult lr = run_ladder(pot, hstar, params, L, rep.schedule.l_max,
                                       stream_tag(Stream::TailCoupling), f, &w);
    rep.work += w;
    rep.d_tail.resize(rep.schedule.l_max - L + 1);
    for (int l = L; l <= rep.schedule.l_max; ++l)
      rep.d_tail[l - L] = lr.level_means[l - L + 1] - lr.level_means[l - L];
  }

  rep.s = assemble_s(rep, cfg.N, cfg.c_N, cfg.phi_N, cfg.c_R);
  rep.s_plain = assemble_s(rep, cfg.N, cfg.c_N, cfg.phi_N, 0.0);
  return rep;
}

}  // namespace ubu

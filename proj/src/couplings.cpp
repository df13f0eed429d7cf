#include "ubu/couplings.hpp"

#include <cmath>

namespace ubu {

namespace {

double level_step(const ChainParams& p, int level) {
  return p.h0 / static_cast<double>(1L << level);
}

}  // namespace

long ladder_total_steps(const ChainParams& p, int level, int top) {
  const long stride = 1L << level;
  if (p.mode == GradientMode::Exact || level == top)
    return stride * (p.B0 + level * p.B + p.K);
  // Coarser inexact levels also cover the finer level's extra burn-in window,
  // running the exactly-invariant Gaussian kernel during it.
  return stride * (p.B0 + (level + 1) * p.B + p.K);
}

long ladder_offset(const ChainParams& p, int level, int top) {
  return ladder_total_steps(p, level + 1, top) - 2 * ladder_total_steps(p, level, top);
}

NoiseTree::NoiseTree(const ChainParams& p, int first, int top, std::uint64_t tag, int dim,
                     std::vector<long> offsets)
    : seed_(p.seed),
      tag_(tag),
      first_(first),
      top_(top),
      dim_(dim),
      offsets_(std::move(offsets)) {
  for (int l = first_; l < top_; ++l) {
    const double h_fine = level_step(p, l + 1);
    fine_half_.push_back(ou_coeffs(p.gamma, h_fine / 2.0));
    coarse_half_.push_back(ou_coeffs(p.gamma, h_fine));
  }
}

NoiseQuad NoiseTree::quad(int level, long step) const {
  if (level == top_) {
    NoiseQuad q;
    const auto tag = static_cast<std::int64_t>(tag_);
    q.xi1 = draw_gaussians(NoiseKey{seed_, level, tag, step, kSlotXi1}, dim_);
    q.xi2 = draw_gaussians(NoiseKey{seed_, level, tag, step, kSlotXi2}, dim_);
    q.xi3 = draw_gaussians(NoiseKey{seed_, level, tag, step, kSlotXi3}, dim_);
    q.xi4 = draw_gaussians(NoiseKey{seed_, level, tag, step, kSlotXi4}, dim_);
    return q;
  }
  const int idx = level - first_;
  const long base = offsets_[idx] + 2 * step;
  const NoiseQuad qa = quad(level + 1, base);
  const NoiseQuad qb = quad(level + 1, base + 1);
  const CoarsePair a =
      m_transform(fine_half_[idx], coarse_half_[idx], qa.xi1, qa.xi2, qa.xi3, qa.xi4);
  const CoarsePair b =
      m_transform(fine_half_[idx], coarse_half_[idx], qb.xi1, qb.xi2, qb.xi3, qb.xi4);
  return NoiseQuad{a.xi1, a.xi2, b.xi1, b.xi2};
}

OmegaTree::OmegaTree(const ChainParams& p, int first, int top, std::uint64_t tag,
                     int n_data, std::vector<long> offsets)
    : seed_(p.seed),
      tag_(tag),
      first_(first),
      top_(top),
      n_data_(n_data),
      n_b_(p.N_b),
      offsets_(std::move(offsets)) {}

std::vector<int> OmegaTree::batch(int level, long step) const {
  if (level == top_) {
    const auto tag = static_cast<std::int64_t>(tag_);
    return draw_batch(NoiseKey{seed_, level, tag, step, kSlotBatch},
                      n_data_, static_cast<int>(n_b_));
  }
  const int idx = level - first_;
  const auto tag = static_cast<std::int64_t>(tag_);
  const bool coin = draw_coin(NoiseKey{seed_, level, tag, step, kSlotCoin});
  return batch(level + 1, offsets_[idx] + 2 * step + (coin ? 1 : 0));
}

PhaseState draw_init(const HessianEig& hstar, InitDistribution mu0, std::uint64_t seed,
                     int level, std::uint64_t tag) {
  if (mu0 == InitDistribution::GaussianApprox) return draw_mu_g(hstar, seed, level, tag, 0);
  const int d = static_cast<int>(hstar.center.size());
  const Vec xi =
      draw_gaussians(NoiseKey{seed, level, static_cast<std::int64_t>(tag), 0, kSlotInit},
                     2 * d);
  PhaseState z;
  z.x = hstar.center;
  z.v = xi.tail(d);
  return z;
}

PhaseState draw_mu_g(const HessianEig& hstar, std::uint64_t seed, int level,
                     std::uint64_t tag, long step) {
  const int d = static_cast<int>(hstar.center.size());
  const Vec xi =
      draw_gaussians(NoiseKey{seed, level, static_cast<std::int64_t>(tag), step, kSlotInit},
                     2 * d);
  PhaseState z;
  z.x = hstar.center + hstar.inv_sqrt_apply(xi.head(d));
  z.v = xi.tail(d);
  return z;
}

namespace {

void accumulate(Vec& sum, const Vec& val) {
  if (sum.size() == 0)
    sum = val;
  else
    sum += val;
}

}  // namespace

LadderResult run_ladder(const Potential& pot, const HessianEig& hstar,
                        const ChainParams& p, int first, int last, std::uint64_t tag,
                        const TestFn& f, WorkCounter* work) {
  if (first < 0 || last < first) throw std::invalid_argument("run_ladder: bad level range");
  if (p.B0 < 0 || p.B < 0 || p.K < 1)
    throw std::invalid_argument("run_ladder: schedule must be resolved and K >= 1");
  const int top = last + 1;
  const int d = pot.dim();
  const bool inexact = p.mode != GradientMode::Exact;

  std::vector<long> noise_off, omega_off;
  for (int j = first; j < top; ++j) {
    noise_off.push_back(ladder_offset(p, j, top));
    omega_off.push_back((1L << (j + 1)) * p.B);
  }
  const NoiseTree tree(p, first, top, tag, d, noise_off);
  const OmegaTree omegas(p, first, top, tag, pot.n_data(), omega_off);

  std::vector<Vec> means(top - first + 1);
  PhaseState captured;

  for (int j = top; j >= first; --j) {
    const long stride = 1L << j;
    const long total = ladder_total_steps(p, j, top);
    const long burn = total - stride * p.K;
    // Start of this level's own-target segment; earlier steps run the
    // Gaussian-exact kernel.  Level 0 never switches over.
    long segment_start = 0;
    if (inexact && j < top) segment_start = (j == 0) ? total : stride * p.B;
    const long capture_at = (j > first) ? ladder_offset(p, j - 1, top) : -1;

    PhaseState z;
    if (!inexact)
      z = draw_init(hstar, p.mu0, p.seed, j, tag);
    else if (j == top)
      z = draw_mu_g(hstar, p.seed, j, tag, 0);
    else
      z = captured;

    const double h = level_step(p, j);
    const OUCoeffs half = ou_coeffs(p.gamma, h / 2.0);
    AnchorState anchor;
    PhaseState next_capture;
    bool has_capture = false;
    if (capture_at == 0) {
      next_capture = z;
      has_capture = true;
    }

    Vec sum;
    for (long t = 0; t < total; ++t) {
      const NoiseQuad q = tree.quad(j, t);
      if (t < segment_start && inexact) {
        oho_step(hstar, z, h, half, q.xi1, q.xi2, q.xi3, q.xi4);
        if (work) work->hstar_products += 1;
      } else if (!inexact) {
        ubu_step(pot, z, h, half, q.xi1, q.xi2, q.xi3, q.xi4);
        if (work) work->full_grads += 1;
      } else {
        const long s = t - segment_start;
        const bool refresh = (s % p.tau) == 0;
        if (p.mode == GradientMode::Svrg) {
          const std::vector<int> batch = omegas.batch(j, s);
          svrg_ubu_step(pot, z, h, half, q.xi1, q.xi2, q.xi3, q.xi4, batch, anchor,
                        refresh, work);
        } else {
          quad_ubu_step(pot, hstar, z, h, half, q.xi1, q.xi2, q.xi3, q.xi4, anchor,
                        refresh, work);
        }
      }
      const long done = t + 1;
      if (done == capture_at) {
        next_capture = z;
        has_capture = true;
      }
      if (done > burn && (done - burn) % stride == 0) accumulate(sum, f(z));
    }
    if (j > first && !has_capture)
      throw std::logic_error("run_ladder: capture point past end of finer chain");
    captured = next_capture;
    means[j - first] = sum / static_cast<double>(p.K);
  }
  return LadderResult{std::move(means)};
}

Vec run_level0(const Potential& pot, const HessianEig& hstar, const ChainParams& p,
               std::uint64_t tag, const TestFn& f, WorkCounter* work) {
  if (p.B0 < 0 || p.K < 1)
    throw std::invalid_argument("run_level0: schedule must be resolved and K >= 1");
  Vec sum;
  if (p.mode != GradientMode::Exact) {
    for (long i = 1; i <= p.K; ++i)
      accumulate(sum, f(draw_mu_g(hstar, p.seed, 0, tag, i)));
    return sum / static_cast<double>(p.K);
  }
  PhaseState z = draw_init(hstar, p.mu0, p.seed, 0, tag);
  const OUCoeffs half = ou_coeffs(p.gamma, p.h0 / 2.0);
  const long total = p.B0 + p.K;
  const auto stag = static_cast<std::int64_t>(tag);
  for (long t = 0; t < total; ++t) {
    const Vec xi1 = draw_gaussians(NoiseKey{p.seed, 0, stag, t, kSlotXi1}, pot.dim());
    const Vec xi2 = draw_gaussians(NoiseKey{p.seed, 0, stag, t, kSlotXi2}, pot.dim());
    const Vec xi3 = draw_gaussians(NoiseKey{p.seed, 0, stag, t, kSlotXi3}, pot.dim());
    const Vec xi4 = draw_gaussians(NoiseKey{p.seed, 0, stag, t, kSlotXi4}, pot.dim());
    ubu_step(pot, z, p.h0, half, xi1, xi2, xi3, xi4);
    if (work) work->full_grads += 1;
    if (t + 1 > p.B0) accumulate(sum, f(z));
  }
  return sum / static_cast<double>(p.K);
}

}  // namespace ubu

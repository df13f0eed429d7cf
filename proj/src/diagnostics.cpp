#include "ubu/diagnostics.hpp"

#include <algorithm>
#include <cmath>

namespace ubu {

Vec sample_mean(const std::vector<Vec>& xs) {
  if (xs.empty()) throw std::invalid_argument("sample_mean: empty collection");
  Vec m = Vec::Zero(xs[0].size());
  for (const Vec& x : xs) m += x;
  return m / static_cast<double>(xs.size());
}

Vec sample_var(const std::vector<Vec>& xs) {
  if (xs.size() < 2) throw std::invalid_argument("sample_var: need at least two samples");
  const Vec m = sample_mean(xs);
  Vec v = Vec::Zero(m.size());
  for (const Vec& x : xs) v += (x - m).cwiseProduct(x - m);
  return v / static_cast<double>(xs.size() - 1);
}

VarianceBreakdown variance_breakdown(const std::vector<EstimatorReport>& reps, long N,
                                     double c_N, double phi_N, double c_R) {
  if (reps.empty()) throw std::invalid_argument("variance_breakdown: no reports");
  const int L = reps[0].schedule.L;
  const auto dim = reps[0].s.size();
  VarianceBreakdown out;

  std::vector<Vec> d0_all;
  for (const auto& r : reps) d0_all.insert(d0_all.end(), r.d0.begin(), r.d0.end());
  out.level0 = sample_var(d0_all) / static_cast<double>(N);

  out.pairs.resize(L);
  for (int l = 0; l < L; ++l) {
    std::vector<Vec> dl;
    for (const auto& r : reps)
      dl.insert(dl.end(), r.d_pairs[l].begin(), r.d_pairs[l].end());
    const double n_l = static_cast<double>(reps[0].d_pairs[l].size());
    out.pairs[l] = sample_var(dl) / n_l;
  }

  out.tail = Vec::Zero(dim);
  out.across_runs = Vec::Zero(dim);
  if (reps.size() >= 2) {
    // Tail contribution of each run: everything past the replicated levels.
    std::vector<Vec> tails, ss;
    for (const auto& r : reps) {
      Vec partial = sample_mean(r.d0);
      for (int l = 0; l < L; ++l) partial += sample_mean(r.d_pairs[l]);
      tails.push_back(r.s - partial);
      ss.push_back(r.s);
    }
    out.tail = sample_var(tails);
    out.across_runs = sample_var(ss);
    out.tail_estimated = true;
  }

  out.total = out.level0 + out.tail;
  for (const Vec& p : out.pairs) out.total += p;
  (void)c_N;
  (void)phi_N;
  (void)c_R;
  return out;
}

Vec effective_sample_size(const Vec& var_pi, const Vec& var_s) {
  return var_pi.cwiseQuotient(var_s);
}

BootstrapCI bootstrap_ci(const std::vector<double>& per_run,
                         const std::function<double(const std::vector<double>&)>& stat,
                         int n_boot, double alpha, std::uint64_t seed) {
  const size_t n = per_run.size();
  if (n < 2) throw std::invalid_argument("bootstrap_ci: need at least two runs");
  const auto tag = static_cast<std::int64_t>(stream_tag(Stream::Bootstrap));
  std::vector<double> stats(n_boot);
  std::vector<double> resample(n);
  for (int b = 0; b < n_boot; ++b) {
    const NoiseKey key{seed, 0, tag, b, 0};
    for (size_t j = 0; j < n; ++j) {
      const auto idx = static_cast<size_t>(key_uniform(key, j) * n);
      resample[j] = per_run[std::min(idx, n - 1)];
    }
    stats[b] = stat(resample);
  }
  std::sort(stats.begin(), stats.end());
  const auto pick = [&](double q) {
    const auto idx = static_cast<long>(std::floor(q * (n_boot - 1)));
    return stats[std::clamp(idx, 0L, static_cast<long>(n_boot - 1))];
  };
  return {pick(alpha / 2.0), pick(1.0 - alpha / 2.0)};
}

double strong_order_fit(const std::vector<double>& hs, const std::vector<double>& errs) {
  if (hs.size() != errs.size() || hs.size() < 2)
    throw std::invalid_argument("strong_order_fit: need matching collections, size >= 2");
  const auto n = static_cast<double>(hs.size());
  double mx = 0.0, my = 0.0;
  for (size_t i = 0; i < hs.size(); ++i) {
    mx += std::log(hs[i]);
    my += std::log(errs[i]);
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (size_t i = 0; i < hs.size(); ++i) {
    const double dx = std::log(hs[i]) - mx;
    sxx += dx * dx;
    sxy += dx * (std::log(errs[i]) - my);
  }
  return sxy / sxx;
}

namespace {

// Solves Sigma = T Sigma T' + Q for a 2x2 symmetric Sigma.
ModeCovariance solve_lyapunov(const Eigen::Matrix2d& T, const Eigen::Matrix2d& Q) {
  Eigen::Matrix3d A;
  A << 1.0 - T(0, 0) * T(0, 0), -2.0 * T(0, 0) * T(0, 1), -T(0, 1) * T(0, 1),
      -T(0, 0) * T(1, 0), 1.0 - T(0, 0) * T(1, 1) - T(0, 1) * T(1, 0),
      -T(0, 1) * T(1, 1), -T(1, 0) * T(1, 0), -2.0 * T(1, 0) * T(1, 1),
      1.0 - T(1, 1) * T(1, 1);
  Eigen::Vector3d q(Q(0, 0), Q(0, 1), Q(1, 1));
  const Eigen::Vector3d s = A.colPivHouseholderQr().solve(q);
  return {s[0], s[1], s[2]};
}

}  // namespace

ModeCovariance ubu_mode_covariance(double lambda, double h, double gamma) {
  const OUCoeffs c = ou_coeffs(gamma, h / 2.0);
  Eigen::Matrix2d Ms, Mb, N;
  Ms << 1.0, c.F, 0.0, c.eta;
  Mb << 1.0, 0.0, -h * lambda, 1.0;
  const double sg = std::sqrt(2.0 / gamma), s2g = std::sqrt(2.0 * gamma);
  N << sg * (c.sqrt_s - c.c1), -sg * c.c2, s2g * c.c1, s2g * c.c2;
  const Eigen::Matrix2d Qu = N * N.transpose();
  const Eigen::Matrix2d T = Ms * Mb * Ms;
  const Eigen::Matrix2d Q = (Ms * Mb) * Qu * (Ms * Mb).transpose() + Qu;
  return solve_lyapunov(T, Q);
}

ModeCovariance em_mode_covariance(double lambda, double h, double gamma) {
  Eigen::Matrix2d T, Q;
  T << 1.0, h, -h * lambda, 1.0 - h * gamma;
  Q << 0.0, 0.0, 0.0, 2.0 * gamma * h;
  return solve_lyapunov(T, Q);
}

ModeCovariance oho_mode_covariance(double lambda) { return {1.0 / lambda, 0.0, 1.0}; }

}  // namespace ubu

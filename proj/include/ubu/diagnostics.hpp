#pragma once

#include <functional>
#include <vector>

#include "ubu/core.hpp"
#include "ubu/estimator.hpp"

namespace ubu {

Vec sample_mean(const std::vector<Vec>& xs);
/// Unbiased (n-1 denominator) per-component sample variance; needs n >= 2.
Vec sample_var(const std::vector<Vec>& xs);

/// Per-component variance decomposition of the estimator.  Within-run
/// replicate spread covers level 0 and the independently replicated pair
/// levels; the variance carried by the jointly coupled tail levels is
/// estimated across independent runs when two or more reports are given,
/// otherwise it is left at zero and flagged.
struct VarianceBreakdown {
  Vec level0;               // Var(S_0) estimate
  std::vector<Vec> pairs;   // Var(S_{l,l+1}) estimates for l < L
  Vec tail;                 // variance of the whole tail contribution
  Vec total;                // sum of the above
  Vec across_runs;          // empirical Var(S) across reports (if >= 2)
  bool tail_estimated = false;
};

VarianceBreakdown variance_breakdown(const std::vector<EstimatorReport>& reps, long N,
                                     double c_N, double phi_N, double c_R);

/// Effective sample size Var_pi(f) / Var(S), per component.
Vec effective_sample_size(const Vec& var_pi, const Vec& var_s);

struct BootstrapCI {
  double lo;
  double hi;
};

/// Percentile bootstrap over per-run values for an arbitrary statistic of
/// the resampled collection.
BootstrapCI bootstrap_ci(const std::vector<double>& per_run,
                         const std::function<double(const std::vector<double>&)>& stat,
                         int n_boot, double alpha, std::uint64_t seed);

/// Least-squares slope of log(err) against log(h); the empirical strong
/// order of an integrator.
double strong_order_fit(const std::vector<double>& hs, const std::vector<double>& errs);

/// Stationary covariance of a single eigenmode (curvature lambda) under a
/// discrete kernel, from the exact 2x2 Lyapunov equation.  Used as an
/// independent reference for chain moments.
struct ModeCovariance {
  double var_x;
  double cov_xv;
  double var_v;
};

ModeCovariance ubu_mode_covariance(double lambda, double h, double gamma);
ModeCovariance em_mode_covariance(double lambda, double h, double gamma);
/// The Gaussian-exact kernel: no discretization bias.
ModeCovariance oho_mode_covariance(double lambda);

}  // namespace ubu

#include <doctest.h>

#include <cmath>

#include "ubu/diagnostics.hpp"

using namespace ubu;

TEST_CASE("sample moments") {
  std::vector<Vec> xs = {Vec::Constant(1, 1.0), Vec::Constant(1, 2.0),
                         Vec::Constant(1, 6.0)};
  CHECK(sample_mean(xs)[0] == doctest::Approx(3.0));
  CHECK(sample_var(xs)[0] == doctest::Approx(7.0));  // ((2)^2+(1)^2+(3)^2)/2
  CHECK_THROWS(sample_var({Vec::Constant(1, 1.0)}));
}

TEST_CASE("strong order fit recovers exact power laws") {
  const std::vector<double> hs = {0.4, 0.2, 0.1, 0.05};
  std::vector<double> errs;
  for (double h : hs) errs.push_back(3.7 * std::pow(h, 1.5));
  CHECK(strong_order_fit(hs, errs) == doctest::Approx(1.5).epsilon(1e-12));
  errs.clear();
  for (double h : hs) errs.push_back(0.2 * h * h);
  CHECK(strong_order_fit(hs, errs) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("bootstrap interval covers the mean and is deterministic") {
  std::vector<double> xs;
  NoiseKey k{77, 0, 0, 0, 0};
  for (int i = 0; i < 200; ++i) xs.push_back(5.0 + draw_gaussian(k, i));
  const auto mean_stat = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  const BootstrapCI ci = bootstrap_ci(xs, mean_stat, 2000, 0.05, 1);
  CHECK(ci.lo < 5.0);
  CHECK(ci.hi > 5.0);
  CHECK(ci.hi - ci.lo < 0.5);
  const BootstrapCI ci2 = bootstrap_ci(xs, mean_stat, 2000, 0.05, 1);
  CHECK(ci.lo == ci2.lo);
  CHECK(ci.hi == ci2.hi);
}

TEST_CASE("discrete stationary covariances match independent references") {
  // Reference values from a dense Lyapunov solve in an independent
  // implementation of the one-mode recursions.
  {
    const ModeCovariance c = ubu_mode_covariance(1.0, 0.2, 1.5);
    CHECK(c.var_x == doctest::Approx(0.99334724).epsilon(1e-6));
    CHECK(c.cov_xv == doctest::Approx(0.00251834).epsilon(1e-4));
    CHECK(c.var_v == doctest::Approx(1.00331181).epsilon(1e-6));
  }
  {
    const ModeCovariance c = ubu_mode_covariance(2.5, 0.1, 2.0);
    CHECK(c.var_x == doctest::Approx(0.398334873).epsilon(1e-6));
    CHECK(c.var_v == doctest::Approx(1.00208109).epsilon(1e-6));
  }
  {
    const ModeCovariance c = em_mode_covariance(1.0, 0.05, 1.5);
    CHECK(c.var_x == doctest::Approx(1.03515406).epsilon(1e-6));
    CHECK(c.cov_xv == doctest::Approx(-0.02685225).epsilon(1e-4));
    CHECK(c.var_v == doctest::Approx(1.07408982).epsilon(1e-6));
  }
  {
    const ModeCovariance c = em_mode_covariance(3.0, 0.02, 2.5);
    CHECK(c.var_x == doctest::Approx(0.34163511).epsilon(1e-6));
    CHECK(c.var_v == doctest::Approx(1.05053846).epsilon(1e-6));
  }
  const ModeCovariance oho = oho_mode_covariance(4.0);
  CHECK(oho.var_x == doctest::Approx(0.25));
  CHECK(oho.cov_xv == doctest::Approx(0.0));
  CHECK(oho.var_v == doctest::Approx(1.0));
}

TEST_CASE("effective sample size arithmetic") {
  Vec var_pi = Vec::Constant(2, 2.0);
  Vec var_s(2);
  var_s << 0.5, 0.1;
  const Vec ess = effective_sample_size(var_pi, var_s);
  CHECK(ess[0] == doctest::Approx(4.0));
  CHECK(ess[1] == doctest::Approx(20.0));
}

TEST_CASE("strong order fit is permutation invariant") {
  const std::vector<double> hs = {0.1, 0.4, 0.05, 0.2};
  std::vector<double> errs;
  for (double h : hs) errs.push_back(1.3 * std::pow(h, 2.0));
  CHECK(strong_order_fit(hs, errs) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("mode covariance limits and kernel comparison") {
  // Continuum limit: the discrete stationary law tends to the target's.
  const ModeCovariance tiny = ubu_mode_covariance(1.0, 1e-3, 1.0);
  CHECK(std::fabs(tiny.var_x - 1.0) < 1e-3);
  CHECK(std::fabs(tiny.var_v - 1.0) < 1e-3);
  // At a moderate step the splitting kernel is much less biased than
  // Euler-Maruyama.
  const double bu = std::fabs(ubu_mode_covariance(1.0, 0.2, 1.5).var_x - 1.0);
  const double be = std::fabs(em_mode_covariance(1.0, 0.2, 1.5).var_x - 1.0);
  CHECK(bu < be);
}

TEST_CASE("bootstrap coverage is close to nominal") {
  const auto mean_stat = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  int covered = 0;
  const int trials = 1000;
  for (int t = 0; t < trials; ++t) {
    std::vector<double> xs(30);
    const NoiseKey key{900, 0, t, 0, 0};
    for (int i = 0; i < 30; ++i) xs[i] = draw_gaussian(key, i);
    const BootstrapCI ci = bootstrap_ci(xs, mean_stat, 400, 0.05, 2000 + t);
    if (ci.lo <= 0.0 && 0.0 <= ci.hi) ++covered;
  }
  // Percentile intervals at n = 30 undercover slightly; accept [90%, 98%].
  CHECK(covered >= 900);
  CHECK(covered <= 980);
}

namespace {

EstimatorReport synthetic_report(double base) {
  EstimatorReport rep;
  rep.schedule.L = 1;
  rep.schedule.l_max = 1;
  rep.schedule.n_pairs = {2, 1};
  rep.d0 = {Vec::Constant(1, base), Vec::Constant(1, base + 1.0)};
  rep.d_pairs = {{Vec::Constant(1, 0.2 * base), Vec::Constant(1, 0.3 * base)}};
  rep.d_tail = {Vec::Constant(1, 0.05 * base)};
  rep.s = Vec::Constant(1, base + 0.5 + 0.25 * base + 0.05 * base / 0.75);
  return rep;
}

}  // namespace

TEST_CASE("variance breakdown reconstructs synthetic inputs") {
  SUBCASE("identical replicates give zero variances") {
    const std::vector<EstimatorReport> reps = {synthetic_report(2.0), synthetic_report(2.0)};
    const VarianceBreakdown vb = variance_breakdown(reps, 2, 1.0 / 16.0, 4.0, 0.25);
    CHECK(vb.pairs.size() == 1);
    CHECK(vb.tail_estimated);
    // d0 pool {2, 3, 2, 3}: Var = 1/3, /N; pairs pool {0.4, 0.6, 0.4, 0.6}:
    // Var = 0.04/3, /2 replicates; tail variance zero.
    CHECK(vb.total[0] == doctest::Approx(1.0 / 6.0 + 0.04 / 6.0).epsilon(1e-12));
    CHECK(vb.tail[0] == doctest::Approx(0.0));
    CHECK(vb.across_runs[0] == doctest::Approx(0.0));
  }
  SUBCASE("known pooled variances are reproduced exactly") {
    const std::vector<EstimatorReport> reps = {synthetic_report(1.0), synthetic_report(3.0)};
    const VarianceBreakdown vb = variance_breakdown(reps, 2, 1.0 / 16.0, 4.0, 0.25);
    // d0 pool {1, 2, 3, 4}: Var = 5/3, divided by N = 2.
    CHECK(vb.level0[0] == doctest::Approx(5.0 / 6.0).epsilon(1e-12));
    // pair pool {0.2, 0.3, 0.6, 0.9}: Var = 0.1, divided by 2 pairs.
    CHECK(vb.pairs[0][0] == doctest::Approx(0.05).epsilon(1e-12));
  }
}

TEST_CASE("variance breakdown agrees with the direct across-run variance") {
  GaussianTarget t(1, 1.0);
  HessianEig he = hessian_at_min(t, Vec::Zero(1));
  RunConfig cfg;
  cfg.h0 = 0.4;
  cfg.B0 = 20;
  cfg.B = 8;
  cfg.K = 30;
  cfg.N = 8;
  const TestFn f = [](const PhaseState& z) { return z.x; };
  std::vector<EstimatorReport> reps;
  for (int r = 0; r < 200; ++r) {
    cfg.seed = 7000 + r;
    reps.push_back(run_estimator(t, he, cfg, f));
  }
  const VarianceBreakdown vb = variance_breakdown(reps, cfg.N, cfg.c_N, cfg.phi_N, cfg.c_R);
  CHECK(vb.total[0] > 0.0);
  CHECK(vb.total[0] < 1.5 * vb.across_runs[0]);
  CHECK(vb.across_runs[0] < 1.5 * vb.total[0]);
}

#include <doctest.h>

#include <cmath>

#include "ubu/diagnostics.hpp"
#include "ubu/models.hpp"
#include "ubu/rhmc.hpp"

using namespace ubu;

TEST_CASE("trajectory lengths have the configured mean") {
  GaussianTarget t(1, 1.0);
  HessianEig he = hessian_at_min(t, Vec::Zero(1));
  RhmcConfig cfg;
  cfg.h = 0.05;
  cfg.E_L = 6.0;
  cfg.K = 4000;
  cfg.burn_in = 0;
  cfg.seed = 3;
  const TestFn f = [](const PhaseState& z) { return z.x; };
  const RhmcResult r = run_rhmc(t, he, cfg, 1, f);
  // Geometric with mean 6: sd of the average over 4000 draws ~ 0.09.
  CHECK(r.mean_leapfrog == doctest::Approx(6.0).epsilon(0.08));
  CHECK(r.work.full_grads >= 4000 * 5);
}

TEST_CASE("sampler is exact on a gaussian target") {
  // Metropolis correction removes the leapfrog discretization bias, so even
  // a coarse step must reproduce the target moments.
  GaussianTarget t(2, 4.0);
  HessianEig he = hessian_at_min(t, Vec::Zero(2));
  RhmcConfig cfg;
  cfg.h = 0.5;
  cfg.E_L = 4.0;
  cfg.K = 40000;
  cfg.burn_in = 200;
  cfg.seed = 17;
  const TestFn f = [](const PhaseState& z) {
    Vec out(4);
    out.head(2) = z.x;
    out.tail(2) = z.x.cwiseProduct(z.x);
    return out;
  };
  const RhmcResult r = run_rhmc(t, he, cfg, 2, f);
  CHECK(r.accept_rate > 0.5);
  CHECK(std::fabs(r.mean_f[0]) < 0.05);
  CHECK(std::fabs(r.mean_f[1]) < 0.03);
  CHECK(r.mean_f[2] == doctest::Approx(1.0).epsilon(0.05));
  CHECK(r.mean_f[3] == doctest::Approx(0.25).epsilon(0.05));
}

TEST_CASE("runs are deterministic in seed and tag") {
  GaussianTarget t(3, 2.0);
  HessianEig he = hessian_at_min(t, Vec::Zero(3));
  RhmcConfig cfg;
  cfg.h = 0.3;
  cfg.E_L = 3.0;
  cfg.K = 200;
  cfg.seed = 9;
  const TestFn f = [](const PhaseState& z) { return z.x; };
  const RhmcResult a = run_rhmc(t, he, cfg, 4, f);
  const RhmcResult b = run_rhmc(t, he, cfg, 4, f);
  CHECK((a.mean_f - b.mean_f).norm() == 0.0);
  const RhmcResult c = run_rhmc(t, he, cfg, 5, f);
  CHECK((a.mean_f - c.mean_f).norm() > 0.0);
}

TEST_CASE("tuner lands in the acceptance window") {
  GaussianTarget t(4, 10.0);
  HessianEig he = hessian_at_min(t, Vec::Zero(4));
  const RhmcTuning tuned = tune_rhmc(t, he, 0.0, 21);
  CHECK(tuned.accept_rate >= 0.55);
  CHECK(tuned.accept_rate <= 0.75);
  CHECK(tuned.h > 0.0);
  CHECK(tuned.E_L >= 1.0);
  // Trajectory length matched to the slowest mode: E_L h ~ 1/sqrt(m) = 1.
  CHECK(tuned.E_L * tuned.h == doctest::Approx(1.0).epsilon(0.2));
}

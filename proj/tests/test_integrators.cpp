#include <doctest.h>

#include <cmath>

#include "ubu/core.hpp"
#include "ubu/integrators.hpp"
#include "ubu/models.hpp"

using namespace ubu;

namespace {

Vec keyed_noise(std::uint64_t seed, std::int64_t step, std::int32_t slot, int d) {
  return draw_gaussians(NoiseKey{seed, 0, 0, step, slot}, d);
}

}  // namespace

TEST_CASE("OU coefficients match high-precision reference values") {
  // Reference values computed with 40-digit arithmetic from
  //   eta = e^{-gamma s}, F = (1-eta)/gamma, c1 = F/sqrt(s),
  //   c2 = sqrt((1-eta^2)/(2 gamma) - c1^2).
  {
    const OUCoeffs c = ou_coeffs(1.3, 0.4);
    CHECK(c.eta == doctest::Approx(0.594520547970194311).epsilon(1e-15));
    CHECK(c.F == doctest::Approx(0.311907270792158211).epsilon(1e-15));
    CHECK(c.c1 == doctest::Approx(0.493168697235065563).epsilon(1e-15));
    CHECK(c.c2 == doctest::Approx(0.0738641471701134814).epsilon(1e-13));
  }
  {
    // gamma s = 1e-4 sits deep in the cancellation regime of the direct c2
    // formula; the series keeps full relative accuracy.
    const OUCoeffs c = ou_coeffs(1.0, 1e-4);
    CHECK(c.eta == doctest::Approx(0.999900004999833337).epsilon(1e-15));
    CHECK(c.F == doctest::Approx(0.0000999950001666625049).epsilon(1e-15));
    CHECK(c.c1 == doctest::Approx(0.00999950001666625025).epsilon(1e-15));
    CHECK(c.c2 == doctest::Approx(2.886607012951413e-7).epsilon(1e-13));
  }
  {
    const OUCoeffs c = ou_coeffs(0.7, 2.3);
    CHECK(c.eta == doctest::Approx(0.199887614075144549).epsilon(1e-15));
    CHECK(c.c2 == doctest::Approx(0.343085260537458265).epsilon(1e-13));
  }
}

TEST_CASE("OU noise coefficients satisfy the covariance identity") {
  for (double gamma : {0.3, 1.0, 4.0})
    for (double s : {1e-6, 1e-3, 0.04, 0.06, 0.5, 2.0}) {
      const OUCoeffs c = ou_coeffs(gamma, s);
      const double lhs = c.c1 * c.c1 + c.c2 * c.c2;
      const double rhs = -std::expm1(-2.0 * gamma * s) / (2.0 * gamma);
      CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
    }
}

TEST_CASE("c2 is continuous across the series threshold") {
  const double lo = ou_coeffs(1.0, 0.0499).c2;
  const double hi = ou_coeffs(1.0, 0.0501).c2;
  CHECK(std::fabs(hi - lo) / lo < 1e-2);
  CHECK(hi > lo);
}

TEST_CASE("noiseless OU step is the deterministic drift") {
  const OUCoeffs c = ou_coeffs(1.5, 0.3);
  PhaseState z;
  z.x = Vec(2);
  z.x << 1.0, -2.0;
  z.v = Vec(2);
  z.v << 0.5, 4.0;
  const Vec zero = Vec::Zero(2);
  PhaseState w = z;
  u_step(w, c, zero, zero);
  CHECK(w.x[0] == doctest::Approx(z.x[0] + c.F * z.v[0]).epsilon(1e-15));
  CHECK(w.v[1] == doctest::Approx(c.eta * z.v[1]).epsilon(1e-15));
}

TEST_CASE("two fine OU steps equal one coarse step after noise coarsening") {
  const double gamma = 1.1;
  const double s = 0.17;
  const OUCoeffs fine = ou_coeffs(gamma, s);
  const OUCoeffs coarse = ou_coeffs(gamma, 2.0 * s);
  const int d = 3;
  const Vec xi1 = keyed_noise(1, 0, 0, d), xi2 = keyed_noise(1, 0, 1, d);
  const Vec xi3 = keyed_noise(1, 0, 2, d), xi4 = keyed_noise(1, 0, 3, d);
  PhaseState z;
  z.x = keyed_noise(2, 0, 0, d);
  z.v = keyed_noise(2, 0, 1, d);
  PhaseState two = z;
  u_step(two, fine, xi1, xi2);
  u_step(two, fine, xi3, xi4);
  PhaseState one = z;
  const CoarsePair cp = m_transform(fine, coarse, xi1, xi2, xi3, xi4);
  u_step(one, coarse, cp.xi1, cp.xi2);
  CHECK((two.x - one.x).norm() < 1e-12);
  CHECK((two.v - one.v).norm() < 1e-12);
}

TEST_CASE("coarsened noise pair is again standard normal") {
  // E[xi1'^2] = E[xi2'^2] = 1 and E[xi1' xi2'] = 0, checked by Monte Carlo.
  const OUCoeffs fine = ou_coeffs(0.9, 0.25);
  const OUCoeffs coarse = ou_coeffs(0.9, 0.5);
  const int n = 200000;
  double v1 = 0.0, v2 = 0.0, cov = 0.0;
  for (int rep = 0; rep < n; ++rep) {
    const Vec xi1 = keyed_noise(3, rep, 0, 1), xi2 = keyed_noise(3, rep, 1, 1);
    const Vec xi3 = keyed_noise(3, rep, 2, 1), xi4 = keyed_noise(3, rep, 3, 1);
    const CoarsePair cp = m_transform(fine, coarse, xi1, xi2, xi3, xi4);
    v1 += cp.xi1[0] * cp.xi1[0];
    v2 += cp.xi2[0] * cp.xi2[0];
    cov += cp.xi1[0] * cp.xi2[0];
  }
  CHECK(std::fabs(v1 / n - 1.0) < 0.02);
  CHECK(std::fabs(v2 / n - 1.0) < 0.02);
  CHECK(std::fabs(cov / n) < 0.02);
}

TEST_CASE("UBU chain reproduces the exact discrete stationary variance") {
  // Reference value from an independent discrete Lyapunov solve of the
  // one-dimensional UBU recursion (lambda = 1, h = 0.2, gamma = 1.5):
  // stationary Var(x) = 0.99334724, Var(v) = 1.00331181.
  GaussianTarget target(1, 1.0);
  const double h = 0.2, gamma = 1.5;
  const OUCoeffs half = ou_coeffs(gamma, h / 2.0);
  PhaseState z;
  z.x = Vec::Zero(1);
  z.v = Vec::Zero(1);
  const int burn = 2000, n = 400000;
  double sx = 0.0, sv = 0.0;
  for (int k = 0; k < burn + n; ++k) {
    const Vec xi1 = keyed_noise(10, k, 0, 1), xi2 = keyed_noise(10, k, 1, 1);
    const Vec xi3 = keyed_noise(10, k, 2, 1), xi4 = keyed_noise(10, k, 3, 1);
    ubu_step(target, z, h, half, xi1, xi2, xi3, xi4);
    if (k >= burn) {
      sx += z.x[0] * z.x[0];
      sv += z.v[0] * z.v[0];
    }
  }
  // Autocorrelated chain: ~4e5 samples with integrated autocorrelation time
  // of a few steps gives ~0.5% standard error; bounds are ~4 sigma.
  CHECK(sx / n == doctest::Approx(0.99334724).epsilon(0.02));
  CHECK(sv / n == doctest::Approx(1.00331181).epsilon(0.02));
}

TEST_CASE("Hamiltonian flow conserves energy and is exact on eigenmodes") {
  GaussianTarget target(3, 5.0);
  HessianEig he = hessian_at_min(target, Vec::Zero(3));
  PhaseState z;
  z.x = keyed_noise(4, 0, 0, 3);
  z.v = keyed_noise(4, 0, 1, 3);
  const double e0 = target.value(z.x) + 0.5 * z.v.squaredNorm();
  PhaseState w = z;
  hstar_step(he, w, 0.37);
  CHECK(target.value(w.x) + 0.5 * w.v.squaredNorm() == doctest::Approx(e0).epsilon(1e-12));
  // Composition equals a single longer flow.
  PhaseState a = z;
  hstar_step(he, a, 0.2);
  hstar_step(he, a, 0.17);
  CHECK((a.x - w.x).norm() < 1e-12);
  CHECK((a.v - w.v).norm() < 1e-12);
}

TEST_CASE("OHO chain leaves the Gaussian measure invariant") {
  GaussianTarget target(2, 4.0);
  HessianEig he = hessian_at_min(target, Vec::Zero(2));
  const double h = 0.3, gamma = 2.0;
  const OUCoeffs half = ou_coeffs(gamma, h / 2.0);
  PhaseState z;
  z.x = Vec::Zero(2);
  z.v = Vec::Zero(2);
  const int burn = 2000, n = 300000;
  Vec sx = Vec::Zero(2), sv = Vec::Zero(2);
  for (int k = 0; k < burn + n; ++k) {
    const Vec xi1 = keyed_noise(20, k, 0, 2), xi2 = keyed_noise(20, k, 1, 2);
    const Vec xi3 = keyed_noise(20, k, 2, 2), xi4 = keyed_noise(20, k, 3, 2);
    oho_step(he, z, h, half, xi1, xi2, xi3, xi4);
    if (k >= burn) {
      sx += z.x.cwiseProduct(z.x);
      sv += z.v.cwiseProduct(z.v);
    }
  }
  const Vec lambda = target.precision_diagonal();
  for (int i = 0; i < 2; ++i) {
    CHECK(sx[i] / n == doctest::Approx(1.0 / lambda[i]).epsilon(0.03));
    CHECK(sv[i] / n == doctest::Approx(1.0).epsilon(0.03));
  }
}

TEST_CASE("Euler-Maruyama step arithmetic") {
  GaussianTarget target(1, 1.0);
  PhaseState z;
  z.x = Vec(1);
  z.x << 2.0;
  z.v = Vec(1);
  z.v << -1.0;
  Vec xi(1);
  xi << 0.5;
  const double h = 0.1, gamma = 2.0;
  em_step(target, z, h, gamma, xi);
  CHECK(z.x[0] == doctest::Approx(2.0 + 0.1 * (-1.0)).epsilon(1e-15));
  CHECK(z.v[0] ==
        doctest::Approx(-1.0 - 0.1 * 2.0 - 0.1 * 2.0 * (-1.0) + std::sqrt(0.4) * 0.5)
            .epsilon(1e-14));
}

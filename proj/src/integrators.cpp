#include "ubu/integrators.hpp"

#include <cmath>

namespace ubu {

namespace {

// g(a) = (1 - e^{-2a})/(2a) - ((1 - e^{-a})/a)^2, so that c2^2 = s g(gamma s).
// The direct formula loses all precision as a -> 0 (g(a) ~ a^2/12), so below
// a small threshold we use the Taylor expansion.
double c2_sq_over_s(double a) {
  if (a < 0.05) {
    return a * a *
           (1.0 / 12.0 +
            a * (-1.0 / 12.0 +
                 a * (17.0 / 360.0 +
                      a * (-7.0 / 360.0 +
                           a * (43.0 / 6720.0 + a * (-107.0 / 60480.0))))));
  }
  const double em = -std::expm1(-a);  // 1 - e^{-a}
  const double g = -std::expm1(-2.0 * a) / (2.0 * a) - (em / a) * (em / a);
  return g;
}

}  // namespace

OUCoeffs ou_coeffs(double gamma, double s) {
  if (!(gamma > 0.0) || !(s > 0.0))
    throw std::invalid_argument("ou_coeffs: need gamma > 0 and s > 0");
  OUCoeffs c;
  c.gamma = gamma;
  c.s = s;
  c.eta = std::exp(-gamma * s);
  c.F = -std::expm1(-gamma * s) / gamma;
  c.sqrt_s = std::sqrt(s);
  c.c1 = c.F / c.sqrt_s;
  c.c2 = std::sqrt(s * c2_sq_over_s(gamma * s));
  return c;
}

void u_step(PhaseState& z, const OUCoeffs& c, const Vec& xi1, const Vec& xi2) {
  const double sg = std::sqrt(2.0 / c.gamma);
  const double s2g = std::sqrt(2.0 * c.gamma);
  // Z1 = sqrt(s) xi1, Z2 = c1 xi1 + c2 xi2
  z.x += c.F * z.v + sg * ((c.sqrt_s - c.c1) * xi1 - c.c2 * xi2);
  z.v = c.eta * z.v + s2g * (c.c1 * xi1 + c.c2 * xi2);
}

void o_step(PhaseState& z, const OUCoeffs& c, const Vec& xi1, const Vec& xi2) {
  const double s2g = std::sqrt(2.0 * c.gamma);
  z.v = c.eta * z.v + s2g * (c.c1 * xi1 + c.c2 * xi2);
}

void b_step(PhaseState& z, double h, const Vec& g) { z.v -= h * g; }

void ubu_step(const Potential& pot, PhaseState& z, double h, const OUCoeffs& half,
              const Vec& xi1, const Vec& xi2, const Vec& xi3, const Vec& xi4,
              Vec* midpoint) {
  u_step(z, half, xi1, xi2);
  if (midpoint) *midpoint = z.x;
  b_step(z, h, pot.grad(z.x));
  u_step(z, half, xi3, xi4);
}

void hstar_step(const HessianEig& hstar, PhaseState& z, double h) {
  Vec y = hstar.Q.transpose() * (z.x - hstar.center);
  Vec w = hstar.Q.transpose() * z.v;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double omega = std::sqrt(hstar.lambda[i]);
    const double cwh = std::cos(omega * h);
    const double swh = std::sin(omega * h);
    const double yi = y[i], wi = w[i];
    y[i] = cwh * yi + (swh / omega) * wi;
    w[i] = -omega * swh * yi + cwh * wi;
  }
  z.x = hstar.center + hstar.Q * y;
  z.v = hstar.Q * w;
}

void oho_step(const HessianEig& hstar, PhaseState& z, double h, const OUCoeffs& half,
              const Vec& xi1, const Vec& xi2, const Vec& xi3, const Vec& xi4) {
  o_step(z, half, xi1, xi2);
  hstar_step(hstar, z, h);
  o_step(z, half, xi3, xi4);
}

void em_step(const Potential& pot, PhaseState& z, double h, double gamma, const Vec& xi) {
  const Vec g = pot.grad(z.x);
  z.x += h * z.v;
  z.v += -h * g - h * gamma * z.v + std::sqrt(2.0 * gamma * h) * xi;
}

CoarsePair m_transform(const OUCoeffs& fine, const OUCoeffs& coarse, const Vec& xi1,
                       const Vec& xi2, const Vec& xi3, const Vec& xi4) {
  CoarsePair out;
  // W over [0, 2s] is the sum of the two fine increments.
  out.xi1 = (xi1 + xi3) / std::sqrt(2.0);
  // The coarse filtered noise Z2(2s) equals eta_s Z2(first) + Z2(second);
  // subtract the part carried by xi1' and divide by c2(2s).
  out.xi2 = (fine.eta * (fine.c1 * xi1 + fine.c2 * xi2) + fine.c1 * xi3 +
             fine.c2 * xi4 - coarse.c1 * out.xi1) /
            coarse.c2;
  return out;
}

}  // namespace ubu

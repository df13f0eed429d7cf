#pragma once

#include "ubu/core.hpp"
#include "ubu/models.hpp"

namespace ubu {

/// Coefficients of the exact Ornstein-Uhlenbeck half-flow over duration s:
///   x' = x + F v + sqrt(2/gamma) (Z1 - Z2)
///   v' = eta v + sqrt(2 gamma) Z2
/// with Z1 = sqrt(s) xi1 and Z2 = c1 xi1 + c2 xi2 built from two independent
/// standard normals, so that (Z1, Z2) has the covariance of
/// (W_s, int_0^s e^{-gamma(s-r)} dW_r).
struct OUCoeffs {
  double gamma;
  double s;
  double eta;      // e^{-gamma s}
  double F;        // (1 - eta) / gamma
  double c1;       // F / sqrt(s)
  double c2;       // sqrt((1 - eta^2)/(2 gamma) - c1^2), series for small gamma*s
  double sqrt_s;
};

OUCoeffs ou_coeffs(double gamma, double s);

/// In-place OU step; reads 2d normals (xi1, xi2).
void u_step(PhaseState& z, const OUCoeffs& c, const Vec& xi1, const Vec& xi2);

/// Velocity-only part of the OU step (position held fixed).
void o_step(PhaseState& z, const OUCoeffs& c, const Vec& xi1, const Vec& xi2);

/// Kick v <- v - h g where g is the gradient used for this step.
void b_step(PhaseState& z, double h, const Vec& g);

/// One UBU step with exact gradients.  If midpoint is non-null it receives the
/// position after the first half-step, which is where the gradient was taken.
void ubu_step(const Potential& pot, PhaseState& z, double h, const OUCoeffs& half,
              const Vec& xi1, const Vec& xi2, const Vec& xi3, const Vec& xi4,
              Vec* midpoint = nullptr);

/// Exact Hamiltonian flow of duration h for the Gaussian measure defined by
/// hstar: rotation by angle sqrt(lambda) h in each eigenmode.
void hstar_step(const HessianEig& hstar, PhaseState& z, double h);

/// One OHO step: O(h/2), exact Hamiltonian flow H*(h), O(h/2).  Preserves
/// N(x*, (H*)^{-1}) x N(0, I) exactly.
void oho_step(const HessianEig& hstar, PhaseState& z, double h, const OUCoeffs& half,
              const Vec& xi1, const Vec& xi2, const Vec& xi3, const Vec& xi4);

/// One Euler-Maruyama step of the kinetic Langevin SDE (baseline integrator).
void em_step(const Potential& pot, PhaseState& z, double h, double gamma, const Vec& xi);

/// Noise coarsening: maps the four fine-step normals (half-duration s) to the
/// two normals of the enclosing coarse half-step (duration 2s) so that the OU
/// flow telescopes exactly: U(2s) applied to the coarsened pair equals
/// U(s) o U(s) applied to the fine quadruple.
struct CoarsePair {
  Vec xi1;
  Vec xi2;
};

CoarsePair m_transform(const OUCoeffs& fine, const OUCoeffs& coarse, const Vec& xi1,
                       const Vec& xi2, const Vec& xi3, const Vec& xi4);

}  // namespace ubu

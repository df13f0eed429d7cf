#pragma once

#include "ubu/core.hpp"
#include "ubu/integrators.hpp"
#include "ubu/models.hpp"

namespace ubu {

/// Tally of gradient work.  Subsampled work is recorded in per-datum
/// component evaluations; data_passes converts everything to equivalent
/// full-data gradient evaluations.  H* matrix products are tracked
/// separately since they cost O(d) per coordinate, not a data pass.
struct WorkCounter {
  long long full_grads = 0;
  long long component_evals = 0;
  long long hstar_products = 0;

  double data_passes(int n_data) const {
    double p = static_cast<double>(full_grads);
    if (n_data > 0) p += static_cast<double>(component_evals) / n_data;
    return p;
  }

  WorkCounter& operator+=(const WorkCounter& o) {
    full_grads += o.full_grads;
    component_evals += o.component_evals;
    hstar_products += o.hstar_products;
    return *this;
  }
};

/// Reference point for variance-reduced and quadratic gradient estimates.
/// For the subsampled estimator, cached_grad holds the summed likelihood
/// gradients at x_hat; for the quadratic estimator it holds the full
/// gradient there.
struct AnchorState {
  Vec x_hat;
  Vec cached_grad;
};

/// Anchor for the variance-reduced subsampled gradient; costs one data pass.
AnchorState make_svrg_anchor(const Potential& pot, const Vec& x_hat, WorkCounter* work);

/// Unbiased subsampled gradient
///   G(x, omega | x_hat) = grad U_0(x) + sum_i grad U_i(x_hat)
///                       + (N_D / N_b) sum_{i in omega} [grad U_i(x) - grad U_i(x_hat)].
Vec svrg_gradient(const Potential& pot, const Vec& x, const std::vector<int>& batch,
                  const AnchorState& anchor, WorkCounter* work);

/// Anchor for the quadratic gradient approximation; costs one full gradient.
AnchorState make_quad_anchor(const Potential& pot, const Vec& x_hat, WorkCounter* work);

/// Deterministic quadratic approximation
///   Q(x | x_hat) = grad U(x_hat) + H* (x - x_hat).
Vec quad_gradient(const HessianEig& hstar, const Vec& x, const AnchorState& anchor,
                  WorkCounter* work);

/// One UBU step with the subsampled gradient.  The caller owns the anchor and
/// decides the refresh cadence: if refresh_anchor is true, the anchor is
/// rebuilt at the midpoint before the kick (this is where gradients are
/// evaluated, one OU half-step past x).
void svrg_ubu_step(const Potential& pot, PhaseState& z, double h, const OUCoeffs& half,
                   const Vec& xi1, const Vec& xi2, const Vec& xi3, const Vec& xi4,
                   const std::vector<int>& batch, AnchorState& anchor,
                   bool refresh_anchor, WorkCounter* work, Vec* midpoint = nullptr);

/// One UBU step with the quadratic gradient approximation; same anchor
/// handling as svrg_ubu_step.
void quad_ubu_step(const Potential& pot, const HessianEig& hstar, PhaseState& z, double h,
                   const OUCoeffs& half, const Vec& xi1, const Vec& xi2, const Vec& xi3,
                   const Vec& xi4, AnchorState& anchor, bool refresh_anchor,
                   WorkCounter* work, Vec* midpoint = nullptr);

}  // namespace ubu

#include "ubu/inexact.hpp"

namespace ubu {

AnchorState make_svrg_anchor(const Potential& pot, const Vec& x_hat, WorkCounter* work) {
  AnchorState a;
  a.x_hat = x_hat;
  a.cached_grad = Vec::Zero(pot.dim());
  const int nd = pot.n_data();
  for (int i = 1; i <= nd; ++i) a.cached_grad += pot.grad_component(i, x_hat);
  if (work) work->component_evals += nd;
  return a;
}

Vec svrg_gradient(const Potential& pot, const Vec& x, const std::vector<int>& batch,
                  const AnchorState& anchor, WorkCounter* work) {
  const int nd = pot.n_data();
  if (nd < 1) throw std::logic_error("svrg_gradient: target has no data decomposition");
  Vec g = pot.grad_component(0, x) + anchor.cached_grad;
  const double scale = static_cast<double>(nd) / static_cast<double>(batch.size());
  for (int i : batch)
    g += scale * (pot.grad_component(i, x) - pot.grad_component(i, anchor.x_hat));
  if (work) work->component_evals += 2 * static_cast<long long>(batch.size());
  return g;
}

AnchorState make_quad_anchor(const Potential& pot, const Vec& x_hat, WorkCounter* work) {
  AnchorState a;
  a.x_hat = x_hat;
  a.cached_grad = pot.grad(x_hat);
  if (work) work->full_grads += 1;
  return a;
}

Vec quad_gradient(const HessianEig& hstar, const Vec& x, const AnchorState& anchor,
                  WorkCounter* work) {
  if (work) work->hstar_products += 1;
  return anchor.cached_grad + hstar.H * (x - anchor.x_hat);
}

void svrg_ubu_step(const Potential& pot, PhaseState& z, double h, const OUCoeffs& half,
                   const Vec& xi1, const Vec& xi2, const Vec& xi3, const Vec& xi4,
                   const std::vector<int>& batch, AnchorState& anchor,
                   bool refresh_anchor, WorkCounter* work, Vec* midpoint) {
  u_step(z, half, xi1, xi2);
  if (refresh_anchor) anchor = make_svrg_anchor(pot, z.x, work);
  if (midpoint) *midpoint = z.x;
  b_step(z, h, svrg_gradient(pot, z.x, batch, anchor, work));
  u_step(z, half, xi3, xi4);
}

void quad_ubu_step(const Potential& pot, const HessianEig& hstar, PhaseState& z, double h,
                   const OUCoeffs& half, const Vec& xi1, const Vec& xi2, const Vec& xi3,
                   const Vec& xi4, AnchorState& anchor, bool refresh_anchor,
                   WorkCounter* work, Vec* midpoint) {
  u_step(z, half, xi1, xi2);
  if (refresh_anchor) anchor = make_quad_anchor(pot, z.x, work);
  if (midpoint) *midpoint = z.x;
  b_step(z, h, quad_gradient(hstar, z.x, anchor, work));
  u_step(z, half, xi3, xi4);
}

}  // namespace ubu

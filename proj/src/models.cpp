#include "ubu/models.hpp"

#include <cmath>

namespace ubu {

Vec Potential::grad_component(int i, const Vec& x) const {
  if (n_data() == 0 && i == 0) return grad(x);
  throw std::logic_error("Potential::grad_component: no data decomposition");
}

double softplus(double x) {
  return (x > 0.0) ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0.0) {
    const double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// ---------------------------------------------------------------------------

GaussianTarget::GaussianTarget(int d, double kappa) {
  if (d < 1 || !(kappa >= 1.0))
    throw std::invalid_argument("GaussianTarget: need d >= 1 and kappa >= 1");
  lambda_.resize(d);
  if (d == 1) {
    lambda_[0] = kappa;
  } else {
    for (int k = 0; k < d; ++k) lambda_[k] = 1.0 + k * (kappa - 1.0) / (d - 1.0);
  }
}

double GaussianTarget::value(const Vec& x) const {
  return 0.5 * lambda_.dot(x.cwiseProduct(x));
}

Vec GaussianTarget::grad(const Vec& x) const { return lambda_.cwiseProduct(x); }

// The whole quadratic is treated as a single data term so the subsampled
// gradient machinery applies unchanged (U_0 = 0).
Vec GaussianTarget::grad_component(int i, const Vec& x) const {
  if (i == 0) return Vec::Zero(dim());
  if (i == 1) return grad(x);
  throw std::out_of_range("GaussianTarget::grad_component: index out of range");
}

Mat GaussianTarget::hessian(const Vec&) const {
  return lambda_.asDiagonal().toDenseMatrix();
}

// ---------------------------------------------------------------------------

MultinomialRegression::MultinomialRegression(Mat covariates, std::vector<int> labels,
                                             int classes, double sigma0_sq)
    : X_(std::move(covariates)),
      labels_(std::move(labels)),
      classes_(classes),
      d0_(static_cast<int>(X_.cols())),
      sigma0_sq_(sigma0_sq) {
  if (classes_ < 2) throw std::invalid_argument("MultinomialRegression: need >= 2 classes");
  if (!(sigma0_sq_ > 0.0))
    throw std::invalid_argument("MultinomialRegression: sigma0_sq must be > 0");
  if (static_cast<int>(labels_.size()) != static_cast<int>(X_.rows()))
    throw std::invalid_argument("MultinomialRegression: label count != covariate rows");
  for (int y : labels_)
    if (y < 1 || y > classes_)
      throw std::invalid_argument("MultinomialRegression: labels must lie in 1..m");
}

Vec MultinomialRegression::predictive(const Vec& q, int j) const {
  Vec t(classes_);
  for (int k = 0; k < classes_; ++k) t[k] = X_.row(j).dot(q.segment(k * d0_, d0_));
  const double tmax = t.maxCoeff();
  Vec p = (t.array() - tmax).exp();
  return p / p.sum();
}

double MultinomialRegression::value(const Vec& q) const {
  double u = q.squaredNorm() / (2.0 * sigma0_sq_);
  for (int j = 0; j < n_data(); ++j) {
    Vec t(classes_);
    for (int k = 0; k < classes_; ++k) t[k] = X_.row(j).dot(q.segment(k * d0_, d0_));
    const double tmax = t.maxCoeff();
    u += tmax + std::log((t.array() - tmax).exp().sum()) - t[labels_[j] - 1];
  }
  return u;
}

Vec MultinomialRegression::grad(const Vec& q) const {
  Vec g = q / sigma0_sq_;
  for (int j = 0; j < n_data(); ++j) {
    const Vec p = predictive(q, j);
    for (int k = 0; k < classes_; ++k) {
      const double w = p[k] - (labels_[j] - 1 == k ? 1.0 : 0.0);
      g.segment(k * d0_, d0_) += w * X_.row(j).transpose();
    }
  }
  return g;
}

Vec MultinomialRegression::grad_component(int i, const Vec& q) const {
  if (i == 0) return q / sigma0_sq_;
  const int j = i - 1;
  if (j < 0 || j >= n_data())
    throw std::out_of_range("MultinomialRegression::grad_component: index out of range");
  Vec g = Vec::Zero(dim());
  const Vec p = predictive(q, j);
  for (int k = 0; k < classes_; ++k) {
    const double w = p[k] - (labels_[j] - 1 == k ? 1.0 : 0.0);
    g.segment(k * d0_, d0_) += w * X_.row(j).transpose();
  }
  return g;
}

Mat MultinomialRegression::hessian(const Vec& q) const {
  Mat H = Mat::Identity(dim(), dim()) / sigma0_sq_;
  for (int j = 0; j < n_data(); ++j) {
    const Vec p = predictive(q, j);
    const Mat xxt = X_.row(j).transpose() * X_.row(j);
    for (int k = 0; k < classes_; ++k) {
      for (int l = 0; l < classes_; ++l) {
        const double w = (k == l ? p[k] : 0.0) - p[k] * p[l];
        if (w != 0.0) H.block(k * d0_, l * d0_, d0_, d0_) += w * xxt;
      }
    }
  }
  return H;
}

// ---------------------------------------------------------------------------

PoissonSoccer::PoissonSoccer(std::vector<SoccerGame> games, int n_teams, int n_weeks,
                             double sigma_sq, double sigma0_sq)
    : games_(std::move(games)),
      n_teams_(n_teams),
      n_weeks_(n_weeks),
      sigma_sq_(sigma_sq),
      sigma0_sq_(sigma0_sq) {
  if (n_teams_ < 2 || n_weeks_ < 1)
    throw std::invalid_argument("PoissonSoccer: need >= 2 teams and >= 1 week");
  if (!(sigma_sq_ > 0.0 && sigma0_sq_ > 0.0))
    throw std::invalid_argument("PoissonSoccer: variances must be > 0");
  for (const auto& g : games_) {
    if (g.week < 1 || g.week > n_weeks_ || g.home < 0 || g.home >= n_teams_ ||
        g.away < 0 || g.away >= n_teams_ || g.home == g.away || g.home_goals < 0 ||
        g.away_goals < 0)
      throw std::invalid_argument("PoissonSoccer: malformed game record");
  }
}

double PoissonSoccer::value(const Vec& theta) const {
  double u = 0.0;
  for (int t = 0; t < n_teams_; ++t) {
    const double a1 = theta[attack_index(t, 1)];
    const double d1 = theta[defence_index(t, 1)];
    u += (a1 * a1 + d1 * d1) / (2.0 * sigma0_sq_);
    for (int w = 2; w <= n_weeks_; ++w) {
      const double da = theta[attack_index(t, w)] - theta[attack_index(t, w - 1)];
      const double dd = theta[defence_index(t, w)] - theta[defence_index(t, w - 1)];
      u += (da * da + dd * dd) / (2.0 * sigma_sq_);
    }
  }
  for (const auto& g : games_) {
    const double lh =
        softplus(theta[attack_index(g.home, g.week)] + theta[defence_index(g.away, g.week)]);
    const double la =
        softplus(theta[attack_index(g.away, g.week)] + theta[defence_index(g.home, g.week)]);
    u += lh - g.home_goals * std::log(lh) + la - g.away_goals * std::log(la);
  }
  return u;
}

namespace {

// d/d_eta [softplus(eta) - S log softplus(eta)]
double poisson_eta_grad(double eta, int s) {
  const double lam = softplus(eta);
  return (1.0 - s / lam) * sigmoid(eta);
}

// second derivative of the same term in eta
double poisson_eta_hess(double eta, int s) {
  const double lam = softplus(eta);
  const double sig = sigmoid(eta);
  return sig * (1.0 - sig) * (1.0 - s / lam) + s * sig * sig / (lam * lam);
}

}  // namespace

Vec PoissonSoccer::grad(const Vec& theta) const {
  Vec g = grad_component(0, theta);
  for (int i = 1; i <= n_data(); ++i) g += grad_component(i, theta);
  return g;
}

Vec PoissonSoccer::grad_component(int i, const Vec& theta) const {
  Vec g = Vec::Zero(dim());
  if (i == 0) {
    for (int t = 0; t < n_teams_; ++t) {
      g[attack_index(t, 1)] += theta[attack_index(t, 1)] / sigma0_sq_;
      g[defence_index(t, 1)] += theta[defence_index(t, 1)] / sigma0_sq_;
      for (int w = 2; w <= n_weeks_; ++w) {
        const double da = theta[attack_index(t, w)] - theta[attack_index(t, w - 1)];
        const double dd = theta[defence_index(t, w)] - theta[defence_index(t, w - 1)];
        g[attack_index(t, w)] += da / sigma_sq_;
        g[attack_index(t, w - 1)] -= da / sigma_sq_;
        g[defence_index(t, w)] += dd / sigma_sq_;
        g[defence_index(t, w - 1)] -= dd / sigma_sq_;
      }
    }
    return g;
  }
  const int j = i - 1;
  if (j < 0 || j >= n_data())
    throw std::out_of_range("PoissonSoccer::grad_component: index out of range");
  const auto& gm = games_[j];
  const int ah = attack_index(gm.home, gm.week), dh = defence_index(gm.home, gm.week);
  const int aa = attack_index(gm.away, gm.week), da = defence_index(gm.away, gm.week);
  const double gh = poisson_eta_grad(theta[ah] + theta[da], gm.home_goals);
  const double ga = poisson_eta_grad(theta[aa] + theta[dh], gm.away_goals);
  g[ah] += gh;
  g[da] += gh;
  g[aa] += ga;
  g[dh] += ga;
  return g;
}

Mat PoissonSoccer::hessian(const Vec& theta) const {
  Mat H = Mat::Zero(dim(), dim());
  for (int t = 0; t < n_teams_; ++t) {
    H(attack_index(t, 1), attack_index(t, 1)) += 1.0 / sigma0_sq_;
    H(defence_index(t, 1), defence_index(t, 1)) += 1.0 / sigma0_sq_;
    for (int w = 2; w <= n_weeks_; ++w) {
      for (int off = 0; off < 2; ++off) {
        const int cur = off == 0 ? attack_index(t, w) : defence_index(t, w);
        const int prev = off == 0 ? attack_index(t, w - 1) : defence_index(t, w - 1);
        H(cur, cur) += 1.0 / sigma_sq_;
        H(prev, prev) += 1.0 / sigma_sq_;
        H(cur, prev) -= 1.0 / sigma_sq_;
        H(prev, cur) -= 1.0 / sigma_sq_;
      }
    }
  }
  for (const auto& gm : games_) {
    const int ah = attack_index(gm.home, gm.week), dh = defence_index(gm.home, gm.week);
    const int aa = attack_index(gm.away, gm.week), da = defence_index(gm.away, gm.week);
    const double hh = poisson_eta_hess(theta[ah] + theta[da], gm.home_goals);
    const double ha = poisson_eta_hess(theta[aa] + theta[dh], gm.away_goals);
    H(ah, ah) += hh;
    H(ah, da) += hh;
    H(da, ah) += hh;
    H(da, da) += hh;
    H(aa, aa) += ha;
    H(aa, dh) += ha;
    H(dh, aa) += ha;
    H(dh, dh) += ha;
  }
  return H;
}

// ---------------------------------------------------------------------------

Vec HessianEig::inv_sqrt_apply(const Vec& y) const {
  return Q * (lambda.array().rsqrt() * (Q.transpose() * y).array()).matrix();
}

MapResult find_map(const Potential& p, const Vec& x_init, double tol, int max_iter) {
  Vec x = x_init;
  Vec g = p.grad(x);
  if (tol <= 0.0) tol = 1e-10 * std::max(1.0, g.norm());
  double fx = p.value(x);
  int it = 0;
  for (; it < max_iter && g.norm() > tol; ++it) {
    Vec dir;
    const Mat H = p.hessian(x);
    Eigen::LDLT<Mat> ldlt(H);
    if (ldlt.info() == Eigen::Success) {
      dir = -ldlt.solve(g);
      if (!(dir.dot(g) < 0.0)) dir = -g;
    } else {
      dir = -g;
    }
    double step = 1.0;
    const double slope = dir.dot(g);
    bool moved = false;
    for (int bt = 0; bt < 60; ++bt) {
      const Vec cand = x + step * dir;
      const double fc = p.value(cand);
      if (fc <= fx + 1e-4 * step * slope) {
        x = cand;
        fx = fc;
        moved = true;
        break;
      }
      step *= 0.5;
    }
    if (!moved) break;
    g = p.grad(x);
  }
  return {x, g.norm(), it};
}

HessianEig hessian_at_min(const Potential& p, const Vec& x_star) {
  HessianEig out;
  out.center = x_star;
  out.H = p.hessian(x_star);
  Eigen::SelfAdjointEigenSolver<Mat> es(out.H);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("hessian_at_min: eigendecomposition failed");
  out.Q = es.eigenvectors();
  out.lambda = es.eigenvalues();
  if (!(out.lambda[0] > 0.0))
    throw std::runtime_error("hessian_at_min: Hessian is not positive definite");
  return out;
}

HessianEig hessian_at_min(const Potential& p) {
  const MapResult mr = find_map(p, p.minimizer_hint());
  return hessian_at_min(p, mr.x);
}

// ---------------------------------------------------------------------------

PreconditionedPotential::PreconditionedPotential(std::shared_ptr<const Potential> base,
                                                 HessianEig hstar)
    : base_(std::move(base)), hstar_(std::move(hstar)) {
  A_ = hstar_.Q * hstar_.lambda.array().rsqrt().matrix().asDiagonal() *
       hstar_.Q.transpose();
  Ainv_ = hstar_.Q * hstar_.lambda.array().sqrt().matrix().asDiagonal() *
          hstar_.Q.transpose();
}

Vec PreconditionedPotential::to_original(const Vec& y) const {
  return hstar_.center + A_ * y;
}

Vec PreconditionedPotential::to_whitened(const Vec& x) const {
  return Ainv_ * (x - hstar_.center);
}

double PreconditionedPotential::value(const Vec& y) const {
  return base_->value(to_original(y));
}

Vec PreconditionedPotential::grad(const Vec& y) const {
  return A_ * base_->grad(to_original(y));
}

Vec PreconditionedPotential::grad_component(int i, const Vec& y) const {
  return A_ * base_->grad_component(i, to_original(y));
}

Mat PreconditionedPotential::hessian(const Vec& y) const {
  return A_ * base_->hessian(to_original(y)) * A_;
}

// ---------------------------------------------------------------------------

namespace {

int sample_poisson(double lambda, double u) {
  double p = std::exp(-lambda);
  double cdf = p;
  int k = 0;
  while (u > cdf && k < 1000) {
    ++k;
    p *= lambda / k;
    cdf += p;
  }
  return k;
}

int sample_categorical(const Vec& probs, double u) {
  double cdf = 0.0;
  for (Eigen::Index k = 0; k < probs.size(); ++k) {
    cdf += probs[k];
    if (u <= cdf) return static_cast<int>(k);
  }
  return static_cast<int>(probs.size()) - 1;
}

}  // namespace

SyntheticMultinomial make_synthetic_multinomial(int classes, int d0, int n_data,
                                                double sigma0_sq, std::uint64_t seed) {
  if (d0 < 2) throw std::invalid_argument("make_synthetic_multinomial: d0 must include intercept");
  NoiseKey key{seed, 0, static_cast<std::int64_t>(stream_tag(Stream::Synthetic, 1)), 0, 0};
  Mat X(n_data, d0);
  std::uint64_t j = 0;
  for (int r = 0; r < n_data; ++r) {
    for (int c = 0; c < d0 - 1; ++c) X(r, c) = key_uniform(key, j++);
    X(r, d0 - 1) = 1.0;
  }
  NoiseKey wkey{seed, 0, static_cast<std::int64_t>(stream_tag(Stream::Synthetic, 2)), 0, 0};
  Vec q_true(classes * d0);
  for (Eigen::Index i = 0; i < q_true.size(); ++i)
    q_true[i] = std::sqrt(sigma0_sq) * draw_gaussian(wkey, static_cast<std::uint64_t>(i));
  auto model = std::make_shared<MultinomialRegression>(
      X, std::vector<int>(n_data, 1), classes, sigma0_sq);
  NoiseKey lkey{seed, 0, static_cast<std::int64_t>(stream_tag(Stream::Synthetic, 3)), 0, 0};
  std::vector<int> labels(n_data);
  for (int r = 0; r < n_data; ++r) {
    const Vec p = model->predictive(q_true, r);
    labels[r] = 1 + sample_categorical(p, key_uniform(lkey, static_cast<std::uint64_t>(r)));
  }
  model = std::make_shared<MultinomialRegression>(std::move(X), std::move(labels), classes,
                                                  sigma0_sq);
  return {std::move(model), std::move(q_true)};
}

SyntheticPoisson make_synthetic_poisson(int n_teams, int n_weeks, double sigma_sq,
                                        double sigma0_sq, std::uint64_t seed) {
  std::vector<SoccerGame> schedule;
  for (int w = 1; w <= n_weeks; ++w)
    for (int i = 0; i < n_teams; ++i)
      for (int j = i + 1; j < n_teams; ++j) {
        // Alternate home advantage between the pair from week to week.
        const bool swap = ((w + i + j) % 2) == 0;
        schedule.push_back({w, swap ? j : i, swap ? i : j, 0, 0});
      }
  PoissonSoccer layout(schedule, n_teams, n_weeks, sigma_sq, sigma0_sq);
  NoiseKey skey{seed, 0, static_cast<std::int64_t>(stream_tag(Stream::Synthetic, 4)), 0, 0};
  Vec theta_true(layout.dim());
  std::uint64_t j = 0;
  for (int t = 0; t < n_teams; ++t) {
    theta_true[layout.attack_index(t, 1)] = std::sqrt(sigma0_sq) * draw_gaussian(skey, j++);
    theta_true[layout.defence_index(t, 1)] = std::sqrt(sigma0_sq) * draw_gaussian(skey, j++);
    for (int w = 2; w <= n_weeks; ++w) {
      theta_true[layout.attack_index(t, w)] =
          theta_true[layout.attack_index(t, w - 1)] +
          std::sqrt(sigma_sq) * draw_gaussian(skey, j++);
      theta_true[layout.defence_index(t, w)] =
          theta_true[layout.defence_index(t, w - 1)] +
          std::sqrt(sigma_sq) * draw_gaussian(skey, j++);
    }
  }
  NoiseKey gkey{seed, 0, static_cast<std::int64_t>(stream_tag(Stream::Synthetic, 5)), 0, 0};
  std::uint64_t u = 0;
  for (auto& g : schedule) {
    const double lh = softplus(theta_true[layout.attack_index(g.home, g.week)] +
                               theta_true[layout.defence_index(g.away, g.week)]);
    const double la = softplus(theta_true[layout.attack_index(g.away, g.week)] +
                               theta_true[layout.defence_index(g.home, g.week)]);
    g.home_goals = sample_poisson(lh, key_uniform(gkey, u++));
    g.away_goals = sample_poisson(la, key_uniform(gkey, u++));
  }
  auto model = std::make_shared<PoissonSoccer>(std::move(schedule), n_teams, n_weeks,
                                               sigma_sq, sigma0_sq);
  return {std::move(model), std::move(theta_true)};
}

}  // namespace ubu

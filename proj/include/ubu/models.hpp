#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ubu/core.hpp"

namespace ubu {

/// Target potential U(x) = U_0(x) + sum_{i=1..N_D} U_i(x).
/// grad_component(0, x) is the prior/monolithic term; for targets with no
/// data decomposition n_data() == 0 and grad_component(0, x) == grad(x).
class Potential {
 public:
  virtual ~Potential() = default;

  virtual int dim() const = 0;
  virtual int n_data() const { return 0; }

  virtual double value(const Vec& x) const = 0;
  virtual Vec grad(const Vec& x) const = 0;
  virtual Vec grad_component(int i, const Vec& x) const;

  /// Dense Hessian, analytic for all in-scope models.
  virtual Mat hessian(const Vec& x) const = 0;

  /// Starting point for the MAP optimizer.
  virtual Vec minimizer_hint() const { return Vec::Zero(dim()); }
};

/// Gaussian target with diagonal precision, eigenvalues 1 .. kappa spread
/// linearly: lambda_k = 1 + k (kappa-1)/(d-1).
class GaussianTarget : public Potential {
 public:
  GaussianTarget(int d, double kappa);

  int dim() const override { return static_cast<int>(lambda_.size()); }
  int n_data() const override { return 1; }
  double value(const Vec& x) const override;
  Vec grad(const Vec& x) const override;
  Vec grad_component(int i, const Vec& x) const override;
  Mat hessian(const Vec& x) const override;

  const Vec& precision_diagonal() const { return lambda_; }

 private:
  Vec lambda_;
};

/// Bayesian multinomial regression posterior.  Parameters q = (q^1,...,q^m)
/// stacked class-by-class; covariates carry a trailing intercept 1.
class MultinomialRegression : public Potential {
 public:
  MultinomialRegression(Mat covariates, std::vector<int> labels, int classes,
                        double sigma0_sq);

  int dim() const override { return classes_ * d0_; }
  int n_data() const override { return static_cast<int>(labels_.size()); }
  double value(const Vec& q) const override;
  Vec grad(const Vec& q) const override;
  Vec grad_component(int i, const Vec& q) const override;
  Mat hessian(const Vec& q) const override;

  int classes() const { return classes_; }
  int covariate_dim() const { return d0_; }
  const Mat& covariates() const { return X_; }
  const std::vector<int>& labels() const { return labels_; }
  double sigma0_sq() const { return sigma0_sq_; }

  /// Class probabilities softmax(<x_j, q^k>) for datum j.
  Vec predictive(const Vec& q, int j) const;

 private:
  Mat X_;                    // N_D x d0
  std::vector<int> labels_;  // values in 1..m
  int classes_;
  int d0_;
  double sigma0_sq_;
};

struct SoccerGame {
  int week;  // 1-based round index
  int home;  // team ids, 0-based
  int away;
  int home_goals;
  int away_goals;
};

/// Independent-Poisson soccer score model with softplus link and Gaussian
/// random-walk priors on per-team attack/defence strengths.
class PoissonSoccer : public Potential {
 public:
  PoissonSoccer(std::vector<SoccerGame> games, int n_teams, int n_weeks,
                double sigma_sq, double sigma0_sq);

  int dim() const override { return 2 * n_teams_ * n_weeks_; }
  int n_data() const override { return static_cast<int>(games_.size()); }
  double value(const Vec& theta) const override;
  Vec grad(const Vec& theta) const override;
  Vec grad_component(int i, const Vec& theta) const override;
  Mat hessian(const Vec& theta) const override;

  int n_teams() const { return n_teams_; }
  int n_weeks() const { return n_weeks_; }
  const std::vector<SoccerGame>& games() const { return games_; }

  int attack_index(int team, int week) const { return team * n_weeks_ + (week - 1); }
  int defence_index(int team, int week) const {
    return n_teams_ * n_weeks_ + team * n_weeks_ + (week - 1);
  }

 private:
  std::vector<SoccerGame> games_;
  int n_teams_;
  int n_weeks_;
  double sigma_sq_;
  double sigma0_sq_;
};

double softplus(double x);
double sigmoid(double x);

// ---------------------------------------------------------------------------

/// Hessian at the minimizer with its symmetric eigendecomposition.
struct HessianEig {
  Vec center;       // x*
  Mat H;            // dense symmetric PD
  Mat Q;            // eigenvectors, columns
  Vec lambda;       // ascending eigenvalues, all > 0
  double m() const { return lambda[0]; }
  double M() const { return lambda[lambda.size() - 1]; }

  Vec apply(const Vec& y) const { return H * y; }
  /// H^{-1/2} y via the eigendecomposition.
  Vec inv_sqrt_apply(const Vec& y) const;
};

struct MapResult {
  Vec x;
  double grad_norm;
  int iterations;
};

/// Newton with Armijo backtracking; gradient-descent fallback when the
/// Hessian solve fails.  tol <= 0 selects 1e-10 * max(1, ||grad(x_init)||).
MapResult find_map(const Potential& p, const Vec& x_init, double tol = -1.0,
                   int max_iter = 500);

HessianEig hessian_at_min(const Potential& p, const Vec& x_star);

/// Convenience: optimize from the model's hint, then decompose.
HessianEig hessian_at_min(const Potential& p);

/// Target transformed as V(y) = U(x* + A y) with A = (H*)^{-1/2}, so the
/// Hessian of V at its mode (the origin) is the identity.
class PreconditionedPotential : public Potential {
 public:
  PreconditionedPotential(std::shared_ptr<const Potential> base, HessianEig hstar);

  int dim() const override { return base_->dim(); }
  int n_data() const override { return base_->n_data(); }
  double value(const Vec& y) const override;
  Vec grad(const Vec& y) const override;
  Vec grad_component(int i, const Vec& y) const override;
  Mat hessian(const Vec& y) const override;

  Vec to_original(const Vec& y) const;  // x = x* + A y
  Vec to_whitened(const Vec& x) const;  // y = A^{-1} (x - x*)
  const HessianEig& base_hessian() const { return hstar_; }

 private:
  std::shared_ptr<const Potential> base_;
  HessianEig hstar_;
  Mat A_;      // (H*)^{-1/2}
  Mat Ainv_;   // (H*)^{1/2}
};

// ---------------------------------------------------------------------------
// Synthetic desk-scale datasets.

struct SyntheticMultinomial {
  std::shared_ptr<MultinomialRegression> model;
  Vec q_true;
};

/// Pixels ~ U(0,1) plus intercept; ground-truth weights from the prior;
/// labels from the model's own likelihood.
SyntheticMultinomial make_synthetic_multinomial(int classes, int d0, int n_data,
                                                double sigma0_sq, std::uint64_t seed);

struct SyntheticPoisson {
  std::shared_ptr<PoissonSoccer> model;
  Vec theta_true;
};

/// Full round-robin (each unordered pair once per week); strengths drawn
/// from the random-walk prior; scores from the model's likelihood.
SyntheticPoisson make_synthetic_poisson(int n_teams, int n_weeks, double sigma_sq,
                                        double sigma0_sq, std::uint64_t seed);

}  // namespace ubu

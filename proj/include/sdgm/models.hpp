#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "sdgm/sparse_graph.hpp"

namespace sdgm {

/// Unnormalized posterior h(theta) = p(theta) p(y | theta) over the latent
/// ordering (b_1, ..., b_n, eta).
class TargetModel {
 public:
  virtual ~TargetModel() = default;

  virtual std::size_t dim() const = 0;
  virtual const SparsityPattern& pattern() const = 0;
  virtual double log_h(const Vector& theta) const = 0;
  virtual Vector grad_log_h(const Vector& theta) const = 0;
  virtual std::vector<std::string> coordinate_names() const;
  /// A reasonable optimizer starting location.
  virtual Vector initial_location() const;
};

/// log h = log_constant + log N(theta; mean, precision^{-1}). Dense, for small tests.
class GaussianTarget final : public TargetModel {
 public:
  GaussianTarget(Vector mean, Matrix precision, double log_constant = 0.0);
  GaussianTarget(Vector mean, Matrix precision, SparsityPattern pattern, double log_constant = 0.0);

  std::size_t dim() const override { return static_cast<std::size_t>(mean_.size()); }
  const SparsityPattern& pattern() const override { return pattern_; }
  double log_h(const Vector& theta) const override;
  Vector grad_log_h(const Vector& theta) const override;

  const Vector& mean() const { return mean_; }
  const Matrix& precision() const { return precision_; }
  double log_constant() const { return log_constant_; }

 private:
  Vector mean_;
  Matrix precision_;
  SparsityPattern pattern_;
  double log_constant_;
  double log_norm_;
};

// -----------------------------------------------------------------------------
// Generalized linear mixed models

enum class ResponseKind { bernoulli_logit, poisson_log };
enum class RandomEffectPrior { normal, student_t };

struct GlmmData {
  std::vector<double> y;
  Matrix x;                         // rows x fixed-effect columns
  Matrix z;                         // rows x random-effect columns
  std::vector<std::size_t> group;   // 0-based group index per row
  std::size_t n_groups = 0;
  std::vector<std::string> fixed_names;
  std::vector<std::string> random_names;
};

struct GlmmSpec {
  ResponseKind response = ResponseKind::bernoulli_logit;
  GlmmData data;
  RandomEffectPrior re_prior = RandomEffectPrior::normal;
  double df = 10.0;
  double beta_prior_sd = 10.0;
  double hyper_prior_sd = 10.0;
};

/// theta = (b_1, ..., b_n, beta, hyper). For a scalar random effect the
/// hyperparameter is zeta = log sd; otherwise vech(B) (column-major lower
/// triangle, diagonal on the log scale) with Sigma = B B^T.
class GlmmModel final : public TargetModel {
 public:
  explicit GlmmModel(GlmmSpec spec);

  std::size_t dim() const override { return dim_; }
  const SparsityPattern& pattern() const override { return pattern_; }
  double log_h(const Vector& theta) const override;
  Vector grad_log_h(const Vector& theta) const override;
  std::vector<std::string> coordinate_names() const override;
  Vector initial_location() const override;

  const GlmmSpec& spec() const { return spec_; }
  std::size_t random_dim() const { return r_; }
  std::size_t fixed_dim() const { return d_; }
  std::size_t hyper_dim() const { return h_; }

 private:
  double evaluate(const Vector& theta, Vector* grad) const;

  GlmmSpec spec_;
  std::size_t r_ = 0;
  std::size_t d_ = 0;
  std::size_t h_ = 0;
  std::size_t dim_ = 0;
  SparsityPattern pattern_;
  std::vector<std::vector<std::size_t>> rows_of_group_;
  double log_y_factorial_sum_ = 0.0;
};

// -----------------------------------------------------------------------------
// Stochastic volatility: y_i = exp(sigma b_i + kappa) eps_i,
// b_i = phi b_{i-1} + noise, b_1 ~ N(0, 1 / (1 - phi^2)),
// sigma = log(1 + exp(alpha)), phi = logistic(psi).

struct SvSpec {
  std::vector<double> y;
  double prior_variance = 10.0;  // on each of (alpha, psi, kappa)
};

/// theta = (b_1, ..., b_n, alpha, psi, kappa); markov_order 1 pattern.
class SvModel final : public TargetModel {
 public:
  explicit SvModel(SvSpec spec);

  std::size_t dim() const override { return spec_.y.size() + 3; }
  const SparsityPattern& pattern() const override { return pattern_; }
  double log_h(const Vector& theta) const override;
  Vector grad_log_h(const Vector& theta) const override;
  std::vector<std::string> coordinate_names() const override;
  Vector initial_location() const override;

  const SvSpec& spec() const { return spec_; }

 private:
  double evaluate(const Vector& theta, Vector* grad) const;

  SvSpec spec_;
  SparsityPattern pattern_;
};

// -----------------------------------------------------------------------------
// Synthetic data

struct GlmmSkeleton {
  ResponseKind response = ResponseKind::bernoulli_logit;
  std::size_t n_groups = 50;
  std::size_t obs_per_group = 5;
  /// beta[0] multiplies the intercept; the rest multiply iid N(0, 1) covariates.
  std::vector<double> beta{0.0};
  /// 1: random intercept. 2: random intercept and slope on a within-group time covariate.
  std::size_t random_dim = 1;
  /// True hyper block in the model's own coordinates (zeta, or vech(B) with log diagonal).
  /// -infinity for zeta gives zero-variance random effects.
  std::vector<double> hyper{0.0};
  RandomEffectPrior re_prior = RandomEffectPrior::normal;
  double df = 10.0;
};

struct SyntheticGlmm {
  GlmmData data;
  Vector true_theta;
  /// Raw table: columns group, y, x1..x{d-1}, time.
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

SyntheticGlmm synthesize_glmm(const GlmmSkeleton& skeleton, std::uint64_t seed);

struct SyntheticSv {
  SvSpec spec;
  Vector true_theta;
};

SyntheticSv synthesize_sv(std::size_t n, double sigma, double phi, double kappa, std::uint64_t seed);

}  // namespace sdgm

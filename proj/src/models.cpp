#include "sdgm/models.hpp"

#include <cmath>
#include <numbers>

#include "sdgm/error.hpp"
#include "sdgm/random.hpp"
#include "sdgm/skewnorm.hpp"

namespace sdgm {

namespace {

using Eigen::Index;

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void require_finite(const Vector& theta, const char* model) {
  if (!theta.allFinite()) throw NumericalError(std::string(model) + ": non-finite theta");
}

double normal_prior(double x, double sd, double* grad) {
  if (grad) *grad += -x / (sd * sd);
  return normal_log_pdf(x / sd) - std::log(sd);
}

// Gamma(shape, 1) by Marsaglia-Tsang; shape < 1 via the boost trick.
double gamma_draw(Rng& rng, double shape) {
  if (shape < 1.0) return gamma_draw(rng, shape + 1.0) * std::pow(rng.uniform(), 1.0 / shape);
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x = 0.0;
    double v = 0.0;
    do {
      x = rng.normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rng.uniform();
    if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) return d * v;
  }
}

double poisson_draw(Rng& rng, double mean) {
  // Split large means into pieces small enough for the multiplication method.
  double total = 0.0;
  while (mean > 0.0) {
    const double piece = std::min(mean, 30.0);
    mean -= piece;
    const double limit = std::exp(-piece);
    double prod = rng.uniform();
    double k = 0.0;
    while (prod > limit) {
      prod *= rng.uniform();
      k += 1.0;
    }
    total += k;
  }
  return total;
}

}  // namespace

std::vector<std::string> TargetModel::coordinate_names() const {
  std::vector<std::string> names;
  for (std::size_t k = 0; k < dim(); ++k) names.push_back("theta" + std::to_string(k + 1));
  return names;
}

Vector TargetModel::initial_location() const { return Vector::Zero(static_cast<Index>(dim())); }

// -----------------------------------------------------------------------------

GaussianTarget::GaussianTarget(Vector mean, Matrix precision, double log_constant)
    : GaussianTarget(mean, std::move(precision), SparsityPattern::dense(static_cast<std::size_t>(mean.size())),
                     log_constant) {}

GaussianTarget::GaussianTarget(Vector mean, Matrix precision, SparsityPattern pattern, double log_constant)
    : mean_(std::move(mean)), precision_(std::move(precision)), pattern_(std::move(pattern)),
      log_constant_(log_constant) {
  const auto p = static_cast<std::size_t>(mean_.size());
  check_dim(static_cast<std::size_t>(precision_.rows()), p, "precision rows");
  check_dim(static_cast<std::size_t>(precision_.cols()), p, "precision cols");
  check_dim(pattern_.dim(), p, "pattern");
  const Eigen::LLT<Matrix> llt(precision_);
  if (llt.info() != Eigen::Success) throw ConfigError("GaussianTarget: precision is not positive definite");
  const double log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  log_norm_ = 0.5 * log_det - static_cast<double>(p) * kLogSqrt2Pi;
}

double GaussianTarget::log_h(const Vector& theta) const {
  const Vector d = theta - mean_;
  return log_constant_ + log_norm_ - 0.5 * d.dot(precision_ * d);
}

Vector GaussianTarget::grad_log_h(const Vector& theta) const { return -(precision_ * (theta - mean_)); }

// -----------------------------------------------------------------------------

GlmmModel::GlmmModel(GlmmSpec spec) : spec_(std::move(spec)) {
  const GlmmData& data = spec_.data;
  const std::size_t rows = data.y.size();
  check_dim(static_cast<std::size_t>(data.x.rows()), rows, "fixed-effect design rows");
  check_dim(static_cast<std::size_t>(data.z.rows()), rows, "random-effect design rows");
  check_dim(data.group.size(), rows, "group index column");
  if (data.n_groups == 0) throw ConfigError("glmm: at least one group is required");
  if (data.z.cols() == 0) throw ConfigError("glmm: random-effect design needs at least one column");
  if (!(spec_.df > 0.0) || !std::isfinite(spec_.df)) {
    throw ConfigError("glmm: student-t degrees of freedom must be positive and finite");
  }
  if (!(spec_.beta_prior_sd > 0.0) || !(spec_.hyper_prior_sd > 0.0)) {
    throw ConfigError("glmm: prior standard deviations must be positive");
  }
  r_ = static_cast<std::size_t>(data.z.cols());
  d_ = static_cast<std::size_t>(data.x.cols());
  h_ = r_ == 1 ? 1 : r_ * (r_ + 1) / 2;
  dim_ = data.n_groups * r_ + d_ + h_;
  pattern_ = SparsityPattern::build(data.n_groups, std::vector<std::size_t>(data.n_groups, r_), d_ + h_, 0);

  rows_of_group_.resize(data.n_groups);
  for (std::size_t i = 0; i < rows; ++i) {
    if (data.group[i] >= data.n_groups) {
      throw ConfigError("glmm: group index " + std::to_string(data.group[i]) + " out of range on row " +
                        std::to_string(i + 1));
    }
    rows_of_group_[data.group[i]].push_back(i);
    const double y = data.y[i];
    if (!std::isfinite(y)) throw ConfigError("glmm: non-finite response on row " + std::to_string(i + 1));
    if (spec_.response == ResponseKind::bernoulli_logit && y != 0.0 && y != 1.0) {
      throw ConfigError("glmm: bernoulli response must be 0 or 1 (row " + std::to_string(i + 1) + ")");
    }
    if (spec_.response == ResponseKind::poisson_log) {
      if (y < 0.0 || y != std::floor(y)) {
        throw ConfigError("glmm: poisson response must be a nonnegative integer (row " + std::to_string(i + 1) + ")");
      }
      log_y_factorial_sum_ += std::lgamma(y + 1.0);
    }
  }
  if (!data.x.allFinite() || !data.z.allFinite()) throw ConfigError("glmm: design matrices must be finite");
}

double GlmmModel::evaluate(const Vector& theta, Vector* grad) const {
  check_dim(static_cast<std::size_t>(theta.size()), dim_, "glmm theta");
  require_finite(theta, "glmm");
  const GlmmData& data = spec_.data;
  const auto r = static_cast<Index>(r_);
  const auto n_local = static_cast<Index>(data.n_groups * r_);
  const auto beta = theta.segment(n_local, static_cast<Index>(d_));
  const auto hyper = theta.segment(n_local + static_cast<Index>(d_), static_cast<Index>(h_));
  if (grad) grad->setZero(theta.size());

  // Cholesky factor B of the random-effect covariance.
  Matrix B = Matrix::Zero(r, r);
  {
    Index k = 0;
    for (Index j = 0; j < r; ++j) {
      for (Index i = j; i < r; ++i, ++k) B(i, j) = (i == j) ? std::exp(hyper[k]) : hyper[k];
    }
  }
  const auto B_lower = B.triangularView<Eigen::Lower>();
  const double log_det_B = B.diagonal().array().log().sum();
  const bool student = spec_.re_prior == RandomEffectPrior::student_t;
  const double nu = spec_.df;
  const double rd = static_cast<double>(r_);
  const double t_const = student ? std::lgamma(0.5 * (nu + rd)) - std::lgamma(0.5 * nu) - 0.5 * rd * std::log(nu * std::numbers::pi)
                                 : -rd * kLogSqrt2Pi;

  double value = static_cast<double>(data.n_groups) * (t_const - log_det_B);
  Matrix dB = Matrix::Zero(r, r);
  for (std::size_t g = 0; g < data.n_groups; ++g) {
    const Vector b = theta.segment(static_cast<Index>(g) * r, r);
    const Vector c = B_lower.solve(b);
    const double q = c.squaredNorm();
    double weight = 1.0;
    if (student) {
      value -= 0.5 * (nu + rd) * std::log1p(q / nu);
      weight = (nu + rd) / (nu + q);
    } else {
      value -= 0.5 * q;
    }
    if (grad) {
      const Vector s = B.transpose().triangularView<Eigen::Upper>().solve(c);  // B^{-T} c
      grad->segment(static_cast<Index>(g) * r, r) -= weight * s;
      dB.noalias() += weight * s * c.transpose();
    }
  }

  // Observations.
  for (std::size_t g = 0; g < data.n_groups; ++g) {
    const auto b = theta.segment(static_cast<Index>(g) * r, r);
    for (const std::size_t row : rows_of_group_[g]) {
      const auto ri = static_cast<Index>(row);
      const double eta = data.x.row(ri).dot(beta) + data.z.row(ri).dot(b);
      const double y = data.y[row];
      double resid = 0.0;
      if (spec_.response == ResponseKind::bernoulli_logit) {
        value += y * eta - softplus(eta);
        resid = y - logistic(eta);
      } else {
        const double mean = std::exp(eta);
        value += y * eta - mean;
        resid = y - mean;
      }
      if (grad) {
        grad->segment(n_local, static_cast<Index>(d_)) += resid * data.x.row(ri).transpose();
        grad->segment(static_cast<Index>(g) * r, r) += resid * data.z.row(ri).transpose();
      }
    }
  }
  value -= log_y_factorial_sum_;

  // Priors on beta and the hyper block.
  for (Index k = 0; k < static_cast<Index>(d_); ++k) {
    value += normal_prior(beta[k], spec_.beta_prior_sd, grad ? &(*grad)[n_local + k] : nullptr);
  }
  const Index hyper_offset = n_local + static_cast<Index>(d_);
  for (Index k = 0; k < static_cast<Index>(h_); ++k) {
    value += normal_prior(hyper[k], spec_.hyper_prior_sd, grad ? &(*grad)[hyper_offset + k] : nullptr);
  }
  if (grad) {
    const double groups = static_cast<double>(data.n_groups);
    Index k = 0;
    for (Index j = 0; j < r; ++j) {
      for (Index i = j; i < r; ++i, ++k) {
        if (i == j) {
          (*grad)[hyper_offset + k] += dB(i, i) * B(i, i) - groups;
        } else {
          (*grad)[hyper_offset + k] += dB(i, j);
        }
      }
    }
  }
  return value;
}

double GlmmModel::log_h(const Vector& theta) const { return evaluate(theta, nullptr); }

Vector GlmmModel::grad_log_h(const Vector& theta) const {
  Vector grad;
  evaluate(theta, &grad);
  return grad;
}

std::vector<std::string> GlmmModel::coordinate_names() const {
  const GlmmData& data = spec_.data;
  std::vector<std::string> names;
  for (std::size_t g = 0; g < data.n_groups; ++g) {
    for (std::size_t k = 0; k < r_; ++k) {
      std::string name = "b" + std::to_string(g + 1);
      if (r_ > 1) name += "[" + (k < data.random_names.size() ? data.random_names[k] : std::to_string(k + 1)) + "]";
      names.push_back(name);
    }
  }
  for (std::size_t k = 0; k < d_; ++k) {
    names.push_back("beta[" + (k < data.fixed_names.size() ? data.fixed_names[k] : std::to_string(k + 1)) + "]");
  }
  if (r_ == 1) {
    names.emplace_back("zeta");
  } else {
    for (std::size_t j = 0; j < r_; ++j) {
      for (std::size_t i = j; i < r_; ++i) {
        const std::string idx = std::to_string(i + 1) + std::to_string(j + 1);
        names.push_back(i == j ? "log_B" + idx : "B" + idx);
      }
    }
  }
  return names;
}

Vector GlmmModel::initial_location() const { return Vector::Zero(static_cast<Index>(dim_)); }

// -----------------------------------------------------------------------------

SvModel::SvModel(SvSpec spec) : spec_(std::move(spec)) {
  if (spec_.y.size() < 2) throw ConfigError("sv: at least two observations are required");
  for (const double y : spec_.y) {
    if (!std::isfinite(y)) throw ConfigError("sv: non-finite observation");
  }
  if (!(spec_.prior_variance > 0.0)) throw ConfigError("sv: prior variance must be positive");
  const std::size_t n = spec_.y.size();
  pattern_ = SparsityPattern::build(n, std::vector<std::size_t>(n, 1), 3, 1);
}

double SvModel::evaluate(const Vector& theta, Vector* grad) const {
  const std::size_t n = spec_.y.size();
  check_dim(static_cast<std::size_t>(theta.size()), n + 3, "sv theta");
  require_finite(theta, "sv");
  const auto ni = static_cast<Index>(n);
  const double a = theta[ni];
  const double psi = theta[ni + 1];
  const double kappa = theta[ni + 2];
  const double sigma = softplus(a);
  const double phi = logistic(psi);
  const double one_minus_phi = logistic(-psi);
  const double one_minus_phi2 = one_minus_phi * (1.0 + phi);
  if (grad) grad->setZero(theta.size());

  double d_sigma = 0.0;
  double d_kappa = 0.0;
  double d_phi = 0.0;
  double value = 0.0;
  for (Index i = 0; i < ni; ++i) {
    const double e = sigma * theta[i] + kappa;
    const double y = spec_.y[static_cast<std::size_t>(i)];
    const double scaled = y * y * std::exp(-2.0 * e);
    value += -kLogSqrt2Pi - e - 0.5 * scaled;
    if (grad) {
      const double de = scaled - 1.0;
      (*grad)[i] += sigma * de;
      d_sigma += theta[i] * de;
      d_kappa += de;
    }
  }

  const double b1 = theta[0];
  value += -kLogSqrt2Pi + 0.5 * std::log(one_minus_phi2) - 0.5 * one_minus_phi2 * b1 * b1;
  if (grad) {
    (*grad)[0] -= one_minus_phi2 * b1;
    d_phi += -phi / one_minus_phi2 + phi * b1 * b1;
  }
  for (Index i = 1; i < ni; ++i) {
    const double resid = theta[i] - phi * theta[i - 1];
    value += -kLogSqrt2Pi - 0.5 * resid * resid;
    if (grad) {
      (*grad)[i] -= resid;
      (*grad)[i - 1] += phi * resid;
      d_phi += resid * theta[i - 1];
    }
  }

  const double prior_sd = std::sqrt(spec_.prior_variance);
  double d_a = 0.0;
  double d_psi = 0.0;
  value += normal_prior(a, prior_sd, &d_a);
  value += normal_prior(psi, prior_sd, &d_psi);
  value += normal_prior(kappa, prior_sd, &d_kappa);
  if (grad) {
    (*grad)[ni] = d_a + d_sigma * logistic(a);
    (*grad)[ni + 1] = d_psi + d_phi * phi * one_minus_phi;
    (*grad)[ni + 2] = d_kappa;
  }
  return value;
}

double SvModel::log_h(const Vector& theta) const { return evaluate(theta, nullptr); }

Vector SvModel::grad_log_h(const Vector& theta) const {
  Vector grad;
  evaluate(theta, &grad);
  return grad;
}

std::vector<std::string> SvModel::coordinate_names() const {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < spec_.y.size(); ++i) names.push_back("b" + std::to_string(i + 1));
  names.insert(names.end(), {"alpha", "psi", "kappa"});
  return names;
}

Vector SvModel::initial_location() const {
  const std::size_t n = spec_.y.size();
  double sum_sq = 0.0;
  for (const double y : spec_.y) sum_sq += y * y;
  Vector loc = Vector::Zero(static_cast<Index>(n + 3));
  loc[static_cast<Index>(n + 2)] = 0.5 * std::log(std::max(sum_sq / static_cast<double>(n), 1e-12));
  return loc;
}

// -----------------------------------------------------------------------------

SyntheticGlmm synthesize_glmm(const GlmmSkeleton& sk, std::uint64_t seed) {
  if (sk.beta.empty()) throw ConfigError("synth: beta needs at least the intercept");
  if (sk.random_dim != 1 && sk.random_dim != 2) throw ConfigError("synth: random_dim must be 1 or 2");
  const std::size_t r = sk.random_dim;
  const std::size_t h = r == 1 ? 1 : 3;
  check_dim(sk.hyper.size(), h, "synth hyper");
  if (sk.n_groups == 0 || sk.obs_per_group == 0) throw ConfigError("synth: empty design");

  Rng rng(seed);
  const std::size_t d = sk.beta.size();
  const std::size_t rows = sk.n_groups * sk.obs_per_group;
  const auto ri = static_cast<Index>(r);

  Matrix B = Matrix::Zero(ri, ri);
  if (r == 1) {
    B(0, 0) = std::exp(sk.hyper[0]);
  } else {
    B(0, 0) = std::exp(sk.hyper[0]);
    B(1, 0) = sk.hyper[1];
    B(1, 1) = std::exp(sk.hyper[2]);
  }

  SyntheticGlmm out;
  GlmmData& data = out.data;
  data.n_groups = sk.n_groups;
  data.x.resize(static_cast<Index>(rows), static_cast<Index>(d));
  data.z.resize(static_cast<Index>(rows), ri);
  data.fixed_names.emplace_back("(Intercept)");
  for (std::size_t k = 1; k < d; ++k) data.fixed_names.push_back("x" + std::to_string(k));
  data.random_names.emplace_back("(Intercept)");
  if (r == 2) data.random_names.emplace_back("time");

  out.header = {"group", "y"};
  for (std::size_t k = 1; k < d; ++k) out.header.push_back("x" + std::to_string(k));
  out.header.emplace_back("time");

  Vector theta(static_cast<Index>(sk.n_groups * r + d + h));
  const Vector beta = Eigen::Map<const Vector>(sk.beta.data(), static_cast<Index>(d));
  std::size_t row = 0;
  for (std::size_t g = 0; g < sk.n_groups; ++g) {
    Vector b = B * normal_vector(rng, r);
    if (sk.re_prior == RandomEffectPrior::student_t) b /= std::sqrt(2.0 * gamma_draw(rng, 0.5 * sk.df) / sk.df);
    if (!b.allFinite()) b.setZero();  // zero-variance limit
    theta.segment(static_cast<Index>(g * r), ri) = b;
    for (std::size_t j = 0; j < sk.obs_per_group; ++j, ++row) {
      const auto rr = static_cast<Index>(row);
      const double time = sk.obs_per_group > 1 ? static_cast<double>(j) / static_cast<double>(sk.obs_per_group - 1) - 0.5 : 0.0;
      data.x(rr, 0) = 1.0;
      for (std::size_t k = 1; k < d; ++k) data.x(rr, static_cast<Index>(k)) = rng.normal();
      data.z(rr, 0) = 1.0;
      if (r == 2) data.z(rr, 1) = time;
      const double eta = data.x.row(rr).dot(beta) + data.z.row(rr).dot(b);
      const double y = sk.response == ResponseKind::bernoulli_logit ? (rng.uniform() < logistic(eta) ? 1.0 : 0.0)
                                                                   : poisson_draw(rng, std::exp(eta));
      data.y.push_back(y);
      data.group.push_back(g);
      std::vector<double> table_row{static_cast<double>(g + 1), y};
      for (std::size_t k = 1; k < d; ++k) table_row.push_back(data.x(rr, static_cast<Index>(k)));
      table_row.push_back(time);
      out.rows.push_back(std::move(table_row));
    }
  }
  theta.segment(static_cast<Index>(sk.n_groups * r), static_cast<Index>(d)) = beta;
  for (std::size_t k = 0; k < h; ++k) theta[static_cast<Index>(sk.n_groups * r + d + k)] = sk.hyper[k];
  out.true_theta = theta;
  return out;
}

SyntheticSv synthesize_sv(std::size_t n, double sigma, double phi, double kappa, std::uint64_t seed) {
  if (n < 2) throw ConfigError("synth: sv series needs n >= 2");
  if (!(sigma > 0.0) || !(phi > 0.0 && phi < 1.0)) throw ConfigError("synth: need sigma > 0 and 0 < phi < 1");
  Rng rng(seed);
  SyntheticSv out;
  out.true_theta.resize(static_cast<Index>(n + 3));
  double b = rng.normal() / std::sqrt(1.0 - phi * phi);
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0) b = phi * b + rng.normal();
    out.true_theta[static_cast<Index>(i)] = b;
    out.spec.y.push_back(std::exp(sigma * b + kappa) * rng.normal());
  }
  out.true_theta[static_cast<Index>(n)] = std::log(std::expm1(sigma));
  out.true_theta[static_cast<Index>(n + 1)] = std::log(phi / (1.0 - phi));
  out.true_theta[static_cast<Index>(n + 2)] = kappa;
  return out;
}

}  // namespace sdgm

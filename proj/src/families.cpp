#include "sdgm/families.hpp"

#include <cmath>
#include <numbers>

#include "sdgm/error.hpp"

namespace sdgm {

namespace {

using Eigen::Index;

template <class F>
Vector map_alpha(const Vector& alpha, F&& f) {
  Vector out(alpha.size());
  for (Index k = 0; k < alpha.size(); ++k) out[k] = f(alpha[k]);
  return out;
}

void check_noise(const NoiseDraw& noise, std::size_t p) {
  check_dim(static_cast<std::size_t>(noise.u.size()), p, "noise u");
  check_dim(static_cast<std::size_t>(noise.v.size()), p, "noise v");
}

void check_direct(const DirectParams& params) {
  const std::size_t p = params.dim();
  check_dim(static_cast<std::size_t>(params.alpha.size()), p, "alpha");
  check_dim(static_cast<std::size_t>(params.log_kappa.size()), p, "log_kappa");
  check_dim(params.L.dim(), p, "L");
}

void check_centered(const CenteredParams& params) {
  const std::size_t p = params.dim();
  check_dim(static_cast<std::size_t>(params.alpha.size()), p, "alpha");
  check_dim(static_cast<std::size_t>(params.log_nu.size()), p, "log_nu");
  check_dim(params.L.dim(), p, "L");
}

void check_copula(const CopulaParams& params) {
  const std::size_t p = params.dim();
  check_dim(static_cast<std::size_t>(params.alpha.size()), p, "alpha");
  check_dim(static_cast<std::size_t>(params.log_nu.size()), p, "log_nu");
  check_dim(params.L.dim(), p, "L");
  check_dim(params.gamma.size(), p, "gamma");
}

Vector centered_draw(const Vector& alpha, const NoiseDraw& noise) {
  Vector zc(alpha.size());
  for (Index k = 0; k < alpha.size(); ++k) zc[k] = centered_skew_normal(alpha[k], noise.u[k], noise.v[k]);
  return zc;
}

Vector centered_draw_derivative(const Vector& alpha, const NoiseDraw& noise) {
  Vector d(alpha.size());
  for (Index k = 0; k < alpha.size(); ++k) d[k] = dZc_dalpha(alpha[k], noise.u[k], noise.v[k]);
  return d;
}

}  // namespace

// -----------------------------------------------------------------------------
// Direct SDGM

Vector sdgm_sample(const DirectParams& params, const NoiseDraw& noise) {
  check_direct(params);
  check_noise(noise, params.dim());
  const Vector inv_kappa = (-params.log_kappa).array().exp();
  Vector x(params.mu.size());
  for (Index k = 0; k < x.size(); ++k) {
    x[k] = inv_kappa[k] * sample_skew_normal(params.alpha[k], noise.u[k], noise.v[k]);
  }
  return params.mu + params.L.solve_lower_transpose(x);
}

double sdgm_log_density(const DirectParams& params, const Vector& theta) {
  check_direct(params);
  check_dim(static_cast<std::size_t>(theta.size()), params.dim(), "theta");
  const auto p = static_cast<double>(params.dim());
  const Vector kr = params.log_kappa.array().exp() * params.L.multiply_transpose(theta - params.mu).array();
  double value = -p * kLogSqrt2Pi + params.log_kappa.sum() - 0.5 * kr.squaredNorm();
  // Each factor 2 Phi(.) is exactly 1 when alpha_k = 0; skip it so the Gaussian case is exact.
  for (Index k = 0; k < kr.size(); ++k) {
    if (params.alpha[k] != 0.0) value += std::numbers::ln2 + normal_log_cdf(params.alpha[k] * kr[k]);
  }
  return value;
}

Vector sdgm_grad_theta(const DirectParams& params, const Vector& theta) {
  check_direct(params);
  check_dim(static_cast<std::size_t>(theta.size()), params.dim(), "theta");
  const Vector kappa = params.log_kappa.array().exp();
  const Vector kr = kappa.array() * params.L.multiply_transpose(theta - params.mu).array();
  Vector inner(kr.size());
  for (Index k = 0; k < kr.size(); ++k) {
    const double a = params.alpha[k];
    const double skew_term = a == 0.0 ? 0.0 : a * normal_pdf_cdf_ratio(a * kr[k]);
    inner[k] = kappa[k] * (skew_term - kr[k]);
  }
  return params.L.multiply(inner);
}

DirectGradient sdgm_jvp(const DirectParams& params, const NoiseDraw& noise, const Vector& z) {
  check_direct(params);
  check_noise(noise, params.dim());
  check_dim(static_cast<std::size_t>(z.size()), params.dim(), "z");
  const Vector inv_kappa = (-params.log_kappa).array().exp();
  Vector x(z.size());
  Vector dx_dalpha(z.size());
  for (Index k = 0; k < z.size(); ++k) {
    const double a = params.alpha[k];
    x[k] = inv_kappa[k] * sample_skew_normal(a, noise.u[k], noise.v[k]);
    dx_dalpha[k] = inv_kappa[k] * dZ_dalpha(a, noise.u[k], noise.v[k]);
  }
  const Vector c = params.L.solve_lower(z);
  const Vector w = params.L.solve_lower_transpose(x);

  DirectGradient g;
  g.mu = z;
  g.alpha = dx_dalpha.cwiseProduct(c);
  g.log_kappa = -x.cwiseProduct(c);
  g.L = UnitLowerSparse(params.L.pattern(), params.L.gather_negative_outer(w, c));
  return g;
}

// -----------------------------------------------------------------------------
// Centered SDGM

CenteredParams params_direct_to_center(const DirectParams& params) {
  check_direct(params);
  const Vector mean = map_alpha(params.alpha, skew_mean);
  const Vector sd = map_alpha(params.alpha, skew_sd);
  const Vector inv_kappa = (-params.log_kappa).array().exp();
  CenteredParams out;
  out.xi = params.mu + params.L.solve_lower_transpose(inv_kappa.cwiseProduct(mean));
  out.alpha = params.alpha;
  out.log_nu = sd.array().log().matrix() - params.log_kappa;
  out.L = params.L;
  return out;
}

DirectParams params_center_to_direct(const CenteredParams& params) {
  check_centered(params);
  const Vector mean = map_alpha(params.alpha, skew_mean);
  const Vector sd = map_alpha(params.alpha, skew_sd);
  const Vector nu = params.log_nu.array().exp();
  DirectParams out;
  out.mu = params.xi - params.L.solve_lower_transpose((nu.array() * mean.array() / sd.array()).matrix());
  out.alpha = params.alpha;
  out.log_kappa = sd.array().log().matrix() - params.log_nu;
  out.L = params.L;
  return out;
}

Vector centered_sample(const CenteredParams& params, const NoiseDraw& noise) {
  check_centered(params);
  check_noise(noise, params.dim());
  const Vector x = params.log_nu.array().exp() * centered_draw(params.alpha, noise).array();
  return params.xi + params.L.solve_lower_transpose(x);
}

double centered_log_density(const CenteredParams& params, const Vector& theta) {
  return sdgm_log_density(params_center_to_direct(params), theta);
}

Vector centered_grad_theta(const CenteredParams& params, const Vector& theta) {
  return sdgm_grad_theta(params_center_to_direct(params), theta);
}

CenteredGradient centered_jvp(const CenteredParams& params, const NoiseDraw& noise, const Vector& z) {
  check_centered(params);
  check_noise(noise, params.dim());
  check_dim(static_cast<std::size_t>(z.size()), params.dim(), "z");
  const Vector nu = params.log_nu.array().exp();
  const Vector x = nu.cwiseProduct(centered_draw(params.alpha, noise));
  const Vector c = params.L.solve_lower(z);
  const Vector w = params.L.solve_lower_transpose(x);

  CenteredGradient g;
  g.xi = z;
  g.alpha = centered_draw_derivative(params.alpha, noise).cwiseProduct(nu).cwiseProduct(c);
  g.log_nu = x.cwiseProduct(c);
  g.L = UnitLowerSparse(params.L.pattern(), params.L.gather_negative_outer(w, c));
  return g;
}

// -----------------------------------------------------------------------------
// SAS copula

DirectParams copula_inner_sdgm(const CopulaParams& params) {
  check_copula(params);
  const auto p = static_cast<Index>(params.dim());
  return params_center_to_direct(CenteredParams{Vector::Zero(p), params.alpha, Vector::Zero(p), params.L});
}

Vector copula_standardize(const CopulaParams& params, const Vector& theta) {
  check_copula(params);
  check_dim(static_cast<std::size_t>(theta.size()), params.dim(), "theta");
  Vector out(theta.size());
  for (Index k = 0; k < theta.size(); ++k) {
    const double s = (theta[k] - params.xi[k]) * std::exp(-params.log_nu[k]);
    out[k] = sas_inverse(params.gamma[static_cast<std::size_t>(k)], s);
  }
  return out;
}

Vector copula_sample(const CopulaParams& params, const NoiseDraw& noise) {
  check_copula(params);
  check_noise(noise, params.dim());
  const Vector w = params.L.solve_lower_transpose(centered_draw(params.alpha, noise));
  Vector theta(w.size());
  for (Index k = 0; k < w.size(); ++k) {
    theta[k] = params.xi[k] + std::exp(params.log_nu[k]) * sas_forward(params.gamma[static_cast<std::size_t>(k)], w[k]);
  }
  return theta;
}

double copula_log_density(const CopulaParams& params, const Vector& theta) {
  check_copula(params);
  check_dim(static_cast<std::size_t>(theta.size()), params.dim(), "theta");
  Vector standardized(theta.size());
  double log_jacobian = 0.0;
  for (Index k = 0; k < theta.size(); ++k) {
    const auto& g = params.gamma[static_cast<std::size_t>(k)];
    const double s = (theta[k] - params.xi[k]) * std::exp(-params.log_nu[k]);
    standardized[k] = sas_inverse(g, s);
    log_jacobian += sas_inverse_log_d1(g, s) - params.log_nu[k];
  }
  return sdgm_log_density(copula_inner_sdgm(params), standardized) + log_jacobian;
}

Vector copula_grad_theta(const CopulaParams& params, const Vector& theta) {
  check_copula(params);
  check_dim(static_cast<std::size_t>(theta.size()), params.dim(), "theta");
  Vector standardized(theta.size());
  Vector d1(theta.size());
  Vector curvature(theta.size());
  for (Index k = 0; k < theta.size(); ++k) {
    const auto& g = params.gamma[static_cast<std::size_t>(k)];
    const double inv_scale = std::exp(-params.log_nu[k]);
    const double s = (theta[k] - params.xi[k]) * inv_scale;
    standardized[k] = sas_inverse(g, s);
    d1[k] = sas_inverse_d1(g, s) * inv_scale;
    curvature[k] = sas_inverse_d2_over_d1(g, s) * inv_scale;
  }
  const Vector inner = sdgm_grad_theta(copula_inner_sdgm(params), standardized);
  return d1.cwiseProduct(inner) + curvature;
}

CopulaGradient copula_jvp(const CopulaParams& params, const NoiseDraw& noise, const Vector& z) {
  check_copula(params);
  check_noise(noise, params.dim());
  check_dim(static_cast<std::size_t>(z.size()), params.dim(), "z");
  const Vector zc = centered_draw(params.alpha, noise);
  const Vector w = params.L.solve_lower_transpose(zc);
  const Index p = w.size();

  Vector scaled_z(p);  // t'(w) * exp(log_nu) * z: the pullback of z to w
  CopulaGradient g;
  g.xi = z;
  g.log_nu.resize(p);
  g.gamma.resize(static_cast<std::size_t>(p));
  for (Index k = 0; k < p; ++k) {
    const auto& gk = params.gamma[static_cast<std::size_t>(k)];
    const double scale = std::exp(params.log_nu[k]);
    scaled_z[k] = sas_forward_d1(gk, w[k]) * scale * z[k];
    g.log_nu[k] = scale * sas_forward(gk, w[k]) * z[k];
    const SasParamGradient dg = sas_forward_dgamma(gk, w[k]);
    g.gamma[static_cast<std::size_t>(k)] = {scale * dg.d_epsilon * z[k], scale * dg.d_delta * gk.delta() * z[k]};
  }
  const Vector c = params.L.solve_lower(scaled_z);
  g.alpha = centered_draw_derivative(params.alpha, noise).cwiseProduct(c);
  g.L = UnitLowerSparse(params.L.pattern(), params.L.gather_negative_outer(w, c));
  return g;
}

CenteredParams copula_as_centered(const CopulaParams& params) {
  check_copula(params);
  const Vector inv_nu = (-params.log_nu).array().exp();
  return CenteredParams{params.xi, params.alpha, params.log_nu, params.L.rescaled(inv_nu)};
}

CopulaParams centered_as_copula(const CenteredParams& params) {
  check_centered(params);
  const Vector nu = params.log_nu.array().exp();
  return CopulaParams{params.xi, params.log_nu, params.alpha, params.L.rescaled(nu),
                      std::vector<SasParams>(params.dim())};
}

}  // namespace sdgm

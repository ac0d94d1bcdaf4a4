#pragma once

#include <cmath>
#include <numbers>

namespace sdgm {

inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;
inline constexpr double kSqrt2OverPi = 0.79788456080286535588;

// ---------------------------------------------------------------------------
// Standard normal pieces with tail-stable evaluation.

double normal_log_pdf(double x);
double normal_log_cdf(double x);
/// phi(x) / Phi(x), evaluated through a continued fraction for x < -8.
double normal_pdf_cdf_ratio(double x);
double normal_cdf(double x);

/// log(z + sqrt(z^2 + 1)), symmetric in sign and stable for large |z|.
double stable_asinh(double z);
/// log(cosh(y)) without overflow.
double log_cosh(double y);

// ---------------------------------------------------------------------------
// Univariate skew normal SN(0, 1, alpha).

/// delta(alpha) = alpha / sqrt(1 + alpha^2)
double delta_of_alpha(double alpha);
/// d delta / d alpha = (1 + alpha^2)^{-3/2}
double d_delta_d_alpha(double alpha);
/// Mean of SN(0, 1, alpha): delta * sqrt(2 / pi).
double skew_mean(double alpha);
/// Standard deviation of SN(0, 1, alpha): sqrt(1 - 2 delta^2 / pi).
double skew_sd(double alpha);
double d_skew_mean_d_alpha(double alpha);
double d_skew_sd_d_alpha(double alpha);
/// Closed-form skewness of SN(0, 1, alpha).
double skew_normal_skewness(double alpha);
/// log(2 phi(z) Phi(alpha z))
double skew_normal_log_pdf(double z, double alpha);

/// Z_alpha = delta |u| + (1 + alpha^2)^{-1/2} v for standard normal (u, v).
double sample_skew_normal(double alpha, double u, double v);
/// d Z_alpha / d alpha at fixed noise.
double dZ_dalpha(double alpha, double u, double v);
/// Z_alpha^c = (Z_alpha - mean) / sd: zero mean, unit variance.
double centered_skew_normal(double alpha, double u, double v);
/// d Z_alpha^c / d alpha at fixed noise.
double dZc_dalpha(double alpha, double u, double v);

// ---------------------------------------------------------------------------
// Sinh-arcsinh transforms. The forward map t_g(z) = sinh((asinh z + eps) / delta)
// is the one applied to the standardized draw; its inverse h_g is the
// sinh-arcsinh transform. (eps, delta) = (0, 1) is the identity.

struct SasParams {
  double epsilon = 0.0;
  double log_delta = 0.0;

  double delta() const { return std::exp(log_delta); }
  bool is_identity() const { return epsilon == 0.0 && log_delta == 0.0; }
  bool operator==(const SasParams&) const = default;
};

struct SasParamGradient {
  double d_epsilon = 0.0;
  double d_delta = 0.0;
};

double sas_forward(const SasParams& g, double z);
/// dt/dz
double sas_forward_d1(const SasParams& g, double z);
/// (dt/d epsilon, dt/d delta)
SasParamGradient sas_forward_dgamma(const SasParams& g, double z);

double sas_inverse(const SasParams& g, double z);
/// h'(z), always positive.
double sas_inverse_d1(const SasParams& g, double z);
double sas_inverse_d2(const SasParams& g, double z);
/// log h'(z), finite wherever z is.
double sas_inverse_log_d1(const SasParams& g, double z);
/// h''(z) / h'(z), finite wherever z is.
double sas_inverse_d2_over_d1(const SasParams& g, double z);

}  // namespace sdgm

#include "sdgm/skewnorm.hpp"

#include <cmath>

namespace sdgm {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kTailSwitch = -8.0;

// Phi(-x) / phi(x) for x >= 8 by a Lentz continued fraction:
// R(x) = 1 / (x + 1 / (x + 2 / (x + 3 / (x + ...)))).
double mills_ratio_upper(double x) {
  constexpr double tiny = 1e-300;
  double f = x;
  double c = x;
  double d = 0.0;
  for (int k = 1; k < 200; ++k) {
    const double a = static_cast<double>(k);
    d = x + a * d;
    if (std::abs(d) < tiny) d = tiny;
    c = x + a / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = c * d;
    f *= delta;
    if (std::abs(delta - 1.0) < 1e-16) break;
  }
  return 1.0 / f;
}

}  // namespace

double normal_log_pdf(double x) { return -0.5 * x * x - kLogSqrt2Pi; }

double normal_cdf(double x) { return 0.5 * std::erfc(-x * kInvSqrt2); }

double normal_log_cdf(double x) {
  if (x < kTailSwitch) return normal_log_pdf(x) + std::log(mills_ratio_upper(-x));
  return std::log(normal_cdf(x));
}

double normal_pdf_cdf_ratio(double x) {
  if (x < kTailSwitch) return 1.0 / mills_ratio_upper(-x);
  return std::exp(normal_log_pdf(x)) / normal_cdf(x);
}

double stable_asinh(double z) {
  const double s = std::abs(z);
  const double mag = std::log1p(s + s * (s / (1.0 + std::hypot(1.0, s))));
  return std::copysign(mag, z);
}

double log_cosh(double y) {
  const double a = std::abs(y);
  return a + std::log1p(std::exp(-2.0 * a)) - std::numbers::ln2;
}

double delta_of_alpha(double alpha) { return alpha / std::sqrt(1.0 + alpha * alpha); }

double d_delta_d_alpha(double alpha) {
  const double s = 1.0 + alpha * alpha;
  return 1.0 / (s * std::sqrt(s));
}

double skew_mean(double alpha) { return delta_of_alpha(alpha) * kSqrt2OverPi; }

double skew_sd(double alpha) {
  const double d = delta_of_alpha(alpha);
  return std::sqrt(1.0 - 2.0 * d * d / std::numbers::pi);
}

// The derivative follows from mean = delta * sqrt(2/pi).
double d_skew_mean_d_alpha(double alpha) { return kSqrt2OverPi * d_delta_d_alpha(alpha); }

double d_skew_sd_d_alpha(double alpha) {
  const double d = delta_of_alpha(alpha);
  return -(2.0 * d / std::numbers::pi) / skew_sd(alpha) * d_delta_d_alpha(alpha);
}

double skew_normal_skewness(double alpha) {
  const double m = skew_mean(alpha);
  const double var = 1.0 - m * m;
  return 0.5 * (4.0 - std::numbers::pi) * m * m * m / (var * std::sqrt(var));
}

double skew_normal_log_pdf(double z, double alpha) {
  return std::numbers::ln2 + normal_log_pdf(z) + normal_log_cdf(alpha * z);
}

double sample_skew_normal(double alpha, double u, double v) {
  const double c = 1.0 / std::sqrt(1.0 + alpha * alpha);
  return alpha * c * std::abs(u) + c * v;
}

double dZ_dalpha(double alpha, double u, double v) {
  return d_delta_d_alpha(alpha) * (std::abs(u) - alpha * v);
}

double centered_skew_normal(double alpha, double u, double v) {
  return (sample_skew_normal(alpha, u, v) - skew_mean(alpha)) / skew_sd(alpha);
}

double dZc_dalpha(double alpha, double u, double v) {
  const double sd = skew_sd(alpha);
  const double shifted = sample_skew_normal(alpha, u, v) - skew_mean(alpha);
  const double num = sd * (dZ_dalpha(alpha, u, v) - d_skew_mean_d_alpha(alpha)) -
                     shifted * d_skew_sd_d_alpha(alpha);
  return num / (sd * sd);
}

double sas_forward(const SasParams& g, double z) {
  return std::sinh((stable_asinh(z) + g.epsilon) / g.delta());
}

double sas_forward_d1(const SasParams& g, double z) {
  const double delta = g.delta();
  const double a = (stable_asinh(z) + g.epsilon) / delta;
  return std::cosh(a) / (delta * std::hypot(1.0, z));
}

SasParamGradient sas_forward_dgamma(const SasParams& g, double z) {
  const double delta = g.delta();
  const double a = (stable_asinh(z) + g.epsilon) / delta;
  const double ch = std::cosh(a);
  return {ch / delta, -ch * a / delta};
}

double sas_inverse(const SasParams& g, double z) {
  return std::sinh(g.delta() * stable_asinh(z) - g.epsilon);
}

double sas_inverse_d1(const SasParams& g, double z) {
  const double delta = g.delta();
  return std::cosh(delta * stable_asinh(z) - g.epsilon) * delta / std::hypot(1.0, z);
}

double sas_inverse_d2(const SasParams& g, double z) {
  const double delta = g.delta();
  const double y = delta * stable_asinh(z) - g.epsilon;
  const double r = std::hypot(1.0, z);
  return delta * delta * std::sinh(y) / (r * r) - std::cosh(y) * delta * z / (r * r * r);
}

double sas_inverse_log_d1(const SasParams& g, double z) {
  const double y = g.delta() * stable_asinh(z) - g.epsilon;
  return g.log_delta + log_cosh(y) - std::log(std::hypot(1.0, z));
}

double sas_inverse_d2_over_d1(const SasParams& g, double z) {
  const double delta = g.delta();
  const double y = delta * stable_asinh(z) - g.epsilon;
  const double r = std::hypot(1.0, z);
  return delta * std::tanh(y) / r - (z / r) / r;
}

}  // namespace sdgm

#pragma once

#include <vector>

#include "sdgm/skewnorm.hpp"
#include "sdgm/sparse_graph.hpp"

namespace sdgm {

/// Base noise (U, V) ~ N(0, I_p) x N(0, I_p) of the generative representation.
struct NoiseDraw {
  Vector u;
  Vector v;
};

/// Direct parametrization lambda = (mu, alpha, log kappa, L).
/// Q = L diag(kappa)^2 L^T with kappa = exp(log_kappa).
struct DirectParams {
  Vector mu;
  Vector alpha;
  Vector log_kappa;
  UnitLowerSparse L;

  std::size_t dim() const { return static_cast<std::size_t>(mu.size()); }
};

/// Centered parametrization rho = (xi, alpha, log nu, L); xi is the exact mean.
struct CenteredParams {
  Vector xi;
  Vector alpha;
  Vector log_nu;
  UnitLowerSparse L;

  std::size_t dim() const { return static_cast<std::size_t>(xi.size()); }
};

/// Implicit SDGM copula: theta = xi + exp(log_nu) * t_gamma(L^{-T} Z_alpha^c).
struct CopulaParams {
  Vector xi;
  Vector log_nu;
  Vector alpha;
  UnitLowerSparse L;
  std::vector<SasParams> gamma;

  std::size_t dim() const { return static_cast<std::size_t>(xi.size()); }
};

// Gradient bundles reuse the parameter layouts: each field holds the derivative
// with respect to the matching parameter field, and the L field carries values
// on the free pattern entries only.
using DirectGradient = DirectParams;
using CenteredGradient = CenteredParams;
using CopulaGradient = CopulaParams;

// --- direct SDGM -------------------------------------------------------------

Vector sdgm_sample(const DirectParams& params, const NoiseDraw& noise);
double sdgm_log_density(const DirectParams& params, const Vector& theta);
Vector sdgm_grad_theta(const DirectParams& params, const Vector& theta);
/// (d theta / d lambda)^T z at theta = theta(noise; lambda).
DirectGradient sdgm_jvp(const DirectParams& params, const NoiseDraw& noise, const Vector& z);

// --- centered SDGM -----------------------------------------------------------

CenteredParams params_direct_to_center(const DirectParams& params);
DirectParams params_center_to_direct(const CenteredParams& params);

Vector centered_sample(const CenteredParams& params, const NoiseDraw& noise);
double centered_log_density(const CenteredParams& params, const Vector& theta);
Vector centered_grad_theta(const CenteredParams& params, const Vector& theta);
CenteredGradient centered_jvp(const CenteredParams& params, const NoiseDraw& noise, const Vector& z);

// --- SAS copula --------------------------------------------------------------

Vector copula_sample(const CopulaParams& params, const NoiseDraw& noise);
double copula_log_density(const CopulaParams& params, const Vector& theta);
Vector copula_grad_theta(const CopulaParams& params, const Vector& theta);
CopulaGradient copula_jvp(const CopulaParams& params, const NoiseDraw& noise, const Vector& z);

/// The SDGM law of the standardized vector L^{-T} Z_alpha^c inside the copula.
DirectParams copula_inner_sdgm(const CopulaParams& params);
/// Maps theta to the standardized scale: h_gamma((theta - xi) / exp(log_nu)).
Vector copula_standardize(const CopulaParams& params, const Vector& theta);
/// With identity transforms the copula is a centered SDGM whose factor is
/// diag(nu)^{-1} L diag(nu). Ignores gamma.
CenteredParams copula_as_centered(const CopulaParams& params);
/// Inverse of copula_as_centered with identity transforms.
CopulaParams centered_as_copula(const CenteredParams& params);

}  // namespace sdgm

#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "sdgm/diagnostics.hpp"
#include "sdgm/families.hpp"

using namespace sdgm;
using namespace sdgm::testing;

namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index k = 0;
  for (double x : xs) v[k++] = x;
  return v;
}

DirectParams scalar_direct(double mu, double alpha, double kappa) {
  return {vec({mu}), vec({alpha}), vec({std::log(kappa)}), UnitLowerSparse(SparsityPattern::identity(1))};
}

// Dense evaluation of the SDGM density: explicit Q, Cholesky log determinant.
double dense_log_density(const DirectParams& p, const Vector& theta) {
  const Matrix L = p.L.to_dense();
  const Vector kappa = p.log_kappa.array().exp();
  const Matrix Q = L * kappa.array().square().matrix().asDiagonal() * L.transpose();
  const Vector d = theta - p.mu;
  const Eigen::LLT<Matrix> llt(Q);
  const double log_det = 2.0 * Matrix(llt.matrixL()).diagonal().array().log().sum();
  double out = -0.5 * static_cast<double>(d.size()) * std::log(2 * M_PI) + 0.5 * log_det - 0.5 * d.dot(Q * d);
  const Vector r = L.transpose() * d;
  for (Eigen::Index k = 0; k < d.size(); ++k) out += std::log(2.0 * normal_cdf(kappa[k] * p.alpha[k] * r[k]));
  return out;
}

Vector dense_sample(const DirectParams& p, const NoiseDraw& n) {
  const Vector kappa = p.log_kappa.array().exp();
  Vector x(p.mu.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    x[k] = (p.alpha[k] * std::abs(n.u[k]) + n.v[k]) / (kappa[k] * std::sqrt(1 + p.alpha[k] * p.alpha[k]));
  }
  return p.mu + p.L.to_dense().transpose().lu().solve(x);
}

FdReport check_grad(const auto& logd, const auto& grad, const Vector& theta) {
  return fd_check_gradient(logd, grad, theta, 1e-5, 1e-5);
}

}  // namespace

TEST_CASE("direct sampler examples") {
  DirectParams id = scalar_direct(0, 0, 1);
  id.mu = Vector::Zero(2);
  id.alpha = Vector::Zero(2);
  id.log_kappa = Vector::Zero(2);
  id.L = UnitLowerSparse(SparsityPattern::identity(2));
  const Vector t = sdgm_sample(id, {vec({5, -5}), vec({0.3, -1})});
  CHECK(t[0] == doctest::Approx(0.3));
  CHECK(t[1] == doctest::Approx(-1.0));

  CHECK(sdgm_sample(scalar_direct(2, 1, 2), {vec({-1}), vec({0})})[0] ==
        doctest::Approx(2.0 + 0.5 / std::sqrt(2.0)).epsilon(1e-14));

  Rng rng(31);
  for (int order : {0, 1}) {
    for (int rep = 0; rep < 10; ++rep) {
      const auto pat = random_pattern(rng, order);
      const DirectParams p = random_direct(rng, pat);
      const NoiseDraw n = draw_noise(rng, pat.dim());
      CHECK((sdgm_sample(p, n) - dense_sample(p, n)).norm() < 1e-12);
    }
  }
}

TEST_CASE("direct log density examples and dense oracle") {
  CHECK(sdgm_log_density(scalar_direct(0, 0, 1), vec({0})) == doctest::Approx(-kLogSqrt2Pi).epsilon(1e-15));
  CHECK(sdgm_log_density(scalar_direct(0, 1, 1), vec({1})) ==
        doctest::Approx(-0.898545131668177321890).epsilon(1e-13));
  Rng rng(32);
  for (int order : {0, 1}) {
    for (int rep = 0; rep < 10; ++rep) {
      const auto pat = random_pattern(rng, order);
      const DirectParams p = random_direct(rng, pat);
      const Vector theta = p.mu + normal_vector(rng, pat.dim());
      CHECK(sdgm_log_density(p, theta) == doctest::Approx(dense_log_density(p, theta)).epsilon(1e-11));
    }
  }
}

TEST_CASE("direct score examples") {
  const Vector theta = vec({0.4});
  CHECK(sdgm_grad_theta(scalar_direct(0, 0, 1), theta)[0] == doctest::Approx(-0.4));
  CHECK(sdgm_grad_theta(scalar_direct(1.5, 2.0, 3.0), vec({1.5}))[0] ==
        doctest::Approx(kSqrt2OverPi * 3.0 * 2.0).epsilon(1e-14));
  // Deep tail: the Phi ratio must stay finite.
  CHECK(std::isfinite(sdgm_grad_theta(scalar_direct(0, 50, 1), vec({-30}))[0]));
}

TEST_CASE("direct jvp examples") {
  Rng rng(33);
  const auto pat = SparsityPattern::build(3, {2, 2, 2}, 1, 0);
  DirectParams p = random_direct(rng, pat);
  const NoiseDraw n = draw_noise(rng, pat.dim());
  const Vector z = normal_vector(rng, pat.dim());
  const DirectGradient g = sdgm_jvp(p, n, z);
  CHECK((g.mu - z).norm() == 0.0);
  p.alpha.setZero();
  const DirectGradient g0 = sdgm_jvp(p, n, z);
  const Vector c = p.L.solve_lower(z);
  const Vector expected = (-p.log_kappa).array().exp() * n.u.array().abs() * c.array();
  CHECK((g0.alpha - expected).norm() < 1e-13);
}

TEST_CASE("centered mapping examples") {
  const CenteredParams c = params_direct_to_center(scalar_direct(0, 1, 2));
  CHECK(c.xi[0] == doctest::Approx(0.282094791773878143474).epsilon(1e-14));
  CHECK(std::exp(c.log_nu[0]) == doctest::Approx(0.412822635588278192122).epsilon(1e-14));

  const CenteredParams a0 = params_direct_to_center(scalar_direct(0.7, 0, 4));
  CHECK(a0.xi[0] == doctest::Approx(0.7));
  CHECK(std::exp(a0.log_nu[0]) == doctest::Approx(0.25));

  // xi = 1, alpha = 1, nu = 2, u = v = 0 gives Z = 0 and Zc = -mu(1) / sigma(1).
  const CenteredParams s{vec({1}), vec({1}), vec({std::log(2.0)}), UnitLowerSparse(SparsityPattern::identity(1))};
  CHECK(centered_sample(s, {vec({0}), vec({0})})[0] ==
        doctest::Approx(1.0 - 2.0 * 0.683331696121480859838).epsilon(1e-13));

  Rng rng(34);
  for (int order : {0, 1}) {
    for (int rep = 0; rep < 20; ++rep) {
      const auto pat = random_pattern(rng, order);
      const CenteredParams rho = random_centered(rng, pat);
      const DirectParams lam = params_center_to_direct(rho);
      const CenteredParams back = params_direct_to_center(lam);
      CHECK((back.xi - rho.xi).norm() < 1e-12);
      CHECK((back.log_nu - rho.log_nu).norm() < 1e-12);
      CHECK((back.alpha - rho.alpha).norm() == 0.0);
      const NoiseDraw n = draw_noise(rng, pat.dim());
      CHECK((centered_sample(rho, n) - sdgm_sample(lam, n)).norm() < 1e-12);
      const Vector theta = rho.xi + normal_vector(rng, pat.dim());
      CHECK(centered_log_density(rho, theta) == doctest::Approx(sdgm_log_density(lam, theta)).epsilon(1e-12));
    }
  }
}

TEST_CASE("copula examples") {
  const auto id1 = UnitLowerSparse(SparsityPattern::identity(1));
  const CopulaParams c{vec({0}), vec({0}), vec({0}), id1, {{0.5, 0.0}}};
  CHECK(copula_sample(c, {vec({1.3}), vec({0})})[0] == doctest::Approx(0.521095305493747361622).epsilon(1e-14));

  const CopulaParams g{vec({0}), vec({0}), vec({0}), id1, {{0.0, 0.0}}};
  CHECK(copula_log_density(g, vec({0.6})) == doctest::Approx(normal_log_pdf(0.6)).epsilon(1e-14));

  Rng rng(35);
  for (int order : {0, 1}) {
    for (int rep = 0; rep < 20; ++rep) {
      const auto pat = random_pattern(rng, order);
      CopulaParams cp = random_copula(rng, pat);
      const NoiseDraw n = draw_noise(rng, pat.dim());
      const Vector theta = copula_sample(cp, n);
      // Inverting the marginal transforms recovers w = L^{-T} Zc.
      Vector zc(theta.size());
      for (Eigen::Index k = 0; k < zc.size(); ++k) zc[k] = centered_skew_normal(cp.alpha[k], n.u[k], n.v[k]);
      CHECK((copula_standardize(cp, theta) - cp.L.solve_lower_transpose(zc)).norm() < 1e-10);

      // Identity transforms reduce to the rescaled centered family.
      for (auto& gm : cp.gamma) gm = {};
      const CenteredParams rescaled = copula_as_centered(cp);
      CHECK(copula_log_density(cp, theta) == doctest::Approx(centered_log_density(rescaled, theta)).epsilon(1e-10));
      CHECK((copula_sample(cp, n) - centered_sample(rescaled, n)).norm() < 1e-10);
      CHECK((copula_grad_theta(cp, theta) - centered_grad_theta(rescaled, theta)).norm() < 1e-9);
      const Vector z = normal_vector(rng, pat.dim());
      const CopulaGradient gc = copula_jvp(cp, n, z);
      const CenteredGradient gr = centered_jvp(rescaled, n, z);
      CHECK((gc.xi - gr.xi).norm() < 1e-12);
      CHECK((gc.alpha - gr.alpha).norm() < 1e-9);
    }
  }
}

TEST_CASE("alpha = 0 densities are Gaussian") {
  Rng rng(36);
  for (int rep = 0; rep < 10; ++rep) {
    const auto pat = random_pattern(rng, rep % 2);
    DirectParams p = random_direct(rng, pat);
    p.alpha.setZero();
    const Vector theta = p.mu + normal_vector(rng, pat.dim());
    const Matrix L = p.L.to_dense();
    const Vector kappa = p.log_kappa.array().exp();
    const Vector r = kappa.asDiagonal() * (L.transpose() * (theta - p.mu));
    const double gauss = -static_cast<double>(theta.size()) * kLogSqrt2Pi + p.log_kappa.sum() - 0.5 * r.squaredNorm();
    CHECK(std::abs(sdgm_log_density(p, theta) - gauss) < 1e-12);
  }
}

TEST_CASE("theta gradients match finite differences") {
  Rng rng(37);
  for (int order : {0, 1}) {
    for (int rep = 0; rep < 15; ++rep) {
      const auto pat = random_pattern(rng, order);
      const DirectParams d = random_direct(rng, pat);
      const Vector t1 = sdgm_sample(d, draw_noise(rng, pat.dim()));
      CHECK(check_grad([&](const Vector& t) { return sdgm_log_density(d, t); },
                       [&](const Vector& t) { return sdgm_grad_theta(d, t); }, t1).passed);
      const CenteredParams c = random_centered(rng, pat);
      const Vector t2 = centered_sample(c, draw_noise(rng, pat.dim()));
      CHECK(check_grad([&](const Vector& t) { return centered_log_density(c, t); },
                       [&](const Vector& t) { return centered_grad_theta(c, t); }, t2).passed);
      const CopulaParams q = random_copula(rng, pat);
      const Vector t3 = copula_sample(q, draw_noise(rng, pat.dim()));
      CHECK(check_grad([&](const Vector& t) { return copula_log_density(q, t); },
                       [&](const Vector& t) { return copula_grad_theta(q, t); }, t3).passed);
    }
  }
}

TEST_CASE("copula score is finite far in the tails") {
  Rng rng(38);
  const auto pat = SparsityPattern::build(2, {1, 1}, 1, 0);
  const CopulaParams q = random_copula(rng, pat);
  const Vector far = Vector::Constant(3, 1e6);
  CHECK(copula_grad_theta(q, far).allFinite());
  CHECK(std::isfinite(copula_log_density(q, far)));
}

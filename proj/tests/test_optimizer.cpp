#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "sdgm/diagnostics.hpp"
#include "sdgm/optimizer.hpp"

using namespace sdgm;
using namespace sdgm::testing;

namespace {

Vector scalar(double x) { return Vector::Constant(1, x); }

GaussianTarget scalar_target(double mean, double precision, double log_c = 0.0) {
  return GaussianTarget(scalar(mean), Matrix::Constant(1, 1, precision), log_c);
}

std::vector<NoiseDraw> batch(std::uint64_t seed, std::size_t n, std::size_t p) {
  std::vector<NoiseDraw> out;
  for (std::size_t s = 0; s < n; ++s) out.push_back(iteration_noise(seed, 0, s, p));
  return out;
}

VariationalParams scalar_gva(double mu, double log_kappa) {
  return {FamilyKind::gva,
          DirectParams{scalar(mu), scalar(0.0), scalar(log_kappa), UnitLowerSparse(SparsityPattern::identity(1))}};
}

/// Target whose log density is NaN beyond theta = 2.
class Cliff final : public TargetModel {
 public:
  std::size_t dim() const override { return 1; }
  const SparsityPattern& pattern() const override { return pattern_; }
  double log_h(const Vector& t) const override { return t[0] > 2.0 ? std::nan("") : t[0]; }
  Vector grad_log_h(const Vector&) const override { return scalar(1.0); }

 private:
  SparsityPattern pattern_ = SparsityPattern::identity(1);
};

}  // namespace

TEST_CASE("annealed schedule") {
  const Schedule s = Schedule::annealed(45000);
  CHECK(s.phases.size() == 4);
  CHECK(s.scale_at(0) == 0.01);
  CHECK(s.scale_at(19999) == 0.01);
  CHECK(s.scale_at(20000) == 0.005);
  CHECK(s.scale_at(30000) == 0.0025);
  CHECK(s.scale_at(44999) == 0.00125);
  CHECK(s.scale_at(90000) == 0.00125);
  Schedule bad;
  bad.phases = {{0, 0.1}};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad.phases = {{10, -0.1}};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("elbo estimate on exact and shifted targets") {
  const auto exact = scalar_gva(0.0, 0.0);
  const auto noise = batch(1, 50, 1);
  CHECK(std::abs(elbo_estimate(exact, scalar_target(0, 1), noise)) < 1e-14);
  CHECK(elbo_estimate(exact, scalar_target(0, 1, 3.0), noise) == doctest::Approx(3.0).epsilon(1e-14));
  const VariationalParams zero = elbo_gradient_estimate(exact, scalar_target(0, 1), noise);
  CHECK(flatten(zero).norm() == 0.0);
}

TEST_CASE("elbo estimate matches the closed-form Gaussian KL") {
  // q = N(mu, 1 / kappa^2), h = c N(m, 1 / tau).
  const double mu = 0.3, kappa = 1.7, m = -0.2, tau = 2.5, log_c = 0.7;
  const auto q = scalar_gva(mu, std::log(kappa));
  const auto h = scalar_target(m, tau, log_c);
  const double s2 = 1.0 / (kappa * kappa);
  const double kl = 0.5 * (tau * s2 + tau * (mu - m) * (mu - m) - 1.0 - std::log(tau * s2));
  const ElboSummary summary = elbo_summary(q, h, 1000000, 5);
  CHECK(std::abs(summary.mean - (log_c - kl)) < 4.0 * summary.standard_error);
}

TEST_CASE("mu gradient matches the closed form") {
  const double m = 1.0, mu = 0.25;
  const auto q = scalar_gva(mu, 0.0);
  const auto g = elbo_gradient_estimate(q, scalar_target(m, 1.0), batch(2, 20000, 1));
  CHECK(std::abs(std::get<DirectParams>(g.value).mu[0] - (m - mu)) < 0.03);
}

TEST_CASE("batch gradient matches finite differences of a common-random-number ELBO") {
  Rng rng(61);
  Matrix P(2, 2);
  P << 1.5, 0.4, 0.4, 0.8;
  const GaussianTarget target(Vector::Constant(2, 0.2), P);
  for (FamilyKind kind : kAllFamilies) {
    const VariationalParams params = random_params(rng, kind, SparsityPattern::dense(2));
    const Vector x0 = flatten(params);
    auto at = [&](const Vector& flat) { return unflatten(params, std::span<const double>(flat.data(), flat.size())); };

    // Exact: with log q's own parameters held at x0, the estimator is the
    // gradient of the batch objective through theta(lambda) alone.
    const auto small = batch(4, 50, 2);
    const Vector analytic_small = flatten(elbo_gradient_estimate(params, target, small));
    const FdReport exact = fd_check_gradient(
        [&](const Vector& flat) {
          double total = 0.0;
          for (const NoiseDraw& n : small) {
            const Vector theta = sample(at(flat), n);
            total += target.log_h(theta) - log_density(params, theta);
          }
          return total / static_cast<double>(small.size());
        },
        [&](const Vector&) { return analytic_small; }, x0, 1e-5, 1e-5);
    INFO(to_string(kind), " exact worst ", exact.worst_error, " at ", exact.worst_index);
    CHECK(exact.passed);

    // Full ELBO: the fixed-theta score of log q averages to zero only in
    // expectation, so agreement is limited by Monte Carlo error.
    const auto noise = batch(3, 400000, 2);
    const Vector analytic = flatten(elbo_gradient_estimate(params, target, noise));
    const FdReport full = fd_check_gradient([&](const Vector& flat) { return elbo_estimate(at(flat), target, noise); },
                                            [&](const Vector&) { return analytic; }, x0, 1e-4, 1e-2);
    INFO(to_string(kind), " full worst ", full.worst_error, " at ", full.worst_index);
    CHECK(full.passed);
  }
}

TEST_CASE("single-sample gradients are unbiased") {
  Rng rng(62);
  const GaussianTarget target(Vector::Constant(1, 0.4), Matrix::Constant(1, 1, 2.0));
  const VariationalParams params = random_params(rng, FamilyKind::sdgm_sas, SparsityPattern::identity(1));
  const auto p = params.dim();
  Vector big = Vector::Zero(flatten(params).size());
  const std::size_t n_big = 1000000;
  for (std::size_t s = 0; s < n_big; ++s) big += sample_gradient(params, target, iteration_noise(9, 1, s, p)).flat_gradient;
  big /= static_cast<double>(n_big);
  const std::size_t n_small = 10000;
  Vector sum = Vector::Zero(big.size());
  Vector sum_sq = Vector::Zero(big.size());
  for (std::size_t s = 0; s < n_small; ++s) {
    const Vector g = sample_gradient(params, target, iteration_noise(10, 1, s, p)).flat_gradient;
    sum += g;
    sum_sq += g.cwiseProduct(g);
  }
  const double n = static_cast<double>(n_small);
  const Vector mean = sum / n;
  for (Eigen::Index k = 0; k < big.size(); ++k) {
    const double se = std::sqrt((sum_sq[k] / n - mean[k] * mean[k]) / n);
    CHECK(std::abs(mean[k] - big[k]) < 4.0 * se + 1e-12);
  }
}

TEST_CASE("gva fit recovers a scalar Gaussian target") {
  const double m = 1.3, tau = 4.0;
  FitOptions opt;
  opt.iterations = 5000;
  opt.seed = 3;
  const FitResult r = fit(scalar_gva(0.0, 0.0), scalar_target(m, tau), Schedule::annealed(5000, 0.05, 2000, 1000), opt);
  const auto& d = std::get<DirectParams>(r.params.value);
  CHECK(std::abs(d.mu[0] - m) < 0.02);
  CHECK(std::abs(std::exp(d.log_kappa[0]) / std::sqrt(tau) - 1.0) < 0.02);
  CHECK(d.alpha[0] == 0.0);
  CHECK(r.trace.size() == 100);
  CHECK(r.trace.back().iteration == 5000);
}

TEST_CASE("fit is deterministic and respects frozen blocks") {
  Rng rng(63);
  Matrix P(2, 2);
  P << 1.5, 0.4, 0.4, 0.8;
  const GaussianTarget target(Vector::Constant(2, 0.2), P);
  const VariationalParams init = random_params(rng, FamilyKind::sdgm_sas, SparsityPattern::dense(2));
  FitOptions opt;
  opt.iterations = 300;
  opt.seed = 17;
  opt.frozen = {Block::skew, Block::factor};
  const FitResult a = fit(init, target, Schedule::annealed(300), opt);
  const FitResult b = fit(init, target, Schedule::annealed(300), opt);
  CHECK(flatten(a.params) == flatten(b.params));
  REQUIRE(a.trace.size() == b.trace.size());
  for (std::size_t i = 0; i < a.trace.size(); ++i) CHECK(a.trace[i].elbo == b.trace[i].elbo);
  const auto& ca = std::get<CopulaParams>(a.params.value);
  const auto& ci = std::get<CopulaParams>(init.value);
  CHECK(ca.alpha == ci.alpha);
  CHECK(ca.L == ci.L);
  CHECK_FALSE(ca.xi == ci.xi);

  // GVA never moves alpha even when not listed as frozen.
  const VariationalParams g = random_params(rng, FamilyKind::gva_sas, SparsityPattern::dense(2));
  opt.frozen.clear();
  const FitResult fg = fit(g, target, Schedule::annealed(300), opt);
  CHECK(fg.params.skew() == g.skew());
}

TEST_CASE("staged fit") {
  Rng rng(64);
  const GaussianTarget target(Vector::Constant(2, 0.2), Matrix::Identity(2, 2));
  const VariationalParams init = random_params(rng, FamilyKind::sdgm_sas, SparsityPattern::dense(2));
  FitOptions opt;
  opt.iterations = 200;
  opt.seed = 5;
  const Stage single[] = {{{}, 200, std::nullopt}};
  const FitResult a = staged_fit(init, target, single, Schedule::annealed(200), opt);
  const FitResult b = fit(init, target, Schedule::annealed(200), opt);
  CHECK(flatten(a.params) == flatten(b.params));

  const Stage two[] = {{{Block::location, Block::scale, Block::factor}, 100, std::nullopt},
                       {{Block::skew, Block::transform}, 100, std::nullopt}};
  const Stage first[] = {two[0]};
  const FitResult s1 = staged_fit(init, target, first, Schedule::annealed(200), opt);
  const auto& c1 = std::get<CopulaParams>(s1.params.value);
  const auto& c0 = std::get<CopulaParams>(init.value);
  CHECK(c1.xi == c0.xi);
  CHECK(c1.log_nu == c0.log_nu);
  CHECK(c1.L == c0.L);
  const FitResult s2 = staged_fit(init, target, two, Schedule::annealed(200), opt);
  const auto& c2 = std::get<CopulaParams>(s2.params.value);
  CHECK(c2.alpha == c1.alpha);
  CHECK(c2.gamma == c1.gamma);
  CHECK(s2.iterations == 200);
  CHECK(s2.trace.back().iteration == 200);
}

TEST_CASE("divergence guard keeps the last finite parameters") {
  FitOptions opt;
  opt.iterations = 100000;
  opt.seed = 1;
  Schedule s;
  s.phases = {{100000, 0.1}};
  try {
    fit(scalar_gva(0.0, 0.0), Cliff(), s, opt);
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    CHECK(all_finite(e.last_finite()));
    CHECK(e.iteration() < 100000);
  }
}

#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "sdgm/diagnostics.hpp"
#include "sdgm/error.hpp"

using namespace sdgm;
using namespace sdgm::testing;

TEST_CASE("fd checker positive and negative controls") {
  const Vector x = Vector::Constant(1, 3.0);
  auto f = [](const Vector& v) { return v[0] * v[0]; };
  const FdReport ok = fd_check_gradient(f, [](const Vector& v) { return Vector(2.0 * v); }, x);
  CHECK(ok.worst_error < 1e-10);
  CHECK(ok.passed);
  const FdReport bad = fd_check_gradient(f, [](const Vector& v) { return Vector(2.02 * v); }, x, 1e-5, 1e-3);
  CHECK_FALSE(bad.passed);
  const FdReport nan = fd_check_gradient([](const Vector&) { return std::nan(""); },
                                         [](const Vector& v) { return v; }, x);
  CHECK_FALSE(nan.passed);
}

TEST_CASE("quadrature examples") {
  auto std_normal = [](const Vector& t) { return normal_log_pdf(t[0]); };
  CHECK(std::abs(quadrature_normalization(std_normal, Box{{{-10.0, 10.0}}}, 4001) - 1.0) < 1e-8);
  // Corrupted density (missing normalizer) must fail the same check.
  CHECK(std::abs(quadrature_normalization([](const Vector& t) { return -0.5 * t[0] * t[0]; }, Box{{{-10.0, 10.0}}},
                                          4001) - 1.0) > 1e-2);

  const DirectParams d{Vector::Constant(1, 0.2), Vector::Constant(1, 3.0), Vector::Constant(1, 0.1),
                       UnitLowerSparse(SparsityPattern::identity(1))};
  CHECK(std::abs(quadrature_normalization([&](const Vector& t) { return sdgm_log_density(d, t); },
                                          Box{{{-8.0, 8.0}}}, 4001) - 1.0) < 1e-6);

  Rng rng(71);
  const VariationalParams c = random_params(rng, FamilyKind::sdgm_sas, SparsityPattern::dense(2));
  const Box box = auto_box(c, 20000, 1);
  CHECK(std::abs(quadrature_normalization([&](const Vector& t) { return log_density(c, t); }, box, 601) - 1.0) < 1e-4);

  CHECK_THROWS_AS(quadrature_normalization(std_normal, Box{{{0, 1}, {0, 1}, {0, 1}}}, 11), ConfigError);
}

TEST_CASE("summaries") {
  const VariationalParams gva{FamilyKind::gva,
                              DirectParams{Vector::Zero(2), Vector::Zero(2), Vector::Zero(2),
                                           UnitLowerSparse(SparsityPattern::dense(2))}};
  const SummaryTable t = summarize(gva, 1000000, 3, {"a", "b"});
  CHECK(t.samples == 1000000);
  CHECK(t.rows[0].name == "a");
  // Skewness standard error of a Gaussian sample is sqrt(6 / S).
  for (const auto& row : t.rows) {
    CHECK(std::abs(row.skewness) < 4.0 * std::sqrt(6.0 / 1e6));
    CHECK(row.sd == doctest::Approx(1.0).epsilon(0.01));
  }
  const SummaryTable again = summarize(gva, 1000, 3);
  CHECK(again.rows[1].mean == summarize(gva, 1000, 3).rows[1].mean);
  CHECK(again.rows[1].name == "theta2");

  MomentAccumulator acc(1);
  for (double x : {1.0, 2.0, 3.0, 10.0}) acc.add(Vector::Constant(1, x));
  const SummaryRow row = acc.table({}).rows[0];
  // Population moments of {1, 2, 3, 10}: mean 4, m2 = 12.5, m3 = 45.
  CHECK(row.mean == doctest::Approx(4.0));
  CHECK(row.sd == doctest::Approx(std::sqrt(12.5)));
  CHECK(row.skewness == doctest::Approx(45.0 / std::pow(12.5, 1.5)));
}

TEST_CASE("importance sampling with an exact proposal") {
  const GaussianTarget target(Vector::Constant(1, 0.5), Matrix::Constant(1, 1, 4.0), 2.0);
  const VariationalParams q{FamilyKind::gva, DirectParams{Vector::Constant(1, 0.5), Vector::Zero(1),
                                                          Vector::Constant(1, std::log(2.0)),
                                                          UnitLowerSparse(SparsityPattern::identity(1))}};
  const ImportanceResult r = importance_summary(q, target, 5000, 4);
  CHECK(r.effective_sample_size == doctest::Approx(5000.0));
  CHECK(r.log_evidence == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(r.table.rows[0].sd == doctest::Approx(0.5).epsilon(0.05));
}

TEST_CASE("csv round trip and comparison report") {
  SummaryTable t;
  t.rows = {{"b1", 0.1, 1.0 / 3.0, -0.25}, {"beta[\"x\",1]", 1e-300, 2.5, 0.0}};
  const SummaryTable back = summary_from_csv(to_csv(t));
  REQUIRE(back.rows.size() == 2);
  CHECK(back.rows[1].name == t.rows[1].name);
  CHECK(back.rows[0].sd == t.rows[0].sd);
  CHECK(back.rows[1].mean == t.rows[1].mean);
  CHECK_THROWS_AS(summary_from_csv("a,b\n"), ConfigError);

  const FitRecord fits[] = {{"gva", "h1", -10.0, t}, {"sdgm", "h1", -9.5, t}, {"sdgm_sas", "h1", -9.0, t}};
  const ComparisonReport report = compare_fits(fits);
  CHECK(report.elbo_rows.size() == 3);
  CHECK(report.delta_rows.size() == 3 * t.rows.size());
  for (const auto& row : report.delta_rows) {
    CHECK(row.delta_mean == 0.0);
    CHECK(row.delta_sd == 0.0);
    CHECK(row.delta_skewness == 0.0);
  }
  const FitRecord mixed[] = {{"gva", "h1", -10.0, t}, {"sdgm", "h2", -9.5, t}};
  CHECK_THROWS_AS(compare_fits(mixed), ConfigError);
  const std::string csv = to_csv(report);
  CHECK(csv.rfind("row_type,", 0) == 0);
  CHECK(csv.find('\r') == std::string::npos);
}

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sdgm/models.hpp"
#include "sdgm/variational.hpp"

namespace sdgm {

// -----------------------------------------------------------------------------
// Finite-difference oracles

/// |analytic - numeric| / max(1, |analytic|, |numeric|): relative for large
/// values, absolute below unit scale.
double fd_relative_error(double analytic, double numeric);

struct FdReport {
  double worst_error = 0.0;
  std::size_t worst_index = 0;
  bool passed = false;
  Vector numeric;
  Vector analytic;
};

/// Central differences of f in every coordinate against grad_f. Never throws
/// on a mismatch; a non-finite difference is reported as a failure.
FdReport fd_check_gradient(const std::function<double(const Vector&)>& f,
                           const std::function<Vector(const Vector&)>& grad_f, const Vector& point,
                           double step = 1e-5, double tol = 1e-5);

/// Checks jvp(params, noise, z) against central differences of
/// lambda -> z . sample(lambda, noise) over the flat parameter vector.
FdReport fd_check_jvp(const VariationalParams& params, const NoiseDraw& noise, const Vector& z,
                      double step = 1e-5, double tol = 1e-5);

// -----------------------------------------------------------------------------
// Low-dimensional quadrature

struct Box {
  std::vector<std::pair<double, double>> ranges;
};

/// Composite Simpson integral of exp(log_density) over a box in one or two
/// dimensions. `nodes` per axis (rounded up to odd). Throws ConfigError for dims > 2.
double quadrature_normalization(const std::function<double(const Vector&)>& log_density, const Box& box,
                                std::size_t nodes);

struct QuadratureMoments {
  double mass = 0.0;
  Vector mean;
  Matrix covariance;
};

QuadratureMoments quadrature_moments(const std::function<double(const Vector&)>& log_density, const Box& box,
                                     std::size_t nodes);

/// Box from sampler draws: per-coordinate [min, max] widened by `margin`
/// robust standard deviations (IQR / 1.349).
Box auto_box(const VariationalParams& params, std::size_t samples, std::uint64_t seed, double margin = 4.0);

// -----------------------------------------------------------------------------
// Posterior summaries

struct SummaryRow {
  std::string name;
  double mean = 0.0;
  double sd = 0.0;
  double skewness = 0.0;
};

/// Skewness is the plain moment ratio m3 / m2^{3/2} (no small-sample correction).
struct SummaryTable {
  std::vector<SummaryRow> rows;
  std::size_t samples = 0;
};

/// Accumulates weighted central moments per coordinate.
class MomentAccumulator {
 public:
  explicit MomentAccumulator(std::size_t dim);
  void add(const Vector& x, double weight = 1.0);
  SummaryTable table(const std::vector<std::string>& names) const;
  Vector mean() const;
  std::size_t count() const { return count_; }

 private:
  bool started_ = false;
  Vector shift_;
  Vector s1_, s2_, s3_;
  double weight_sum_ = 0.0;
  std::size_t count_ = 0;
};

SummaryTable summarize(const VariationalParams& params, std::size_t samples, std::uint64_t seed,
                       const std::vector<std::string>& names = {});

struct ImportanceResult {
  SummaryTable table;
  double effective_sample_size = 0.0;
  double log_evidence = 0.0;
};

/// Self-normalized importance sampling of the target with `proposal` as the
/// sampling distribution.
ImportanceResult importance_summary(const VariationalParams& proposal, const TargetModel& model,
                                    std::size_t samples, std::uint64_t seed,
                                    const std::vector<std::string>& names = {});

std::string to_csv(const SummaryTable& table);
SummaryTable summary_from_csv(const std::string& text);

// -----------------------------------------------------------------------------
// Fit comparison

struct FitRecord {
  std::string method;
  std::string model_hash;
  double final_elbo = 0.0;
  SummaryTable summary;
};

struct ComparisonReport {
  struct ElboRow {
    std::string method;
    double final_elbo;
  };
  struct DeltaRow {
    std::string method_a;
    std::string method_b;
    std::string coordinate;
    double delta_mean;
    double delta_sd;
    double delta_skewness;
  };
  std::vector<ElboRow> elbo_rows;
  std::vector<DeltaRow> delta_rows;
};

/// Final ELBO per method plus per-coordinate (b - a) summary deltas for every
/// pair a < b. Throws ConfigError when the fits are over different models.
ComparisonReport compare_fits(std::span<const FitRecord> fits);

std::string to_csv(const ComparisonReport& report);

}  // namespace sdgm

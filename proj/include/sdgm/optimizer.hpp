#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <vector>

#include "sdgm/error.hpp"
#include "sdgm/models.hpp"
#include "sdgm/variational.hpp"

namespace sdgm {

enum class StepRule { plain, adam };

struct Phase {
  std::size_t iterations = 1;
  double step_scale = 0.01;
};

/// Step sizes for the ascent loop. Phases run in order; the last phase's scale
/// continues for any iterations beyond the listed total.
struct Schedule {
  std::vector<Phase> phases{{20000, 0.01}};
  std::array<double, kBlockCount> block_multipliers{1.0, 1.0, 1.0, 1.0, 1.0};
  StepRule rule = StepRule::adam;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double epsilon = 1e-8;

  /// `base` for `first` iterations, then halved every `every` iterations up to `total`.
  static Schedule annealed(std::size_t total, double base = 0.01, std::size_t first = 20000,
                           std::size_t every = 10000);

  double scale_at(std::size_t iteration) const;
  void validate() const;
};

struct FitOptions {
  std::size_t iterations = 20000;
  std::size_t mc_samples = 1;
  std::uint64_t seed = 1;
  std::set<Block> frozen;
  std::size_t thin = 50;
  std::size_t window = 500;
  /// Abort when the moving-average ELBO falls below best - factor * (|best| + 1).
  /// Non-positive disables the check.
  double divergence_factor = 10.0;
};

struct TracePoint {
  std::size_t iteration = 0;
  double elbo = 0.0;
  double moving_average = 0.0;
};

struct FitResult {
  VariationalParams params;
  std::vector<TracePoint> trace;
  std::size_t iterations = 0;
  std::uint64_t seed = 0;
  double wall_seconds = 0.0;
};

/// log h was not finite at a sampled theta.
class NonFiniteTargetError : public NumericalError {
 public:
  NonFiniteTargetError(const std::string& what, Vector theta) : NumericalError(what), theta_(std::move(theta)) {}
  const Vector& theta() const { return theta_; }

 private:
  Vector theta_;
};

class DivergenceError : public NumericalError {
 public:
  DivergenceError(const std::string& what, VariationalParams last_finite, std::size_t iteration)
      : NumericalError(what), last_finite_(std::move(last_finite)), iteration_(iteration) {}
  const VariationalParams& last_finite() const { return last_finite_; }
  std::size_t iteration() const { return iteration_; }

 private:
  VariationalParams last_finite_;
  std::size_t iteration_;
};

/// Mean of log h(theta) - log q(theta) over theta = theta(noise).
double elbo_estimate(const VariationalParams& params, const TargetModel& model, std::span<const NoiseDraw> batch);

/// Mean of (d theta / d lambda)^T (grad log h - grad log q) over the batch.
VariationalParams elbo_gradient_estimate(const VariationalParams& params, const TargetModel& model,
                                         std::span<const NoiseDraw> batch);

/// Per-sample ELBO gradient; the building block of the two estimators above.
struct SampleGradient {
  double elbo_term;
  Vector flat_gradient;
};
SampleGradient sample_gradient(const VariationalParams& params, const TargetModel& model, const NoiseDraw& noise);

struct ElboSummary {
  double mean = 0.0;
  double standard_error = 0.0;
  std::size_t samples = 0;
};

/// Large-batch ELBO estimate with its Monte Carlo standard error.
ElboSummary elbo_summary(const VariationalParams& params, const TargetModel& model, std::size_t samples,
                         std::uint64_t seed);

/// Noise for sample `s` of iteration `t`: a pure function of (seed, t, s).
NoiseDraw iteration_noise(std::uint64_t seed, std::size_t iteration, std::size_t sample, std::size_t dim);

FitResult fit(const VariationalParams& init, const TargetModel& model, const Schedule& schedule,
              const FitOptions& options);

struct Stage {
  std::set<Block> frozen;
  std::size_t iterations = 0;
  std::optional<Schedule> schedule;
};

/// Runs `fit` per stage, threading parameters through. Stage k > 0 draws noise
/// from a seed derived from (options.seed, k); the trace concatenates stages.
FitResult staged_fit(const VariationalParams& init, const TargetModel& model, std::span<const Stage> stages,
                     const Schedule& schedule, const FitOptions& options);

}  // namespace sdgm

#include "sdgm/optimizer.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#include "sdgm/random.hpp"

namespace sdgm {

namespace {

constexpr std::uint64_t kSummaryStream = 0x5eed'e1b0'0000'0001ULL;

std::string iteration_label(std::size_t t) { return "iteration " + std::to_string(t + 1); }

}  // namespace

Schedule Schedule::annealed(std::size_t total, double base, std::size_t first, std::size_t every) {
  Schedule s;
  s.phases.clear();
  const std::size_t head = std::max<std::size_t>(1, std::min(first, total));
  s.phases.push_back({head, base});
  double rate = base;
  for (std::size_t done = head; done < total; done += every) {
    rate *= 0.5;
    s.phases.push_back({std::min(every, total - done), rate});
  }
  return s;
}

double Schedule::scale_at(std::size_t iteration) const {
  std::size_t end = 0;
  for (const Phase& phase : phases) {
    end += phase.iterations;
    if (iteration < end) return phase.step_scale;
  }
  return phases.back().step_scale;
}

void Schedule::validate() const {
  if (phases.empty()) throw ConfigError("schedule: at least one phase is required");
  for (const Phase& phase : phases) {
    if (phase.iterations < 1) throw ConfigError("schedule: phase iteration counts must be >= 1");
    if (!(phase.step_scale > 0.0) || !std::isfinite(phase.step_scale)) {
      throw ConfigError("schedule: phase step scales must be positive");
    }
  }
  for (const double m : block_multipliers) {
    if (!(m >= 0.0) || !std::isfinite(m)) throw ConfigError("schedule: block multipliers must be nonnegative");
  }
  if (rule == StepRule::adam) {
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(epsilon > 0.0)) {
      throw ConfigError("schedule: adam needs beta1, beta2 in [0, 1) and epsilon > 0");
    }
  }
}

NoiseDraw iteration_noise(std::uint64_t seed, std::size_t iteration, std::size_t sample, std::size_t dim) {
  Rng rng = Rng::substream(seed, iteration, sample);
  return draw_noise(rng, dim);
}

SampleGradient sample_gradient(const VariationalParams& params, const TargetModel& model, const NoiseDraw& noise) {
  const Vector theta = sample(params, noise);
  const double lh = model.log_h(theta);
  if (!std::isfinite(lh)) throw NonFiniteTargetError("log h is not finite at a sampled theta", theta);
  const double lq = log_density(params, theta);
  const Vector z = model.grad_log_h(theta) - grad_theta(params, theta);
  return {lh - lq, flatten(jvp(params, noise, z))};
}

double elbo_estimate(const VariationalParams& params, const TargetModel& model, std::span<const NoiseDraw> batch) {
  if (batch.empty()) throw ConfigError("elbo_estimate: empty noise batch");
  double total = 0.0;
  for (const NoiseDraw& noise : batch) {
    const Vector theta = sample(params, noise);
    const double lh = model.log_h(theta);
    if (!std::isfinite(lh)) throw NonFiniteTargetError("log h is not finite at a sampled theta", theta);
    total += lh - log_density(params, theta);
  }
  return total / static_cast<double>(batch.size());
}

VariationalParams elbo_gradient_estimate(const VariationalParams& params, const TargetModel& model,
                                         std::span<const NoiseDraw> batch) {
  if (batch.empty()) throw ConfigError("elbo_gradient_estimate: empty noise batch");
  Vector total = Vector::Zero(flatten(params).size());
  for (const NoiseDraw& noise : batch) total += sample_gradient(params, model, noise).flat_gradient;
  total /= static_cast<double>(batch.size());
  return unflatten(params, std::span<const double>(total.data(), static_cast<std::size_t>(total.size())));
}

ElboSummary elbo_summary(const VariationalParams& params, const TargetModel& model, std::size_t samples,
                         std::uint64_t seed) {
  if (samples < 2) throw ConfigError("elbo_summary: need at least two samples");
  double sum = 0.0;
  double sum_sq = 0.0;
  for (std::size_t s = 0; s < samples; ++s) {
    const NoiseDraw noise = iteration_noise(seed ^ kSummaryStream, s, 0, params.dim());
    const Vector theta = sample(params, noise);
    const double lh = model.log_h(theta);
    if (!std::isfinite(lh)) throw NonFiniteTargetError("log h is not finite at a sampled theta", theta);
    const double term = lh - log_density(params, theta);
    sum += term;
    sum_sq += term * term;
  }
  const double n = static_cast<double>(samples);
  const double mean = sum / n;
  const double var = std::max(0.0, (sum_sq - n * mean * mean) / (n - 1.0));
  return {mean, std::sqrt(var / n), samples};
}

FitResult fit(const VariationalParams& init, const TargetModel& model, const Schedule& schedule,
              const FitOptions& options) {
  schedule.validate();
  if (options.mc_samples < 1) throw ConfigError("fit: mc_samples must be >= 1");
  if (options.thin < 1 || options.window < 1) throw ConfigError("fit: thin and window must be >= 1");
  check_dim(init.dim(), model.dim(), "variational dimension vs model");

  const auto start = std::chrono::steady_clock::now();
  const std::size_t p = init.dim();
  Vector x = flatten(init);
  const auto n = x.size();

  // Per-coordinate step multiplier; zero marks a frozen coordinate.
  Vector multiplier = Vector::Zero(n);
  for (const BlockRange& range : block_layout(init)) {
    const bool frozen = options.frozen.contains(range.block) || (range.block == Block::skew && skew_frozen(init.kind));
    const double m = frozen ? 0.0 : schedule.block_multipliers[static_cast<std::size_t>(range.block)];
    multiplier.segment(static_cast<Eigen::Index>(range.offset), static_cast<Eigen::Index>(range.size)).setConstant(m);
  }

  Vector first_moment = Vector::Zero(n);
  Vector second_moment = Vector::Zero(n);
  double beta1_power = 1.0;
  double beta2_power = 1.0;

  std::vector<double> recent(options.window, 0.0);
  double recent_sum = 0.0;
  double best_average = -std::numeric_limits<double>::infinity();

  FitResult result;
  result.seed = options.seed;
  VariationalParams current = init;
  for (std::size_t t = 0; t < options.iterations; ++t) {
    Vector gradient = Vector::Zero(n);
    double elbo = 0.0;
    try {
      for (std::size_t s = 0; s < options.mc_samples; ++s) {
        const SampleGradient sg = sample_gradient(current, model, iteration_noise(options.seed, t, s, p));
        gradient += sg.flat_gradient;
        elbo += sg.elbo_term;
      }
    } catch (const NumericalError& e) {
      throw DivergenceError(iteration_label(t) + ": " + e.what(), current, t);
    }
    gradient /= static_cast<double>(options.mc_samples);
    elbo /= static_cast<double>(options.mc_samples);
    if (!std::isfinite(elbo) || !gradient.allFinite()) {
      throw DivergenceError(iteration_label(t) + ": non-finite ELBO or gradient estimate", current, t);
    }

    const double rate = schedule.scale_at(t);
    if (schedule.rule == StepRule::adam) {
      beta1_power *= schedule.beta1;
      beta2_power *= schedule.beta2;
    }
    for (Eigen::Index k = 0; k < n; ++k) {
      if (multiplier[k] == 0.0) continue;
      const double g = gradient[k];
      double step = g;
      if (schedule.rule == StepRule::adam) {
        first_moment[k] = schedule.beta1 * first_moment[k] + (1.0 - schedule.beta1) * g;
        second_moment[k] = schedule.beta2 * second_moment[k] + (1.0 - schedule.beta2) * g * g;
        const double m_hat = first_moment[k] / (1.0 - beta1_power);
        const double v_hat = second_moment[k] / (1.0 - beta2_power);
        step = m_hat / (std::sqrt(v_hat) + schedule.epsilon);
      }
      x[k] += rate * multiplier[k] * step;
    }
    if (!x.allFinite()) throw DivergenceError(iteration_label(t) + ": parameters became non-finite", current, t);
    current = unflatten(init, std::span<const double>(x.data(), static_cast<std::size_t>(n)));

    double& slot = recent[t % options.window];
    recent_sum += elbo - slot;
    slot = elbo;
    const std::size_t filled = std::min(t + 1, options.window);
    const double average = recent_sum / static_cast<double>(filled);
    if ((t + 1) % options.thin == 0 || t + 1 == options.iterations) result.trace.push_back({t + 1, elbo, average});

    if (t + 1 >= options.window) {
      best_average = std::max(best_average, average);
      if (options.divergence_factor > 0.0 &&
          average < best_average - options.divergence_factor * (std::abs(best_average) + 1.0)) {
        throw DivergenceError(iteration_label(t) + ": ELBO moving average collapsed", current, t);
      }
    }
  }

  result.params = std::move(current);
  result.iterations = options.iterations;
  result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

FitResult staged_fit(const VariationalParams& init, const TargetModel& model, std::span<const Stage> stages,
                     const Schedule& schedule, const FitOptions& options) {
  if (stages.empty()) throw ConfigError("staged_fit: at least one stage is required");
  FitResult total;
  total.params = init;
  total.seed = options.seed;
  for (std::size_t k = 0; k < stages.size(); ++k) {
    const Stage& stage = stages[k];
    FitOptions stage_options = options;
    stage_options.iterations = stage.iterations;
    stage_options.frozen.insert(stage.frozen.begin(), stage.frozen.end());
    stage_options.seed = k == 0 ? options.seed : splitmix64(options.seed + k);
    FitResult part = fit(total.params, model, stage.schedule.value_or(schedule), stage_options);
    for (TracePoint point : part.trace) {
      point.iteration += total.iterations;
      total.trace.push_back(point);
    }
    total.iterations += part.iterations;
    total.wall_seconds += part.wall_seconds;
    total.params = std::move(part.params);
  }
  return total;
}

}  // namespace sdgm

#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"
#include "sdgm/models.hpp"
#include "sdgm/optimizer.hpp"
#include "sdgm/variational.hpp"

namespace sdgm::app {

/// new_column = offset + sum(coefficient * source_column).
struct Derivation {
  std::string name;
  double offset = 0.0;
  std::vector<std::pair<std::string, double>> terms;
};

struct ModelConfig {
  std::string kind = "glmm";  // glmm | sv
  std::string data;           // resolved path of the CSV file
  std::string response = "y";
  std::string group = "group";
  std::vector<std::string> fixed{"1"};   // "1" is the intercept column
  std::vector<std::string> random{"1"};
  ResponseKind response_kind = ResponseKind::bernoulli_logit;
  RandomEffectPrior re_prior = RandomEffectPrior::normal;
  double df = 10.0;
  double beta_prior_sd = 10.0;
  double hyper_prior_sd = 10.0;
  double prior_variance = 10.0;  // sv
  std::vector<Derivation> derive;
};

struct StageConfig {
  std::vector<Block> frozen;
  std::size_t iterations = 0;
};

struct OptimizerConfig {
  std::size_t iters = 20000;
  std::size_t mc_samples = 1;
  StepRule rule = StepRule::adam;
  double rate = 0.01;
  std::size_t anneal_first = 20000;
  std::size_t anneal_every = 10000;
  std::vector<Phase> phases;  // empty: annealed from rate / anneal_first / anneal_every
  double beta1 = 0.9;
  double beta2 = 0.99;
  double epsilon = 1e-8;
  std::uint64_t seed = 1;
  std::array<double, kBlockCount> multipliers{1.0, 1.0, 1.0, 1.0, 1.0};
  std::vector<StageConfig> stages;
  std::size_t warm_start = 0;  // GVA iterations before the configured family; 0 disables
  double divergence_factor = 10.0;
};

struct OutputConfig {
  std::string dir;
  std::size_t thin = 50;
  std::size_t window = 500;
  std::size_t summary_samples = 10000;
};

struct RunConfig {
  ModelConfig model;
  FamilyKind family = FamilyKind::gva;
  OptimizerConfig optimizer;
  OutputConfig output;
};

/// Reads an INI file, a JSON file with the same sections, or a run manifest
/// (its embedded "config" object). Relative data paths resolve against the
/// file's directory. Throws ConfigError naming the offending field.
RunConfig load_config(const std::string& path);
/// `format` is "ini" or "json".
RunConfig parse_config(const std::string& text, const std::string& format, const std::string& base_dir);

/// Canonical JSON form: every field present, numbers as shortest round-trip text.
nlohmann::json config_to_json(const RunConfig& config);
/// FNV-1a over the canonical JSON, as 16 hex digits.
std::string config_hash(const RunConfig& config);

std::string fnv1a_hex(const std::string& bytes);

struct LoadedModel {
  std::unique_ptr<TargetModel> model;
  std::string hash;  // identifies the model and data independently of family and optimizer
};

LoadedModel build_model(const ModelConfig& config);

Schedule make_schedule(const OptimizerConfig& config);
FitOptions make_fit_options(const RunConfig& config);

}  // namespace sdgm::app

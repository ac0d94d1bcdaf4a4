#include <iostream>

#include "CLI11.hpp"
#include "sdgm/app/commands.hpp"

using namespace sdgm::app;

int main(int argc, char** argv) {
  CLI::App app{"Sparse skew-normal and copula variational inference"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  FitArgs fit;
  std::uint64_t fit_seed = 0;
  std::size_t fit_iters = 0;
  std::string fit_out;
  auto* fit_cmd = app.add_subcommand("fit", "Fit a variational approximation described by a config file");
  fit_cmd->add_option("--config,-c", fit.config, "Config file (INI, JSON, or a run manifest)")->required();
  auto* fit_out_opt = fit_cmd->add_option("--out,-o", fit_out, "Output directory");
  auto* fit_seed_opt = fit_cmd->add_option("--seed", fit_seed, "Override optimizer.seed");
  auto* fit_iters_opt = fit_cmd->add_option("--iters", fit_iters, "Override optimizer.iters")->check(CLI::PositiveNumber);
  fit_cmd->add_flag("--quiet,-q", fit.quiet, "Suppress progress output");

  std::vector<std::string> compare_dirs;
  std::string compare_out;
  auto* compare_cmd = app.add_subcommand("compare", "Compare two or more fitted runs over one model");
  compare_cmd->add_option("runs", compare_dirs, "Run directories")->required();
  auto* compare_out_opt = compare_cmd->add_option("--out,-o", compare_out, "Write the comparison CSV here");
  compare_cmd->add_flag("--quiet,-q", "Accepted for symmetry; compare prints only the CSV");

  CheckArgs check;
  std::uint64_t check_seed = 0;
  auto* check_cmd = app.add_subcommand("check", "Run derivative and density oracles for a config");
  check_cmd->add_option("--config,-c", check.config, "Config file")->required();
  auto* check_seed_opt = check_cmd->add_option("--seed", check_seed, "Seed for the random check points");
  check_cmd->add_option("--instances", check.instances, "Random instances per check")->check(CLI::PositiveNumber);
  check_cmd->add_flag("--corrupt-gradient", check.corrupt_gradient,
                      "Negative control: perturb the model gradient so the checks must fail");
  check_cmd->add_flag("--quiet,-q", check.quiet, "Print failures and the verdict only");

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic dataset");
  synth_cmd->add_option("--kind", synth.kind,
                        "logistic | poisson | sv | six-cities | polypharmacy | epilepsy | nyse")
      ->capture_default_str();
  synth_cmd->add_option("--groups", synth.groups, "Number of groups")->capture_default_str();
  synth_cmd->add_option("--per-group", synth.per_group, "Observations per group")->capture_default_str();
  synth_cmd->add_option("--beta", synth.beta, "Fixed effects, intercept first")->delimiter(',');
  synth_cmd->add_option("--hyper", synth.hyper, "Random-effect hyperparameters (log sd, or vech(B) with log diagonal)")
      ->delimiter(',');
  synth_cmd->add_option("--length", synth.length, "Series length for sv")->capture_default_str();
  synth_cmd->add_option("--seed", synth.seed, "Random seed")->capture_default_str();
  synth_cmd->add_option("--out,-o", synth.out, "Output CSV path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*fit_cmd) {
      if (*fit_out_opt) fit.out = fit_out;
      if (*fit_seed_opt) fit.seed = fit_seed;
      if (*fit_iters_opt) fit.iters = fit_iters;
      return cmd_fit(fit, std::cout, std::cerr);
    }
    if (*compare_cmd) {
      std::optional<std::string> out;
      if (*compare_out_opt) out = compare_out;
      return cmd_compare(compare_dirs, out, std::cout, std::cerr);
    }
    if (*check_cmd) {
      if (*check_seed_opt) check.seed = check_seed;
      return cmd_check(check, std::cout, std::cerr);
    }
    if (*synth_cmd) return cmd_synth(synth, std::cout, std::cerr);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

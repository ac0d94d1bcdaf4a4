#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace sdgm::app {

inline constexpr const char* kToolVersion = "1.0.0";
inline constexpr const char* kOutputRootEnv = "SDGM_OUTPUT_ROOT";

enum ExitCode : int { kExitOk = 0, kExitCheckFailed = 1, kExitConfig = 2, kExitDivergence = 3 };

struct FitArgs {
  std::string config;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> iters;
  bool quiet = false;
};

/// Writes params.json, trace.csv, summary.csv and run-manifest.json into the
/// output directory: --out, else output.dir, else $SDGM_OUTPUT_ROOT/<config
/// name>, else runs/<config name>.
int cmd_fit(const FitArgs& args, std::ostream& out, std::ostream& err);

/// Comparison CSV of two or more run directories over one model.
int cmd_compare(const std::vector<std::string>& run_dirs, const std::optional<std::string>& out_path,
                std::ostream& out, std::ostream& err);

struct CheckArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::size_t instances = 3;
  /// Negative control: scales the model gradient by 1.01 before checking.
  bool corrupt_gradient = false;
  bool quiet = false;
};

int cmd_check(const CheckArgs& args, std::ostream& out, std::ostream& err);

struct SynthArgs {
  /// logistic | poisson | sv, or one of the shaped presets
  /// six-cities | polypharmacy | epilepsy | nyse.
  std::string kind = "logistic";
  std::size_t groups = 50;
  std::size_t per_group = 5;
  std::vector<double> beta{-1.0};
  std::vector<double> hyper{0.7};
  std::size_t length = 2000;
  std::uint64_t seed = 1;
  std::string out;
};

int cmd_synth(const SynthArgs& args, std::ostream& out, std::ostream& err);

/// Writes `contents` to `path` through a temporary file and rename.
void write_file_atomic(const std::string& path, const std::string& contents);

}  // namespace sdgm::app

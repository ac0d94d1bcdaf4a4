#include "sdgm/app/commands.hpp"

#include <Eigen/Core>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "sdgm/app/config.hpp"
#include "sdgm/app/csv.hpp"
#include "sdgm/diagnostics.hpp"
#include "sdgm/error.hpp"
#include "sdgm/format.hpp"
#include "sdgm/random.hpp"
#include "sdgm/serialize.hpp"

namespace sdgm::app {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path.string() + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return text.str();
}

std::string trace_csv(const std::vector<TracePoint>& trace) {
  std::string out = "iteration,elbo_estimate,moving_average\n";
  for (const TracePoint& t : trace) {
    out += std::to_string(t.iteration) + "," + format_double(t.elbo) + "," + format_double(t.moving_average) + "\n";
  }
  return out;
}

fs::path output_dir(const FitArgs& args, const RunConfig& cfg) {
  if (args.out) return *args.out;
  if (!cfg.output.dir.empty()) return cfg.output.dir;
  const std::string name = fs::path(args.config).stem().string();
  if (const char* root = std::getenv(kOutputRootEnv); root && *root) return fs::path(root) / name;
  return fs::path("runs") / name;
}

FitResult run_fit(const RunConfig& cfg, const TargetModel& model, std::ostream& err, bool quiet) {
  const FitOptions options = make_fit_options(cfg);
  const SparsityPattern& pattern = model.pattern();
  const Vector location = model.initial_location();
  FitResult warm;
  VariationalParams init = initial_params(cfg.family, pattern, location);
  FitOptions main_options = options;

  if (cfg.optimizer.warm_start > 0) {
    OptimizerConfig gva_opt = cfg.optimizer;
    gva_opt.iters = cfg.optimizer.warm_start;
    FitOptions gva_options = options;
    gva_options.iterations = gva_opt.iters;
    if (!quiet) err << "warm start: gva for " << gva_opt.iters << " iterations\n";
    warm = fit(initial_params(FamilyKind::gva, pattern, location), model, make_schedule(gva_opt), gva_options);
    init = warm_start_from_gva(cfg.family, std::get<DirectParams>(warm.params.value));
    main_options.seed = splitmix64(options.seed);
  }

  if (!quiet) {
    err << "fit: " << to_string(cfg.family) << ", p = " << model.dim() << ", " << cfg.optimizer.iters
        << " iterations\n";
  }
  const Schedule schedule = make_schedule(cfg.optimizer);
  FitResult result;
  if (cfg.optimizer.stages.empty()) {
    result = fit(init, model, schedule, main_options);
  } else {
    std::vector<Stage> stages;
    for (const StageConfig& s : cfg.optimizer.stages) {
      stages.push_back({std::set<Block>(s.frozen.begin(), s.frozen.end()), s.iterations, std::nullopt});
    }
    result = staged_fit(init, model, stages, schedule, main_options);
  }
  if (cfg.optimizer.warm_start > 0) {
    std::vector<TracePoint> trace = warm.trace;
    for (TracePoint t : result.trace) {
      t.iteration += warm.iterations;
      trace.push_back(t);
    }
    result.trace = std::move(trace);
    result.iterations += warm.iterations;
    result.wall_seconds += warm.wall_seconds;
  }
  return result;
}

// Random perturbation of the starting point, respecting frozen skewness.
VariationalParams perturbed_params(FamilyKind kind, const TargetModel& model, Rng& rng) {
  const VariationalParams base = initial_params(kind, model.pattern(), model.initial_location());
  Vector flat = flatten(base);
  for (const BlockRange& r : block_layout(base)) {
    if (r.block == Block::skew && skew_frozen(kind)) continue;
    const double scale = r.block == Block::skew ? 1.0 : 0.2;
    for (std::size_t k = r.offset; k < r.offset + r.size; ++k) flat[static_cast<Eigen::Index>(k)] += scale * rng.normal();
  }
  return unflatten(base, std::span<const double>(flat.data(), static_cast<std::size_t>(flat.size())));
}

}  // namespace

void write_file_atomic(const std::string& path, const std::string& contents) {
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + tmp.string() + "'");
    out << contents;
    out.flush();
    if (!out) throw Error("write failed for '" + tmp.string() + "'");
  }
  fs::rename(tmp, target);
}

int cmd_fit(const FitArgs& args, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  LoadedModel loaded;
  fs::path dir;
  try {
    cfg = load_config(args.config);
    if (args.seed) cfg.optimizer.seed = *args.seed;
    if (args.iters) {
      if (!cfg.optimizer.stages.empty()) throw ConfigError("--iters cannot override optimizer.stages");
      cfg.optimizer.iters = *args.iters;
    }
    dir = output_dir(args, cfg);
    cfg.output.dir = dir.string();
    loaded = build_model(cfg.model);
    make_schedule(cfg.optimizer);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  }

  const TargetModel& model = *loaded.model;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    err << "config error: cannot create output directory '" << dir.string() << "': " << ec.message() << "\n";
    return kExitConfig;
  }

  FitResult result;
  try {
    result = run_fit(cfg, model, err, args.quiet);
  } catch (const DivergenceError& e) {
    const fs::path last = dir / "params.last-finite.json";
    write_file_atomic(last.string(), params_to_string(e.last_finite()));
    err << "divergence: " << e.what() << "\n  last finite parameters: " << last.string() << "\n";
    return kExitDivergence;
  } catch (const NumericalError& e) {
    err << "divergence: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  }

  const std::uint64_t seed = cfg.optimizer.seed;
  const std::vector<std::string> names = model.coordinate_names();
  const SummaryTable summary = summarize(result.params, cfg.output.summary_samples, seed, names);
  ElboSummary elbo;
  try {
    elbo = elbo_summary(result.params, model, cfg.output.summary_samples, seed);
  } catch (const NumericalError& e) {
    err << "divergence: final ELBO evaluation failed: " << e.what() << "\n";
    return kExitDivergence;
  }

  const json config_json = config_to_json(cfg);
  json manifest = {{"tool", "sdgmvi"},
                   {"version", kToolVersion},
                   {"config_hash", config_hash(cfg)},
                   {"model_hash", loaded.hash},
                   {"family", std::string(to_string(cfg.family))},
                   {"seed", seed},
                   {"iterations", result.iterations},
                   {"dimension", model.dim()},
                   {"final_elbo", {{"mean", elbo.mean}, {"standard_error", elbo.standard_error}, {"samples", elbo.samples}}},
                   {"final_moving_average", result.trace.empty() ? 0.0 : result.trace.back().moving_average},
                   {"wall_seconds", result.wall_seconds},
                   {"eigen_version", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                                         "." + std::to_string(EIGEN_MINOR_VERSION)},
                   {"compiler", __VERSION__},
                   {"config", config_json}};

  write_file_atomic((dir / "params.json").string(), params_to_string(result.params));
  write_file_atomic((dir / "trace.csv").string(), trace_csv(result.trace));
  write_file_atomic((dir / "summary.csv").string(), to_csv(summary));
  write_file_atomic((dir / "run-manifest.json").string(), manifest.dump(2) + "\n");
  if (!args.quiet) {
    out << "final ELBO " << format_double(elbo.mean) << " (se " << format_double(elbo.standard_error) << ")\n"
        << "artifacts written to " << dir.string() << "\n";
  }
  return kExitOk;
}

int cmd_compare(const std::vector<std::string>& run_dirs, const std::optional<std::string>& out_path,
                std::ostream& out, std::ostream& err) {
  try {
    if (run_dirs.size() < 2) throw ConfigError("compare: at least two run directories are required");
    std::vector<FitRecord> records;
    std::map<std::string, int> label_count;
    for (const std::string& d : run_dirs) {
      const json manifest = json::parse(read_file(fs::path(d) / "run-manifest.json"));
      FitRecord r;
      r.method = manifest.at("family").get<std::string>();
      r.model_hash = manifest.at("model_hash").get<std::string>();
      r.final_elbo = manifest.at("final_elbo").at("mean").get<double>();
      r.summary = summary_from_csv(read_file(fs::path(d) / "summary.csv"));
      ++label_count[r.method];
      records.push_back(std::move(r));
    }
    for (std::size_t k = 0; k < records.size(); ++k) {
      if (label_count[records[k].method] > 1) records[k].method += "#" + std::to_string(k + 1);
    }
    const std::string csv = to_csv(compare_fits(records));
    if (out_path) {
      write_file_atomic(*out_path, csv);
    } else {
      out << csv;
    }
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
  } catch (const json::exception& e) {
    err << "config error: bad run manifest: " << e.what() << "\n";
  }
  return kExitConfig;
}

int cmd_check(const CheckArgs& args, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  LoadedModel loaded;
  try {
    cfg = load_config(args.config);
    loaded = build_model(cfg.model);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  }
  const TargetModel& model = *loaded.model;
  const std::uint64_t seed = args.seed.value_or(cfg.optimizer.seed);
  Rng rng(seed);
  bool all_passed = true;
  auto report = [&](const std::string& what, const FdReport& r) {
    all_passed = all_passed && r.passed;
    if (!args.quiet || !r.passed) {
      out << (r.passed ? "PASS " : "FAIL ") << what << " (worst relative error " << format_double(r.worst_error)
          << " at coordinate " << r.worst_index << ")\n";
    }
  };

  const double corruption = args.corrupt_gradient ? 1.01 : 1.0;
  const std::size_t p = model.dim();
  try {
    for (std::size_t i = 0; i < args.instances; ++i) {
      const Vector theta = model.initial_location() + 0.3 * normal_vector(rng, p);
      report("model gradient #" + std::to_string(i + 1),
             fd_check_gradient([&](const Vector& t) { return model.log_h(t); },
                               [&](const Vector& t) { return Vector(corruption * model.grad_log_h(t)); }, theta));
    }
    for (std::size_t i = 0; i < args.instances; ++i) {
      const VariationalParams params = perturbed_params(cfg.family, model, rng);
      const NoiseDraw noise = draw_noise(rng, p);
      const Vector theta = sample(params, noise);
      const std::string tag = std::string(to_string(cfg.family)) + " #" + std::to_string(i + 1);
      report("density gradient " + tag,
             fd_check_gradient([&](const Vector& t) { return log_density(params, t); },
                               [&](const Vector& t) { return grad_theta(params, t); }, theta));
      report("sampling-map jvp " + tag, fd_check_jvp(params, noise, normal_vector(rng, p)));
      if (p <= 2) {
        const double mass = quadrature_normalization([&](const Vector& t) { return log_density(params, t); },
                                                     auto_box(params, 20000, seed + i), p == 1 ? 4001 : 601);
        const bool ok = std::abs(mass - 1.0) <= 1e-4;
        all_passed = all_passed && ok;
        out << (ok ? "PASS " : "FAIL ") << "quadrature normalization " << tag << " (mass " << format_double(mass)
            << ")\n";
      }
    }
  } catch (const NumericalError& e) {
    out << "FAIL numerical error during checks: " << e.what() << "\n";
    return kExitCheckFailed;
  }
  out << (all_passed ? "all checks passed" : "checks FAILED") << "\n";
  return all_passed ? kExitOk : kExitCheckFailed;
}

int cmd_synth(const SynthArgs& args, std::ostream& out, std::ostream& err) {
  try {
    if (args.out.empty()) throw ConfigError("synth: --out is required");
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
    Vector truth;
    if (args.kind == "sv" || args.kind == "nyse") {
      const std::size_t n = args.kind == "nyse" ? 2000 : args.length;
      const SyntheticSv sv = synthesize_sv(n, 0.25, 0.95, -0.2, args.seed);
      header = {"t", "y"};
      for (std::size_t i = 0; i < sv.spec.y.size(); ++i) rows.push_back({static_cast<double>(i + 1), sv.spec.y[i]});
      truth = sv.true_theta;
    } else {
      GlmmSkeleton sk;
      sk.n_groups = args.groups;
      sk.obs_per_group = args.per_group;
      sk.beta = args.beta;
      sk.hyper = args.hyper;
      sk.random_dim = args.hyper.size() == 3 ? 2 : 1;
      if (args.kind == "logistic") {
        sk.response = ResponseKind::bernoulli_logit;
      } else if (args.kind == "poisson") {
        sk.response = ResponseKind::poisson_log;
      } else if (args.kind == "six-cities") {
        sk = {ResponseKind::bernoulli_logit, 537, 4, {-3.0, 0.4, -0.2}, 1, {std::log(2.0)}};
      } else if (args.kind == "polypharmacy") {
        sk = {ResponseKind::bernoulli_logit, 500, 7, {-3.0, 0.6, 0.5, -0.4, 0.3, 0.2}, 1, {std::log(2.3)}};
      } else if (args.kind == "epilepsy") {
        sk = {ResponseKind::poisson_log, 59, 4, {1.6, 0.5, -0.3, 0.2}, 2, {std::log(0.5), 0.05, std::log(0.3)}};
      } else {
        throw ConfigError("synth: unknown kind '" + args.kind +
                          "' (expected logistic, poisson, sv, six-cities, polypharmacy, epilepsy or nyse)");
      }
      const SyntheticGlmm g = synthesize_glmm(sk, args.seed);
      header = g.header;
      rows = g.rows;
      truth = g.true_theta;
    }
    write_file_atomic(args.out, write_csv(header, rows));
    json t = {{"kind", args.kind}, {"seed", args.seed},
              {"true_theta", std::vector<double>(truth.data(), truth.data() + truth.size())}};
    write_file_atomic(args.out + ".truth.json", t.dump(2) + "\n");
    out << "wrote " << rows.size() << " rows to " << args.out << "\n";
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  }
}

}  // namespace sdgm::app

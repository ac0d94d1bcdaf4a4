#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "sdgm/app/commands.hpp"
#include "sdgm/app/config.hpp"
#include "sdgm/app/csv.hpp"
#include "sdgm/error.hpp"
#include "sdgm/serialize.hpp"

using namespace sdgm;
using namespace sdgm::app;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

struct Workspace {
  fs::path root;
  Workspace() {
    root = fs::temp_directory_path() / ("sdgm_cli_" + std::to_string(::getpid()));
    fs::remove_all(root);
    fs::create_directories(root);
    std::ostringstream out, err;
    SynthArgs s;
    s.groups = 12;
    s.per_group = 4;
    s.beta = {-1.0};
    s.hyper = {0.5};
    s.seed = 3;
    s.out = (root / "data.csv").string();
    REQUIRE(cmd_synth(s, out, err) == kExitOk);
    s.seed = 4;
    s.out = (root / "other.csv").string();
    REQUIRE(cmd_synth(s, out, err) == kExitOk);
  }
  ~Workspace() { fs::remove_all(root); }

  std::string config(const std::string& name, const std::string& family, const std::string& extra = "",
                     const std::string& data = "data.csv") const {
    const fs::path p = root / name;
    spit(p, "[model]\nkind = glmm\ndata = " + data +
                "\nresponse = y\ngroup = group\nfixed = 1\nrandom = 1\n\n[family]\nkind = " + family +
                "\n\n[optimizer]\niters = 300\nseed = 5\n" + extra + "\n[output]\nsummary_samples = 500\n");
    return p.string();
  }
};

int run_fit(const std::string& config, const fs::path& out_dir, std::string* err_text = nullptr) {
  std::ostringstream out, err;
  FitArgs args;
  args.config = config;
  args.out = out_dir.string();
  args.quiet = true;
  const int code = cmd_fit(args, out, err);
  if (err_text) *err_text = err.str();
  return code;
}

}  // namespace

TEST_CASE("csv parsing") {
  const CsvTable t = parse_csv("a,\"b,c\",d\r\n1,\"x\"\"y\",3\n\n4,5,6\n", "t.csv");
  CHECK(t.header == std::vector<std::string>{"a", "b,c", "d"});
  CHECK(t.rows[0][1] == "x\"y");
  CHECK(t.numeric("d") == std::vector<double>{3.0, 6.0});
  CHECK_THROWS_AS(t.numeric("b,c"), ConfigError);
  CHECK_THROWS_AS(t.column("zz"), ConfigError);
  CHECK_THROWS_AS(parse_csv("a,b\n1\n"), ConfigError);
  CHECK_THROWS_AS(parse_csv(""), ConfigError);
  CHECK(write_csv({"x", "y"}, {{0.1, 2.0}}) == "x,y\n0.1,2\n");
}

TEST_CASE("config parsing, canonical form and validation") {
  const std::string ini =
      "[model]\nkind = glmm\ndata = d.csv\nfixed = 1, age\nrandom = 1\nre_prior = t\ndf = 4\n"
      "derive = visit = -0.3 + 0.2 * week; c2 = x - 2e-1*y\n"
      "[family]\nkind = sdgm_sas\n"
      "[optimizer]\nphases = 100:0.02, 50:0.01\nstages = skew, transform: 100; none: 50\nmultipliers = alpha:5\n";
  const RunConfig a = parse_config(ini, "ini", "/base");
  CHECK(a.model.data == "/base/d.csv");
  CHECK(a.model.fixed == std::vector<std::string>{"1", "age"});
  CHECK(a.model.re_prior == RandomEffectPrior::student_t);
  REQUIRE(a.model.derive.size() == 2);
  CHECK(a.model.derive[0].offset == doctest::Approx(-0.3));
  CHECK(a.model.derive[0].terms[0].second == doctest::Approx(0.2));
  CHECK(a.model.derive[1].terms[1].second == doctest::Approx(-0.2));
  CHECK(a.optimizer.iters == 150);
  CHECK(a.optimizer.stages.size() == 2);
  CHECK(a.optimizer.stages[1].frozen.empty());
  CHECK(a.optimizer.multipliers[1] == 5.0);
  CHECK(make_schedule(a.optimizer).phases.size() == 2);

  // The canonical JSON reloads to the same configuration.
  const nlohmann::json canon = config_to_json(a);
  const RunConfig b = parse_config(canon.dump(), "json", "/elsewhere");
  CHECK(config_to_json(b) == canon);
  CHECK(config_hash(a) == config_hash(b));
  const RunConfig c = parse_config(nlohmann::json{{"config", canon}}.dump(), "json", "");
  CHECK(config_hash(c) == config_hash(a));

  auto error_of = [](const std::string& text) {
    try {
      parse_config(text, "ini", "");
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(error_of("[model]\ndata = d.csv\n[family]\nkind = gauss\n").find("family.kind") != std::string::npos);
  CHECK(error_of("[model]\ndata = d.csv\ncolour = red\n").find("model.colour") != std::string::npos);
  CHECK(error_of("[model]\ndata = d.csv\ndf = 0\n").find("model.df") != std::string::npos);
  CHECK(error_of("[model]\n").find("model.data") != std::string::npos);
  CHECK(error_of("[model]\ndata = d.csv\n[optimizer]\niters = 10\nstages = skew: 5\n").find("optimizer.iters") !=
        std::string::npos);
  CHECK(error_of("[model]\ndata = d.csv\n[optimizer]\nwarm_start = 5\n").find("warm_start") != std::string::npos);
  CHECK(error_of("[model]\ndata = d.csv\n[extra]\nx = 1\n").find("extra") != std::string::npos);
  CHECK(error_of("[model]\ndata = d.csv\nderive = z = x * y\n").find("derive") != std::string::npos);
}

TEST_CASE("fit writes artifacts deterministically") {
  Workspace ws;
  const std::string cfg = ws.config("run.ini", "sdgm_c", "warm_start = 100\n");
  REQUIRE(run_fit(cfg, ws.root / "a") == kExitOk);
  REQUIRE(run_fit(cfg, ws.root / "b") == kExitOk);
  for (const char* f : {"params.json", "trace.csv", "summary.csv", "run-manifest.json"}) {
    CHECK(fs::exists(ws.root / "a" / f));
  }
  for (const auto& entry : fs::directory_iterator(ws.root / "a")) CHECK(entry.path().extension() != ".tmp");
  const std::string trace = slurp(ws.root / "a" / "trace.csv");
  CHECK(trace == slurp(ws.root / "b" / "trace.csv"));
  CHECK(trace.rfind("iteration,elbo_estimate,moving_average\n", 0) == 0);
  CHECK(trace.find('\r') == std::string::npos);
  CHECK(std::count(trace.begin(), trace.end(), '\n') == 1 + 400 / 50);

  const VariationalParams p = params_from_string(slurp(ws.root / "a" / "params.json"));
  CHECK(p.kind == FamilyKind::sdgm_c);

  // Re-running from the manifest's embedded config reproduces the trace.
  REQUIRE(run_fit((ws.root / "a" / "run-manifest.json").string(), ws.root / "c") == kExitOk);
  CHECK(slurp(ws.root / "c" / "trace.csv") == trace);

  const auto manifest = nlohmann::json::parse(slurp(ws.root / "a" / "run-manifest.json"));
  CHECK(manifest.at("seed") == 5);
  CHECK(manifest.at("config_hash").get<std::string>().size() == 16);

  // Seed override changes the trajectory.
  FitArgs args{cfg, (ws.root / "d").string(), 6, std::nullopt, true};
  std::ostringstream out, err;
  REQUIRE(cmd_fit(args, out, err) == kExitOk);
  CHECK(slurp(ws.root / "d" / "trace.csv") != trace);
}

TEST_CASE("fit exit codes") {
  Workspace ws;
  std::string err;
  CHECK(run_fit(ws.config("bad.ini", "gaussian"), ws.root / "x", &err) == kExitConfig);
  CHECK(err.find("family.kind") != std::string::npos);
  CHECK(run_fit(ws.config("nodata.ini", "gva", "", "missing.csv"), ws.root / "x") == kExitConfig);
  CHECK(run_fit((ws.root / "absent.ini").string(), ws.root / "x") == kExitConfig);

  // A huge plain step throws the parameters into overflow.
  const std::string wild = ws.config("wild.ini", "gva", "rule = plain\nrate = 1e6\nphases = 300:1e6\n");
  CHECK(run_fit(wild, ws.root / "w", &err) == kExitDivergence);
  CHECK(err.find("params.last-finite.json") != std::string::npos);
  CHECK(fs::exists(ws.root / "w" / "params.last-finite.json"));
}

TEST_CASE("default output root comes from the environment") {
  Workspace ws;
  const std::string cfg = ws.config("envrun.ini", "gva");
  ::setenv(kOutputRootEnv, (ws.root / "outroot").c_str(), 1);
  std::ostringstream out, err;
  FitArgs args;
  args.config = cfg;
  args.quiet = true;
  CHECK(cmd_fit(args, out, err) == kExitOk);
  ::unsetenv(kOutputRootEnv);
  CHECK(fs::exists(ws.root / "outroot" / "envrun" / "trace.csv"));
}

TEST_CASE("compare") {
  Workspace ws;
  const std::string families[] = {"gva", "sdgm", "sdgm_c", "sdgm_sas", "gva_sas"};
  std::vector<std::string> dirs;
  for (const std::string& f : families) {
    dirs.push_back((ws.root / f).string());
    REQUIRE(run_fit(ws.config(f + ".ini", f), dirs.back()) == kExitOk);
  }
  std::ostringstream out, err;
  REQUIRE(cmd_compare(dirs, std::nullopt, out, err) == kExitOk);
  const std::string csv = out.str();
  const std::size_t p = 12 + 1 + 1;
  CHECK(std::count(csv.begin(), csv.end(), '\n') == static_cast<long>(1 + 5 + 10 * p));

  std::ostringstream same;
  REQUIRE(cmd_compare({dirs[0], dirs[0]}, std::nullopt, same, err) == kExitOk);
  std::istringstream lines(same.str());
  std::string line;
  std::getline(lines, line);
  while (std::getline(lines, line)) {
    if (line.rfind("delta,", 0) == 0) CHECK(line.substr(line.size() - 6) == ",0,0,0");
  }

  REQUIRE(run_fit(ws.config("other.ini", "gva", "", "other.csv"), ws.root / "other") == kExitOk);
  std::ostringstream o2, e2;
  CHECK(cmd_compare({dirs[0], (ws.root / "other").string()}, std::nullopt, o2, e2) == kExitConfig);
  CHECK(cmd_compare({dirs[0]}, std::nullopt, o2, e2) == kExitConfig);
}

TEST_CASE("check") {
  Workspace ws;
  std::ostringstream out, err;
  CheckArgs args;
  args.config = ws.config("ok.ini", "sdgm_sas");
  args.instances = 2;
  CHECK(cmd_check(args, out, err) == kExitOk);
  args.corrupt_gradient = true;
  CHECK(cmd_check(args, out, err) == kExitCheckFailed);
  args.corrupt_gradient = false;
  const fs::path t = ws.root / "tprior.ini";
  spit(t, "[model]\ndata = data.csv\nre_prior = t\ndf = 0\n");
  args.config = t.string();
  CHECK(cmd_check(args, out, err) == kExitConfig);
}

TEST_CASE("synth") {
  Workspace ws;
  std::ostringstream out, err;
  SynthArgs s;
  s.kind = "epilepsy";
  s.out = (ws.root / "e.csv").string();
  REQUIRE(cmd_synth(s, out, err) == kExitOk);
  const CsvTable t = read_csv(s.out);
  CHECK(t.rows.size() == 59 * 4);
  CHECK(fs::exists(s.out + ".truth.json"));
  const std::string first = slurp(s.out);
  REQUIRE(cmd_synth(s, out, err) == kExitOk);
  CHECK(slurp(s.out) == first);
  s.kind = "nope";
  CHECK(cmd_synth(s, out, err) == kExitConfig);
}

#include "sdgm/app/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/json_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "sdgm/app/csv.hpp"
#include "sdgm/error.hpp"
#include "sdgm/format.hpp"

namespace sdgm::app {

namespace {

namespace fs = std::filesystem;
using boost::property_tree::ptree;

std::string trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return std::string(s);
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string join(const std::vector<std::string>& items, const std::string& sep) {
  std::string out;
  for (std::size_t k = 0; k < items.size(); ++k) out += (k ? sep : "") + items[k];
  return out;
}

double to_double(const std::string& field, const std::string& text) {
  double x = 0.0;
  if (!parse_double(text, x) || !std::isfinite(x)) throw ConfigError(field + ": '" + text + "' is not a finite number");
  return x;
}

std::uint64_t to_uint(const std::string& field, const std::string& text) {
  const std::string t = trim(text);
  std::uint64_t x = 0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), x);
  if (t.empty() || res.ec != std::errc() || res.ptr != t.data() + t.size()) {
    throw ConfigError(field + ": '" + text + "' is not a nonnegative integer");
  }
  return x;
}

std::size_t to_count(const std::string& field, const std::string& text) {
  const std::uint64_t x = to_uint(field, text);
  if (x < 1) throw ConfigError(field + ": must be >= 1");
  return static_cast<std::size_t>(x);
}

double to_positive(const std::string& field, const std::string& text) {
  const double x = to_double(field, text);
  if (!(x > 0.0)) throw ConfigError(field + ": must be positive");
  return x;
}

bool is_identifier(const std::string& s) {
  if (s.empty() || std::isdigit(static_cast<unsigned char>(s[0]))) return false;
  for (char c : s) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '.') return false;
  }
  return true;
}

// name = a + b * col - col2 ...
Derivation parse_derivation(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos) throw ConfigError("model.derive: '" + text + "' lacks '='");
  Derivation d;
  d.name = trim(text.substr(0, eq));
  if (!is_identifier(d.name)) throw ConfigError("model.derive: bad column name '" + d.name + "'");
  std::string rhs = text.substr(eq + 1);
  // Split into signed terms, keeping exponent signs (1e-3) attached.
  std::vector<std::string> terms;
  std::string cur;
  for (std::size_t i = 0; i < rhs.size(); ++i) {
    const char c = rhs[i];
    const bool exponent = i > 0 && (rhs[i - 1] == 'e' || rhs[i - 1] == 'E') && i > 1 &&
                          std::isdigit(static_cast<unsigned char>(rhs[i - 2]));
    const bool operand = trim(cur).find_first_not_of("+- ") != std::string::npos;
    if ((c == '+' || c == '-') && !exponent && operand) {
      terms.push_back(trim(cur));
      cur.clear();
    }
    cur += c;
  }
  if (!trim(cur).empty()) terms.push_back(trim(cur));
  if (terms.empty()) throw ConfigError("model.derive: empty expression for '" + d.name + "'");
  for (std::string term : terms) {
    double sign = 1.0;
    while (!term.empty() && (term[0] == '+' || term[0] == '-')) {
      if (term[0] == '-') sign = -sign;
      term = trim(term.substr(1));
    }
    const auto star = term.find('*');
    std::string coef_text = "1";
    std::string column;
    if (star == std::string::npos) {
      double x = 0.0;
      if (parse_double(term, x)) {
        d.offset += sign * x;
        continue;
      }
      column = term;
    } else {
      std::string a = trim(term.substr(0, star));
      std::string b = trim(term.substr(star + 1));
      double x = 0.0;
      if (parse_double(a, x)) {
        coef_text = a;
        column = b;
      } else {
        coef_text = b;
        column = a;
      }
    }
    if (!is_identifier(column)) throw ConfigError("model.derive: '" + term + "' is not an affine term");
    d.terms.emplace_back(column, sign * to_double("model.derive", coef_text));
  }
  return d;
}

std::string derivation_text(const Derivation& d) {
  std::string out = d.name + " = " + format_double(d.offset);
  for (const auto& [col, coef] : d.terms) {
    out += (coef < 0.0 ? " - " : " + ") + format_double(std::abs(coef)) + " * " + col;
  }
  return out;
}

std::vector<Phase> parse_phases(const std::string& text) {
  std::vector<Phase> out;
  for (const std::string& item : split(text, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw ConfigError("optimizer.phases: expected 'iterations:scale', got '" + item + "'");
    out.push_back({to_count("optimizer.phases", item.substr(0, colon)),
                   to_positive("optimizer.phases", item.substr(colon + 1))});
  }
  if (out.empty()) throw ConfigError("optimizer.phases: no phases given");
  return out;
}

std::vector<StageConfig> parse_stages(const std::string& text) {
  std::vector<StageConfig> out;
  for (const std::string& item : split(text, ';')) {
    const auto colon = item.rfind(':');
    if (colon == std::string::npos) throw ConfigError("optimizer.stages: expected 'blocks:iterations', got '" + item + "'");
    StageConfig stage;
    stage.iterations = to_count("optimizer.stages", item.substr(colon + 1));
    for (const std::string& name : split(item.substr(0, colon), ',')) {
      if (name == "none") continue;
      try {
        stage.frozen.push_back(parse_block(name));
      } catch (const ConfigError& e) {
        throw ConfigError(std::string("optimizer.stages: ") + e.what());
      }
    }
    out.push_back(std::move(stage));
  }
  return out;
}

std::array<double, kBlockCount> parse_multipliers(const std::string& text) {
  std::array<double, kBlockCount> out{1.0, 1.0, 1.0, 1.0, 1.0};
  for (const std::string& item : split(text, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw ConfigError("optimizer.multipliers: expected 'block:factor', got '" + item + "'");
    Block b;
    try {
      b = parse_block(trim(item.substr(0, colon)));
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("optimizer.multipliers: ") + e.what());
    }
    const double m = to_double("optimizer.multipliers", item.substr(colon + 1));
    if (m < 0.0) throw ConfigError("optimizer.multipliers: factors must be nonnegative");
    out[static_cast<std::size_t>(b)] = m;
  }
  return out;
}

using Section = std::map<std::string, std::string>;

std::map<std::string, Section> sections_of(const ptree& root) {
  static const std::set<std::string> known{"model", "family", "optimizer", "output"};
  std::map<std::string, Section> out;
  for (const auto& [name, child] : root) {
    if (!known.contains(name)) throw ConfigError("unknown config section '" + name + "'");
    Section& sec = out[name];
    for (const auto& [key, value] : child) {
      if (!value.empty()) throw ConfigError(name + "." + key + ": nested values are not allowed");
      sec[key] = value.data();
    }
  }
  return out;
}

class Reader {
 public:
  Reader(std::string section, Section values) : section_(std::move(section)), values_(std::move(values)) {}

  bool take(const std::string& key, std::string& out) {
    const auto it = values_.find(key);
    if (it == values_.end()) return false;
    out = trim(it->second);
    values_.erase(it);
    return true;
  }
  std::string field(const std::string& key) const { return section_ + "." + key; }

  void finish() const {
    if (!values_.empty()) throw ConfigError("unknown config key '" + field(values_.begin()->first) + "'");
  }

 private:
  std::string section_;
  Section values_;
};

RunConfig from_sections(std::map<std::string, Section> sections, const std::string& base_dir) {
  RunConfig cfg;
  std::string v;

  Reader m("model", sections["model"]);
  if (m.take("kind", v)) {
    if (v != "glmm" && v != "sv") throw ConfigError("model.kind: unknown model '" + v + "' (expected glmm or sv)");
    cfg.model.kind = v;
  }
  if (!m.take("data", v) || v.empty()) throw ConfigError("model.data: a data file is required");
  fs::path data(v);
  if (data.is_relative() && !base_dir.empty()) data = fs::path(base_dir) / data;
  cfg.model.data = fs::absolute(data).lexically_normal().string();
  if (m.take("response", v)) cfg.model.response = v;
  if (m.take("group", v)) cfg.model.group = v;
  if (m.take("fixed", v)) cfg.model.fixed = split(v, ',');
  if (m.take("random", v)) cfg.model.random = split(v, ',');
  if (m.take("response_kind", v)) {
    if (v == "bernoulli" || v == "bernoulli_logit") {
      cfg.model.response_kind = ResponseKind::bernoulli_logit;
    } else if (v == "poisson" || v == "poisson_log") {
      cfg.model.response_kind = ResponseKind::poisson_log;
    } else {
      throw ConfigError("model.response_kind: unknown response '" + v + "' (expected bernoulli or poisson)");
    }
  }
  if (m.take("re_prior", v)) {
    if (v == "normal") {
      cfg.model.re_prior = RandomEffectPrior::normal;
    } else if (v == "t" || v == "student_t") {
      cfg.model.re_prior = RandomEffectPrior::student_t;
    } else {
      throw ConfigError("model.re_prior: unknown prior '" + v + "' (expected normal or t)");
    }
  }
  if (m.take("df", v)) cfg.model.df = to_positive(m.field("df"), v);
  if (m.take("beta_prior_sd", v)) cfg.model.beta_prior_sd = to_positive(m.field("beta_prior_sd"), v);
  if (m.take("hyper_prior_sd", v)) cfg.model.hyper_prior_sd = to_positive(m.field("hyper_prior_sd"), v);
  if (m.take("prior_variance", v)) cfg.model.prior_variance = to_positive(m.field("prior_variance"), v);
  if (m.take("derive", v)) {
    for (const std::string& item : split(v, ';')) cfg.model.derive.push_back(parse_derivation(item));
  }
  m.finish();
  if (cfg.model.kind == "glmm" && (cfg.model.fixed.empty() || cfg.model.random.empty())) {
    throw ConfigError("model.fixed / model.random: at least one column each is required");
  }

  Reader f("family", sections["family"]);
  if (f.take("kind", v)) cfg.family = parse_family(v);
  f.finish();

  Reader o("optimizer", sections["optimizer"]);
  OptimizerConfig& opt = cfg.optimizer;
  bool iters_given = false;
  if (o.take("iters", v)) {
    opt.iters = to_count(o.field("iters"), v);
    iters_given = true;
  }
  if (o.take("mc_samples", v)) opt.mc_samples = to_count(o.field("mc_samples"), v);
  if (o.take("rule", v)) {
    if (v == "adam") {
      opt.rule = StepRule::adam;
    } else if (v == "plain" || v == "sgd") {
      opt.rule = StepRule::plain;
    } else {
      throw ConfigError("optimizer.rule: unknown rule '" + v + "' (expected adam or plain)");
    }
  }
  if (o.take("rate", v)) opt.rate = to_positive(o.field("rate"), v);
  if (o.take("anneal_first", v)) opt.anneal_first = to_count(o.field("anneal_first"), v);
  if (o.take("anneal_every", v)) opt.anneal_every = to_count(o.field("anneal_every"), v);
  if (o.take("phases", v) && !v.empty()) opt.phases = parse_phases(v);
  if (o.take("beta1", v)) opt.beta1 = to_double(o.field("beta1"), v);
  if (o.take("beta2", v)) opt.beta2 = to_double(o.field("beta2"), v);
  if (o.take("epsilon", v)) opt.epsilon = to_positive(o.field("epsilon"), v);
  if (o.take("seed", v)) opt.seed = to_uint(o.field("seed"), v);
  if (o.take("multipliers", v)) opt.multipliers = parse_multipliers(v);
  if (o.take("stages", v) && !v.empty()) opt.stages = parse_stages(v);
  if (o.take("warm_start", v)) opt.warm_start = static_cast<std::size_t>(to_uint(o.field("warm_start"), v));
  if (o.take("divergence_factor", v)) opt.divergence_factor = to_double(o.field("divergence_factor"), v);
  o.finish();
  if (!(opt.beta1 >= 0.0 && opt.beta1 < 1.0)) throw ConfigError("optimizer.beta1: must lie in [0, 1)");
  if (!(opt.beta2 >= 0.0 && opt.beta2 < 1.0)) throw ConfigError("optimizer.beta2: must lie in [0, 1)");
  if (!opt.stages.empty()) {
    std::size_t total = 0;
    for (const StageConfig& s : opt.stages) total += s.iterations;
    if (iters_given && total != opt.iters) {
      throw ConfigError("optimizer.iters: " + std::to_string(opt.iters) + " disagrees with the stage total " +
                        std::to_string(total));
    }
    opt.iters = total;
  }
  if (opt.warm_start > 0 && cfg.family == FamilyKind::gva) {
    throw ConfigError("optimizer.warm_start: a GVA warm start needs a non-GVA family");
  }

  Reader out("output", sections["output"]);
  if (out.take("dir", v)) cfg.output.dir = v;
  if (out.take("thin", v)) cfg.output.thin = to_count(out.field("thin"), v);
  if (out.take("window", v)) cfg.output.window = to_count(out.field("window"), v);
  if (out.take("summary_samples", v)) {
    cfg.output.summary_samples = static_cast<std::size_t>(to_uint(out.field("summary_samples"), v));
    if (cfg.output.summary_samples < 2) throw ConfigError("output.summary_samples: must be >= 2");
  }
  out.finish();
  return cfg;
}

void apply_derivations(CsvTable& table, const std::vector<Derivation>& derive) {
  for (const Derivation& d : derive) {
    for (const std::string& h : table.header) {
      if (h == d.name) throw ConfigError("model.derive: column '" + d.name + "' already exists");
    }
    std::vector<std::vector<double>> sources;
    for (const auto& [col, coef] : d.terms) sources.push_back(table.numeric(col));
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
      double x = d.offset;
      for (std::size_t k = 0; k < d.terms.size(); ++k) x += d.terms[k].second * sources[k][i];
      table.rows[i].push_back(format_double(x));
    }
    table.header.push_back(d.name);
  }
}

Matrix design(const CsvTable& table, const std::vector<std::string>& columns, std::vector<std::string>& names) {
  Matrix out(static_cast<Eigen::Index>(table.rows.size()), static_cast<Eigen::Index>(columns.size()));
  for (std::size_t k = 0; k < columns.size(); ++k) {
    if (columns[k] == "1") {
      out.col(static_cast<Eigen::Index>(k)).setOnes();
      names.emplace_back("(Intercept)");
      continue;
    }
    const std::vector<double> x = table.numeric(columns[k]);
    out.col(static_cast<Eigen::Index>(k)) = Eigen::Map<const Vector>(x.data(), static_cast<Eigen::Index>(x.size()));
    names.push_back(columns[k]);
  }
  return out;
}

}  // namespace

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

RunConfig parse_config(const std::string& text, const std::string& format, const std::string& base_dir) {
  ptree root;
  std::istringstream in(text);
  try {
    if (format == "json") {
      boost::property_tree::read_json(in, root);
      if (const auto embedded = root.get_child_optional("config")) {
        const ptree inner = *embedded;
        root = inner;
      }
    } else {
      boost::property_tree::read_ini(in, root);
    }
  } catch (const boost::property_tree::ptree_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return from_sections(sections_of(root), base_dir);
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream text;
  text << in.rdbuf();
  const std::string body = text.str();
  const std::string first = trim(body.substr(0, std::min<std::size_t>(body.size(), 64)));
  const bool json = fs::path(path).extension() == ".json" || (!first.empty() && first[0] == '{');
  return parse_config(body, json ? "json" : "ini", fs::path(path).parent_path().string());
}

nlohmann::json config_to_json(const RunConfig& cfg) {
  using nlohmann::json;
  const ModelConfig& m = cfg.model;
  std::vector<std::string> derive;
  for (const Derivation& d : m.derive) derive.push_back(derivation_text(d));
  json model = {{"kind", m.kind},
                {"data", m.data},
                {"response", m.response},
                {"prior_variance", format_double(m.prior_variance)}};
  if (m.kind == "glmm") {
    model["group"] = m.group;
    model["fixed"] = join(m.fixed, ",");
    model["random"] = join(m.random, ",");
    model["response_kind"] = m.response_kind == ResponseKind::bernoulli_logit ? "bernoulli" : "poisson";
    model["re_prior"] = m.re_prior == RandomEffectPrior::normal ? "normal" : "t";
    model["df"] = format_double(m.df);
    model["beta_prior_sd"] = format_double(m.beta_prior_sd);
    model["hyper_prior_sd"] = format_double(m.hyper_prior_sd);
    model["derive"] = join(derive, "; ");
    model.erase("prior_variance");
  }

  const OptimizerConfig& o = cfg.optimizer;
  std::vector<std::string> phases;
  for (const Phase& p : o.phases) phases.push_back(std::to_string(p.iterations) + ":" + format_double(p.step_scale));
  std::vector<std::string> multipliers;
  for (std::size_t b = 0; b < kBlockCount; ++b) {
    multipliers.push_back(std::string(to_string(static_cast<Block>(b))) + ":" + format_double(o.multipliers[b]));
  }
  std::vector<std::string> stages;
  for (const StageConfig& s : o.stages) {
    std::vector<std::string> names;
    for (Block b : s.frozen) names.emplace_back(to_string(b));
    stages.push_back((names.empty() ? std::string("none") : join(names, ",")) + ":" + std::to_string(s.iterations));
  }
  json optimizer = {{"iters", std::to_string(o.iters)},
                    {"mc_samples", std::to_string(o.mc_samples)},
                    {"rule", o.rule == StepRule::adam ? "adam" : "plain"},
                    {"rate", format_double(o.rate)},
                    {"anneal_first", std::to_string(o.anneal_first)},
                    {"anneal_every", std::to_string(o.anneal_every)},
                    {"phases", join(phases, ",")},
                    {"beta1", format_double(o.beta1)},
                    {"beta2", format_double(o.beta2)},
                    {"epsilon", format_double(o.epsilon)},
                    {"seed", std::to_string(o.seed)},
                    {"multipliers", join(multipliers, ",")},
                    {"stages", join(stages, "; ")},
                    {"warm_start", std::to_string(o.warm_start)},
                    {"divergence_factor", format_double(o.divergence_factor)}};
  json output = {{"dir", cfg.output.dir},
                 {"thin", std::to_string(cfg.output.thin)},
                 {"window", std::to_string(cfg.output.window)},
                 {"summary_samples", std::to_string(cfg.output.summary_samples)}};
  return {{"model", model}, {"family", {{"kind", std::string(to_string(cfg.family))}}}, {"optimizer", optimizer},
          {"output", output}};
}

std::string config_hash(const RunConfig& config) { return fnv1a_hex(config_to_json(config).dump()); }

LoadedModel build_model(const ModelConfig& cfg) {
  CsvTable table = read_csv(cfg.data);
  apply_derivations(table, cfg.derive);
  LoadedModel out;
  std::string fingerprint = cfg.kind + "\n";

  if (cfg.kind == "sv") {
    SvSpec spec{table.numeric(cfg.response), cfg.prior_variance};
    fingerprint += "prior_variance=" + format_double(spec.prior_variance) + "\n";
    for (const double y : spec.y) fingerprint += format_double(y) + "\n";
    out.model = std::make_unique<SvModel>(std::move(spec));
    out.hash = fnv1a_hex(fingerprint);
    return out;
  }

  GlmmSpec spec;
  spec.response = cfg.response_kind;
  spec.re_prior = cfg.re_prior;
  spec.df = cfg.df;
  spec.beta_prior_sd = cfg.beta_prior_sd;
  spec.hyper_prior_sd = cfg.hyper_prior_sd;
  GlmmData& data = spec.data;
  data.y = table.numeric(cfg.response);
  const std::size_t gcol = table.column(cfg.group);
  std::map<std::string, std::size_t> ids;
  for (const auto& row : table.rows) {
    const auto [it, inserted] = ids.emplace(row[gcol], ids.size());
    data.group.push_back(it->second);
  }
  data.n_groups = ids.size();
  data.x = design(table, cfg.fixed, data.fixed_names);
  data.z = design(table, cfg.random, data.random_names);

  fingerprint += std::string(cfg.response_kind == ResponseKind::bernoulli_logit ? "bernoulli" : "poisson") + "\n";
  fingerprint += std::string(cfg.re_prior == RandomEffectPrior::normal ? "normal" : "t") + " df=" +
                 format_double(cfg.df) + " beta_sd=" + format_double(cfg.beta_prior_sd) +
                 " hyper_sd=" + format_double(cfg.hyper_prior_sd) + "\n";
  fingerprint += join(data.fixed_names, ",") + "|" + join(data.random_names, ",") + "\n";
  for (std::size_t i = 0; i < data.y.size(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    fingerprint += std::to_string(data.group[i]) + "," + format_double(data.y[i]);
    for (Eigen::Index k = 0; k < data.x.cols(); ++k) fingerprint += "," + format_double(data.x(ii, k));
    for (Eigen::Index k = 0; k < data.z.cols(); ++k) fingerprint += "," + format_double(data.z(ii, k));
    fingerprint += "\n";
  }
  out.model = std::make_unique<GlmmModel>(std::move(spec));
  out.hash = fnv1a_hex(fingerprint);
  return out;
}

Schedule make_schedule(const OptimizerConfig& cfg) {
  Schedule s = cfg.phases.empty() ? Schedule::annealed(cfg.iters, cfg.rate, cfg.anneal_first, cfg.anneal_every)
                                  : Schedule{};
  if (!cfg.phases.empty()) s.phases = cfg.phases;
  s.rule = cfg.rule;
  s.beta1 = cfg.beta1;
  s.beta2 = cfg.beta2;
  s.epsilon = cfg.epsilon;
  s.block_multipliers = cfg.multipliers;
  s.validate();
  return s;
}

FitOptions make_fit_options(const RunConfig& cfg) {
  FitOptions o;
  o.iterations = cfg.optimizer.iters;
  o.mc_samples = cfg.optimizer.mc_samples;
  o.seed = cfg.optimizer.seed;
  o.thin = cfg.output.thin;
  o.window = cfg.output.window;
  o.divergence_factor = cfg.optimizer.divergence_factor;
  return o;
}

}  // namespace sdgm::app

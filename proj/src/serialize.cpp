#include "sdgm/serialize.hpp"

#include <variant>

#include "sdgm/error.hpp"

namespace sdgm {

namespace {

using nlohmann::json;

json vector_json(const Vector& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

Vector vector_from(const json& j, const char* key, std::size_t dim) {
  if (!j.contains(key) || !j.at(key).is_array()) throw ConfigError(std::string("params: missing array '") + key + "'");
  const auto values = j.at(key).get<std::vector<double>>();
  if (values.size() != dim) throw ConfigError(std::string("params: array '") + key + "' has the wrong length");
  return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

json factor_json(const UnitLowerSparse& L) {
  return json(std::vector<double>(L.values().begin(), L.values().end()));
}

UnitLowerSparse factor_from(const json& j, const SparsityPattern& pattern) {
  if (!j.contains("L") || !j.at("L").is_array()) throw ConfigError("params: missing array 'L'");
  auto values = j.at("L").get<std::vector<double>>();
  if (values.size() != pattern.nnz()) throw ConfigError("params: 'L' length does not match the pattern");
  return UnitLowerSparse(pattern, std::move(values));
}

}  // namespace

json pattern_to_json(const SparsityPattern& pattern) {
  return {{"n_blocks", pattern.n_blocks()},
          {"block_dims", pattern.block_dims()},
          {"global_dim", pattern.global_dim()},
          {"markov_order", pattern.markov_order()}};
}

SparsityPattern pattern_from_json(const json& j) {
  try {
    return SparsityPattern::build(j.at("n_blocks").get<std::size_t>(),
                                  j.at("block_dims").get<std::vector<std::size_t>>(),
                                  j.at("global_dim").get<std::size_t>(), j.at("markov_order").get<int>());
  } catch (const json::exception& e) {
    throw ConfigError(std::string("params: bad pattern descriptor: ") + e.what());
  }
}

json params_to_json(const VariationalParams& params) {
  json j;
  j["family"] = std::string(to_string(params.kind));
  j["pattern"] = pattern_to_json(params.pattern());
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, DirectParams>) {
          j["mu"] = vector_json(p.mu);
          j["alpha"] = vector_json(p.alpha);
          j["log_kappa"] = vector_json(p.log_kappa);
        } else {
          j["xi"] = vector_json(p.xi);
          j["alpha"] = vector_json(p.alpha);
          j["log_nu"] = vector_json(p.log_nu);
        }
        j["L"] = factor_json(p.L);
        if constexpr (std::is_same_v<T, CopulaParams>) {
          json gamma = json::array();
          for (const SasParams& g : p.gamma) gamma.push_back({g.epsilon, g.log_delta});
          j["gamma"] = std::move(gamma);
        }
      },
      params.value);
  return j;
}

VariationalParams params_from_json(const json& j) {
  try {
    if (!j.is_object()) throw ConfigError("params: document must be an object");
    const FamilyKind kind = parse_family(j.at("family").get<std::string>());
    const SparsityPattern pattern = pattern_from_json(j.at("pattern"));
    const std::size_t p = pattern.dim();
    VariationalParams out;
    out.kind = kind;
    if (is_copula(kind)) {
      CopulaParams c{vector_from(j, "xi", p), vector_from(j, "log_nu", p), vector_from(j, "alpha", p),
                     factor_from(j, pattern), {}};
      const json& gamma = j.at("gamma");
      if (!gamma.is_array() || gamma.size() != p) throw ConfigError("params: 'gamma' must hold one pair per coordinate");
      for (const json& pair : gamma) {
        if (!pair.is_array() || pair.size() != 2) throw ConfigError("params: gamma entries are [epsilon, log_delta]");
        c.gamma.push_back({pair[0].get<double>(), pair[1].get<double>()});
      }
      out.value = std::move(c);
    } else if (kind == FamilyKind::sdgm_c) {
      out.value = CenteredParams{vector_from(j, "xi", p), vector_from(j, "alpha", p), vector_from(j, "log_nu", p),
                                 factor_from(j, pattern)};
    } else {
      out.value = DirectParams{vector_from(j, "mu", p), vector_from(j, "alpha", p), vector_from(j, "log_kappa", p),
                               factor_from(j, pattern)};
    }
    if (!all_finite(out)) throw ConfigError("params: non-finite parameter value");
    return out;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("params: ") + e.what());
  }
}

std::string params_to_string(const VariationalParams& params) { return params_to_json(params).dump(2) + "\n"; }

VariationalParams params_from_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("params: ") + e.what());
  }
  return params_from_json(j);
}

}  // namespace sdgm

#pragma once

#include <string>

#include "json.hpp"

#include "sdgm/variational.hpp"

namespace sdgm {

/// {"n_blocks", "block_dims", "global_dim", "markov_order"}.
nlohmann::json pattern_to_json(const SparsityPattern& pattern);
SparsityPattern pattern_from_json(const nlohmann::json& j);

/// Family tag, pattern descriptor and one array per parameter block; gamma is
/// a list of [epsilon, log_delta] pairs. Doubles are written in shortest
/// round-trip form, so params_from_json(params_to_json(x)) == x bit for bit.
nlohmann::json params_to_json(const VariationalParams& params);
/// Throws ConfigError on a malformed document.
VariationalParams params_from_json(const nlohmann::json& j);

std::string params_to_string(const VariationalParams& params);
VariationalParams params_from_string(const std::string& text);

}  // namespace sdgm

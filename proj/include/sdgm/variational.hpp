#pragma once

#include <array>
#include <set>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include "sdgm/families.hpp"

namespace sdgm {

/// The five approximation methods. GVA and GVA+SAS are the SDGM and copula
/// families with the skewness block pinned at zero.
enum class FamilyKind { gva, sdgm, sdgm_c, sdgm_sas, gva_sas };

std::string_view to_string(FamilyKind kind);
/// Throws ConfigError naming the accepted values.
FamilyKind parse_family(std::string_view name);
bool skew_frozen(FamilyKind kind);
bool is_copula(FamilyKind kind);

/// Parameter blocks shared by all families, in flat-vector order:
/// location (mu or xi), skew (alpha), scale (log kappa or log nu),
/// factor (free entries of L), transform (SAS (epsilon, log delta) pairs).
enum class Block { location = 0, skew, scale, factor, transform };
inline constexpr std::size_t kBlockCount = 5;

std::string_view to_string(Block block);
Block parse_block(std::string_view name);

struct BlockRange {
  Block block;
  std::size_t offset;
  std::size_t size;
};

using ParamVariant = std::variant<DirectParams, CenteredParams, CopulaParams>;

/// Family-tagged parameter bundle. Gradient bundles use the same type.
struct VariationalParams {
  FamilyKind kind = FamilyKind::gva;
  ParamVariant value;

  std::size_t dim() const;
  const SparsityPattern& pattern() const;
  const UnitLowerSparse& factor() const;
  Vector skew() const;
};

/// Starting point: location as given, alpha = 0, unit scales, L = I, identity transforms.
VariationalParams initial_params(FamilyKind kind, const SparsityPattern& pattern, const Vector& location,
                                 double log_scale = 0.0);

/// Re-expresses a Gaussian (alpha = 0 direct) solution in another family so
/// that it defines exactly the same distribution and the same sampling map.
VariationalParams warm_start_from_gva(FamilyKind kind, const DirectParams& gva);

Vector sample(const VariationalParams& params, const NoiseDraw& noise);
double log_density(const VariationalParams& params, const Vector& theta);
Vector grad_theta(const VariationalParams& params, const Vector& theta);
VariationalParams jvp(const VariationalParams& params, const NoiseDraw& noise, const Vector& z);

std::vector<BlockRange> block_layout(const VariationalParams& params);
Vector flatten(const VariationalParams& params);
/// Rebuilds a bundle shaped like `like` from flat values.
VariationalParams unflatten(const VariationalParams& like, std::span<const double> flat);

bool all_finite(const VariationalParams& params);

}  // namespace sdgm

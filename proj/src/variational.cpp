#include "sdgm/variational.hpp"

#include <string>

#include "sdgm/error.hpp"

namespace sdgm {

namespace {

constexpr std::array<std::pair<FamilyKind, std::string_view>, 5> kFamilyNames{{
    {FamilyKind::gva, "gva"},
    {FamilyKind::sdgm, "sdgm"},
    {FamilyKind::sdgm_c, "sdgm_c"},
    {FamilyKind::sdgm_sas, "sdgm_sas"},
    {FamilyKind::gva_sas, "gva_sas"},
}};

constexpr std::array<std::string_view, kBlockCount> kBlockNames{"location", "skew", "scale", "factor",
                                                                "transform"};

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

void append(std::vector<double>& out, const Vector& v) { out.insert(out.end(), v.data(), v.data() + v.size()); }

void append(std::vector<double>& out, std::span<const double> v) { out.insert(out.end(), v.begin(), v.end()); }

class Reader {
 public:
  explicit Reader(std::span<const double> flat) : flat_(flat) {}

  Vector vector(std::size_t n) {
    take(n);
    return Eigen::Map<const Vector>(flat_.data() + pos_ - n, static_cast<Eigen::Index>(n));
  }

  UnitLowerSparse factor(const SparsityPattern& pattern) {
    const std::size_t n = pattern.nnz();
    take(n);
    return UnitLowerSparse(pattern, std::vector<double>(flat_.begin() + static_cast<std::ptrdiff_t>(pos_ - n),
                                                        flat_.begin() + static_cast<std::ptrdiff_t>(pos_)));
  }

  std::vector<SasParams> transforms(std::size_t p) {
    take(2 * p);
    std::vector<SasParams> out(p);
    for (std::size_t k = 0; k < p; ++k) out[k] = {flat_[pos_ - 2 * p + 2 * k], flat_[pos_ - 2 * p + 2 * k + 1]};
    return out;
  }

  void finish() const { check_dim(pos_, flat_.size(), "flat parameter vector"); }

 private:
  void take(std::size_t n) {
    if (pos_ + n > flat_.size()) throw DimensionError("flat parameter vector too short");
    pos_ += n;
  }

  std::span<const double> flat_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string_view to_string(FamilyKind kind) {
  for (const auto& [k, name] : kFamilyNames) {
    if (k == kind) return name;
  }
  return "unknown";
}

FamilyKind parse_family(std::string_view name) {
  for (const auto& [k, n] : kFamilyNames) {
    if (n == name) return k;
  }
  throw ConfigError("family.kind: unknown family '" + std::string(name) +
                    "' (expected gva, sdgm, sdgm_c, sdgm_sas or gva_sas)");
}

bool skew_frozen(FamilyKind kind) { return kind == FamilyKind::gva || kind == FamilyKind::gva_sas; }

bool is_copula(FamilyKind kind) { return kind == FamilyKind::sdgm_sas || kind == FamilyKind::gva_sas; }

std::string_view to_string(Block block) { return kBlockNames[static_cast<std::size_t>(block)]; }

Block parse_block(std::string_view name) {
  for (std::size_t k = 0; k < kBlockCount; ++k) {
    if (kBlockNames[k] == name) return static_cast<Block>(k);
  }
  // Accept the parameter symbols as aliases.
  if (name == "mu" || name == "xi") return Block::location;
  if (name == "alpha") return Block::skew;
  if (name == "kappa" || name == "nu" || name == "log_kappa" || name == "log_nu") return Block::scale;
  if (name == "L") return Block::factor;
  if (name == "gamma") return Block::transform;
  throw ConfigError("unknown parameter block '" + std::string(name) + "'");
}

std::size_t VariationalParams::dim() const {
  return std::visit([](const auto& p) { return p.dim(); }, value);
}

const UnitLowerSparse& VariationalParams::factor() const {
  return std::visit([](const auto& p) -> const UnitLowerSparse& { return p.L; }, value);
}

const SparsityPattern& VariationalParams::pattern() const { return factor().pattern(); }

Vector VariationalParams::skew() const {
  return std::visit([](const auto& p) -> Vector { return p.alpha; }, value);
}

VariationalParams initial_params(FamilyKind kind, const SparsityPattern& pattern, const Vector& location,
                                 double log_scale) {
  check_dim(static_cast<std::size_t>(location.size()), pattern.dim(), "initial location");
  const auto p = static_cast<Eigen::Index>(pattern.dim());
  const Vector zeros = Vector::Zero(p);
  const Vector scale = Vector::Constant(p, log_scale);
  UnitLowerSparse L(pattern);
  switch (kind) {
    case FamilyKind::gva:
    case FamilyKind::sdgm:
      return {kind, DirectParams{location, zeros, -scale, L}};
    case FamilyKind::sdgm_c:
      return {kind, CenteredParams{location, zeros, scale, L}};
    case FamilyKind::sdgm_sas:
    case FamilyKind::gva_sas:
      return {kind, CopulaParams{location, scale, zeros, L, std::vector<SasParams>(pattern.dim())}};
  }
  throw ConfigError("unhandled family");
}

VariationalParams warm_start_from_gva(FamilyKind kind, const DirectParams& gva) {
  if (!(gva.alpha.array() == 0.0).all()) throw ConfigError("warm start requires a Gaussian (alpha = 0) solution");
  switch (kind) {
    case FamilyKind::gva:
    case FamilyKind::sdgm:
      return {kind, gva};
    case FamilyKind::sdgm_c:
      return {kind, params_direct_to_center(gva)};
    case FamilyKind::sdgm_sas:
    case FamilyKind::gva_sas:
      return {kind, centered_as_copula(params_direct_to_center(gva))};
  }
  throw ConfigError("unhandled family");
}

Vector sample(const VariationalParams& params, const NoiseDraw& noise) {
  return std::visit(overloaded{
                        [&](const DirectParams& p) { return sdgm_sample(p, noise); },
                        [&](const CenteredParams& p) { return centered_sample(p, noise); },
                        [&](const CopulaParams& p) { return copula_sample(p, noise); },
                    },
                    params.value);
}

double log_density(const VariationalParams& params, const Vector& theta) {
  return std::visit(overloaded{
                        [&](const DirectParams& p) { return sdgm_log_density(p, theta); },
                        [&](const CenteredParams& p) { return centered_log_density(p, theta); },
                        [&](const CopulaParams& p) { return copula_log_density(p, theta); },
                    },
                    params.value);
}

Vector grad_theta(const VariationalParams& params, const Vector& theta) {
  return std::visit(overloaded{
                        [&](const DirectParams& p) { return sdgm_grad_theta(p, theta); },
                        [&](const CenteredParams& p) { return centered_grad_theta(p, theta); },
                        [&](const CopulaParams& p) { return copula_grad_theta(p, theta); },
                    },
                    params.value);
}

VariationalParams jvp(const VariationalParams& params, const NoiseDraw& noise, const Vector& z) {
  return std::visit(overloaded{
                        [&](const DirectParams& p) { return VariationalParams{params.kind, sdgm_jvp(p, noise, z)}; },
                        [&](const CenteredParams& p) {
                          return VariationalParams{params.kind, centered_jvp(p, noise, z)};
                        },
                        [&](const CopulaParams& p) { return VariationalParams{params.kind, copula_jvp(p, noise, z)}; },
                    },
                    params.value);
}

std::vector<BlockRange> block_layout(const VariationalParams& params) {
  const std::size_t p = params.dim();
  const std::size_t nnz = params.pattern().nnz();
  std::vector<BlockRange> out{{Block::location, 0, p}, {Block::skew, p, p}, {Block::scale, 2 * p, p},
                              {Block::factor, 3 * p, nnz}};
  if (std::holds_alternative<CopulaParams>(params.value)) out.push_back({Block::transform, 3 * p + nnz, 2 * p});
  return out;
}

Vector flatten(const VariationalParams& params) {
  std::vector<double> out;
  std::visit(overloaded{
                 [&](const DirectParams& p) {
                   append(out, p.mu);
                   append(out, p.alpha);
                   append(out, p.log_kappa);
                   append(out, p.L.values());
                 },
                 [&](const CenteredParams& p) {
                   append(out, p.xi);
                   append(out, p.alpha);
                   append(out, p.log_nu);
                   append(out, p.L.values());
                 },
                 [&](const CopulaParams& p) {
                   append(out, p.xi);
                   append(out, p.alpha);
                   append(out, p.log_nu);
                   append(out, p.L.values());
                   for (const auto& g : p.gamma) {
                     out.push_back(g.epsilon);
                     out.push_back(g.log_delta);
                   }
                 },
             },
             params.value);
  return Eigen::Map<Vector>(out.data(), static_cast<Eigen::Index>(out.size()));
}

VariationalParams unflatten(const VariationalParams& like, std::span<const double> flat) {
  Reader in(flat);
  const std::size_t p = like.dim();
  const SparsityPattern& pattern = like.pattern();
  VariationalParams out{like.kind, like.value};
  std::visit(overloaded{
                 [&](DirectParams& d) {
                   d.mu = in.vector(p);
                   d.alpha = in.vector(p);
                   d.log_kappa = in.vector(p);
                   d.L = in.factor(pattern);
                 },
                 [&](CenteredParams& c) {
                   c.xi = in.vector(p);
                   c.alpha = in.vector(p);
                   c.log_nu = in.vector(p);
                   c.L = in.factor(pattern);
                 },
                 [&](CopulaParams& c) {
                   c.xi = in.vector(p);
                   c.alpha = in.vector(p);
                   c.log_nu = in.vector(p);
                   c.L = in.factor(pattern);
                   c.gamma = in.transforms(p);
                 },
             },
             out.value);
  in.finish();
  return out;
}

bool all_finite(const VariationalParams& params) { return flatten(params).allFinite(); }

}  // namespace sdgm

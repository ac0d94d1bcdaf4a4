#pragma once

#include <cstdint>

#include "sdgm/random.hpp"
#include "sdgm/variational.hpp"

namespace sdgm::testing {

/// Random pattern of total dimension <= max_dim: a few blocks plus globals,
/// Markov order 0 or 1.
inline SparsityPattern random_pattern(Rng& rng, int order, std::size_t max_dim = 12) {
  const std::size_t n_blocks = 1 + rng.next() % 4;
  const std::size_t block_dim = 1 + rng.next() % 2;
  std::size_t global = rng.next() % 3;
  while (n_blocks * block_dim + global > max_dim) global = global ? global - 1 : 0;
  return SparsityPattern::build(n_blocks, std::vector<std::size_t>(n_blocks, block_dim), global, order);
}

inline Vector uniform_vector(Rng& rng, std::size_t p, double lo, double hi) {
  Vector v(static_cast<Eigen::Index>(p));
  for (auto& x : v) x = lo + (hi - lo) * rng.uniform();
  return v;
}

inline UnitLowerSparse random_factor(Rng& rng, const SparsityPattern& pattern, double scale = 0.4) {
  std::vector<double> values(pattern.nnz());
  for (double& x : values) x = scale * (2.0 * rng.uniform() - 1.0);
  return UnitLowerSparse(pattern, std::move(values));
}

inline DirectParams random_direct(Rng& rng, const SparsityPattern& pattern) {
  const std::size_t p = pattern.dim();
  return {uniform_vector(rng, p, -1, 1), uniform_vector(rng, p, -3, 3), uniform_vector(rng, p, -0.5, 0.5),
          random_factor(rng, pattern)};
}

inline CenteredParams random_centered(Rng& rng, const SparsityPattern& pattern) {
  const std::size_t p = pattern.dim();
  return {uniform_vector(rng, p, -1, 1), uniform_vector(rng, p, -3, 3), uniform_vector(rng, p, -0.5, 0.5),
          random_factor(rng, pattern)};
}

inline CopulaParams random_copula(Rng& rng, const SparsityPattern& pattern) {
  const std::size_t p = pattern.dim();
  CopulaParams c{uniform_vector(rng, p, -1, 1), uniform_vector(rng, p, -0.5, 0.5), uniform_vector(rng, p, -3, 3),
                 random_factor(rng, pattern), {}};
  for (std::size_t k = 0; k < p; ++k) c.gamma.push_back({0.8 * (2 * rng.uniform() - 1), 0.4 * (2 * rng.uniform() - 1)});
  return c;
}

inline VariationalParams random_params(Rng& rng, FamilyKind kind, const SparsityPattern& pattern) {
  VariationalParams out{kind, {}};
  switch (kind) {
    case FamilyKind::gva: {
      DirectParams d = random_direct(rng, pattern);
      d.alpha.setZero();
      out.value = d;
      break;
    }
    case FamilyKind::sdgm: out.value = random_direct(rng, pattern); break;
    case FamilyKind::sdgm_c: out.value = random_centered(rng, pattern); break;
    case FamilyKind::sdgm_sas: out.value = random_copula(rng, pattern); break;
    case FamilyKind::gva_sas: {
      CopulaParams c = random_copula(rng, pattern);
      c.alpha.setZero();
      out.value = c;
      break;
    }
  }
  return out;
}

inline constexpr FamilyKind kAllFamilies[] = {FamilyKind::gva, FamilyKind::sdgm, FamilyKind::sdgm_c,
                                              FamilyKind::sdgm_sas, FamilyKind::gva_sas};

}  // namespace sdgm::testing

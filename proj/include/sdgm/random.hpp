#pragma once

#include <cstdint>
#include <random>

#include "sdgm/families.hpp"

namespace sdgm {

/// Deterministic generator whose outputs depend only on the seed, not on the
/// standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Independent stream keyed by (seed, a, b); used to give every
  /// (iteration, sample) pair its own noise regardless of evaluation order.
  static Rng substream(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

  /// Uniform on the open interval (0, 1).
  double uniform();
  double normal();
  std::uint64_t next() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  double cached_normal_ = 0.0;
  bool has_cached_ = false;
};

std::uint64_t splitmix64(std::uint64_t x);

Vector normal_vector(Rng& rng, std::size_t p);
NoiseDraw draw_noise(Rng& rng, std::size_t p);

}  // namespace sdgm

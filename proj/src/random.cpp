#include "sdgm/random.hpp"

#include <cmath>
#include <numbers>

namespace sdgm {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Rng Rng::substream(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  return Rng(splitmix64(splitmix64(splitmix64(seed) ^ a) ^ (b * 0xd1b54a32d192ed03ULL)));
}

double Rng::uniform() {
  // 53 random bits, shifted off zero.
  return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
}

double Rng::normal() {
  if (has_cached_) {
    has_cached_ = false;
    return cached_normal_;
  }
  const double radius = std::sqrt(-2.0 * std::log(uniform()));
  const double angle = 2.0 * std::numbers::pi * uniform();
  cached_normal_ = radius * std::sin(angle);
  has_cached_ = true;
  return radius * std::cos(angle);
}

Vector normal_vector(Rng& rng, std::size_t p) {
  Vector out(static_cast<Eigen::Index>(p));
  for (Eigen::Index k = 0; k < out.size(); ++k) out[k] = rng.normal();
  return out;
}

NoiseDraw draw_noise(Rng& rng, std::size_t p) {
  NoiseDraw noise;
  noise.u = normal_vector(rng, p);
  noise.v = normal_vector(rng, p);
  return noise;
}

}  // namespace sdgm

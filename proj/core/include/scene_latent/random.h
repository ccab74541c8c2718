#ifndef SCENE_LATENT_RANDOM_H_
#define SCENE_LATENT_RANDOM_H_

#include <cstdint>
#include <initializer_list>
#include <random>

namespace scene_latent {

// All stochastic stages draw from this engine so a seed pins every result.
using RandomEngine = std::mt19937_64;

// Mixes a base seed with stream indices (splitmix64 finalizer) so that
// per-node, per-walk or per-segment streams are independent of scheduling.
inline std::uint64_t DeriveSeed(std::uint64_t seed,
                                std::initializer_list<std::uint64_t> stream) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  std::uint64_t h = mix(seed);
  for (std::uint64_t s : stream) h = mix(h ^ mix(s));
  return h;
}

// Uniform in [0, 1) with 53 random bits.
inline double UniformUnit(RandomEngine& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double Uniform(RandomEngine& rng, double lo, double hi) {
  return lo + (hi - lo) * UniformUnit(rng);
}

inline double StandardNormal(RandomEngine& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  return dist(rng);
}

}  // namespace scene_latent

#endif  // SCENE_LATENT_RANDOM_H_

#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace metaoed {

using Rng = std::mt19937_64;

// splitmix64 finalizer, used to decorrelate derived seeds.
constexpr std::uint64_t mix_seed(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Independent stream for (seed, stream, substream). Replications use stream = replication index
// so results do not depend on worker count or scheduling.
inline Rng make_stream(std::uint64_t seed, std::uint64_t stream, std::uint64_t substream = 0) {
  const std::uint64_t a = mix_seed(seed);
  const std::uint64_t b = mix_seed(a ^ mix_seed(stream + 0x632be59bd9b4e019ULL));
  const std::uint64_t c = mix_seed(b ^ mix_seed(substream + 0x8cb92ba72f3d8dd7ULL));
  std::seed_seq seq{static_cast<std::uint32_t>(c), static_cast<std::uint32_t>(c >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
  return Rng(seq);
}

inline double standard_normal(Rng& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  return dist(rng);
}

// n standard normal draws from one distribution object, so the paired variate of each
// polar-method step is used rather than discarded.
inline void fill_standard_normal(Rng& rng, double* out, std::size_t n) {
  std::normal_distribution<double> dist(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) out[i] = dist(rng);
}

}  // namespace metaoed

#pragma once

#include <cstdint>
#include <random>

namespace adastoch {

using Rng = std::mt19937_64;

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace detail

// Independent stream for replication `index` of an experiment seeded with `master_seed`.
// Streams depend only on (master_seed, index), never on scheduling.
inline Rng make_stream(std::uint64_t master_seed, std::uint64_t index) {
  const std::uint64_t a = detail::splitmix64(master_seed);
  const std::uint64_t b = detail::splitmix64(a ^ detail::splitmix64(index + 0x632BE59BD9B4E019ULL));
  std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
  return Rng(seq);
}

// 64-bit seed for replication `index`, for APIs that take a seed rather than an Rng.
inline std::uint64_t stream_seed(std::uint64_t master_seed, std::uint64_t index) {
  return detail::splitmix64(detail::splitmix64(master_seed) + detail::splitmix64(~index));
}

// Uniform draw on [0, 1) using the top 53 bits; cheaper than uniform_real_distribution
// and identical across standard libraries.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline bool bernoulli(Rng& rng, double probability) {
  return uniform01(rng) < probability;
}

}  // namespace adastoch

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

// Deterministic draws on top of std::mt19937_64. The standard fully pins the
// engine's output sequence but not the <random> distributions, so every
// mapping from raw 64-bit draws to doubles/ints lives here. All pipeline
// stages must be bit-reproducible given a seed; nothing below may depend on
// implementation-defined behavior.

namespace lbo::rng {

using Engine = std::mt19937_64;

/// FNV-1a over bytes; stable across runs and platforms.
inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// splitmix64-style mix, used to derive stream seeds (per epoch, per run,
/// per record) from one master seed.
inline std::uint64_t seed_mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Uniform double in [0, 1) with 53 random bits.
inline double uniform(Engine& eng) {
  return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

/// Uniform double in [lo, hi).
inline double uniform(Engine& eng, double lo, double hi) {
  return lo + (hi - lo) * uniform(eng);
}

/// Unbiased uniform integer in [0, n). n must be > 0.
inline std::uint64_t below(Engine& eng, std::uint64_t n) {
  const std::uint64_t limit = ~std::uint64_t{0} - ~std::uint64_t{0} % n;
  std::uint64_t r = eng();
  while (r >= limit) r = eng();
  return r % n;
}

/// Standard normal via Box-Muller (no cached second value).
inline double gaussian(Engine& eng) {
  double u1 = uniform(eng);
  if (u1 <= 0.0) u1 = 0x1.0p-53;
  const double u2 = uniform(eng);
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(6.283185307179586476925286766559 * u2);
}

/// Exponential with the given rate (> 0).
inline double exponential(Engine& eng, double rate) {
  double u = uniform(eng);
  if (u <= 0.0) u = 0x1.0p-53;
  return -std::log(u) / rate;
}

/// Fisher-Yates shuffle.
template <typename T>
void shuffle(std::vector<T>& v, Engine& eng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(below(eng, i));
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace lbo::rng

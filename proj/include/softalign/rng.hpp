#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace softalign {

using Rng = std::mt19937_64;

/// 64-bit FNV-1a.
constexpr std::uint64_t fnv1a64(std::string_view bytes,
                                std::uint64_t hash = 0xcbf29ce484222325ULL) {
  for (const char c : bytes) {
    hash ^= static_cast<unsigned char>(c);
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Named derivation of a child seed from the root seed. Streams for different
/// (stage, key) pairs are independent of evaluation order.
constexpr std::uint64_t derive_seed(std::uint64_t root, std::string_view stage,
                                    std::string_view key = {}) {
  std::uint64_t h = fnv1a64(stage);
  h = fnv1a64("\x1f", h);
  h = fnv1a64(key, h);
  return splitmix64(root ^ splitmix64(h));
}

inline Rng make_rng(std::uint64_t root, std::string_view stage, std::string_view key = {}) {
  return Rng(derive_seed(root, stage, key));
}

/// Uniform double in [lo, hi) from the top 53 bits of one draw.
inline double uniform(Rng& rng, double lo, double hi) {
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

}  // namespace softalign

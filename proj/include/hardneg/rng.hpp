#pragma once

#include <cstdint>
#include <numeric>
#include <string_view>
#include <vector>

namespace hardneg {

/// SplitMix64 (Steele, Lea & Flood). Chosen over the standard engines plus
/// <random> distributions because those distributions are
/// implementation-defined; every step here is fixed so permutations are
/// identical on any platform or in any language.
class SplitMix64 {
 public:
  explicit SplitMix64(uint64_t seed) : state_(seed) {}

  uint64_t next() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform integer in [0, bound) by rejection: draws below
  /// 2^64 mod bound are discarded so every residue is equally likely.
  uint64_t below(uint64_t bound) {
    const uint64_t threshold = (0 - bound) % bound;
    for (;;) {
      const uint64_t r = next();
      if (r >= threshold) return r % bound;
    }
  }

 private:
  uint64_t state_;
};

/// Fisher-Yates: for i = n-1 down to 1, swap slot i with slot below(i+1).
inline std::vector<size_t> seeded_permutation(size_t n, uint64_t seed) {
  std::vector<size_t> perm(n);
  std::iota(perm.begin(), perm.end(), size_t{0});
  SplitMix64 rng(seed);
  for (size_t i = n; i > 1; --i) {
    const auto j = static_cast<size_t>(rng.below(i));
    std::swap(perm[i - 1], perm[j]);
  }
  return perm;
}

/// FNV-1a, used only to derive sub-seeds from names.
inline uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline uint64_t derive_seed(uint64_t seed, std::string_view label) {
  return SplitMix64(seed ^ fnv1a64(label)).next();
}

}  // namespace hardneg

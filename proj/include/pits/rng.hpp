#pragma once

#include <cstdint>
#include <functional>

#include <openssl/rand.h>

#include "pits/digest.hpp"

namespace pits {

/// Uniform 64-bit source. A plain callable so tests and the scenario runner
/// can inject seeded generators while production paths use the OS CSPRNG.
using RandomSource = std::function<uint64_t()>;

inline uint64_t os_random_u64() {
  uint64_t v = 0;
  RAND_bytes(reinterpret_cast<unsigned char*>(&v), sizeof v);
  return v;
}

inline RandomSource os_random() { return &os_random_u64; }

/// splitmix64; deterministic across platforms, used for seeded runs.
class SplitMix64 {
 public:
  explicit SplitMix64(uint64_t seed) : state_(seed) {}

  uint64_t operator()() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

 private:
  uint64_t state_;
};

inline RandomSource seeded_random(uint64_t seed) {
  return [g = SplitMix64(seed)]() mutable { return g(); };
}

/// Unbiased draw from [0, bound) by rejection sampling; independent of any
/// library distribution so seeded runs replay identically everywhere.
inline uint64_t uniform_below(RandomSource& rng, uint64_t bound) {
  if (bound == 0) fail(Err::invalid_params, "uniform_below(0)");
  if ((bound & (bound - 1)) == 0) return rng() & (bound - 1);
  uint64_t mask = bound - 1;
  mask |= mask >> 1;
  mask |= mask >> 2;
  mask |= mask >> 4;
  mask |= mask >> 8;
  mask |= mask >> 16;
  mask |= mask >> 32;
  for (;;) {
    uint64_t v = rng() & mask;
    if (v < bound) return v;
  }
}

inline Digest random_digest(RandomSource& rng) {
  Digest d;
  for (std::size_t i = 0; i < kDigestSize; i += 8) {
    uint64_t v = rng();
    std::memcpy(d.bytes.data() + i, &v, 8);
  }
  return d;
}

}  // namespace pits

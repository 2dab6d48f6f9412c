#pragma once
// Seedable, portable random number generation.
//
// The generator is PCG32 (O'Neill's pcg32_random_r): 64-bit LCG state with
// an XSH-RR output permutation. Distinct streams come from the odd increment,
// so (seed, stream) pairs give independent, reproducible sequences. All
// derived draws (uniform doubles, bounded ints, Bernoulli) are defined in
// terms of the raw 32-bit output with plain IEEE arithmetic, so sequences are
// identical across platforms and easy to reimplement in other languages.

#include <cmath>
#include <cstdint>

namespace sgan {

inline uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// One splitmix64 step as a stateless hash.
inline uint64_t hash_u64(uint64_t x) { return splitmix64(x); }

class Pcg32 {
 public:
  explicit Pcg32(uint64_t seed, uint64_t stream = 0) {
    inc_ = (stream << 1u) | 1u;
    state_ = 0;
    next_u32();
    state_ += seed;
    next_u32();
  }

  uint32_t next_u32() {
    uint64_t old = state_;
    state_ = old * 6364136223846793005ULL + inc_;
    uint32_t xorshifted = static_cast<uint32_t>(((old >> 18u) ^ old) >> 27u);
    uint32_t rot = static_cast<uint32_t>(old >> 59u);
    return (xorshifted >> rot) | (xorshifted << ((32u - rot) & 31u));
  }

  // [0, 1) with 32 bits of resolution
  double uniform() { return next_u32() * (1.0 / 4294967296.0); }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // unbiased integer in [0, bound)
  uint32_t next_below(uint32_t bound) {
    uint32_t threshold = (0u - bound) % bound;
    for (;;) {
      uint32_t r = next_u32();
      if (r >= threshold) return r % bound;
    }
  }

  // inclusive range
  int uniform_int(int lo, int hi) {
    return lo + static_cast<int>(next_below(static_cast<uint32_t>(hi - lo + 1)));
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Box-Muller; draws two uniforms per call, returns the cosine branch
  double normal() {
    double u1 = (static_cast<double>(next_u32()) + 1.0) * (1.0 / 4294967296.0);
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    return r * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

 private:
  uint64_t state_;
  uint64_t inc_;
};

}  // namespace sgan

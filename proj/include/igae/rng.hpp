#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace igae {

// Counter-based PRNG: splitmix64 finalizer applied to key + ctr * golden.
// Stateless apart from the counter, so identical (seed, call sequence)
// gives identical output on every platform, and the consumed-draw count
// is directly observable via counter().
class Rng {
 public:
  explicit Rng(uint64_t seed = 0) : key_(mix64(seed ^ 0xA5A5A5A55A5A5A5AULL)) {}

  uint64_t next_u64() { return mix64(key_ + 0x9E3779B97F4A7C15ULL * ++ctr_); }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller; consumes exactly two draws per call.
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  // Integer in [0, n)
  uint64_t next_below(uint64_t n) { return n ? next_u64() % n : 0; }

  // Independent stream keyed by a label; does not consume draws from *this.
  Rng derive(std::string_view label) const {
    uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    for (char c : label) {
      h ^= static_cast<uint8_t>(c);
      h *= 0x100000001b3ULL;
    }
    Rng r;
    r.key_ = mix64(key_ ^ h);
    return r;
  }

  Rng derive(uint64_t salt) const {
    Rng r;
    r.key_ = mix64(key_ ^ mix64(salt + 0x9E3779B97F4A7C15ULL));
    return r;
  }

  uint64_t counter() const { return ctr_; }

 private:
  static uint64_t mix64(uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  uint64_t key_ = 0;
  uint64_t ctr_ = 0;
};

}  // namespace igae

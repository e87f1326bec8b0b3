#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace mscalib {

namespace detail {
// SplitMix64 finalizer; avoids correlated generator states for nearby seeds.
inline std::uint64_t scramble_seed(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}
}  // namespace detail

// Independent sub-seed of a base seed; different stream ids never collide.
inline std::uint64_t derive_seed(std::uint64_t base_seed, std::uint64_t stream_id) {
  return detail::scramble_seed(base_seed + 0x9E3779B97F4A7C15ull * (stream_id + 1));
}

// Deterministic random source. std::mt19937_64 has a fully specified output
// sequence, and all variate transforms below are implemented by hand, so the
// same seed yields the same values on every platform and standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(detail::scramble_seed(seed)) {}

  // Substreams with different ids never share state, which keeps parallel and
  // serial execution orders equivalent.
  static Rng stream(std::uint64_t base_seed, std::uint64_t stream_id) {
    return Rng(derive_seed(base_seed, stream_id));
  }

  std::uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller (cosine branch only, no cached state).
  double gaussian() {
    const double u1 = 1.0 - uniform();  // (0, 1], keeps log finite
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  // Unbiased integer in [0, n). n must be > 0.
  std::size_t uniform_index(std::size_t n) {
    const std::uint64_t bound = n;
    const std::uint64_t threshold = (-bound) % bound;
    for (;;) {
      const std::uint64_t r = next_u64();
      if (r >= threshold) return static_cast<std::size_t>(r % bound);
    }
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace mscalib

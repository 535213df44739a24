#pragma once

#include <cmath>
#include <cstdint>

namespace ctxnet {

// Counter-based generator built on the splitmix64 finalizer. Every output is
// a pure function of (key, counter), so substreams derived per (t, node) or
// per trial can be consumed in any order without changing the draws.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0)
      : key_(mix(mix(seed + GOLDEN) ^ mix(stream + 2 * GOLDEN))) {}

  // Derives an independent stream keyed by (a, b); the parent is unchanged.
  [[nodiscard]] CounterRng substream(std::uint64_t a, std::uint64_t b = 0) const {
    CounterRng child(0);
    child.key_ = mix(key_ ^ mix(a + GOLDEN) ^ mix(mix(b + 3 * GOLDEN)));
    child.counter_ = 0;
    return child;
  }

  std::uint64_t next_u64() { return mix(key_ + (++counter_) * GOLDEN); }

  // Uniform on [0, 1), 53-bit resolution.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform on [lo, hi).
  double next_uniform(double lo, double hi) {
    return lo + (hi - lo) * next_double();
  }

  // Standard normal via Box-Muller; consumes two uniforms per call.
  double next_gaussian() {
    double u1 = next_double();
    double u2 = next_double();
    while (u1 <= 0.0) u1 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  // Integer in [0, n), n >= 1. Modulo bias is negligible for n << 2^64.
  std::uint64_t next_index(std::uint64_t n) { return next_u64() % n; }

 private:
  static constexpr std::uint64_t GOLDEN = 0x9E3779B97F4A7C15ull;

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace ctxnet

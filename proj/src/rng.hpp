#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace abcf {

// Thin wrapper around mt19937_64 with a fixed variate-consumption discipline:
// every draw consumes a deterministic number of engine outputs (uniform: 1,
// normal: 2, exponential: 1), so two samplers that execute the same sequence
// of draw calls stay stream-identical even across model variants. That is why
// we do not use std::normal_distribution (it caches a spare) or
// std::uniform_real_distribution (unspecified consumption).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Split a base seed into an independent per-replicate stream.
  Rng(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu),
                      static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream & 0xffffffffu),
                      static_cast<std::uint32_t>(stream >> 32)};
    engine_.seed(seq);
  }

  // Uniform on [0, 1), 53-bit resolution.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Uniform on (0, 1], safe to pass through log().
  double uniform_pos() { return 1.0 - uniform(); }

  // Standard normal via Box-Muller, cosine branch only (no cached spare).
  double normal() {
    double u1 = uniform_pos();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
  }

  double exponential() { return -std::log(uniform_pos()); }

  // Integer in [0, n), by rejection so the map is exactly uniform.
  std::uint64_t below(std::uint64_t n) {
    std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      std::uint64_t r = engine_();
      if (r >= threshold) return r % n;
    }
  }

  std::uint64_t next_u64() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace abcf

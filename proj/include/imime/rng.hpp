#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace imime {

// The single seeded random stream shared by every stochastic component of an
// episode. Conversions from raw engine output are done here rather than with
// <random> distributions so that draws are identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform in [0, 1) with 53 bits of mantissa.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return uniform() < p; }

  // Uniform index in [0, n). n must be positive.
  std::size_t index(std::size_t n) {
    const auto i = static_cast<std::size_t>(uniform() * static_cast<double>(n));
    return i < n ? i : n - 1;
  }

  // Standard normal via Box-Muller; always consumes two draws.
  double normal();

 private:
  std::mt19937_64 engine_;
};

// Stateless 64-bit mixer used to derive per-parameter seeds and lattice hashes.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace imime

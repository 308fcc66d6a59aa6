#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace spcpool {

// Deterministic random source for the simulation engine.
//
// All sampling goes through explicit algorithms on top of the mt19937_64
// bit stream, so a given seed reproduces the same draws on every platform
// and standard library. Replicate streams are derived from a master seed
// with derive(), which keeps parallel runs independent of scheduling.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  // Uniform on [0, 1).
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  // Uniform on (0, 1]; safe to feed into log().
  double uniform_pos() { return static_cast<double>((gen_() >> 11) + 1) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Inclusive integer range via rejection-free scaling (range is tiny here).
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(uniform() * static_cast<double>(hi - lo + 1));
  }

  // Standard normal, basic Box-Muller. One draw consumes two uniforms.
  double normal() {
    double u1 = uniform_pos();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  double normal(double mu, double sigma) { return mu + sigma * normal(); }

  bool bernoulli(double p) { return uniform() < p; }

  // Number of failures before the first success; support {0, 1, 2, ...}.
  std::int64_t geometric(double p) {
    return static_cast<std::int64_t>(std::floor(std::log(uniform_pos()) / std::log1p(-p)));
  }

  std::uint64_t bits() { return gen_(); }

  // splitmix64 of (master, index); decorrelates per-replicate streams.
  static std::uint64_t derive(std::uint64_t master, std::uint64_t index) {
    std::uint64_t x = master + (index + 1) * 0x9E3779B97F4A7C15ull;
    x ^= x >> 30;
    x *= 0xBF58476D1CE4E5B9ull;
    x ^= x >> 27;
    x *= 0x94D049BB133111EBull;
    x ^= x >> 31;
    return x;
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace spcpool

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "voxstate/errors.hpp"

namespace voxstate {

/**
 * Deterministic random source.
 *
 * Wraps std::mt19937_64 (whose seeding and output are fully specified by
 * the standard) but implements every distribution by hand, because the
 * std:: distribution objects are implementation-defined and would break
 * cross-toolchain reproducibility. Given the same seed, every method
 * returns the same sequence on every platform.
 */
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }

  // Independent child stream. Uses a splitmix64 finalizer over
  // (seed, stream_id) so sibling streams are decorrelated and the
  // derivation is order-free: derive(k) is the same no matter how much
  // of the parent stream has been consumed.
  Rng derive(std::uint64_t stream_id) const {
    return Rng(mix(seed_, stream_id));
  }

  std::uint64_t bits() { return engine_(); }

  // Uniform on [0, 1) with 53 random mantissa bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform integer on [0, n). Rejection over the smallest covering
  // power-of-two mask, so the result is exactly uniform.
  std::uint64_t uniform_below(std::uint64_t n) {
    if (n == 0) throw config_error("uniform_below: n must be positive");
    if (n == 1) return 0;
    std::uint64_t mask = n - 1;
    mask |= mask >> 1;
    mask |= mask >> 2;
    mask |= mask >> 4;
    mask |= mask >> 8;
    mask |= mask >> 16;
    mask |= mask >> 32;
    for (;;) {
      std::uint64_t r = engine_() & mask;
      if (r < n) return r;
    }
  }

  // Standard normal via Box-Muller. The second deviate of each pair is
  // cached, so draws come in a fixed, reproducible order.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    // u1 in (0, 1] so the log is finite.
    double u1 = 1.0 - uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // In-place Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  static std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = a + 0x9E3779B97F4A7C15ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace voxstate

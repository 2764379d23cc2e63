#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

#include "formnav/vec2.hpp"

namespace formnav {

// mt19937_64 with hand-rolled output conversions. the standard
// distributions are implementation-defined, which would break bit-exact
// reproducibility across toolchains, so we never use them.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // uniform in [0, 1) with 53 random bits
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // uniform integer in [0, n); uniform() < 1 keeps the result in range
  int uniform_int(int n) { return static_cast<int>(uniform() * n); }

  // standard normal via Box-Muller; caches the second deviate
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 == 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double th = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(th);
    have_spare_ = true;
    return r * std::cos(th);
  }

  Vec2 in_disc(double radius) {
    // rejection sampling keeps the density uniform over the disc
    for (;;) {
      const double x = uniform(-1.0, 1.0);
      const double y = uniform(-1.0, 1.0);
      if (x * x + y * y <= 1.0) return {radius * x, radius * y};
    }
  }

  // derives an independent stream; splitmix64 decorrelates related keys
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t key) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (key + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace formnav

#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace hmmlab {

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}
}  // namespace detail

// Deterministic stream RNG. A stream is derived from (master seed, stream id),
// so replicate i always sees the same draws no matter which thread runs it.
// The transforms below are hand-rolled on top of mt19937_64 because the
// standard-library distributions do not pin down their output sequences.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  static Rng stream(std::uint64_t master, std::uint64_t id) {
    return Rng(detail::splitmix64(detail::splitmix64(master) ^
                                  detail::splitmix64(id + 0x9E3779B97F4A7C15ULL)));
  }

  std::uint64_t next_u64() { return engine_(); }

  // uniform on [0,1) with 53 random bits
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // uniform on (0,1], safe as a log() argument
  double uniform01_pos() {
    return (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53;
  }

  double uniform(double a, double b) { return a + (b - a) * uniform01(); }

  double normal() {
    const double u1 = uniform01_pos();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  double normal(double mu, double sigma) { return mu + sigma * normal(); }

  // Knuth's product method; large rates split recursively so the running
  // product never underflows.
  long poisson(double rate) {
    if (rate <= 0.0) return 0;
    if (rate > 60.0) {
      const double half = 0.5 * rate;
      return poisson(half) + poisson(rate - half);
    }
    const double limit = std::exp(-rate);
    double prod = 1.0;
    long k = 0;
    do {
      ++k;
      prod *= uniform01_pos();
    } while (prod > limit);
    return k - 1;
  }

  // index draw from unnormalized nonnegative weights
  int categorical(const double* weights, int count) {
    double total = 0.0;
    for (int i = 0; i < count; ++i) total += weights[i];
    double u = uniform01() * total;
    for (int i = 0; i < count; ++i) {
      u -= weights[i];
      if (u < 0.0) return i;
    }
    return count - 1;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace hmmlab

#pragma once

#include <cstdint>
#include <random>

namespace dbb {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Deterministic RNG. Wraps mt19937_64 but produces doubles from the raw
/// bit stream so results are identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in [0, 1).
  double uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double a, double b) { return a + (b - a) * uniform01(); }

  /// Standard normal via Box-Muller (pair cached).
  double normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    double u1 = 0.0;
    while (u1 <= 0.0) u1 = uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    cached_ = r * std::sin(a);
    have_cached_ = true;
    return r * std::cos(a);
  }

  std::uint64_t raw() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  double cached_ = 0.0;
  bool have_cached_ = false;
};

/// Independent per-item stream: mixes (seed, index) so that ensembles can be
/// evaluated in any order or split across workers with identical results.
inline Rng stream_rng(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t s = seed ^ 0x6a09e667f3bcc909ULL;
  splitmix64(s);
  s ^= index * 0x9e3779b97f4a7c15ULL + 0x3c6ef372fe94f82bULL;
  return Rng(splitmix64(s));
}

}  // namespace dbb

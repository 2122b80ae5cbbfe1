#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace tidal {

// SplitMix64 finalizer (Steele, Lea & Flood) used as a counter-based
// generator: draw i of a stream keyed by K is mix(K + (i + 1) * 0x9E3779B97F4A7C15).
// The integer stream is bit-identical on every platform; the floating-point
// transforms below rely only on IEEE double arithmetic plus std::log/std::cos.
constexpr std::uint64_t splitmix64_mix(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

class CounterRng {
 public:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

  explicit constexpr CounterRng(std::uint64_t seed, std::uint64_t stream = 0) noexcept
      : key_(splitmix64_mix(seed ^ splitmix64_mix(stream + kGamma))) {}

  constexpr std::uint64_t next_u64() noexcept { return splitmix64_mix(key_ + (++counter_) * kGamma); }

  constexpr std::uint64_t counter() const noexcept { return counter_; }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller; one uniform pair per draw.
  double normal() noexcept {
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  // Normal(mean, sd) restricted to [lo, hi] by rejection; falls back to the
  // clamped mean after 1000 rejections.
  double truncated_normal(double mean, double sd, double lo, double hi) noexcept {
    for (int i = 0; i < 1000; ++i) {
      const double v = mean + sd * normal();
      if (v >= lo && v <= hi) return v;
    }
    return mean < lo ? lo : (mean > hi ? hi : mean);
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace tidal

#pragma once

// Shared helpers for the test binaries: a small deterministic generator for
// property tests and builders for hand-made signals.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "tidal/signal.hpp"

namespace testsupport {

// xorshift64* with explicit constants; independent of the library RNG.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : state_(seed * 0x9E3779B97F4A7C15ull + 0x1234567ull) {
    if (state_ == 0) state_ = 1;
  }
  std::uint64_t bits() {
    state_ ^= state_ >> 12;
    state_ ^= state_ << 25;
    state_ ^= state_ >> 27;
    return state_ * 0x2545F4914F6CDD1Dull;
  }
  double unit() { return static_cast<double>(bits() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }
  std::size_t index(std::size_t n) { return static_cast<std::size_t>(bits() % n); }
  double normal() {
    double u = unit();
    while (u <= 0.0) u = unit();
    return std::sqrt(-2.0 * std::log(u)) * std::cos(2.0 * std::numbers::pi * unit());
  }

 private:
  std::uint64_t state_;
};

inline tidal::RespiratorySignal sampled(double duration_s, double fs, auto&& f) {
  const auto n = static_cast<std::size_t>(std::llround(duration_s * fs)) + 1;
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = f(static_cast<double>(i) / fs);
  return tidal::RespiratorySignal(std::move(x), fs, "test");
}

// Cycle with explicit durations; indices are synthetic but ordered.
inline tidal::BreathCycle cycle(double t_i, double t_tot, double ra, std::size_t start = 0) {
  tidal::BreathCycle c;
  c.trough_idx = start;
  c.peak_idx = start + 1;
  c.end_trough_idx = start + 2;
  c.t_i_s = t_i;
  c.t_tot_s = t_tot;
  c.ra_n = ra;
  return c;
}

inline double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace testsupport

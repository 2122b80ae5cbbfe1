#include "tidal/signal.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>

#include "tidal/error.hpp"

namespace tidal {

RespiratorySignal::RespiratorySignal(std::vector<double> samples,
                                     double sample_rate_hz,
                                     std::string subject_id)
    : samples_(std::move(samples)),
      sample_rate_hz_(sample_rate_hz),
      subject_id_(std::move(subject_id)) {
  if (!(sample_rate_hz_ > 0.0) || !std::isfinite(sample_rate_hz_)) {
    fail(ErrorCode::InvalidParameter, "sample rate must be positive and finite");
  }
  if (samples_.size() < 2) {
    fail(ErrorCode::InsufficientData, "a signal needs at least 2 samples");
  }
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    if (!std::isfinite(samples_[i])) {
      fail(ErrorCode::InvalidInput,
           "non-finite sample at index " + std::to_string(i));
    }
  }
}

BreathCycle make_cycle(const RespiratorySignal& signal, std::size_t trough_idx,
                       std::size_t peak_idx, std::size_t end_trough_idx) {
  if (!(trough_idx < peak_idx && peak_idx < end_trough_idx) ||
      end_trough_idx >= signal.size()) {
    fail(ErrorCode::InvalidInput, "cycle indices must satisfy trough < peak < end trough");
  }
  const auto s = signal.samples();
  const double fs = signal.sample_rate_hz();
  BreathCycle c;
  c.trough_idx = trough_idx;
  c.peak_idx = peak_idx;
  c.end_trough_idx = end_trough_idx;
  c.t_i_s = static_cast<double>(peak_idx - trough_idx) / fs;
  c.t_tot_s = static_cast<double>(end_trough_idx - trough_idx) / fs;
  c.ra_n = s[peak_idx] - s[trough_idx];
  if (!(c.ra_n > 0.0)) {
    fail(ErrorCode::InvalidInput, "cycle amplitude must be positive");
  }
  return c;
}

RespiratorySignal detrend(const RespiratorySignal& signal, double window_s) {
  const double fs = signal.sample_rate_hz();
  if (!(window_s > 0.0) || !(window_s * fs >= 3.0)) {
    fail(ErrorCode::InvalidParameter,
         "detrend window must cover at least 3 samples");
  }
  auto width = static_cast<std::size_t>(std::llround(window_s * fs));
  if (width % 2 == 0) ++width;
  const std::size_t half = width / 2;

  const auto s = signal.samples();
  const std::size_t n = s.size();
  std::vector<long double> prefix(n + 1, 0.0L);
  for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + s[i];

  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= half ? i - half : 0;
    const std::size_t hi = std::min(n - 1, i + half);
    const long double mean =
        (prefix[hi + 1] - prefix[lo]) / static_cast<long double>(hi - lo + 1);
    out[i] = static_cast<double>(static_cast<long double>(s[i]) - mean);
  }
  return RespiratorySignal(std::move(out), fs, signal.subject_id());
}

namespace {

enum class Kind { Trough, Peak };

struct Extremum {
  std::size_t idx;
  Kind kind;
};

std::vector<Extremum> hysteresis_extrema(std::span<const double> s, double delta) {
  enum class State { Unknown, SeekPeak, SeekTrough };
  std::vector<Extremum> out;
  State state = State::Unknown;
  std::size_t min_i = 0;
  std::size_t max_i = 0;

  auto record = [&](std::size_t idx, Kind kind) {
    // Index 0 can only be the tail of a partial cycle.
    if (idx > 0) out.push_back({idx, kind});
  };

  for (std::size_t i = 1; i < s.size(); ++i) {
    const double x = s[i];
    if (x > s[max_i]) max_i = i;
    if (x < s[min_i]) min_i = i;
    switch (state) {
      case State::Unknown:
        if (s[max_i] - x >= delta) {
          record(max_i, Kind::Peak);
          state = State::SeekTrough;
          min_i = i;
        } else if (x - s[min_i] >= delta) {
          record(min_i, Kind::Trough);
          state = State::SeekPeak;
          max_i = i;
        }
        break;
      case State::SeekPeak:
        if (s[max_i] - x >= delta) {
          record(max_i, Kind::Peak);
          state = State::SeekTrough;
          min_i = i;
        }
        break;
      case State::SeekTrough:
        if (x - s[min_i] >= delta) {
          record(min_i, Kind::Trough);
          state = State::SeekPeak;
          max_i = i;
        }
        break;
    }
  }
  return out;
}

// Erases a trough and the lower of its two flanking peaks, joining the cycles
// on either side of the trough.
void join_at_trough(std::span<const double> s, std::vector<Extremum>& e, std::size_t t) {
  const std::size_t lower_peak = s[e[t - 1].idx] < s[e[t + 1].idx] ? t - 1 : t + 1;
  e.erase(e.begin() + static_cast<std::ptrdiff_t>(lower_peak));
  e.erase(e.begin() + static_cast<std::ptrdiff_t>(lower_peak < t ? t - 1 : t));
}

// Depth of trough t below the lower of its flanking peaks.
double trough_depth(std::span<const double> s, const std::vector<Extremum>& e, std::size_t t) {
  return std::min(s[e[t - 1].idx], s[e[t + 1].idx]) - s[e[t].idx];
}

// Joins the shortest cycle under the limit to a neighbour through its
// shallower boundary trough until none is left. Cycle boundaries only move
// outward, so each join lengthens the short cycle.
void merge_short_cycles(std::span<const double> s, std::vector<Extremum>& e,
                        double min_cycle_samples) {
  while (true) {
    std::optional<std::size_t> shortest;
    std::size_t shortest_len = 0;
    for (std::size_t j = 0; j + 2 < e.size(); ++j) {
      if (e[j].kind != Kind::Trough) continue;
      const std::size_t len = e[j + 2].idx - e[j].idx;
      if (static_cast<double>(len) < min_cycle_samples &&
          (!shortest || len < shortest_len)) {
        shortest = j;
        shortest_len = len;
      }
    }
    if (!shortest) return;

    const std::size_t j = *shortest;
    const bool can_join_before = j >= 1;
    const bool can_join_after = j + 3 < e.size();
    if (can_join_before && can_join_after) {
      join_at_trough(s, e, trough_depth(s, e, j) <= trough_depth(s, e, j + 2) ? j : j + 2);
    } else if (can_join_before) {
      join_at_trough(s, e, j);
    } else if (can_join_after) {
      join_at_trough(s, e, j + 2);
    } else {
      e.erase(e.begin() + static_cast<std::ptrdiff_t>(j + 1), e.end());
    }
  }
}

}  // namespace

std::vector<BreathCycle> segment_breaths(const RespiratorySignal& signal,
                                         double min_cycle_s,
                                         double min_prominence_n) {
  if (!(min_cycle_s > 0.0)) {
    fail(ErrorCode::InvalidParameter, "min_cycle_s must be positive");
  }
  if (!(min_prominence_n > 0.0) || !std::isfinite(min_prominence_n)) {
    fail(ErrorCode::InvalidParameter, "min_prominence_n must be positive");
  }
  const auto s = signal.samples();
  auto extrema = hysteresis_extrema(s, min_prominence_n);
  merge_short_cycles(s, extrema, min_cycle_s * signal.sample_rate_hz());

  std::vector<BreathCycle> cycles;
  for (std::size_t j = 0; j + 2 < extrema.size(); ++j) {
    if (extrema[j].kind != Kind::Trough) continue;
    cycles.push_back(
        make_cycle(signal, extrema[j].idx, extrema[j + 1].idx, extrema[j + 2].idx));
  }
  return cycles;
}

double default_prominence(const RespiratorySignal& signal) {
  std::vector<double> v(signal.samples().begin(), signal.samples().end());
  std::sort(v.begin(), v.end());
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
  };
  return 0.1 * (quantile(0.75) - quantile(0.25));
}

namespace {

double coefficient_of_variation(std::span<const BreathCycle> run,
                                double BreathCycle::*field) {
  const double n = static_cast<double>(run.size());
  double mean = 0.0;
  for (const auto& c : run) mean += c.*field;
  mean /= n;
  double ss = 0.0;
  for (const auto& c : run) ss += (c.*field - mean) * (c.*field - mean);
  return std::sqrt(ss / n) / mean;
}

}  // namespace

double region_quality(std::span<const BreathCycle> run) {
  if (run.empty()) fail(ErrorCode::InsufficientData, "empty cycle run");
  return 1.0 / (1.0 + coefficient_of_variation(run, &BreathCycle::t_tot_s) +
                coefficient_of_variation(run, &BreathCycle::ra_n));
}

CleanRegion select_clean_region(std::span<const BreathCycle> cycles,
                                const RespiratorySignal& signal,
                                std::size_t min_cycles) {
  if (min_cycles < 1) {
    fail(ErrorCode::InvalidParameter, "min_cycles must be at least 1");
  }
  if (cycles.size() < min_cycles) {
    fail(ErrorCode::InsufficientData,
         "found " + std::to_string(cycles.size()) + " breath cycles, need at least " +
             std::to_string(min_cycles));
  }
  for (const auto& c : cycles) {
    if (c.end_trough_idx >= signal.size()) {
      fail(ErrorCode::InvalidInput, "cycle lies outside the signal");
    }
  }

  std::size_t best_first = 0;
  std::size_t best_len = min_cycles;
  double best_q = -1.0;
  for (std::size_t first = 0; first + min_cycles <= cycles.size(); ++first) {
    for (std::size_t len = min_cycles; first + len <= cycles.size(); ++len) {
      const double q = region_quality(cycles.subspan(first, len));
      if (q > best_q || (q == best_q && first == best_first)) {
        best_q = q;
        best_first = first;
        best_len = len;
      }
    }
  }
  return region_from_indices(cycles, best_first, best_len);
}

CleanRegion region_from_indices(std::span<const BreathCycle> cycles,
                                std::size_t first, std::size_t count) {
  if (count == 0 || first + count > cycles.size()) {
    fail(ErrorCode::InvalidParameter, "region indices out of range");
  }
  const auto run = cycles.subspan(first, count);
  for (std::size_t i = 0; i + 1 < run.size(); ++i) {
    if (run[i].end_trough_idx != run[i + 1].trough_idx) {
      fail(ErrorCode::InvalidInput, "region cycles are not consecutive");
    }
  }
  CleanRegion region;
  region.cycles.assign(run.begin(), run.end());
  region.quality_score = region_quality(run);
  region.first_index = first;
  return region;
}

}  // namespace tidal

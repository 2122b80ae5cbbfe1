#pragma once

// Chest-belt waveform representation and breath-cycle segmentation.
//
// A breath cycle is trough -> peak -> next trough. The inspiratory phase runs
// trough to peak (Ti), the whole cycle trough to trough (Ttot), and the
// respiratory amplitude RA is the force excursion from the opening trough to
// the peak. Expiratory duration is Ttot - Ti and is never stored.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace tidal {

class RespiratorySignal {
 public:
  // Throws InvalidParameter for a non-positive rate, InsufficientData for
  // fewer than 2 samples and InvalidInput for non-finite samples.
  RespiratorySignal(std::vector<double> samples, double sample_rate_hz,
                    std::string subject_id = {});

  std::span<const double> samples() const noexcept { return samples_; }
  double sample_rate_hz() const noexcept { return sample_rate_hz_; }
  const std::string& subject_id() const noexcept { return subject_id_; }
  std::size_t size() const noexcept { return samples_.size(); }
  double duration_s() const noexcept {
    return static_cast<double>(samples_.size() - 1) / sample_rate_hz_;
  }

 private:
  std::vector<double> samples_;
  double sample_rate_hz_;
  std::string subject_id_;
};

struct BreathCycle {
  std::size_t trough_idx = 0;
  std::size_t peak_idx = 0;
  std::size_t end_trough_idx = 0;
  double t_i_s = 0.0;
  double t_tot_s = 0.0;
  double ra_n = 0.0;

  double t_e_s() const noexcept { return t_tot_s - t_i_s; }

  friend bool operator==(const BreathCycle&, const BreathCycle&) = default;
};

// Builds a cycle from three indices, deriving durations from the sample rate
// and RA from the sample values. Throws InvalidInput if the ordering or
// amplitude invariants do not hold.
BreathCycle make_cycle(const RespiratorySignal& signal, std::size_t trough_idx,
                       std::size_t peak_idx, std::size_t end_trough_idx);

struct CleanRegion {
  std::vector<BreathCycle> cycles;
  double quality_score = 0.0;
  // Position of cycles.front() in the list the region was selected from.
  std::size_t first_index = 0;
};

// Subtracts a centered moving-average baseline. The averaging window spans
// round(window_s * rate) samples (forced odd) and is truncated at the edges.
RespiratorySignal detrend(const RespiratorySignal& signal, double window_s);

// Local-extremum scan with hysteresis: a peak is confirmed once the signal
// falls min_prominence_n below it, a trough once the signal rises
// min_prominence_n above it. Extrema at the first or last sample are partial
// and never reported. Cycles shorter than min_cycle_s are merged away by
// dropping their weakest trough/peak pair. Plateaus resolve to their first
// sample.
std::vector<BreathCycle> segment_breaths(const RespiratorySignal& signal,
                                         double min_cycle_s,
                                         double min_prominence_n);

// 0.1 x interquartile range of the samples: the default prominence threshold.
double default_prominence(const RespiratorySignal& signal);

inline constexpr double kDefaultMinCycleSeconds = 1.5;
inline constexpr std::size_t kDefaultMinCycles = 6;

// Heuristic stability score 1 / (1 + cv(Ttot) + cv(RA)) for a run of cycles,
// using population standard deviations. 1.0 means no variation at all.
double region_quality(std::span<const BreathCycle> run);

// Picks the contiguous run of at least min_cycles cycles with the highest
// region_quality. Ties go to the earliest start, then to the longer run.
// Throws InsufficientData when fewer than min_cycles cycles exist.
CleanRegion select_clean_region(std::span<const BreathCycle> cycles,
                                const RespiratorySignal& signal,
                                std::size_t min_cycles = kDefaultMinCycles);

// Explicit override of the automatic selection.
CleanRegion region_from_indices(std::span<const BreathCycle> cycles,
                                std::size_t first, std::size_t count);

}  // namespace tidal

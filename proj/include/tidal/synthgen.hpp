#pragma once

// Deterministic synthetic chest-belt signals and subject cohorts.
//
// Breaths are raised-cosine pieces: the inhale rises from the trough to
// trough + RA over Ti, the exhale falls back over Ttot - Ti. Both halves have
// zero slope at their ends, so the only extrema are the intended troughs and
// peaks. Cycle boundaries are placed on the sample grid, which makes the
// returned ground truth exactly recoverable from a clean signal.
//
// The two regimes used for cohorts (normal vs obstructed: lower FIT, faster
// breathing, smaller amplitude) are test fixtures chosen for plausibility and
// separability. They are not clinical reference values.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "tidal/classify.hpp"
#include "tidal/features.hpp"
#include "tidal/signal.hpp"
#include "tidal/stats.hpp"

namespace tidal {

// Relative standard deviations of the per-cycle draws.
struct Jitter {
  double t_tot = 0.0;
  double fit = 0.0;
  double ra = 0.0;

  static constexpr Jitter uniform(double v) noexcept { return {v, v, v}; }
};

struct ArtifactBurst {
  double start_s = 0.0;
  double duration_s = 0.0;
  double amplitude_n = 0.0;
};

struct BreathProfile {
  double t_i_s = 1.6;
  double t_tot_s = 4.0;
  double ra_n = 1.0;
  Jitter jitter;
  double drift_slope_n_per_s = 0.0;
  std::vector<ArtifactBurst> artifact_bursts;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SyntheticSignal {
  RespiratorySignal signal;
  // Complete, consecutive cycles in time order. Drift and artifacts never
  // alter these.
  std::vector<BreathCycle> truth;
};

// Requires duration_s >= 2 * t_tot_s and sample_rate_hz >= 10 / t_tot_s.
SyntheticSignal generate_signal(const BreathProfile& profile, double duration_s,
                                double sample_rate_hz);

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

// Truncated-normal draw parameters for one subject-level quantity.
struct Draw {
  double mean = 0.0;
  double sd = 0.0;
  Range range;
};

struct Regime {
  Draw fit;
  Draw t_tot_s;
  Draw ra_n;
  Range fev1_fvc;
};

struct CohortOptions {
  Regime normal{{0.41, 0.04, {0.36, 0.46}},
                {4.2, 0.4, {3.6, 4.8}},
                {1.1, 0.15, {0.9, 1.3}},
                {0.72, 0.86}};
  Regime obstructed{{0.28, 0.05, {0.22, 0.34}},
                    {2.3, 0.25, {2.0, 2.6}},
                    {0.5, 0.07, {0.4, 0.6}},
                    {0.35, 0.66}};
  Draw bmi{27.0, 3.0, {23.0, 31.0}};
  Draw age_y{67.6, 11.6, {40.0, 90.0}};
  Draw height_cm{165.3, 10.7, {145.0, 195.0}};
  Jitter jitter = Jitter::uniform(0.03);
  double duration_s = 75.0;
  double sample_rate_hz = 50.0;
  // Standard deviation of the noise added to %predicted FEV1.
  double noise_sd = 0.0;
  double fvc_noise_sd = 0.15;
  // Linear model of %predicted FEV1 on (fit, rr, tv) evaluated at the
  // ground-truth features.
  RegressionModel pct_model = default_pct_model();

  static RegressionModel default_pct_model();
};

struct CohortSubject {
  SubjectRecord record;
  BreathProfile profile;
  TidalFeatures truth;
  ObstructionLabel label = ObstructionLabel::Normal;
  // %predicted FEV1 before noise was added.
  double pct_signal = 0.0;
};

struct SyntheticCohort {
  std::vector<CohortSubject> subjects;
  RegressionModel generating_model;
  double noise_sd = 0.0;
  CohortOptions options;

  // var(signal) / (var(signal) + noise_sd^2), with the signal variance taken
  // over this cohort's noiseless %predicted values.
  double analytic_r_squared() const;

  // Regenerates subject i's waveform (deterministic).
  SyntheticSignal signal_for(std::size_t i) const;
};

// Requires n >= 4 and obstructed_fraction in [0, 1]. Exactly
// round(n * obstructed_fraction) subjects are obstructed; subject ids are
// S001, S002, ... and labels are assigned by a seeded shuffle.
SyntheticCohort generate_cohort(std::size_t n, double obstructed_fraction, std::uint64_t seed,
                                const CohortOptions& options = {});

}  // namespace tidal

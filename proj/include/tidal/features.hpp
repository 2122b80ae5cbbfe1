#pragma once

// Per-subject tidal breathing features.
//
//   FIT = Ti / Ttot                 fractional inspiratory time
//   RR  = 60 / (BMI * Ttot)         BMI-normalized breaths per minute
//   TV  = RA * BMI                  tidal volume proxy, arbitrary units
//
// Each is computed per cycle and then averaged over the clean region. The
// mean of per-cycle FIT is not (mean Ti)/(mean Ttot).

#include <cstddef>
#include <optional>
#include <string>

#include "tidal/signal.hpp"

namespace tidal {

struct SubjectRecord {
  std::string subject_id;
  std::optional<double> age_y;
  std::optional<double> height_cm;
  std::optional<double> weight_kg;
  std::optional<double> bmi;
  std::optional<double> fev1_l;
  std::optional<double> fvc_l;
  std::optional<double> fev1_fvc;
  std::optional<double> fev1_pct_pred;

  // Explicit bmi if present, else weight / height^2. Throws InvalidInput if
  // neither source is available.
  double resolved_bmi() const;

  // Throws InvalidInput on any broken invariant: non-positive BMI, BMI off
  // from height/weight by more than 0.5%, a ratio inconsistent with
  // FEV1/FVC by 0.01 or more, %predicted outside (0, 200).
  void validate() const;
};

struct TidalFeatures {
  double fit = 0.0;
  double rr = 0.0;
  double tv = 0.0;
  std::size_t n_cycles = 0;
};

double fit_of_cycle(const BreathCycle& cycle);
double rr_of_cycle(const BreathCycle& cycle, double bmi);
double tv_of_cycle(const BreathCycle& cycle, double bmi);

TidalFeatures extract_features(const CleanRegion& region, const SubjectRecord& subject);
TidalFeatures extract_features(std::span<const BreathCycle> cycles, double bmi);

}  // namespace tidal

#include "tidal/features.hpp"

#include <cmath>

#include "tidal/error.hpp"

namespace tidal {

double SubjectRecord::resolved_bmi() const {
  if (bmi) return *bmi;
  if (height_cm && weight_kg && *height_cm > 0.0) {
    const double h = *height_cm / 100.0;
    return *weight_kg / (h * h);
  }
  fail(ErrorCode::InvalidInput,
       "subject " + subject_id + " has neither bmi nor height and weight");
}

void SubjectRecord::validate() const {
  const std::string who = "subject " + subject_id + ": ";
  const double b = resolved_bmi();
  if (!(b > 0.0) || !std::isfinite(b)) fail(ErrorCode::InvalidInput, who + "bmi must be positive");
  if (bmi && height_cm && weight_kg) {
    const double h = *height_cm / 100.0;
    const double derived = *weight_kg / (h * h);
    if (std::abs(*bmi - derived) > 0.005 * derived) {
      fail(ErrorCode::InvalidInput,
           who + "bmi disagrees with height and weight by more than 0.5%");
    }
  }
  if (fev1_l && fvc_l && fev1_fvc) {
    if (!(std::abs(*fev1_fvc - *fev1_l / *fvc_l) < 0.01)) {
      fail(ErrorCode::InvalidInput, who + "fev1_fvc inconsistent with fev1_l / fvc_l");
    }
  }
  if (fev1_fvc && !(*fev1_fvc > 0.0 && *fev1_fvc <= 1.5)) {
    fail(ErrorCode::InvalidInput, who + "fev1_fvc out of range");
  }
  if (fev1_pct_pred && !(*fev1_pct_pred > 0.0 && *fev1_pct_pred < 200.0)) {
    fail(ErrorCode::InvalidInput, who + "fev1_pct_pred must lie in (0, 200)");
  }
}

double fit_of_cycle(const BreathCycle& cycle) { return cycle.t_i_s / cycle.t_tot_s; }

double rr_of_cycle(const BreathCycle& cycle, double bmi) {
  if (!(bmi > 0.0)) fail(ErrorCode::InvalidParameter, "bmi must be positive");
  return 60.0 / (bmi * cycle.t_tot_s);
}

double tv_of_cycle(const BreathCycle& cycle, double bmi) {
  if (!(bmi > 0.0)) fail(ErrorCode::InvalidParameter, "bmi must be positive");
  return cycle.ra_n * bmi;
}

TidalFeatures extract_features(std::span<const BreathCycle> cycles, double bmi) {
  if (cycles.empty()) fail(ErrorCode::InsufficientData, "no cycles to average");
  if (!(bmi > 0.0)) fail(ErrorCode::InvalidParameter, "bmi must be positive");
  TidalFeatures f;
  for (const auto& c : cycles) {
    f.fit += fit_of_cycle(c);
    f.rr += rr_of_cycle(c, bmi);
    f.tv += tv_of_cycle(c, bmi);
  }
  const double n = static_cast<double>(cycles.size());
  f.fit /= n;
  f.rr /= n;
  f.tv /= n;
  f.n_cycles = cycles.size();
  return f;
}

TidalFeatures extract_features(const CleanRegion& region, const SubjectRecord& subject) {
  return extract_features(region.cycles, subject.resolved_bmi());
}

}  // namespace tidal

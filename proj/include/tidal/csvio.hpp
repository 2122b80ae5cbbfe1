#pragma once

// File formats. All numbers are written in shortest round-trip form with a
// '.' decimal separator; files are UTF-8 with LF line endings.
//
//   signal    time_s,force_n
//   subjects  subject_id,age_y,height_cm,weight_kg,bmi,fev1_l,fvc_l,fev1_fvc,fev1_pct_pred
//   features  subject_id,fit,rr,tv,n_cycles,quality_score

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "tidal/features.hpp"
#include "tidal/signal.hpp"

namespace tidal {

std::string format_double(double v);
double parse_double(std::string_view text);  // throws ParseError

// Sample rate is 1 / median spacing; every spacing must be within 0.1% of
// the median. Errors carry the offending line number.
RespiratorySignal read_signal_csv(const std::filesystem::path& path, std::string subject_id);
std::string signal_csv(const RespiratorySignal& signal);

std::vector<SubjectRecord> read_subjects_csv(const std::filesystem::path& path);
std::string subjects_csv(const std::vector<SubjectRecord>& subjects);

struct FeatureRow {
  std::string subject_id;
  TidalFeatures features;
  double quality_score = 0.0;
};

std::vector<FeatureRow> read_features_csv(const std::filesystem::path& path);
std::string features_csv(const std::vector<FeatureRow>& rows);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view content);

}  // namespace tidal

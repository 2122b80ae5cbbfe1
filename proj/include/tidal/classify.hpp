#pragma once

// Obstruction detection (KNN over FIT/RR/TV) and GOLD severity staging from a
// regression estimate of %predicted FEV1.

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tidal/features.hpp"
#include "tidal/stats.hpp"

namespace tidal {

enum class ObstructionLabel { Normal, Obstructed };

std::string_view to_string(ObstructionLabel label) noexcept;
ObstructionLabel obstruction_label_from_string(std::string_view text);

inline constexpr double kObstructionRatioThreshold = 0.70;

// Obstructed iff fev1_fvc < 0.70; the boundary itself is Normal. Throws
// InvalidParameter outside (0, 1.5].
ObstructionLabel label_obstruction(double fev1_fvc);

enum class Severity { Mild, Moderate, Severe, VerySevere };
enum class CoarseSeverity { MildModerate, SevereVerySevere };

std::string_view to_string(Severity s) noexcept;
std::string_view to_string(CoarseSeverity s) noexcept;
CoarseSeverity coarse(Severity s) noexcept;

// Lower bounds (inclusive) of each stage in %predicted FEV1.
struct StagingTable {
  double mild_min = 80.0;
  double moderate_min = 50.0;
  double severe_min = 30.0;
};

// Clamps to [0, 200] first. NaN is rejected with InvalidParameter.
Severity severity_stage(double pct_pred_fev1, const StagingTable& table = {});

enum class KnnScaling { ZScore, Raw };

std::string_view to_string(KnnScaling s) noexcept;
KnnScaling knn_scaling_from_string(std::string_view text);

struct LabeledFeatures {
  TidalFeatures features;
  ObstructionLabel label = ObstructionLabel::Normal;
};

class KnnModel {
 public:
  std::size_t k() const noexcept { return k_; }
  KnnScaling scaling() const noexcept { return scaling_; }
  const std::array<double, 3>& means() const noexcept { return means_; }
  const std::array<double, 3>& stds() const noexcept { return stds_; }
  std::span<const LabeledFeatures> points() const noexcept { return points_; }

  std::array<double, 3> scale(const TidalFeatures& f) const noexcept;

 private:
  friend KnnModel knn_fit(std::span<const LabeledFeatures>, std::size_t, KnnScaling);
  friend KnnModel knn_model_from_json(const std::string&);
  void rebuild_scaled();

  std::size_t k_ = 1;
  KnnScaling scaling_ = KnnScaling::ZScore;
  std::array<double, 3> means_{0.0, 0.0, 0.0};
  std::array<double, 3> stds_{1.0, 1.0, 1.0};
  std::vector<LabeledFeatures> points_;
  std::vector<std::array<double, 3>> scaled_;

  friend ObstructionLabel knn_predict(const KnnModel&, const TidalFeatures&);
};

inline constexpr std::size_t kDefaultK = 3;

// z-score scaler uses the sample standard deviation of the training set.
// Throws InvalidParameter for even k or k > data size, DegenerateTraining for
// single-class data or a zero-variance feature.
KnnModel knn_fit(std::span<const LabeledFeatures> data, std::size_t k,
                 KnnScaling scaling = KnnScaling::ZScore);

// Majority vote over the k nearest training points (Euclidean, scaled
// space). Distance ties go to the lower training index.
ObstructionLabel knn_predict(const KnnModel& model, const TidalFeatures& query);

std::string to_json(const KnnModel& model);
KnnModel knn_model_from_json(const std::string& text);

struct SeverityObservation {
  TidalFeatures features;
  double pct_pred_fev1 = 0.0;
};

inline const std::vector<std::string> kFeatureNames{"fit", "rr", "tv"};

// OLS of %predicted FEV1 on (fit, rr, tv).
RegressionModel severity_fit(std::span<const SeverityObservation> data,
                             RmseDenominator rmse_denominator = RmseDenominator::N);

double severity_estimate(const RegressionModel& model, const TidalFeatures& f);

}  // namespace tidal

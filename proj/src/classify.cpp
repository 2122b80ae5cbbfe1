#include "tidal/classify.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"
#include "tidal/error.hpp"

namespace tidal {

std::string_view to_string(ObstructionLabel label) noexcept {
  return label == ObstructionLabel::Obstructed ? "Obstructed" : "Normal";
}

ObstructionLabel obstruction_label_from_string(std::string_view text) {
  if (text == "Obstructed") return ObstructionLabel::Obstructed;
  if (text == "Normal") return ObstructionLabel::Normal;
  fail(ErrorCode::InvalidLabel, "unknown obstruction label '" + std::string(text) + "'");
}

ObstructionLabel label_obstruction(double fev1_fvc) {
  if (!(fev1_fvc > 0.0 && fev1_fvc <= 1.5)) {
    fail(ErrorCode::InvalidParameter, "fev1_fvc must lie in (0, 1.5]");
  }
  return fev1_fvc < kObstructionRatioThreshold ? ObstructionLabel::Obstructed
                                               : ObstructionLabel::Normal;
}

std::string_view to_string(Severity s) noexcept {
  switch (s) {
    case Severity::Mild: return "Mild";
    case Severity::Moderate: return "Moderate";
    case Severity::Severe: return "Severe";
    case Severity::VerySevere: return "VerySevere";
  }
  return "";
}

std::string_view to_string(CoarseSeverity s) noexcept {
  return s == CoarseSeverity::MildModerate ? "MildModerate" : "SevereVerySevere";
}

CoarseSeverity coarse(Severity s) noexcept {
  return s == Severity::Mild || s == Severity::Moderate ? CoarseSeverity::MildModerate
                                                        : CoarseSeverity::SevereVerySevere;
}

Severity severity_stage(double pct_pred_fev1, const StagingTable& table) {
  if (std::isnan(pct_pred_fev1)) {
    fail(ErrorCode::InvalidParameter, "%predicted FEV1 is NaN");
  }
  const double v = std::clamp(pct_pred_fev1, 0.0, 200.0);
  if (v >= table.mild_min) return Severity::Mild;
  if (v >= table.moderate_min) return Severity::Moderate;
  if (v >= table.severe_min) return Severity::Severe;
  return Severity::VerySevere;
}

std::string_view to_string(KnnScaling s) noexcept {
  return s == KnnScaling::ZScore ? "zscore" : "raw";
}

KnnScaling knn_scaling_from_string(std::string_view text) {
  if (text == "zscore") return KnnScaling::ZScore;
  if (text == "raw") return KnnScaling::Raw;
  fail(ErrorCode::InvalidParameter, "knn scaling must be 'zscore' or 'raw'");
}

namespace {

std::array<double, 3> as_array(const TidalFeatures& f) { return {f.fit, f.rr, f.tv}; }

}  // namespace

std::array<double, 3> KnnModel::scale(const TidalFeatures& f) const noexcept {
  auto v = as_array(f);
  for (std::size_t d = 0; d < 3; ++d) v[d] = (v[d] - means_[d]) / stds_[d];
  return v;
}

void KnnModel::rebuild_scaled() {
  scaled_.clear();
  scaled_.reserve(points_.size());
  for (const auto& p : points_) scaled_.push_back(scale(p.features));
}

KnnModel knn_fit(std::span<const LabeledFeatures> data, std::size_t k, KnnScaling scaling) {
  if (k == 0 || k % 2 == 0) fail(ErrorCode::InvalidParameter, "k must be a positive odd number");
  if (data.size() < k) {
    fail(ErrorCode::InvalidParameter, "k = " + std::to_string(k) + " exceeds the " +
                                          std::to_string(data.size()) + " training points");
  }
  const bool has_normal = std::any_of(data.begin(), data.end(), [](const auto& p) {
    return p.label == ObstructionLabel::Normal;
  });
  const bool has_obstructed = std::any_of(data.begin(), data.end(), [](const auto& p) {
    return p.label == ObstructionLabel::Obstructed;
  });
  if (!has_normal || !has_obstructed) {
    fail(ErrorCode::DegenerateTraining, "KNN training data must contain both classes");
  }

  KnnModel m;
  m.k_ = k;
  m.scaling_ = scaling;
  m.points_.assign(data.begin(), data.end());
  if (scaling == KnnScaling::ZScore) {
    const double n = static_cast<double>(data.size());
    for (std::size_t d = 0; d < 3; ++d) {
      double mean = 0.0;
      for (const auto& p : data) mean += as_array(p.features)[d];
      mean /= n;
      double ss = 0.0;
      for (const auto& p : data) {
        const double dv = as_array(p.features)[d] - mean;
        ss += dv * dv;
      }
      const double sd = std::sqrt(ss / (n - 1.0));
      if (!(sd > 0.0)) {
        fail(ErrorCode::DegenerateTraining,
             "feature '" + kFeatureNames[d] + "' has zero variance in the training set");
      }
      m.means_[d] = mean;
      m.stds_[d] = sd;
    }
  }
  m.rebuild_scaled();
  return m;
}

ObstructionLabel knn_predict(const KnnModel& model, const TidalFeatures& query) {
  const auto q = model.scale(query);
  std::vector<std::pair<double, std::size_t>> dist;
  dist.reserve(model.scaled_.size());
  for (std::size_t i = 0; i < model.scaled_.size(); ++i) {
    double d2 = 0.0;
    for (std::size_t d = 0; d < 3; ++d) {
      const double diff = model.scaled_[i][d] - q[d];
      d2 += diff * diff;
    }
    dist.emplace_back(d2, i);
  }
  const auto k = static_cast<std::ptrdiff_t>(model.k_);
  std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
  std::size_t obstructed = 0;
  for (std::ptrdiff_t i = 0; i < k; ++i) {
    if (model.points_[dist[static_cast<std::size_t>(i)].second].label ==
        ObstructionLabel::Obstructed) {
      ++obstructed;
    }
  }
  return 2 * obstructed > model.k_ ? ObstructionLabel::Obstructed : ObstructionLabel::Normal;
}

std::string to_json(const KnnModel& model) {
  nlohmann::ordered_json j;
  j["k"] = model.k();
  j["scaling"] = std::string(to_string(model.scaling()));
  j["scaler"] = {{"means", model.means()}, {"stds", model.stds()}};
  j["points"] = nlohmann::ordered_json::array();
  for (const auto& p : model.points()) {
    j["points"].push_back({{"fit", p.features.fit},
                           {"rr", p.features.rr},
                           {"tv", p.features.tv},
                           {"label", std::string(to_string(p.label))}});
  }
  return j.dump(2);
}

KnnModel knn_model_from_json(const std::string& text) {
  KnnModel m;
  try {
    const auto j = nlohmann::json::parse(text);
    m.k_ = j.at("k").get<std::size_t>();
    m.scaling_ = j.contains("scaling")
                     ? knn_scaling_from_string(j.at("scaling").get<std::string>())
                     : KnnScaling::ZScore;
    m.means_ = j.at("scaler").at("means").get<std::array<double, 3>>();
    m.stds_ = j.at("scaler").at("stds").get<std::array<double, 3>>();
    for (const auto& p : j.at("points")) {
      LabeledFeatures lf;
      lf.features.fit = p.at("fit").get<double>();
      lf.features.rr = p.at("rr").get<double>();
      lf.features.tv = p.at("tv").get<double>();
      lf.label = obstruction_label_from_string(p.at("label").get<std::string>());
      m.points_.push_back(lf);
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ParseError, std::string("bad KNN model JSON: ") + e.what());
  }
  if (m.k_ == 0 || m.k_ % 2 == 0 || m.k_ > m.points_.size()) {
    fail(ErrorCode::ParseError, "KNN model JSON has an invalid k");
  }
  for (double sd : m.stds_) {
    if (!(sd > 0.0)) fail(ErrorCode::ParseError, "KNN model JSON has a non-positive scale");
  }
  m.rebuild_scaled();
  return m;
}

RegressionModel severity_fit(std::span<const SeverityObservation> data,
                             RmseDenominator rmse_denominator) {
  DesignMatrix x;
  x.rows = data.size();
  x.cols = 3;
  x.values.reserve(data.size() * 3);
  std::vector<double> y;
  y.reserve(data.size());
  for (const auto& obs : data) {
    x.values.insert(x.values.end(), {obs.features.fit, obs.features.rr, obs.features.tv});
    y.push_back(obs.pct_pred_fev1);
  }
  return ols_fit(x, y, kFeatureNames, rmse_denominator, "fev1_pct_pred");
}

double severity_estimate(const RegressionModel& model, const TidalFeatures& f) {
  return ols_predict(model, {{"fit", f.fit}, {"rr", f.rr}, {"tv", f.tv}});
}

}  // namespace tidal

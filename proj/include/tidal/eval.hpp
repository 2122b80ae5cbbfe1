#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tidal/error.hpp"

namespace tidal {

// Leave-one-out cross-validation. Prediction i comes from a model trained on
// every sample except i; output order follows the input order.
//
//   train(const std::vector<Sample>&) -> Model
//   predict(const Model&, const Sample&) -> Label
//   truth(const Sample&) -> Label
//
// A trainer failure is rethrown as FoldFailure naming the held-out sample.
template <typename Sample, typename Train, typename Predict, typename Truth>
auto loocv(const std::vector<Sample>& data, Train&& train, Predict&& predict, Truth&& truth,
           const std::function<std::string(const Sample&)>& name_of = {}) {
  using Model = std::decay_t<decltype(train(data))>;
  using Label = std::decay_t<decltype(truth(data.front()))>;
  if (data.size() < 2) fail(ErrorCode::InsufficientData, "LOOCV needs at least 2 samples");

  std::vector<std::pair<Label, Label>> out;
  out.reserve(data.size());
  std::vector<Sample> fold;
  fold.reserve(data.size() - 1);
  for (std::size_t held = 0; held < data.size(); ++held) {
    fold.clear();
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (i != held) fold.push_back(data[i]);
    }
    std::optional<Model> model;
    try {
      model.emplace(train(fold));
    } catch (const std::exception& e) {
      const std::string who = name_of ? name_of(data[held]) : "sample " + std::to_string(held);
      fail(ErrorCode::FoldFailure, "training failed with " + who + " held out: " + e.what());
    }
    out.emplace_back(truth(data[held]), predict(*model, data[held]));
  }
  return out;
}

struct ConfusionMatrix {
  std::vector<std::string> classes;
  // counts[i][j]: true class i predicted as class j.
  std::vector<std::vector<std::size_t>> counts;
  std::optional<std::string> positive_class;

  std::size_t total() const noexcept;
  std::size_t index_of(std::string_view label) const;
};

using LabelPair = std::pair<std::string, std::string>;

// Throws InvalidLabel for a label outside classes.
ConfusionMatrix confusion(const std::vector<LabelPair>& pairs,
                          const std::vector<std::string>& classes,
                          std::optional<std::string> positive_class = std::nullopt);

struct ClassScores {
  std::optional<double> precision;
  std::optional<double> recall;
};

// An empty optional means the metric is undefined (0/0), never zero.
// "balanced_accuracy" is what the report calls accuracy for binary tasks;
// raw accuracy is reported separately.
struct MetricsReport {
  std::optional<double> sensitivity;
  std::optional<double> specificity;
  std::optional<double> balanced_accuracy;
  std::optional<double> precision;
  std::optional<double> f1;
  std::optional<double> raw_accuracy;
  std::optional<double> kappa;
  std::map<std::string, ClassScores> per_class;

  std::vector<std::string> undefined_metrics() const;
};

MetricsReport metrics(const ConfusionMatrix& cm);

// {task, n, classes, confusion, metrics, per_class, kappa, undefined_metrics}
std::string evaluation_report_json(std::string_view task, const ConfusionMatrix& cm,
                                   const MetricsReport& report);

}  // namespace tidal

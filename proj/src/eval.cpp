#include "tidal/eval.hpp"

#include <algorithm>

#include "report_json.hpp"

namespace tidal {

std::size_t ConfusionMatrix::total() const noexcept {
  std::size_t n = 0;
  for (const auto& row : counts)
    for (std::size_t c : row) n += c;
  return n;
}

std::size_t ConfusionMatrix::index_of(std::string_view label) const {
  const auto it = std::find(classes.begin(), classes.end(), label);
  if (it == classes.end()) {
    fail(ErrorCode::InvalidLabel, "unknown class label '" + std::string(label) + "'");
  }
  return static_cast<std::size_t>(it - classes.begin());
}

ConfusionMatrix confusion(const std::vector<LabelPair>& pairs,
                          const std::vector<std::string>& classes,
                          std::optional<std::string> positive_class) {
  if (classes.empty()) fail(ErrorCode::InvalidParameter, "no classes given");
  ConfusionMatrix cm;
  cm.classes = classes;
  cm.counts.assign(classes.size(), std::vector<std::size_t>(classes.size(), 0));
  if (positive_class) cm.index_of(*positive_class);
  cm.positive_class = std::move(positive_class);
  for (const auto& [truth, predicted] : pairs) {
    ++cm.counts[cm.index_of(truth)][cm.index_of(predicted)];
  }
  return cm;
}

namespace {

std::optional<double> ratio(double num, double den) {
  if (den == 0.0) return std::nullopt;
  return num / den;
}

}  // namespace

MetricsReport metrics(const ConfusionMatrix& cm) {
  const std::size_t dim = cm.classes.size();
  if (cm.counts.size() != dim) fail(ErrorCode::InvalidParameter, "confusion matrix is not square");
  for (const auto& row : cm.counts) {
    if (row.size() != dim) fail(ErrorCode::InvalidParameter, "confusion matrix is not square");
  }
  const double n = static_cast<double>(cm.total());
  if (n == 0.0) fail(ErrorCode::InsufficientData, "confusion matrix is empty");

  std::vector<double> row_sum(dim, 0.0), col_sum(dim, 0.0);
  double trace = 0.0;
  for (std::size_t i = 0; i < dim; ++i) {
    for (std::size_t j = 0; j < dim; ++j) {
      row_sum[i] += static_cast<double>(cm.counts[i][j]);
      col_sum[j] += static_cast<double>(cm.counts[i][j]);
    }
    trace += static_cast<double>(cm.counts[i][i]);
  }

  MetricsReport r;
  for (std::size_t i = 0; i < dim; ++i) {
    const double hit = static_cast<double>(cm.counts[i][i]);
    r.per_class[cm.classes[i]] = {ratio(hit, col_sum[i]), ratio(hit, row_sum[i])};
  }
  r.raw_accuracy = trace / n;

  double chance = 0.0;
  for (std::size_t i = 0; i < dim; ++i) chance += row_sum[i] * col_sum[i];
  chance /= n * n;
  r.kappa = ratio(trace / n - chance, 1.0 - chance);

  if (dim == 2 && cm.positive_class) {
    const std::size_t p = cm.index_of(*cm.positive_class);
    const std::size_t q = 1 - p;
    const double tp = static_cast<double>(cm.counts[p][p]);
    const double fn = static_cast<double>(cm.counts[p][q]);
    const double fp = static_cast<double>(cm.counts[q][p]);
    const double tn = static_cast<double>(cm.counts[q][q]);
    r.sensitivity = ratio(tp, tp + fn);
    r.specificity = ratio(tn, tn + fp);
    r.precision = ratio(tp, tp + fp);
    if (r.sensitivity && r.specificity) {
      r.balanced_accuracy = (*r.sensitivity + *r.specificity) / 2.0;
    }
    if (r.precision && r.sensitivity) {
      r.f1 = ratio(2.0 * *r.precision * *r.sensitivity, *r.precision + *r.sensitivity);
    }
  }
  return r;
}

std::vector<std::string> MetricsReport::undefined_metrics() const {
  std::vector<std::string> out;
  auto check = [&](const std::optional<double>& v, const std::string& name) {
    if (!v) out.push_back(name);
  };
  check(sensitivity, "sensitivity");
  check(specificity, "specificity");
  check(balanced_accuracy, "balanced_accuracy");
  check(precision, "precision");
  check(f1, "f1");
  check(raw_accuracy, "raw_accuracy");
  check(kappa, "kappa");
  for (const auto& [cls, s] : per_class) {
    check(s.precision, "precision[" + cls + "]");
    check(s.recall, "recall[" + cls + "]");
  }
  return out;
}

nlohmann::ordered_json evaluation_json(std::string_view task, const ConfusionMatrix& cm,
                                       const MetricsReport& report) {
  auto opt = [](const std::optional<double>& v) -> nlohmann::ordered_json {
    return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
  };
  nlohmann::ordered_json j;
  j["task"] = std::string(task);
  j["n"] = cm.total();
  j["classes"] = cm.classes;
  j["positive_class"] = cm.positive_class ? nlohmann::ordered_json(*cm.positive_class)
                                          : nlohmann::ordered_json(nullptr);
  j["confusion"] = cm.counts;
  j["metrics"] = {{"sensitivity", opt(report.sensitivity)},
                  {"specificity", opt(report.specificity)},
                  {"balanced_accuracy", opt(report.balanced_accuracy)},
                  {"precision", opt(report.precision)},
                  {"f1", opt(report.f1)},
                  {"raw_accuracy", opt(report.raw_accuracy)}};
  nlohmann::ordered_json per_class = nlohmann::ordered_json::object();
  for (const auto& cls : cm.classes) {
    const auto& s = report.per_class.at(cls);
    per_class[cls] = {{"precision", opt(s.precision)}, {"recall", opt(s.recall)}};
  }
  j["per_class"] = per_class;
  j["kappa"] = opt(report.kappa);
  j["undefined_metrics"] = report.undefined_metrics();
  return j;
}

std::string evaluation_report_json(std::string_view task, const ConfusionMatrix& cm,
                                   const MetricsReport& report) {
  return evaluation_json(task, cm, report).dump(2);
}

}  // namespace tidal

#include "tidal/tidal.h"

#include <cstdlib>
#include <cstring>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "tidal/classify.hpp"
#include "tidal/error.hpp"
#include "tidal/eval.hpp"
#include "tidal/features.hpp"
#include "tidal/pipeline.hpp"
#include "tidal/csvio.hpp"
#include "tidal/signal.hpp"
#include "tidal/stats.hpp"
#include "tidal/synthgen.hpp"

struct tidal_signal {
  tidal::RespiratorySignal value;
};
struct tidal_cycle_list {
  std::vector<tidal::BreathCycle> value;
};
struct tidal_regression {
  tidal::RegressionModel value;
};
struct tidal_knn {
  tidal::KnnModel value;
};
struct tidal_confusion {
  tidal::ConfusionMatrix value;
};

namespace {

thread_local std::string g_last_error;

tidal_status status_of(tidal::ErrorCode code) {
  using tidal::ErrorCode;
  switch (code) {
    case ErrorCode::InvalidParameter: return TIDAL_ERR_INVALID_PARAMETER;
    case ErrorCode::InvalidInput: return TIDAL_ERR_INVALID_INPUT;
    case ErrorCode::InsufficientData: return TIDAL_ERR_INSUFFICIENT_DATA;
    case ErrorCode::DegenerateInput: return TIDAL_ERR_DEGENERATE_INPUT;
    case ErrorCode::SingularDesign: return TIDAL_ERR_SINGULAR_DESIGN;
    case ErrorCode::MissingFeature: return TIDAL_ERR_MISSING_FEATURE;
    case ErrorCode::InvalidLabel: return TIDAL_ERR_INVALID_LABEL;
    case ErrorCode::FoldFailure: return TIDAL_ERR_FOLD_FAILURE;
    case ErrorCode::DegenerateTraining: return TIDAL_ERR_DEGENERATE_TRAINING;
    case ErrorCode::ParseError: return TIDAL_ERR_PARSE;
    case ErrorCode::IoError: return TIDAL_ERR_IO;
  }
  return TIDAL_ERR_INTERNAL;
}

// Runs fn, translating exceptions into status codes.
template <typename Fn>
tidal_status guarded(Fn&& fn) {
  g_last_error.clear();
  try {
    fn();
    return TIDAL_OK;
  } catch (const tidal::Error& e) {
    g_last_error = e.what();
    return status_of(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return TIDAL_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return TIDAL_ERR_INTERNAL;
  }
}

void require(const void* p, const char* what) {
  if (p == nullptr) {
    throw tidal::Error(tidal::ErrorCode::InvalidParameter, std::string(what) + " is NULL");
  }
}

char* duplicate(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

tidal::TidalFeatures to_cpp(const tidal_features& f) {
  return {f.fit, f.rr, f.tv, f.n_cycles};
}

tidal::ObstructionLabel to_cpp(tidal_obstruction o) {
  return o == TIDAL_OBSTRUCTED ? tidal::ObstructionLabel::Obstructed
                               : tidal::ObstructionLabel::Normal;
}

tidal_obstruction to_c(tidal::ObstructionLabel o) {
  return o == tidal::ObstructionLabel::Obstructed ? TIDAL_OBSTRUCTED : TIDAL_NORMAL;
}

tidal_breath_cycle to_c(const tidal::BreathCycle& c) {
  return {c.trough_idx, c.peak_idx, c.end_trough_idx, c.t_i_s, c.t_tot_s, c.ra_n};
}

std::vector<tidal::LabeledFeatures> labeled(const tidal_features* points,
                                            const tidal_obstruction* labels, size_t n) {
  std::vector<tidal::LabeledFeatures> data;
  data.reserve(n);
  for (size_t i = 0; i < n; ++i) data.push_back({to_cpp(points[i]), to_cpp(labels[i])});
  return data;
}

std::vector<tidal::SeverityObservation> observations(const tidal_features* points,
                                                     const double* pct, size_t n) {
  std::vector<tidal::SeverityObservation> data;
  data.reserve(n);
  for (size_t i = 0; i < n; ++i) data.push_back({to_cpp(points[i]), pct[i]});
  return data;
}

}  // namespace

extern "C" {

const char* tidal_version(void) {
  static const std::string v = tidal::tool_version();
  return v.c_str();
}

const char* tidal_last_error(void) { return g_last_error.c_str(); }

const char* tidal_status_name(tidal_status status) {
  switch (status) {
    case TIDAL_OK: return "ok";
    case TIDAL_ERR_INVALID_PARAMETER: return "invalid-parameter";
    case TIDAL_ERR_INVALID_INPUT: return "invalid-input";
    case TIDAL_ERR_INSUFFICIENT_DATA: return "insufficient-data";
    case TIDAL_ERR_DEGENERATE_INPUT: return "degenerate-input";
    case TIDAL_ERR_SINGULAR_DESIGN: return "singular-design";
    case TIDAL_ERR_MISSING_FEATURE: return "missing-feature";
    case TIDAL_ERR_INVALID_LABEL: return "invalid-label";
    case TIDAL_ERR_FOLD_FAILURE: return "fold-failure";
    case TIDAL_ERR_DEGENERATE_TRAINING: return "degenerate-training";
    case TIDAL_ERR_PARSE: return "parse-error";
    case TIDAL_ERR_IO: return "io-error";
    case TIDAL_ERR_NULL_ARGUMENT: return "null-argument";
    case TIDAL_ERR_INTERNAL: return "internal-error";
  }
  return "unknown";
}

int tidal_exit_code(tidal_status status) {
  switch (status) {
    case TIDAL_OK: return 0;
    case TIDAL_ERR_INVALID_PARAMETER:
    case TIDAL_ERR_INVALID_INPUT:
    case TIDAL_ERR_MISSING_FEATURE:
    case TIDAL_ERR_INVALID_LABEL:
    case TIDAL_ERR_PARSE:
    case TIDAL_ERR_IO:
    case TIDAL_ERR_NULL_ARGUMENT:
      return 2;
    default:
      return 3;
  }
}

void tidal_string_free(char* s) { std::free(s); }

tidal_status tidal_signal_create(const double* samples, size_t n, double sample_rate_hz,
                                 const char* subject_id, tidal_signal** out) {
  if (out == nullptr || (samples == nullptr && n > 0)) return TIDAL_ERR_NULL_ARGUMENT;
  return guarded([&] {
    *out = new tidal_signal{tidal::RespiratorySignal(std::vector<double>(samples, samples + n),
                                                     sample_rate_hz,
                                                     subject_id ? subject_id : "")};
  });
}

tidal_status tidal_signal_read_csv(const char* path, const char* subject_id, tidal_signal** out) {
  if (out == nullptr || path == nullptr) return TIDAL_ERR_NULL_ARGUMENT;
  return guarded([&] {
    *out = new tidal_signal{tidal::read_signal_csv(path, subject_id ? subject_id : "")};
  });
}

void tidal_signal_free(tidal_signal* signal) { delete signal; }

size_t tidal_signal_length(const tidal_signal* signal) {
  return signal ? signal->value.size() : 0;
}

double tidal_signal_rate(const tidal_signal* signal) {
  return signal ? signal->value.sample_rate_hz() : 0.0;
}

const double* tidal_signal_samples(const tidal_signal* signal) {
  return signal ? signal->value.samples().data() : nullptr;
}

tidal_status tidal_detrend(const tidal_signal* signal, double window_s, tidal_signal** out) {
  if (signal == nullptr || out == nullptr) return TIDAL_ERR_NULL_ARGUMENT;
  return guarded([&] { *out = new tidal_signal{tidal::detrend(signal->value, window_s)}; });
}

tidal_status tidal_segment(const tidal_signal* signal, double min_cycle_s, double min_prominence_n,
                           tidal_cycle_list** out) {
  if (signal == nullptr || out == nullptr) return TIDAL_ERR_NULL_ARGUMENT;
  return guarded([&] {
    const double delta =
        min_prominence_n > 0.0 ? min_prominence_n : tidal::default_prominence(signal->value);
    *out = new tidal_cycle_list{tidal::segment_breaths(signal->value, min_cycle_s, delta)};
  });
}

void tidal_cycle_list_free(tidal_cycle_list* list) { delete list; }

size_t tidal_cycle_list_size(const tidal_cycle_list* list) {
  return list ? list->value.size() : 0;
}

tidal_status tidal_cycle_list_get(const tidal_cycle_list* list, size_t index,
                                  tidal_breath_cycle* out) {
  if (list == nullptr || out == nullptr) return TIDAL_ERR_NULL_ARGUMENT;
  return guarded([&] {
    if (index >= list->value.size()) {
      throw tidal::Error(tidal::ErrorCode::InvalidParameter, "cycle index out of range");
    }
    *out = to_c(list->value[index]);
  });
}

tidal_status tidal_select_clean_region(const tidal_cycle_list* cycles, const tidal_signal* signal,
                                       size_t min_cycles, size_t* first, size_t* count,
                                       double* quality) {
  if (cycles == nullptr || signal == nullptr) return TIDAL_ERR_NULL_ARGUMENT;
  return guarded([&] {
    const auto region = tidal::select_clean_region(cycles->value, signal->value, min_cycles);
    if (first) *first = region.first_index;
    if (count) *count = region.cycles.size();
    if (quality) *quality = region.quality_score;
  });
}

tidal_status tidal_extract_features(const tidal_cycle_list* cycles, size_t first, size_t count,
                                    double bmi, tidal_features* out) {
  if (cycles == nullptr || out == nullptr) return TIDAL_ERR_NULL_ARGUMENT;
  return guarded([&] {
    const auto region = tidal::region_from_indices(cycles->value, first, count);
    const auto f = tidal::extract_features(region.cycles, bmi);
    *out = {f.fit, f.rr, f.tv, f.n_cycles};
  });
}

tidal_status tidal_student_t_sf(double t, double df, double* out) {
  if (out == nullptr) return TIDAL_ERR_NULL_ARGUMENT;
  return guarded([&] { *out = tidal::student_t_sf(t, df); });
}

tidal_status tidal_f_sf(double f, double d1, double d2, double* out) {
  if (out == nullptr) return TIDAL_ERR_NULL_ARGUMENT;
  return guarded([&] { *out = tidal::f_sf(f, d1, d2); });
}

tidal_status tidal_p_from_r2(double r_squared, size_t n, double* out) {
  if (out == nullptr) return TIDAL_ERR_NULL_ARGUMENT;
  return guarded([&] { *out = tidal::p_from_r2(r_squared, n); });
}

tidal_status tidal_p_from_f(double r_squared, size_t k, size_t n, double* out) {
  if (out == nullptr) return TIDAL_ERR_NULL_ARGUMENT;
  return guarded([&] { *out = tidal::p_from_f(r_squared, k, n); });
}

tidal_status tidal_pearson(const double* x, const double* y, size_t n, double* r_squared,
                           double* p_value) {
  if ((x == nullptr || y == nullptr) && n > 0) return TIDAL_ERR_NULL_ARGUMENT;
  return guarded([&] {
    const auto cell = tidal::pearson({x, n}, {y, n});
    if (r_squared) *r_squared = cell.r_squared;
    if (p_value) *p_value = cell.p_value;
  });
}

tidal_status tidal_ols_fit(const double* x, size_t n, size_t k, const double* y,
                           const char* const* names, tidal_rmse_denominator denominator,
                           const char* model_name, tidal_regression** out) {
  if (x == nullptr || y == nullptr || names == nullptr || out == nullptr) {
    return TIDAL_ERR_NULL_ARGUMENT;
  }
  return guarded([&] {
    tidal::DesignMatrix design;
    design.rows = n;
    design.cols = k;
    design.values.assign(x, x + n * k);
    std::vector<std::string> predictor_names;
    for (size_t i = 0; i < k; ++i) {
      require(names[i], "predictor name");
      predictor_names.emplace_back(names[i]);
    }
    const auto rmse = denominator == TIDAL_RMSE_N_MINUS_K_MINUS_1
                          ? tidal::RmseDenominator::NMinusKMinus1
                          : tidal::RmseDenominator::N;
    *out = new tidal_regression{tidal::ols_fit(design, {y, n}, predictor_names, rmse,
                                               model_name ? model_name : "")};
  });
}

tidal_status tidal_regression_from_json(const char* json, tidal_regression** out) {
  if (json == nullptr || out == nullptr) return TIDAL_ERR_NULL_ARGUMENT;
  return guarded([&] { *out = new tidal_regression{tidal::regression_model_from_json(json)}; });
}

tidal_status tidal_regression_to_json(const tidal_regression* model, char** json) {
  if (model == nullptr || json == nullptr) return TIDAL_ERR_NULL_ARGUMENT;
  return guarded([&] { *json = duplicate(tidal::to_json(model->value)); });
}

void tidal_regression_free(tidal_regression* model) { delete model; }

tidal_status tidal_regression_predict(const tidal_regression* model, const char* const* names,
                                      const double* values, size_t count, double* out) {
  if (model == nullptr || out == nullptr || ((names == nullptr || values == nullptr) && count > 0)) {
    return TIDAL_ERR_NULL_ARGUMENT;
  }
  return guarded([&] {
    std::map<std::string, double> features;
    for (size_t i = 0; i < count; ++i) {
      require(names[i], "feature name");
      features[names[i]] = values[i];
    }
    *out = tidal::ols_predict(model->value, features);
  });
}

double tidal_regression_intercept(const tidal_regression* model) {
  return model ? model->value.intercept : 0.0;
}
double tidal_regression_r_squared(const tidal_regression* model) {
  return model ? model->value.r_squared : 0.0;
}
double tidal_regression_p_value(const tidal_regression* model) {
  return model ? model->value.p_value : 1.0;
}
double tidal_regression_rmse(const tidal_regression* model) {
  return model ? model->value.rmse : 0.0;
}
size_t tidal_regression_coefficient_count(const tidal_regression* model) {
  return model ? model->value.coefficients.size() : 0;
}

tidal_status tidal_regression_coefficient(const tidal_regression* model, size_t index,
                                          const char** name, double* value) {
  if (model == nullptr) return TIDAL_ERR_NULL_ARGUMENT;
  return guarded([&] {
    if (index >= model->value.coefficients.size()) {
      throw tidal::Error(tidal::ErrorCode::InvalidParameter, "coefficient index out of range");
    }
    if (name) *name = model->value.coefficients[index].first.c_str();
    if (value) *value = model->value.coefficients[index].second;
  });
}

tidal_status tidal_label_obstruction(double fev1_fvc, tidal_obstruction* out) {
  if (out == nullptr) return TIDAL_ERR_NULL_ARGUMENT;
  return guarded([&] { *out = to_c(tidal::label_obstruction(fev1_fvc)); });
}

tidal_status tidal_severity_stage(double pct_pred_fev1, tidal_severity* out) {
  if (out == nullptr) return TIDAL_ERR_NULL_ARGUMENT;
  return guarded([&] {
    *out = static_cast<tidal_severity>(tidal::severity_stage(pct_pred_fev1));
  });
}

tidal_coarse_severity tidal_coarse_stage(tidal_severity stage) {
  return stage == TIDAL_MILD || stage == TIDAL_MODERATE ? TIDAL_MILD_MODERATE
                                                        : TIDAL_SEVERE_VERY_SEVERE;
}

tidal_status tidal_knn_fit(const tidal_features* points, const tidal_obstruction* labels, size_t n,
                           size_t k, tidal_knn_scaling scaling, tidal_knn** out) {
  if (points == nullptr || labels == nullptr || out == nullptr) return TIDAL_ERR_NULL_ARGUMENT;
  return guarded([&] {
    const auto data = labeled(points, labels, n);
    *out = new tidal_knn{tidal::knn_fit(
        data, k, scaling == TIDAL_KNN_RAW ? tidal::KnnScaling::Raw : tidal::KnnScaling::ZScore)};
  });
}

tidal_status tidal_knn_predict(const tidal_knn* model, const tidal_features* query,
                               tidal_obstruction* out) {
  if (model == nullptr || query == nullptr || out == nullptr) return TIDAL_ERR_NULL_ARGUMENT;
  return guarded([&] { *out = to_c(tidal::knn_predict(model->value, to_cpp(*query))); });
}

tidal_status tidal_knn_to_json(const tidal_knn* model, char** json) {
  if (model == nullptr || json == nullptr) return TIDAL_ERR_NULL_ARGUMENT;
  return guarded([&] { *json = duplicate(tidal::to_json(model->value)); });
}

tidal_status tidal_knn_from_json(const char* json, tidal_knn** out) {
  if (json == nullptr || out == nullptr) return TIDAL_ERR_NULL_ARGUMENT;
  return guarded([&] { *out = new tidal_knn{tidal::knn_model_from_json(json)}; });
}

void tidal_knn_free(tidal_knn* model) { delete model; }

tidal_status tidal_severity_fit(const tidal_features* points, const double* pct_pred, size_t n,
                                tidal_regression** out) {
  if (points == nullptr || pct_pred == nullptr || out == nullptr) return TIDAL_ERR_NULL_ARGUMENT;
  return guarded([&] {
    const auto data = observations(points, pct_pred, n);
    *out = new tidal_regression{tidal::severity_fit(data)};
  });
}

tidal_status tidal_knn_loocv(const tidal_features* points, const tidal_obstruction* labels,
                             size_t n, size_t k, tidal_knn_scaling scaling,
                             tidal_obstruction* predicted) {
  if (points == nullptr || labels == nullptr || predicted == nullptr) {
    return TIDAL_ERR_NULL_ARGUMENT;
  }
  return guarded([&] {
    const auto data = labeled(points, labels, n);
    const auto mode = scaling == TIDAL_KNN_RAW ? tidal::KnnScaling::Raw : tidal::KnnScaling::ZScore;
    const auto pairs = tidal::loocv(
        data,
        [&](const std::vector<tidal::LabeledFeatures>& fold) { return tidal::knn_fit(fold, k, mode); },
        [](const tidal::KnnModel& m, const tidal::LabeledFeatures& s) {
          return tidal::knn_predict(m, s.features);
        },
        [](const tidal::LabeledFeatures& s) { return s.label; });
    for (size_t i = 0; i < n; ++i) predicted[i] = to_c(pairs[i].second);
  });
}

tidal_status tidal_severity_loocv(const tidal_features* points, const double* pct_pred, size_t n,
                                  double* estimated) {
  if (points == nullptr || pct_pred == nullptr || estimated == nullptr) {
    return TIDAL_ERR_NULL_ARGUMENT;
  }
  return guarded([&] {
    const auto data = observations(points, pct_pred, n);
    const auto pairs = tidal::loocv(
        data,
        [](const std::vector<tidal::SeverityObservation>& fold) { return tidal::severity_fit(fold); },
        [](const tidal::RegressionModel& m, const tidal::SeverityObservation& s) {
          return tidal::severity_estimate(m, s.features);
        },
        [](const tidal::SeverityObservation& s) { return s.pct_pred_fev1; });
    for (size_t i = 0; i < n; ++i) estimated[i] = pairs[i].second;
  });
}

tidal_status tidal_confusion_create(const char* const* classes, size_t n_classes,
                                    const char* positive_class, const char* const* truth,
                                    const char* const* predicted, size_t n_pairs,
                                    tidal_confusion** out) {
  if (classes == nullptr || out == nullptr ||
      ((truth == nullptr || predicted == nullptr) && n_pairs > 0)) {
    return TIDAL_ERR_NULL_ARGUMENT;
  }
  return guarded([&] {
    std::vector<std::string> names;
    for (size_t i = 0; i < n_classes; ++i) {
      require(classes[i], "class name");
      names.emplace_back(classes[i]);
    }
    std::vector<tidal::LabelPair> pairs;
    for (size_t i = 0; i < n_pairs; ++i) {
      require(truth[i], "true label");
      require(predicted[i], "predicted label");
      pairs.emplace_back(truth[i], predicted[i]);
    }
    std::optional<std::string> positive;
    if (positive_class) positive = positive_class;
    *out = new tidal_confusion{tidal::confusion(pairs, names, positive)};
  });
}

void tidal_confusion_free(tidal_confusion* cm) { delete cm; }

size_t tidal_confusion_count(const tidal_confusion* cm, size_t true_index, size_t predicted_index) {
  if (cm == nullptr || true_index >= cm->value.classes.size() ||
      predicted_index >= cm->value.classes.size()) {
    return 0;
  }
  return cm->value.counts[true_index][predicted_index];
}

tidal_status tidal_confusion_metric(const tidal_confusion* cm, const char* name, double* value,
                                    int* defined) {
  if (cm == nullptr || name == nullptr || value == nullptr) return TIDAL_ERR_NULL_ARGUMENT;
  return guarded([&] {
    const auto r = tidal::metrics(cm->value);
    const std::string key = name;
    std::optional<double> v;
    if (key == "sensitivity") v = r.sensitivity;
    else if (key == "specificity") v = r.specificity;
    else if (key == "balanced_accuracy") v = r.balanced_accuracy;
    else if (key == "precision") v = r.precision;
    else if (key == "f1") v = r.f1;
    else if (key == "raw_accuracy") v = r.raw_accuracy;
    else if (key == "kappa") v = r.kappa;
    else throw tidal::Error(tidal::ErrorCode::InvalidParameter, "unknown metric '" + key + "'");
    *value = v.value_or(0.0);
    if (defined) *defined = v.has_value() ? 1 : 0;
  });
}

tidal_status tidal_confusion_report_json(const tidal_confusion* cm, const char* task, char** json) {
  if (cm == nullptr || json == nullptr) return TIDAL_ERR_NULL_ARGUMENT;
  return guarded([&] {
    *json = duplicate(
        tidal::evaluation_report_json(task ? task : "", cm->value, tidal::metrics(cm->value)));
  });
}

tidal_status tidal_generate_signal(const tidal_breath_profile* profile, double duration_s,
                                   double sample_rate_hz, tidal_signal** signal,
                                   tidal_cycle_list** truth) {
  if (profile == nullptr || signal == nullptr) return TIDAL_ERR_NULL_ARGUMENT;
  return guarded([&] {
    tidal::BreathProfile p;
    p.t_i_s = profile->t_i_s;
    p.t_tot_s = profile->t_tot_s;
    p.ra_n = profile->ra_n;
    p.jitter = {profile->jitter_t_tot, profile->jitter_fit, profile->jitter_ra};
    p.drift_slope_n_per_s = profile->drift_slope_n_per_s;
    p.seed = profile->seed;
    auto generated = tidal::generate_signal(p, duration_s, sample_rate_hz);
    auto* sig = new tidal_signal{std::move(generated.signal)};
    if (truth) {
      try {
        *truth = new tidal_cycle_list{std::move(generated.truth)};
      } catch (...) {
        delete sig;
        throw;
      }
    }
    *signal = sig;
  });
}

tidal_status tidal_run(const char* manifest_json, char** summary) {
  if (manifest_json == nullptr) return TIDAL_ERR_NULL_ARGUMENT;
  return guarded([&] {
    const auto result = tidal::run_command(tidal::RunManifest::from_json(manifest_json));
    if (summary) {
      nlohmann::ordered_json j;
      j["manifest"] = nlohmann::ordered_json::parse(result.manifest.to_json());
      j["outputs"] = result.outputs;
      j["warnings"] = result.warnings;
      *summary = duplicate(j.dump(2));
    }
  });
}

}  // extern "C"

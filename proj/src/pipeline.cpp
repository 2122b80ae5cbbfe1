#include "tidal/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <set>

#include "json.hpp"
#include "report_json.hpp"
#include "tidal/classify.hpp"
#include "tidal/csvio.hpp"
#include "tidal/error.hpp"
#include "tidal/eval.hpp"
#include "tidal/features.hpp"
#include "tidal/signal.hpp"
#include "tidal/stats.hpp"
#include "tidal/synthgen.hpp"

#ifndef TIDAL_VERSION_STRING
#define TIDAL_VERSION_STRING "0.0.0"
#endif

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace tidal {

std::string tool_version() { return TIDAL_VERSION_STRING; }

std::string RunManifest::to_json() const {
  ojson j;
  j["command"] = command;
  j["input_paths"] = input_paths;
  j["parameters"] = parameters;
  j["tool_version"] = tool_version;
  return j.dump(2) + "\n";
}

RunManifest RunManifest::from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    RunManifest m;
    m.command = j.at("command").get<std::string>();
    if (j.contains("input_paths")) {
      m.input_paths = j.at("input_paths").get<std::vector<std::string>>();
    }
    m.parameters = j.at("parameters").get<std::map<std::string, std::string>>();
    if (j.contains("tool_version")) m.tool_version = j.at("tool_version").get<std::string>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ParseError, std::string("bad run manifest: ") + e.what());
  }
}

std::vector<std::string> known_commands() {
  return {"extract", "correlate", "fit", "detect", "stage", "synth"};
}

namespace {

class Params {
 public:
  explicit Params(RunManifest& m) : m_(m) {}

  void set_default(const std::string& key, const std::string& value) {
    m_.parameters.try_emplace(key, value);
  }

  const std::string& str(const std::string& key) const {
    const auto it = m_.parameters.find(key);
    if (it == m_.parameters.end() || it->second.empty()) {
      fail(ErrorCode::InvalidParameter, "missing parameter '" + key + "'");
    }
    return it->second;
  }

  double number(const std::string& key) const {
    try {
      const double v = parse_double(str(key));
      if (!std::isfinite(v)) fail(ErrorCode::InvalidParameter, "non-finite");
      return v;
    } catch (const Error&) {
      fail(ErrorCode::InvalidParameter,
           "parameter '" + key + "' is not a number: '" + str(key) + "'");
    }
  }

  std::size_t count(const std::string& key) const {
    const double v = number(key);
    if (!(v >= 0.0) || v != std::floor(v) || v > 1e15) {
      fail(ErrorCode::InvalidParameter, "parameter '" + key + "' must be a non-negative integer");
    }
    return static_cast<std::size_t>(v);
  }

  std::uint64_t seed(const std::string& key) const {
    const std::string& s = str(key);
    try {
      std::size_t used = 0;
      const auto v = std::stoull(s, &used, 10);
      if (used != s.size() || s.front() == '-') throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      fail(ErrorCode::InvalidParameter, "parameter '" + key + "' must be an unsigned integer");
    }
  }

  void require_known(const std::set<std::string>& allowed) const {
    for (const auto& [key, value] : m_.parameters) {
      if (!allowed.count(key)) fail(ErrorCode::InvalidParameter, "unknown parameter '" + key + "'");
    }
  }

 private:
  RunManifest& m_;
};

RmseDenominator rmse_denominator_from(const std::string& s) {
  if (s == "n") return RmseDenominator::N;
  if (s == "n-k-1") return RmseDenominator::NMinusKMinus1;
  fail(ErrorCode::InvalidParameter, "rmse_denominator must be 'n' or 'n-k-1'");
}

fs::path manifest_path_for(const fs::path& out) {
  return fs::path(out.string() + ".manifest.json");
}

void require_file(const fs::path& p, const std::string& what) {
  if (!fs::is_regular_file(p)) fail(ErrorCode::IoError, what + " not found: " + p.string());
}

ojson parameters_json(const RunManifest& m) {
  ojson j = ojson::object();
  for (const auto& [k, v] : m.parameters) j[k] = v;
  return j;
}

struct JoinedRow {
  std::string subject_id;
  TidalFeatures features;
  SubjectRecord subject;
};

std::vector<JoinedRow> join(const std::vector<FeatureRow>& features,
                            const std::vector<SubjectRecord>& subjects,
                            std::vector<std::string>& warnings) {
  std::map<std::string, const SubjectRecord*> by_id;
  for (const auto& s : subjects) by_id[s.subject_id] = &s;
  std::set<std::string> matched;
  std::vector<JoinedRow> out;
  for (const auto& f : features) {
    const auto it = by_id.find(f.subject_id);
    if (it == by_id.end()) {
      warnings.push_back("features row '" + f.subject_id + "' has no subject record");
      continue;
    }
    matched.insert(f.subject_id);
    out.push_back({f.subject_id, f.features, *it->second});
  }
  for (const auto& s : subjects) {
    if (!matched.count(s.subject_id)) {
      warnings.push_back("subject '" + s.subject_id + "' has no features row");
    }
  }
  std::sort(out.begin(), out.end(),
            [](const JoinedRow& a, const JoinedRow& b) { return a.subject_id < b.subject_id; });
  return out;
}

std::vector<JoinedRow> load_joined(Params& p, RunManifest& m, std::vector<std::string>& warnings) {
  const fs::path features = p.str("features");
  const fs::path subjects = p.str("subjects");
  require_file(features, "features file");
  require_file(subjects, "subjects file");
  m.input_paths = {features.string(), subjects.string()};
  return join(read_features_csv(features), read_subjects_csv(subjects), warnings);
}

std::optional<double> ratio_of(const SubjectRecord& s) {
  if (s.fev1_fvc) return s.fev1_fvc;
  if (s.fev1_l && s.fvc_l && *s.fvc_l > 0.0) return *s.fev1_l / *s.fvc_l;
  return std::nullopt;
}

void finish(RunResult& result, const fs::path& out) {
  const fs::path manifest = manifest_path_for(out);
  write_text_file(manifest, result.manifest.to_json());
  result.outputs.push_back(out.string());
  result.outputs.push_back(manifest.string());
}

// ---------------------------------------------------------------- extract

RunResult run_extract(RunManifest m) {
  Params p(m);
  p.require_known({"signals_dir", "subjects", "out", "min_cycles", "min_cycle_s",
                   "min_prominence", "detrend_window_s"});
  p.set_default("min_cycles", "6");
  p.set_default("min_cycle_s", "1.5");
  p.set_default("min_prominence", "auto");
  p.set_default("detrend_window_s", "12");

  const fs::path signals_dir = p.str("signals_dir");
  const fs::path subjects_path = p.str("subjects");
  const fs::path out = p.str("out");
  const std::size_t min_cycles = p.count("min_cycles");
  const double min_cycle_s = p.number("min_cycle_s");
  const bool auto_prominence = p.str("min_prominence") == "auto";
  const double prominence = auto_prominence ? 0.0 : p.number("min_prominence");
  const double detrend_window_s = p.number("detrend_window_s");
  if (min_cycles < 1) fail(ErrorCode::InvalidParameter, "min_cycles must be at least 1");
  if (!(min_cycle_s > 0.0)) fail(ErrorCode::InvalidParameter, "min_cycle_s must be positive");
  if (!auto_prominence && !(prominence > 0.0)) {
    fail(ErrorCode::InvalidParameter, "min_prominence must be positive or 'auto'");
  }
  if (detrend_window_s < 0.0) {
    fail(ErrorCode::InvalidParameter, "detrend_window_s must be >= 0 (0 disables)");
  }

  if (!fs::is_directory(signals_dir)) {
    fail(ErrorCode::IoError, "signals directory not found: " + signals_dir.string());
  }
  std::set<std::string> signal_ids;
  for (const auto& entry : fs::directory_iterator(signals_dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".csv") {
      signal_ids.insert(entry.path().stem().string());
    }
  }
  if (signal_ids.empty()) {
    fail(ErrorCode::IoError, "no signal CSV files in " + signals_dir.string());
  }
  require_file(subjects_path, "subjects file");
  m.input_paths = {signals_dir.string(), subjects_path.string()};

  auto subjects = read_subjects_csv(subjects_path);
  std::sort(subjects.begin(), subjects.end(),
            [](const auto& a, const auto& b) { return a.subject_id < b.subject_id; });

  RunResult result;
  std::vector<FeatureRow> rows;
  ojson errors = ojson::array();
  for (const auto& subject : subjects) {
    signal_ids.erase(subject.subject_id);
    const fs::path path = signals_dir / (subject.subject_id + ".csv");
    try {
      if (!fs::is_regular_file(path)) {
        fail(ErrorCode::IoError, "missing signal file " + path.filename().string());
      }
      auto signal = read_signal_csv(path, subject.subject_id);
      if (detrend_window_s > 0.0) signal = detrend(signal, detrend_window_s);
      const double delta = auto_prominence ? default_prominence(signal) : prominence;
      if (!(delta > 0.0)) fail(ErrorCode::DegenerateInput, "signal has no variation");
      const auto cycles = segment_breaths(signal, min_cycle_s, delta);
      const auto region = select_clean_region(cycles, signal, min_cycles);
      rows.push_back({subject.subject_id, extract_features(region, subject), region.quality_score});
    } catch (const Error& e) {
      errors.push_back({{"subject_id", subject.subject_id},
                        {"code", std::string(to_string(e.code()))},
                        {"message", e.what()}});
      result.warnings.push_back("subject " + subject.subject_id + ": " + e.what());
    }
  }
  for (const auto& orphan : signal_ids) {
    result.warnings.push_back("signal file '" + orphan + ".csv' has no subject record");
  }

  result.manifest = m;
  write_text_file(out, features_csv(rows));
  const fs::path sidecar = fs::path(out.string() + ".errors.json");
  write_text_file(sidecar, errors.dump(2) + "\n");
  result.outputs.push_back(sidecar.string());
  finish(result, out);
  if (rows.empty()) {
    fail(ErrorCode::InsufficientData, "feature extraction failed for every subject");
  }
  return result;
}

// -------------------------------------------------------------- correlate

const std::vector<std::pair<std::string, std::function<std::optional<double>(const SubjectRecord&)>>>&
spirometric_targets() {
  static const std::vector<
      std::pair<std::string, std::function<std::optional<double>(const SubjectRecord&)>>>
      targets{{"fev1_fvc", [](const SubjectRecord& s) { return ratio_of(s); }},
              {"fev1_l", [](const SubjectRecord& s) { return s.fev1_l; }},
              {"fvc_l", [](const SubjectRecord& s) { return s.fvc_l; }},
              {"fev1_pct_pred", [](const SubjectRecord& s) { return s.fev1_pct_pred; }}};
  return targets;
}

double feature_value(const TidalFeatures& f, const std::string& name) {
  if (name == "fit") return f.fit;
  if (name == "rr") return f.rr;
  if (name == "tv") return f.tv;
  fail(ErrorCode::InvalidParameter, "unknown feature '" + name + "'");
}

RunResult run_correlate(RunManifest m) {
  Params p(m);
  p.require_known({"features", "subjects", "out"});
  const fs::path out = p.str("out");
  RunResult result;
  const auto rows = load_joined(p, m, result.warnings);

  ojson cells = ojson::object();
  for (const auto& feature : kFeatureNames) {
    ojson row = ojson::object();
    for (std::size_t t = 0; t < 3; ++t) {
      const auto& [target, value_of] = spirometric_targets()[t];
      std::vector<double> x, y;
      for (const auto& r : rows) {
        if (const auto v = value_of(r.subject)) {
          x.push_back(feature_value(r.features, feature));
          y.push_back(*v);
        }
      }
      if (x.size() < 3) {
        fail(ErrorCode::InsufficientData,
             "only " + std::to_string(x.size()) + " joined rows have " + target);
      }
      const auto cell = pearson(x, y);
      row[target] = {{"r", cell.r},
                     {"r_squared", cell.r_squared},
                     {"p_value", cell.p_value},
                     {"n_obs", cell.n_obs}};
    }
    cells[feature] = row;
  }

  ojson j;
  j["task"] = "correlation";
  j["features"] = kFeatureNames;
  j["targets"] = {"fev1_fvc", "fev1_l", "fvc_l"};
  j["n_joined"] = rows.size();
  j["cells"] = cells;
  j["parameters"] = parameters_json(m);
  j["tool_version"] = m.tool_version;
  write_text_file(out, j.dump(2) + "\n");
  result.manifest = m;
  finish(result, out);
  return result;
}

// -------------------------------------------------------------------- fit

std::vector<std::string> split_names(const std::string& s) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    const std::size_t comma = std::min(s.find(',', pos), s.size());
    std::string name = s.substr(pos, comma - pos);
    if (!name.empty()) out.push_back(name);
    pos = comma + 1;
  }
  return out;
}

RunResult run_fit(RunManifest m) {
  Params p(m);
  p.require_known({"features", "subjects", "target", "predictors", "rmse_denominator", "out"});
  p.set_default("predictors", "fit,rr,tv");
  p.set_default("rmse_denominator", "n");
  const fs::path out = p.str("out");
  const std::string target = p.str("target");
  const auto predictors = split_names(p.str("predictors"));
  const auto denominator = rmse_denominator_from(p.str("rmse_denominator"));

  const auto& targets = spirometric_targets();
  const auto t = std::find_if(targets.begin(), targets.end(),
                              [&](const auto& e) { return e.first == target; });
  if (t == targets.end()) {
    fail(ErrorCode::InvalidParameter,
         "target must be one of fev1_fvc, fev1_l, fvc_l, fev1_pct_pred");
  }
  if (predictors.empty()) fail(ErrorCode::InvalidParameter, "no predictors given");
  for (const auto& name : predictors) {
    if (std::find(kFeatureNames.begin(), kFeatureNames.end(), name) == kFeatureNames.end()) {
      fail(ErrorCode::InvalidParameter, "predictor '" + name + "' is not one of fit, rr, tv");
    }
  }

  RunResult result;
  const auto rows = load_joined(p, m, result.warnings);
  DesignMatrix x;
  x.cols = predictors.size();
  std::vector<double> y;
  for (const auto& r : rows) {
    const auto v = t->second(r.subject);
    if (!v) continue;
    for (const auto& name : predictors) x.values.push_back(feature_value(r.features, name));
    y.push_back(*v);
    ++x.rows;
  }
  const auto model = ols_fit(x, y, predictors, denominator, target);
  write_text_file(out, to_json(model) + "\n");
  result.manifest = m;
  finish(result, out);
  return result;
}

// ----------------------------------------------------------------- detect

RunResult run_detect(RunManifest m) {
  Params p(m);
  p.require_known({"features", "subjects", "k", "knn_scaling", "out"});
  p.set_default("k", std::to_string(kDefaultK));
  p.set_default("knn_scaling", "zscore");
  const fs::path out = p.str("out");
  const std::size_t k = p.count("k");
  const auto scaling = knn_scaling_from_string(p.str("knn_scaling"));

  RunResult result;
  const auto rows = load_joined(p, m, result.warnings);
  struct Sample {
    std::string id;
    LabeledFeatures lf;
  };
  std::vector<Sample> data;
  for (const auto& r : rows) {
    const auto ratio = ratio_of(r.subject);
    if (!ratio) {
      result.warnings.push_back("subject '" + r.subject_id + "' has no FEV1/FVC; skipped");
      continue;
    }
    data.push_back({r.subject_id, {r.features, label_obstruction(*ratio)}});
  }
  if (data.size() < 2) fail(ErrorCode::InsufficientData, "detection needs at least 2 subjects");
  if (k == 0 || k % 2 == 0) fail(ErrorCode::InvalidParameter, "k must be a positive odd number");
  if (k > data.size() - 1) {
    fail(ErrorCode::InvalidParameter, "k = " + std::to_string(k) + " exceeds the " +
                                          std::to_string(data.size() - 1) +
                                          " training points available per fold");
  }
  std::set<ObstructionLabel> present;
  for (const auto& s : data) present.insert(s.lf.label);
  if (present.size() < 2) {
    fail(ErrorCode::DegenerateTraining, "cohort contains a single obstruction class");
  }

  const auto pairs = loocv(
      data,
      [&](const std::vector<Sample>& fold) {
        std::vector<LabeledFeatures> train;
        for (const auto& s : fold) train.push_back(s.lf);
        return knn_fit(train, k, scaling);
      },
      [](const KnnModel& model, const Sample& s) {
        return std::string(to_string(knn_predict(model, s.lf.features)));
      },
      [](const Sample& s) { return std::string(to_string(s.lf.label)); },
      std::function<std::string(const Sample&)>([](const Sample& s) { return s.id; }));

  const auto cm = confusion(pairs, {"Obstructed", "Normal"}, std::string("Obstructed"));
  auto j = evaluation_json("obstruction_detection", cm, metrics(cm));
  ojson predictions = ojson::array();
  for (std::size_t i = 0; i < data.size(); ++i) {
    predictions.push_back(
        {{"subject_id", data[i].id}, {"true", pairs[i].first}, {"predicted", pairs[i].second}});
  }
  j["predictions"] = predictions;
  j["parameters"] = parameters_json(m);
  j["tool_version"] = m.tool_version;
  write_text_file(out, j.dump(2) + "\n");
  result.manifest = m;
  finish(result, out);
  return result;
}

// ------------------------------------------------------------------ stage

RunResult run_stage(RunManifest m) {
  Params p(m);
  p.require_known({"features", "subjects", "rmse_denominator", "out"});
  p.set_default("rmse_denominator", "n");
  const fs::path out = p.str("out");
  const auto denominator = rmse_denominator_from(p.str("rmse_denominator"));

  RunResult result;
  const auto rows = load_joined(p, m, result.warnings);
  struct Sample {
    std::string id;
    SeverityObservation obs;
  };
  std::vector<Sample> data;
  for (const auto& r : rows) {
    const auto ratio = ratio_of(r.subject);
    if (!ratio || label_obstruction(*ratio) != ObstructionLabel::Obstructed) continue;
    if (!r.subject.fev1_pct_pred) {
      result.warnings.push_back("obstructed subject '" + r.subject_id +
                                "' has no fev1_pct_pred; skipped");
      continue;
    }
    data.push_back({r.subject_id, {r.features, *r.subject.fev1_pct_pred}});
  }
  // Every fold must keep at least 5 observations for the 3-predictor fit.
  if (data.size() < 6) {
    fail(ErrorCode::InsufficientData,
         "severity staging needs at least 6 obstructed subjects with fev1_pct_pred, found " +
             std::to_string(data.size()));
  }

  std::vector<double> estimates(data.size());
  const auto pairs = loocv(
      data,
      [&](const std::vector<Sample>& fold) {
        std::vector<SeverityObservation> train;
        for (const auto& s : fold) train.push_back(s.obs);
        return severity_fit(train, denominator);
      },
      [](const RegressionModel& model, const Sample& s) {
        return severity_estimate(model, s.obs.features);
      },
      [](const Sample& s) { return s.obs.pct_pred_fev1; },
      std::function<std::string(const Sample&)>([](const Sample& s) { return s.id; }));

  std::vector<LabelPair> fine, coarse_pairs;
  ojson predictions = ojson::array();
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Severity truth = severity_stage(pairs[i].first);
    const Severity predicted = severity_stage(pairs[i].second);
    fine.emplace_back(to_string(truth), to_string(predicted));
    coarse_pairs.emplace_back(to_string(coarse(truth)), to_string(coarse(predicted)));
    predictions.push_back({{"subject_id", data[i].id},
                           {"true_pct_pred", pairs[i].first},
                           {"estimated_pct_pred", pairs[i].second},
                           {"true_stage", to_string(truth)},
                           {"predicted_stage", to_string(predicted)}});
  }
  const auto fine_cm = confusion(fine, {"Mild", "Moderate", "Severe", "VerySevere"});
  const auto coarse_cm = confusion(coarse_pairs, {"SevereVerySevere", "MildModerate"},
                                   std::string("SevereVerySevere"));

  ojson j;
  j["task"] = "severity_staging";
  j["n"] = data.size();
  j["fine"] = evaluation_json("severity_fine", fine_cm, metrics(fine_cm));
  j["coarse"] = evaluation_json("severity_coarse", coarse_cm, metrics(coarse_cm));
  j["predictions"] = predictions;
  j["parameters"] = parameters_json(m);
  j["tool_version"] = m.tool_version;
  write_text_file(out, j.dump(2) + "\n");
  result.manifest = m;
  finish(result, out);
  return result;
}

// ------------------------------------------------------------------ synth

RunResult run_synth(RunManifest m) {
  Params p(m);
  p.require_known({"n", "obstructed_fraction", "seed", "noise_sd", "jitter", "duration_s",
                   "sample_rate_hz", "out"});
  p.set_default("n", "25");
  p.set_default("obstructed_fraction", "0.8");
  p.set_default("seed", "7");
  p.set_default("noise_sd", "5");
  p.set_default("jitter", "0.03");
  p.set_default("duration_s", "75");
  p.set_default("sample_rate_hz", "50");
  const fs::path out_dir = p.str("out");

  CohortOptions options;
  options.noise_sd = p.number("noise_sd");
  options.jitter = Jitter::uniform(p.number("jitter"));
  options.duration_s = p.number("duration_s");
  options.sample_rate_hz = p.number("sample_rate_hz");
  if (!(options.jitter.t_tot >= 0.0 && options.jitter.t_tot <= 0.3)) {
    fail(ErrorCode::InvalidParameter, "jitter must lie in [0, 0.3]");
  }
  const auto cohort = generate_cohort(p.count("n"), p.number("obstructed_fraction"),
                                      p.seed("seed"), options);
  m.input_paths.clear();

  RunResult result;
  std::vector<SubjectRecord> records;
  std::vector<FeatureRow> truth;
  for (std::size_t i = 0; i < cohort.subjects.size(); ++i) {
    const auto& s = cohort.subjects[i];
    records.push_back(s.record);
    const auto sig = cohort.signal_for(i);
    truth.push_back({s.record.subject_id, s.truth, region_quality(sig.truth)});
    const fs::path path = out_dir / "signals" / (s.record.subject_id + ".csv");
    write_text_file(path, signal_csv(sig.signal));
    result.outputs.push_back(path.string());
  }
  write_text_file(out_dir / "subjects.csv", subjects_csv(records));
  write_text_file(out_dir / "truth.csv", features_csv(truth));
  result.outputs.push_back((out_dir / "subjects.csv").string());
  result.outputs.push_back((out_dir / "truth.csv").string());
  result.manifest = m;
  write_text_file(out_dir / "manifest.json", m.to_json());
  result.outputs.push_back((out_dir / "manifest.json").string());
  return result;
}

}  // namespace

RunResult run_command(const RunManifest& manifest) {
  RunManifest m = manifest;
  std::vector<std::string> warnings;
  if (!m.tool_version.empty() && m.tool_version != tool_version()) {
    warnings.push_back("manifest was written by version " + m.tool_version + ", running " +
                       tool_version());
  }
  m.tool_version = tool_version();

  RunResult result;
  if (m.command == "extract") {
    result = run_extract(m);
  } else if (m.command == "correlate") {
    result = run_correlate(m);
  } else if (m.command == "fit") {
    result = run_fit(m);
  } else if (m.command == "detect") {
    result = run_detect(m);
  } else if (m.command == "stage") {
    result = run_stage(m);
  } else if (m.command == "synth") {
    result = run_synth(m);
  } else {
    fail(ErrorCode::InvalidParameter, "unknown command '" + m.command + "'");
  }
  result.warnings.insert(result.warnings.begin(), warnings.begin(), warnings.end());
  return result;
}

}  // namespace tidal

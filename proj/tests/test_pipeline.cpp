#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "json.hpp"
#include "support.hpp"
#include "tidal/csvio.hpp"
#include "tidal/error.hpp"
#include "tidal/pipeline.hpp"
#include "tidal/synthgen.hpp"

using namespace tidal;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("tidal_pipeline_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

RunResult run(const std::string& command, std::map<std::string, std::string> params) {
  RunManifest m;
  m.command = command;
  m.parameters = std::move(params);
  return run_command(m);
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected tidal::Error");
  return ErrorCode::InvalidInput;
}

nlohmann::json load(const fs::path& p) { return nlohmann::json::parse(read_text_file(p)); }

fs::path synth(const fs::path& dir, std::map<std::string, std::string> params = {}) {
  params["out"] = (dir / "cohort").string();
  run("synth", params);
  return dir / "cohort";
}

std::map<std::string, std::string> io(const fs::path& features, const fs::path& subjects,
                                      const fs::path& out) {
  return {{"features", features.string()}, {"subjects", subjects.string()}, {"out", out.string()}};
}

SubjectRecord subject(const std::string& id, double ratio, std::optional<double> pct) {
  SubjectRecord s;
  s.subject_id = id;
  s.bmi = 25.0;
  s.fvc_l = 3.0;
  s.fev1_l = 3.0 * ratio;
  s.fev1_fvc = ratio;
  s.fev1_pct_pred = pct;
  return s;
}

}  // namespace

TEST_CASE("extract reproduces generator features for a cohort of five") {
  const auto dir = scratch("extract5");
  const auto cohort = synth(dir, {{"n", "5"}, {"obstructed_fraction", "0.6"}, {"seed", "3"}});
  const auto out = dir / "features.csv";
  const auto r = run("extract", {{"signals_dir", (cohort / "signals").string()},
                                 {"subjects", (cohort / "subjects.csv").string()},
                                 {"out", out.string()}});
  CHECK(r.warnings.empty());
  const auto rows = read_features_csv(out);
  const auto truth = read_features_csv(cohort / "truth.csv");
  REQUIRE(rows.size() == 5);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].subject_id == truth[i].subject_id);
    CHECK(rows[i].features.n_cycles >= 6);
    // Region means versus whole-signal means under 3% breath-to-breath jitter.
    CHECK(rows[i].features.fit == doctest::Approx(truth[i].features.fit).epsilon(0.05));
    CHECK(rows[i].features.rr == doctest::Approx(truth[i].features.rr).epsilon(0.05));
    CHECK(rows[i].features.tv == doctest::Approx(truth[i].features.tv).epsilon(0.05));
  }
  CHECK(load(dir / "features.csv.errors.json").empty());
  CHECK(fs::exists(dir / "features.csv.manifest.json"));
}

TEST_CASE("clean-region cycles coincide with ground-truth cycles") {
  const auto cohort = generate_cohort(6, 0.5, 11, CohortOptions{});
  for (std::size_t i = 0; i < cohort.subjects.size(); ++i) {
    const auto g = cohort.signal_for(i);
    const double fs = g.signal.sample_rate_hz();
    // Without detrending, cycles match the truth to one sample.
    const auto raw = segment_breaths(g.signal, kDefaultMinCycleSeconds, default_prominence(g.signal));
    const auto region = select_clean_region(raw, g.signal, 6);
    // Ground truth stops before a final cycle whose next inhale is cut off.
    const std::size_t last = g.truth.back().trough_idx + 1;
    for (const auto& c : region.cycles) {
      if (c.trough_idx > last) continue;
      const BreathCycle* t = nullptr;
      for (const auto& cand : g.truth) {
        if (cand.trough_idx + 1 >= c.trough_idx && c.trough_idx + 1 >= cand.trough_idx) t = &cand;
      }
      REQUIRE(t != nullptr);
      CHECK(std::abs(c.t_i_s - t->t_i_s) <= 1.0 / fs + 1e-12);
      CHECK(std::abs(c.t_tot_s - t->t_tot_s) <= 1.0 / fs + 1e-12);
      CHECK(c.ra_n == doctest::Approx(t->ra_n).epsilon(0.01));
    }
    // Away from the truncated edge windows, the moving-average baseline shifts extrema by at most two samples.
    const auto half = static_cast<std::size_t>(6.0 * fs);
    const auto d = detrend(g.signal, 12.0);
    for (const auto& c : segment_breaths(d, kDefaultMinCycleSeconds, default_prominence(d))) {
      if (c.trough_idx < half || c.trough_idx > last + 1) continue;
      bool near = false;
      for (const auto& t : g.truth) near = near || (t.trough_idx + 2 >= c.trough_idx && c.trough_idx + 2 >= t.trough_idx);
      CHECK(near);
    }
  }
}

TEST_CASE("extract reports per-subject failures in a sidecar") {
  const auto dir = scratch("extract_corrupt");
  const auto cohort = synth(dir, {{"n", "5"}, {"seed", "4"}});
  write_text_file(cohort / "signals" / "S003.csv", "time_s,force_n\n0,1\n0.02,abc\n");
  const auto out = dir / "features.csv";
  const auto r = run("extract", {{"signals_dir", (cohort / "signals").string()},
                                 {"subjects", (cohort / "subjects.csv").string()},
                                 {"out", out.string()}});
  CHECK(read_features_csv(out).size() == 4);
  const auto errors = load(dir / "features.csv.errors.json");
  REQUIRE(errors.size() == 1);
  CHECK(errors[0]["subject_id"] == "S003");
  CHECK(errors[0]["code"] == "parse-error");
  CHECK(std::string(errors[0]["message"]).find(":3:") != std::string::npos);
  CHECK(r.warnings.size() == 1);
}

TEST_CASE("extract fails on an empty signals directory") {
  const auto dir = scratch("extract_empty");
  fs::create_directories(dir / "signals");
  write_text_file(dir / "subjects.csv", subjects_csv({subject("A", 0.8, 90.0)}));
  CHECK(code_of([&] {
          run("extract", {{"signals_dir", (dir / "signals").string()},
                          {"subjects", (dir / "subjects.csv").string()},
                          {"out", (dir / "f.csv").string()}});
        }) == ErrorCode::IoError);
  CHECK(!fs::exists(dir / "f.csv"));
}

TEST_CASE("signal ingestion checks spacing and order") {
  const auto dir = scratch("ingest");
  write_text_file(dir / "a.csv", "time_s,force_n\n0,1\n0.02,2\n0.04,1\n0.07,2\n0.08,1\n");
  CHECK(code_of([&] { read_signal_csv(dir / "a.csv", "a"); }) == ErrorCode::InvalidInput);
  write_text_file(dir / "b.csv", "time_s,force_n\n0,1\n0.02,2\n0.02,1\n");
  CHECK(code_of([&] { read_signal_csv(dir / "b.csv", "b"); }) == ErrorCode::ParseError);
  write_text_file(dir / "c.csv", "t,force_n\n0,1\n");
  CHECK(code_of([&] { read_signal_csv(dir / "c.csv", "c"); }) == ErrorCode::ParseError);
  write_text_file(dir / "d.csv", "time_s,force_n\r\n0,1\r\n0.0200001,2\r\n0.04,1\r\n");
  const auto s = read_signal_csv(dir / "d.csv", "d");
  CHECK(s.sample_rate_hz() == doctest::Approx(50.0).epsilon(1e-4));
  CHECK(s.size() == 3);
}

TEST_CASE("subjects and features CSV round trip") {
  const auto dir = scratch("csv");
  std::vector<SubjectRecord> subjects{subject("A", 0.5, 45.0), subject("B", 0.8, std::nullopt)};
  subjects[1].age_y = 61;
  write_text_file(dir / "s.csv", subjects_csv(subjects));
  const auto back = read_subjects_csv(dir / "s.csv");
  REQUIRE(back.size() == 2);
  CHECK(back[0].fev1_fvc == subjects[0].fev1_fvc);
  CHECK(!back[1].fev1_pct_pred.has_value());
  CHECK(back[1].age_y == 61.0);
  CHECK(subjects_csv(back) == subjects_csv(subjects));

  std::vector<FeatureRow> rows{{"A", {0.1 + 0.2, 1.0 / 3.0, 25.000000000000004, 7}, 0.9}};
  write_text_file(dir / "f.csv", features_csv(rows));
  const auto f = read_features_csv(dir / "f.csv");
  CHECK(f[0].features.fit == 0.1 + 0.2);
  CHECK(f[0].features.rr == 1.0 / 3.0);
  CHECK(f[0].features.tv == 25.000000000000004);

  write_text_file(dir / "dup.csv", subjects_csv({subject("A", 0.5, 45.0), subject("A", 0.6, 45.0)}));
  CHECK(code_of([&] { read_subjects_csv(dir / "dup.csv"); }) == ErrorCode::ParseError);
  auto bad = subject("C", 0.5, 45.0);
  bad.fev1_fvc = 0.9;
  write_text_file(dir / "bad.csv", subjects_csv({bad}));
  CHECK(code_of([&] { read_subjects_csv(dir / "bad.csv"); }) == ErrorCode::InvalidInput);
}

TEST_CASE("correlate finds an exact linear relation") {
  const auto dir = scratch("corr_exact");
  std::vector<FeatureRow> rows;
  std::vector<SubjectRecord> subjects;
  testsupport::Gen gen(50);
  for (int i = 0; i < 10; ++i) {
    const std::string id = "P" + std::to_string(10 + i);
    const double fit = gen.uniform(0.25, 0.45);
    rows.push_back({id, {fit, gen.uniform(0.5, 1.0), gen.uniform(10, 30), 6}, 0.9});
    auto s = subject(id, gen.uniform(0.4, 0.9), 50.0);
    s.fvc_l = gen.uniform(3.0, 5.0);
    s.fev1_l = 6.0 * fit;
    s.fev1_fvc = *s.fev1_l / *s.fvc_l;
    subjects.push_back(s);
  }
  write_text_file(dir / "f.csv", features_csv(rows));
  write_text_file(dir / "s.csv", subjects_csv(subjects));
  run("correlate", io(dir / "f.csv", dir / "s.csv", dir / "c.json"));
  const auto j = load(dir / "c.json");
  CHECK(j["cells"]["fit"]["fev1_l"]["r_squared"].get<double>() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(j["cells"]["fit"]["fev1_l"]["n_obs"] == 10);
  CHECK(j["n_joined"] == 10);
}

TEST_CASE("correlate on independent data mostly finds nothing") {
  const auto dir = scratch("corr_null");
  std::vector<FeatureRow> rows;
  std::vector<SubjectRecord> subjects;
  testsupport::Gen gen(2024);
  for (int i = 0; i < 200; ++i) {
    char id[8];
    std::snprintf(id, sizeof id, "R%03d", i);
    rows.push_back({id, {gen.uniform(0.2, 0.5), gen.uniform(0.4, 1.2), gen.uniform(10, 40), 6}, 0.9});
    const double fvc = gen.uniform(1.5, 5.0);
    const double ratio = gen.uniform(0.3, 0.9);
    auto s = subject(id, ratio, 50.0);
    s.fvc_l = fvc;
    s.fev1_l = ratio * fvc;
    subjects.push_back(s);
  }
  write_text_file(dir / "f.csv", features_csv(rows));
  write_text_file(dir / "s.csv", subjects_csv(subjects));
  run("correlate", io(dir / "f.csv", dir / "s.csv", dir / "c.json"));
  const auto j = load(dir / "c.json");
  int quiet = 0;
  for (const char* f : {"fit", "rr", "tv"})
    for (const char* t : {"fev1_fvc", "fev1_l", "fvc_l"}) quiet += j["cells"][f][t]["p_value"].get<double>() > 0.05;
  CHECK(quiet >= 6);
}

TEST_CASE("correlate on extracted features tracks the ground-truth correlations") {
  const auto dir = scratch("corr_truth");
  const auto cohort = synth(dir, {{"seed", "7"}});
  run("extract", {{"signals_dir", (cohort / "signals").string()},
                  {"subjects", (cohort / "subjects.csv").string()},
                  {"out", (dir / "features.csv").string()}});
  run("correlate", io(dir / "features.csv", cohort / "subjects.csv", dir / "c.json"));
  run("correlate", io(cohort / "truth.csv", cohort / "subjects.csv", dir / "t.json"));
  const auto got = load(dir / "c.json")["cells"];
  const auto want = load(dir / "t.json")["cells"];
  for (const char* f : {"fit", "rr", "tv"}) {
    for (const char* t : {"fev1_fvc", "fev1_l", "fvc_l"}) {
      CHECK(std::abs(got[f][t]["r_squared"].get<double>() - want[f][t]["r_squared"].get<double>()) <= 0.1);
    }
  }
}

TEST_CASE("correlate needs three joined rows") {
  const auto dir = scratch("corr_small");
  write_text_file(dir / "f.csv", features_csv({{"A", {0.3, 1, 10, 6}, 1}, {"B", {0.4, 2, 11, 6}, 1}}));
  write_text_file(dir / "s.csv", subjects_csv({subject("A", 0.5, 40), subject("B", 0.6, 50), subject("C", 0.7, 60)}));
  CHECK(code_of([&] { run("correlate", io(dir / "f.csv", dir / "s.csv", dir / "c.json")); }) ==
        ErrorCode::InsufficientData);
}

TEST_CASE("fit recovers an exact plane through files") {
  const auto dir = scratch("fit_plane");
  std::vector<FeatureRow> rows;
  std::vector<SubjectRecord> subjects;
  testsupport::Gen gen(51);
  for (int i = 0; i < 10; ++i) {
    const std::string id = "Q" + std::to_string(i);
    const double fit = gen.uniform(0.2, 0.5), tv = gen.uniform(10, 40);
    rows.push_back({id, {fit, gen.uniform(0.5, 1), tv, 6}, 1});
    auto s = subject(id, 0.6, 50);
    s.fvc_l = 2.0 + 3.0 * fit - 0.01 * tv;
    s.fev1_l = 0.6 * *s.fvc_l;
    subjects.push_back(s);
  }
  // One unmatched subject on each side only warns.
  rows.push_back({"ZZ", {0.3, 1, 10, 6}, 1});
  subjects.push_back(subject("YY", 0.6, 50));
  write_text_file(dir / "f.csv", features_csv(rows));
  write_text_file(dir / "s.csv", subjects_csv(subjects));
  auto params = io(dir / "f.csv", dir / "s.csv", dir / "m.json");
  params["target"] = "fvc_l";
  params["predictors"] = "fit,tv";
  const auto r = run("fit", params);
  CHECK(r.warnings.size() == 2);
  const auto m = regression_model_from_json(read_text_file(dir / "m.json"));
  CHECK(m.name == "fvc_l");
  CHECK(m.n_obs == 10);
  CHECK(std::abs(m.intercept - 2.0) < 1e-9);
  CHECK(std::abs(m.coefficients[0].second - 3.0) < 1e-9);
  CHECK(std::abs(m.coefficients[1].second + 0.01) < 1e-9);
  params["predictors"] = "fit,volume";
  CHECK(code_of([&] { run("fit", params); }) == ErrorCode::InvalidParameter);
  params["predictors"] = "fit";
  params["target"] = "dlco";
  CHECK(code_of([&] { run("fit", params); }) == ErrorCode::InvalidParameter);
}

TEST_CASE("detect on a separable cohort") {
  const auto dir = scratch("detect");
  const auto cohort = synth(dir);
  run("extract", {{"signals_dir", (cohort / "signals").string()},
                  {"subjects", (cohort / "subjects.csv").string()},
                  {"out", (dir / "features.csv").string()}});
  run("detect", io(dir / "features.csv", cohort / "subjects.csv", dir / "d.json"));
  const auto j = load(dir / "d.json");
  CHECK(j["n"] == 25);
  CHECK(j["metrics"]["sensitivity"].get<double>() >= 0.9);
  CHECK(j["metrics"]["specificity"].get<double>() >= 0.9);
  CHECK(j["predictions"].size() == 25);
  CHECK(j["parameters"]["k"] == "3");

  auto params = io(dir / "features.csv", cohort / "subjects.csv", dir / "x.json");
  params["k"] = "25";
  CHECK(code_of([&] { run("detect", params); }) == ErrorCode::InvalidParameter);
  params["k"] = "4";
  CHECK(code_of([&] { run("detect", params); }) == ErrorCode::InvalidParameter);
}

TEST_CASE("detect with shuffled labels is near chance") {
  const auto dir = scratch("detect_shuffled");
  const auto cohort = synth(dir);
  auto subjects = read_subjects_csv(cohort / "subjects.csv");
  // Seeded Fisher-Yates over the spirometry so labels detach from features.
  testsupport::Gen gen(77);
  std::vector<SubjectRecord> shuffled = subjects;
  for (std::size_t i = shuffled.size(); i > 1; --i) {
    const std::size_t j = gen.index(i);
    std::swap(shuffled[i - 1].fev1_l, shuffled[j].fev1_l);
    std::swap(shuffled[i - 1].fvc_l, shuffled[j].fvc_l);
    std::swap(shuffled[i - 1].fev1_fvc, shuffled[j].fev1_fvc);
  }
  write_text_file(dir / "shuffled.csv", subjects_csv(shuffled));
  run("detect", io(cohort / "truth.csv", dir / "shuffled.csv", dir / "d.json"));
  const auto kappa = load(dir / "d.json")["kappa"];
  REQUIRE(kappa.is_number());
  CHECK(kappa.get<double>() >= -0.35);
  CHECK(kappa.get<double>() <= 0.35);
}

TEST_CASE("detect on a single class cohort is degenerate") {
  const auto dir = scratch("detect_single");
  const auto cohort = synth(dir, {{"obstructed_fraction", "1"}, {"n", "8"}});
  CHECK(code_of([&] { run("detect", io(cohort / "truth.csv", cohort / "subjects.csv", dir / "d.json")); }) ==
        ErrorCode::DegenerateTraining);
}

TEST_CASE("stage on a noiseless cohort is perfect") {
  const auto dir = scratch("stage_clean");
  const auto cohort = synth(dir, {{"noise_sd", "0"}});
  run("stage", io(cohort / "truth.csv", cohort / "subjects.csv", dir / "s.json"));
  const auto j = load(dir / "s.json");
  CHECK(j["n"] == 20);
  CHECK(j["fine"]["kappa"].get<double>() == doctest::Approx(1.0));
  CHECK(j["coarse"]["classes"][0] == "SevereVerySevere");
}

TEST_CASE("coarse staging agrees better than fine staging under noise") {
  const auto dir = scratch("stage_noisy");
  const auto cohort = synth(dir, {{"noise_sd", "8"}, {"seed", "7"}});
  run("stage", io(cohort / "truth.csv", cohort / "subjects.csv", dir / "s.json"));
  const auto j = load(dir / "s.json");
  REQUIRE(j["fine"]["kappa"].is_number());
  REQUIRE(j["coarse"]["kappa"].is_number());
  CHECK(j["coarse"]["kappa"].get<double>() > j["fine"]["kappa"].get<double>());
}

TEST_CASE("stage reports undefined kappa when everyone shares a stage") {
  const auto dir = scratch("stage_one");
  std::vector<FeatureRow> rows;
  std::vector<SubjectRecord> subjects;
  testsupport::Gen gen(52);
  for (int i = 0; i < 8; ++i) {
    const std::string id = "M" + std::to_string(i);
    const TidalFeatures f{gen.uniform(0.2, 0.35), gen.uniform(0.7, 1.0), gen.uniform(10, 16), 6};
    rows.push_back({id, f, 1});
    subjects.push_back(subject(id, 0.5, 55.0 + 20.0 * f.fit + 2.0 * f.rr + 0.3 * f.tv));
  }
  write_text_file(dir / "f.csv", features_csv(rows));
  write_text_file(dir / "s.csv", subjects_csv(subjects));
  run("stage", io(dir / "f.csv", dir / "s.csv", dir / "s.json"));
  const auto j = load(dir / "s.json");
  CHECK(j["fine"]["kappa"].is_null());
  CHECK(j["coarse"]["kappa"].is_null());
  const auto undefined = j["fine"]["undefined_metrics"].get<std::vector<std::string>>();
  CHECK(std::find(undefined.begin(), undefined.end(), "kappa") != undefined.end());
}

TEST_CASE("stage needs enough obstructed subjects") {
  const auto dir = scratch("stage_few");
  const auto cohort = synth(dir, {{"n", "10"}, {"obstructed_fraction", "0.4"}});
  CHECK(code_of([&] { run("stage", io(cohort / "truth.csv", cohort / "subjects.csv", dir / "s.json")); }) ==
        ErrorCode::InsufficientData);
}

TEST_CASE("synth output is byte-identical across runs") {
  const auto a = scratch("synth_a");
  const auto b = scratch("synth_b");
  synth(a, {{"n", "6"}, {"seed", "19"}});
  synth(b, {{"n", "6"}, {"seed", "19"}});
  for (const auto& e : fs::recursive_directory_iterator(a / "cohort")) {
    if (!e.is_regular_file() || e.path().filename() == "manifest.json") continue;
    const auto rel = fs::relative(e.path(), a);
    CHECK(read_text_file(e.path()) == read_text_file(b / rel));
  }
  const auto subjects = read_subjects_csv(a / "cohort" / "subjects.csv");
  CHECK(subjects.size() == 6);
}

TEST_CASE("replaying a saved manifest reproduces the output") {
  const auto dir = scratch("replay");
  const auto cohort = synth(dir);
  run("detect", io(cohort / "truth.csv", cohort / "subjects.csv", dir / "d.json"));
  const auto first = read_text_file(dir / "d.json");
  const auto manifest = RunManifest::from_json(read_text_file(dir / "d.json.manifest.json"));
  CHECK(manifest.parameters.at("knn_scaling") == "zscore");
  CHECK(manifest.tool_version == tool_version());
  run_command(manifest);
  CHECK(read_text_file(dir / "d.json") == first);
}

TEST_CASE("unknown commands and parameters are rejected") {
  CHECK(code_of([] { run("plot", {}); }) == ErrorCode::InvalidParameter);
  CHECK(code_of([] { run("synth", {{"out", "/tmp/x"}, {"colour", "blue"}}); }) == ErrorCode::InvalidParameter);
  CHECK(code_of([] { RunManifest::from_json("{\"command\": 1}"); }) == ErrorCode::ParseError);
}

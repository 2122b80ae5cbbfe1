// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"
#include "support.hpp"
#include "tidal/classify.hpp"
#include "tidal/csvio.hpp"
#include "tidal/error.hpp"
#include "tidal/eval.hpp"
#include "tidal/pipeline.hpp"
#include "tidal/signal.hpp"
#include "tidal/stats.hpp"
#include "tidal/synthgen.hpp"

using namespace tidal;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances.
constexpr double kPTolTight = 0.0005;
constexpr double kPTolLoose = 0.001;
constexpr double kPredictTol = 1e-12;
constexpr double kPercentTol = 0.1;  // percentage points
constexpr double kKappaTol = 0.005;
constexpr double kOlsRelTol = 1e-9;
constexpr double kOrthTol = 1e-9;
constexpr double kAmplitudeRelTol = 0.01;
constexpr int kArtifactSeedsRequired = 95;
constexpr double kStatsBudgetS = 1.0;
constexpr double kLoocvBudgetS = 10.0;
constexpr double kPipelineBudgetS = 30.0;

struct Verdict {
  bool pass;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

char buf[512];
template <typename... A>
std::string fmt(const char* f, A... a) {
  std::snprintf(buf, sizeof buf, f, a...);
  return buf;
}

Verdict criterion_1() {
  const auto t0 = std::chrono::steady_clock::now();
  struct Case {
    double got, want, tol;
  };
  const std::vector<Case> cases{
      {p_from_r2(0.295, 25), 0.005, kPTolTight}, {p_from_r2(0.274, 25), 0.007, kPTolTight},
      {p_from_r2(0.060, 25), 0.238, kPTolLoose}, {p_from_f(0.435, 2, 25), 0.002, kPTolTight},
      {p_from_f(0.427, 2, 25), 0.002, kPTolTight}, {p_from_f(0.329, 1, 25), 0.003, kPTolTight}};
  const double elapsed = seconds_since(t0);
  bool ok = elapsed < kStatsBudgetS;
  std::string detail;
  for (const auto& c : cases) {
    ok = ok && std::abs(c.got - c.want) <= c.tol;
    detail += fmt("%.4f ", c.got);
  }
  return {ok, "p = " + detail + fmt("in %.3f s", elapsed)};
}

Verdict criterion_2() {
  auto model = [](double b0, std::vector<std::pair<std::string, double>> c) {
    RegressionModel m;
    m.intercept = b0;
    m.coefficients = std::move(c);
    return m;
  };
  const double a = ols_predict(model(0.094, {{"fit", 1.57}, {"rr", -0.227}}), {{"fit", 0.4}, {"rr", 2.0}});
  const double b = ols_predict(model(-1.16, {{"fit", 5.35}, {"tv", 0.005}}), {{"fit", 0.5}, {"tv", 100.0}});
  const double c = ols_predict(model(1.55, {{"tv", 0.0096}}), {{"tv", 0.0}});
  const bool ok = std::abs(a - 0.268) <= kPredictTol && std::abs(b - 2.015) <= kPredictTol &&
                  std::abs(c - 1.55) <= kPredictTol;
  return {ok, fmt("%.15g %.15g %.15g", a, b, c)};
}

ConfusionMatrix from_counts(const std::vector<std::vector<std::size_t>>& counts,
                            const std::vector<std::string>& classes) {
  std::vector<LabelPair> pairs;
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j)
      for (std::size_t n = 0; n < counts[i][j]; ++n) pairs.emplace_back(classes[i], classes[j]);
  return confusion(pairs, classes, classes[0]);
}

Verdict criterion_3() {
  const auto a = metrics(from_counts({{19, 1}, {1, 4}}, {"Obstructed", "Normal"}));
  const auto b = metrics(from_counts({{10, 1}, {2, 7}}, {"SevereVerySevere", "MildModerate"}));
  auto near = [](const std::optional<double>& v, double pct) {
    return v && std::abs(100.0 * *v - pct) <= kPercentTol;
  };
  const bool ok = near(a.sensitivity, 95.0) && near(a.specificity, 80.0) &&
                  near(a.balanced_accuracy, 87.5) && near(a.f1, 95.0) && near(b.sensitivity, 90.9) &&
                  near(b.specificity, 77.8) && near(b.balanced_accuracy, 84.3) && near(b.f1, 87.0) &&
                  b.kappa && std::abs(*b.kappa - 0.694) <= kKappaTol;
  return {ok, fmt("%.1f/%.1f/%.1f/%.1f; %.1f/%.1f/%.1f/%.1f kappa %.4f", 100 * *a.sensitivity,
                  100 * *a.specificity, 100 * *a.balanced_accuracy, 100 * *a.f1, 100 * *b.sensitivity,
                  100 * *b.specificity, 100 * *b.balanced_accuracy, 100 * *b.f1, b.kappa.value_or(NAN))};
}

Verdict criterion_4() {
  const auto t0 = std::chrono::steady_clock::now();
  testsupport::Gen gen(4004);
  int identical = 0, datasets = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 8 + gen.index(23);  // 8..30
    std::vector<LabeledFeatures> knn_data;
    std::vector<SeverityObservation> sev_data;
    for (std::size_t i = 0; i < n; ++i) {
      const TidalFeatures f{gen.uniform(0.2, 0.5), gen.uniform(0.4, 1.2), gen.uniform(10, 40), 6};
      const auto label = i < 2 ? ObstructionLabel(i) : ObstructionLabel(gen.index(2));
      knn_data.push_back({f, label});
      sev_data.push_back({f, 20 + 100 * f.fit - 10 * f.rr + f.tv + 5 * gen.normal()});
    }
    // Avoid folds that leave a single class: give each class at least two members.
    knn_data[2].label = ObstructionLabel::Normal;
    knn_data[3].label = ObstructionLabel::Obstructed;
    const std::size_t k = 1 + 2 * gen.index(3);
    const auto scaling = gen.index(2) ? KnnScaling::ZScore : KnnScaling::Raw;

    const auto knn_out = loocv(
        knn_data, [&](const std::vector<LabeledFeatures>& fold) { return knn_fit(fold, k, scaling); },
        [](const KnnModel& m, const LabeledFeatures& s) { return knn_predict(m, s.features); },
        [](const LabeledFeatures& s) { return s.label; });
    const auto sev_out = loocv(
        sev_data, [](const std::vector<SeverityObservation>& fold) { return severity_fit(fold); },
        [](const RegressionModel& m, const SeverityObservation& s) { return severity_estimate(m, s.features); },
        [](const SeverityObservation& s) { return s.pct_pred_fev1; });

    bool same = knn_out.size() == n && sev_out.size() == n;
    for (std::size_t held = 0; held < n && same; ++held) {
      std::vector<LabeledFeatures> kf;
      std::vector<SeverityObservation> sf;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == held) continue;
        kf.push_back(knn_data[j]);
        sf.push_back(sev_data[j]);
      }
      const auto km = knn_fit(kf, k, scaling);
      const auto sm = severity_fit(sf);
      same = knn_out[held].first == knn_data[held].label &&
             knn_out[held].second == knn_predict(km, knn_data[held].features) &&
             sev_out[held].first == sev_data[held].pct_pred_fev1 &&
             sev_out[held].second == severity_estimate(sm, sev_data[held].features);
    }
    identical += same;
    ++datasets;
  }
  const double elapsed = seconds_since(t0);
  return {identical == datasets && elapsed < kLoocvBudgetS,
          fmt("%d/%d datasets identical in %.2f s", identical, datasets, elapsed)};
}

Verdict criterion_5() {
  testsupport::Gen gen(5005);
  double worst_coef = 0.0, worst_orth = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t k = 1 + gen.index(3);
    const std::size_t n = k + 3 + gen.index(40);
    DesignMatrix x{n, k, std::vector<double>(n * k)};
    for (auto& v : x.values) v = gen.uniform(-10, 10);
    std::vector<double> beta(k + 1);
    for (auto& b : beta) b = gen.uniform(-5, 5);
    std::vector<double> y_exact(n), y_noisy(n);
    for (std::size_t i = 0; i < n; ++i) {
      y_exact[i] = beta[0];
      for (std::size_t c = 0; c < k; ++c) y_exact[i] += beta[c + 1] * x(i, c);
      y_noisy[i] = y_exact[i] + gen.normal() * 3.0;
    }
    std::vector<std::string> names;
    for (std::size_t c = 0; c < k; ++c) names.push_back("x" + std::to_string(c));
    const auto exact = ols_fit(x, y_exact, names);
    worst_coef = std::max(worst_coef, std::abs(exact.intercept - beta[0]) / std::max(1.0, std::abs(beta[0])));
    for (std::size_t c = 0; c < k; ++c) {
      worst_coef = std::max(worst_coef, std::abs(exact.coefficients[c].second - beta[c + 1]) /
                                            std::max(1.0, std::abs(beta[c + 1])));
    }
    const auto noisy = ols_fit(x, y_noisy, names);
    std::vector<double> resid(n);
    double ynorm = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double fitted = noisy.intercept;
      for (std::size_t c = 0; c < k; ++c) fitted += noisy.coefficients[c].second * x(i, c);
      resid[i] = y_noisy[i] - fitted;
      ynorm += y_noisy[i] * y_noisy[i];
    }
    ynorm = std::sqrt(ynorm);
    double sum = 0.0;
    for (double r : resid) sum += r;
    worst_orth = std::max(worst_orth, std::abs(sum) / (ynorm * std::sqrt(double(n))));
    for (std::size_t c = 0; c < k; ++c) {
      double dot = 0.0, xn = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        dot += resid[i] * x(i, c);
        xn += x(i, c) * x(i, c);
      }
      worst_orth = std::max(worst_orth, std::abs(dot) / (ynorm * std::sqrt(xn)));
    }
  }
  return {worst_coef < kOlsRelTol && worst_orth <= kOrthTol,
          fmt("max coefficient rel err %.2e, max residual correlation %.2e", worst_coef, worst_orth)};
}

BreathProfile random_profile(testsupport::Gen& gen, std::uint64_t seed) {
  BreathProfile p;
  p.t_tot_s = gen.uniform(2.0, 5.0);
  p.t_i_s = p.t_tot_s * gen.uniform(0.25, 0.5);
  p.ra_n = gen.uniform(0.3, 2.0);
  p.jitter = Jitter::uniform(gen.uniform(0.0, 0.08));
  p.seed = seed;
  return p;
}

Verdict criterion_6() {
  constexpr double fs = 50.0;
  testsupport::Gen gen(6006);
  int round_trip_ok = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const auto p = random_profile(gen, seed);
    const auto g = generate_signal(p, 75.0, fs);
    const auto seg = segment_breaths(g.signal, kDefaultMinCycleSeconds, default_prominence(g.signal));
    bool ok = !g.truth.empty();
    for (const auto& t : g.truth) {
      const BreathCycle* match = nullptr;
      for (const auto& c : seg) {
        if (c.trough_idx + 1 >= t.trough_idx && c.trough_idx <= t.trough_idx + 1) match = &c;
      }
      ok = ok && match && std::abs(match->t_i_s - t.t_i_s) <= 1.0 / fs + 1e-12 &&
           std::abs(match->t_tot_s - t.t_tot_s) <= 1.0 / fs + 1e-12 &&
           std::abs(match->ra_n - t.ra_n) <= kAmplitudeRelTol * t.ra_n;
    }
    round_trip_ok += ok;
  }

  int excluded = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    auto p = random_profile(gen, 1000 + seed);
    const double duration = 30.0 * p.t_tot_s;
    const double start = gen.uniform(0.3, 0.6) * duration;
    const double length = gen.uniform(1.0, 3.0) * p.t_tot_s;
    p.artifact_bursts.push_back({start, length, gen.uniform(0.3, 0.8) * p.ra_n});
    const auto g = generate_signal(p, duration, fs);
    const auto seg = segment_breaths(g.signal, kDefaultMinCycleSeconds, default_prominence(g.signal));
    bool clean = false;
    try {
      const auto region = select_clean_region(seg, g.signal, kDefaultMinCycles);
      clean = true;
      for (const auto& c : region.cycles) {
        const double a = static_cast<double>(c.trough_idx) / fs;
        const double b = static_cast<double>(c.end_trough_idx) / fs;
        if (b > start && a < start + length) clean = false;
      }
    } catch (const Error&) {
      clean = false;
    }
    excluded += clean;
  }
  return {round_trip_ok == 100 && excluded >= kArtifactSeedsRequired,
          fmt("round trip %d/100 signals, artifact excluded in %d/100 seeds", round_trip_ok, excluded)};
}

RunResult run(const std::string& command, std::map<std::string, std::string> params) {
  RunManifest m;
  m.command = command;
  m.parameters = std::move(params);
  return run_command(m);
}

Verdict criterion_7(const fs::path& dir) {
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path cohort = dir / "cohort";
  run("synth", {{"n", "25"}, {"obstructed_fraction", "0.8"}, {"seed", "7"}, {"out", cohort.string()}});
  run("extract", {{"signals_dir", (cohort / "signals").string()},
                  {"subjects", (cohort / "subjects.csv").string()},
                  {"out", (dir / "features.csv").string()}});
  run("detect", {{"features", (dir / "features.csv").string()},
                 {"subjects", (cohort / "subjects.csv").string()},
                 {"out", (dir / "detect.json").string()}});
  const double elapsed = seconds_since(t0);
  const auto j = nlohmann::json::parse(read_text_file(dir / "detect.json"));
  const double sens = j["metrics"]["sensitivity"].get<double>();
  const double spec = j["metrics"]["specificity"].get<double>();
  int obstructed = 0;
  for (const auto& s : read_subjects_csv(cohort / "subjects.csv")) {
    obstructed += label_obstruction(*s.fev1_fvc) == ObstructionLabel::Obstructed;
  }
  return {sens >= 0.9 && spec >= 0.8 && obstructed == 20 && elapsed < kPipelineBudgetS,
          fmt("%d/5 split, sensitivity %.3f, specificity %.3f in %.2f s", obstructed, 25 - obstructed, sens,
              spec, elapsed)};
}

Verdict criterion_8(const fs::path& dir) {
  const fs::path cohort = dir / "cohort";
  const std::string subjects = (cohort / "subjects.csv").string();
  const std::string features = (dir / "features.csv").string();
  struct Step {
    std::string command;
    std::map<std::string, std::string> params;
    std::vector<fs::path> outputs;
  };
  const std::vector<Step> steps{
      {"synth", {{"n", "25"}, {"seed", "7"}, {"out", cohort.string()}},
       {cohort / "subjects.csv", cohort / "truth.csv", cohort / "signals" / "S001.csv", cohort / "signals" / "S025.csv"}},
      {"extract", {{"signals_dir", (cohort / "signals").string()}, {"subjects", subjects}, {"out", features}},
       {features, features + ".errors.json"}},
      {"correlate", {{"features", features}, {"subjects", subjects}, {"out", (dir / "c.json").string()}}, {dir / "c.json"}},
      {"fit",
       {{"features", features}, {"subjects", subjects}, {"target", "fev1_pct_pred"}, {"out", (dir / "m.json").string()}},
       {dir / "m.json"}},
      {"detect", {{"features", features}, {"subjects", subjects}, {"out", (dir / "d.json").string()}}, {dir / "d.json"}},
      {"stage", {{"features", features}, {"subjects", subjects}, {"out", (dir / "s.json").string()}}, {dir / "s.json"}},
  };
  int identical = 0;
  for (const auto& step : steps) {
    const auto first = run(step.command, step.params);
    std::vector<std::string> before;
    for (const auto& p : step.outputs) before.push_back(read_text_file(p));
    run_command(first.manifest);
    bool same = true;
    for (std::size_t i = 0; i < step.outputs.size(); ++i) same = same && read_text_file(step.outputs[i]) == before[i];
    identical += same;
  }
  return {identical == static_cast<int>(steps.size()),
          fmt("%d/%zu commands byte-identical on replay", identical, steps.size())};
}

}  // namespace

int main() {
  const fs::path dir = fs::temp_directory_path() / "tidal_acceptance";
  fs::remove_all(dir);
  fs::create_directories(dir);

  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"statistical formula reproduction", criterion_1},
      {"regression equation arithmetic", criterion_2},
      {"metrics from reconstructed confusion matrices", criterion_3},
      {"LOOCV equals brute-force refit", criterion_4},
      {"OLS exactness and residual orthogonality", criterion_5},
      {"segmentation round trip and artifact avoidance", criterion_6},
      {"synth -> extract -> detect pipeline", [&] { return criterion_7(dir / "c7"); }},
      {"determinism on replay", [&] { return criterion_8(dir / "c8"); }},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Verdict v{false, ""};
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failures += !v.pass;
    std::printf("%s criterion %zu: %s (%s)\n", v.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                v.detail.c_str());
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}

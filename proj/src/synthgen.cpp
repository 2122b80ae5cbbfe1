#include "tidal/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "tidal/error.hpp"
#include "tidal/rng.hpp"

namespace tidal {

void BreathProfile::validate() const {
  if (!(t_i_s > 0.0 && t_i_s < t_tot_s)) {
    fail(ErrorCode::InvalidParameter, "profile needs 0 < t_i_s < t_tot_s");
  }
  if (!(ra_n > 0.0)) fail(ErrorCode::InvalidParameter, "profile needs ra_n > 0");
  if (!(jitter.t_tot >= 0.0 && jitter.fit >= 0.0 && jitter.ra >= 0.0)) {
    fail(ErrorCode::InvalidParameter, "jitter must be non-negative");
  }
  if (!std::isfinite(drift_slope_n_per_s)) {
    fail(ErrorCode::InvalidParameter, "drift slope must be finite");
  }
  for (const auto& b : artifact_bursts) {
    if (!(b.duration_s >= 0.0) || !std::isfinite(b.start_s) || !std::isfinite(b.amplitude_n)) {
      fail(ErrorCode::InvalidParameter, "bad artifact burst");
    }
  }
}

namespace {

struct CycleDraw {
  std::size_t n_i;
  std::size_t n_tot;
  double ra;
};

CycleDraw draw_cycle(const BreathProfile& p, double fs, CounterRng& rng) {
  const double z_tot = rng.normal();
  const double z_fit = rng.normal();
  const double z_ra = rng.normal();
  const double t_tot = p.t_tot_s * std::max(0.3, 1.0 + p.jitter.t_tot * z_tot);
  const double fit =
      std::clamp((p.t_i_s / p.t_tot_s) * (1.0 + p.jitter.fit * z_fit), 0.05, 0.95);
  CycleDraw c;
  c.n_tot = std::max<std::size_t>(4, static_cast<std::size_t>(std::llround(t_tot * fs)));
  c.n_i = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(fit * static_cast<double>(c.n_tot))), 1,
      c.n_tot - 1);
  c.ra = p.ra_n * std::max(0.2, 1.0 + p.jitter.ra * z_ra);
  return c;
}

double breath_shape(const CycleDraw& c, std::size_t j) {
  using std::numbers::pi;
  if (j <= c.n_i) {
    return c.ra * 0.5 * (1.0 - std::cos(pi * static_cast<double>(j) / static_cast<double>(c.n_i)));
  }
  const double n_e = static_cast<double>(c.n_tot - c.n_i);
  return c.ra * 0.5 * (1.0 + std::cos(pi * static_cast<double>(j - c.n_i) / n_e));
}

}  // namespace

SyntheticSignal generate_signal(const BreathProfile& profile, double duration_s,
                                double sample_rate_hz) {
  profile.validate();
  if (!(sample_rate_hz > 0.0) || !(sample_rate_hz >= 10.0 / profile.t_tot_s)) {
    fail(ErrorCode::InvalidParameter, "sample rate must be at least 10 / t_tot_s");
  }
  if (!(duration_s >= 2.0 * profile.t_tot_s) || !std::isfinite(duration_s)) {
    fail(ErrorCode::InvalidParameter, "duration must be at least two breath periods");
  }
  const double fs = sample_rate_hz;
  const auto n = static_cast<std::size_t>(std::floor(duration_s * fs)) + 1;

  CounterRng rng(profile.seed, 0);
  std::vector<CycleDraw> draws;
  std::vector<long long> starts;
  // The lead-in cycle starts before sample 0 so the signal opens mid-exhale.
  draws.push_back(draw_cycle(profile, fs, rng));
  const auto& lead = draws.front();
  long long start = -static_cast<long long>(lead.n_i + (lead.n_tot - lead.n_i) / 2);
  starts.push_back(start);
  while (start + static_cast<long long>(draws.back().n_tot) < static_cast<long long>(n)) {
    start += static_cast<long long>(draws.back().n_tot);
    starts.push_back(start);
    draws.push_back(draw_cycle(profile, fs, rng));
  }

  std::vector<double> samples(n, 0.0);
  for (std::size_t k = 0; k < draws.size(); ++k) {
    for (std::size_t j = 0; j < draws[k].n_tot; ++j) {
      const long long idx = starts[k] + static_cast<long long>(j);
      if (idx < 0 || idx >= static_cast<long long>(n)) continue;
      samples[static_cast<std::size_t>(idx)] = breath_shape(draws[k], j);
    }
  }

  if (profile.drift_slope_n_per_s != 0.0) {
    for (std::size_t i = 0; i < n; ++i) {
      samples[i] += profile.drift_slope_n_per_s * static_cast<double>(i) / fs;
    }
  }
  CounterRng artifact_rng(profile.seed, 1);
  for (const auto& burst : profile.artifact_bursts) {
    const double freq = artifact_rng.uniform(0.8, 2.5);
    const double phase = artifact_rng.uniform(0.0, 2.0 * std::numbers::pi);
    for (std::size_t i = 0; i < n; ++i) {
      const double t = static_cast<double>(i) / fs;
      if (t < burst.start_s || t >= burst.start_s + burst.duration_s) continue;
      samples[i] += burst.amplitude_n *
                    std::sin(2.0 * std::numbers::pi * freq * (t - burst.start_s) + phase);
    }
  }

  // A cycle counts as ground truth when it lies entirely inside the signal
  // and the following inhale reaches its peak, which confirms the end trough.
  std::vector<BreathCycle> truth;
  for (std::size_t k = 1; k + 1 < draws.size(); ++k) {
    const auto& c = draws[k];
    const std::size_t s0 = static_cast<std::size_t>(starts[k]);
    const std::size_t end = s0 + c.n_tot;
    if (end + draws[k + 1].n_i > n - 1) break;
    BreathCycle bc;
    bc.trough_idx = s0;
    bc.peak_idx = s0 + c.n_i;
    bc.end_trough_idx = end;
    bc.t_i_s = static_cast<double>(c.n_i) / fs;
    bc.t_tot_s = static_cast<double>(c.n_tot) / fs;
    bc.ra_n = c.ra;
    truth.push_back(bc);
  }

  return {RespiratorySignal(std::move(samples), fs), std::move(truth)};
}

RegressionModel CohortOptions::default_pct_model() {
  RegressionModel m;
  m.name = "fev1_pct_pred";
  m.intercept = -40.0;
  m.coefficients = {{"fit", 300.0}, {"rr", -20.0}, {"tv", 1.5}};
  return m;
}

namespace {

double draw(CounterRng& rng, const Draw& d) {
  return rng.truncated_normal(d.mean, d.sd, d.range.lo, d.range.hi);
}

std::string subject_name(std::size_t i) {
  std::string digits = std::to_string(i + 1);
  if (digits.size() < 3) digits.insert(0, 3 - digits.size(), '0');
  return "S" + digits;
}

}  // namespace

SyntheticCohort generate_cohort(std::size_t n, double obstructed_fraction, std::uint64_t seed,
                                const CohortOptions& options) {
  if (n < 4) fail(ErrorCode::InvalidParameter, "a cohort needs at least 4 subjects");
  if (!(obstructed_fraction >= 0.0 && obstructed_fraction <= 1.0)) {
    fail(ErrorCode::InvalidParameter, "obstructed_fraction must lie in [0, 1]");
  }
  if (!(options.noise_sd >= 0.0) || !(options.fvc_noise_sd >= 0.0)) {
    fail(ErrorCode::InvalidParameter, "noise levels must be non-negative");
  }

  const auto n_obstructed =
      static_cast<std::size_t>(std::llround(static_cast<double>(n) * obstructed_fraction));
  std::vector<ObstructionLabel> labels(n, ObstructionLabel::Normal);
  std::fill(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(n_obstructed),
            ObstructionLabel::Obstructed);
  CounterRng shuffle_rng(seed, 0);
  for (std::size_t i = n - 1; i > 0; --i) {
    const auto j = static_cast<std::size_t>(shuffle_rng.next_u64() % (i + 1));
    std::swap(labels[i], labels[j]);
  }

  SyntheticCohort cohort;
  cohort.generating_model = options.pct_model;
  cohort.noise_sd = options.noise_sd;
  cohort.options = options;

  for (std::size_t i = 0; i < n; ++i) {
    CounterRng rng(seed, i + 1);
    const Regime& regime =
        labels[i] == ObstructionLabel::Obstructed ? options.obstructed : options.normal;

    CohortSubject s;
    s.label = labels[i];
    s.profile.t_tot_s = draw(rng, regime.t_tot_s);
    s.profile.t_i_s = draw(rng, regime.fit) * s.profile.t_tot_s;
    s.profile.ra_n = draw(rng, regime.ra_n);
    s.profile.jitter = options.jitter;
    s.profile.seed = splitmix64_mix(seed ^ splitmix64_mix(i + 0x5eedULL));

    const double bmi = draw(rng, options.bmi);
    const double height = draw(rng, options.height_cm);
    const double h = height / 100.0;
    s.record.subject_id = subject_name(i);
    s.record.age_y = std::round(draw(rng, options.age_y));
    s.record.height_cm = height;
    s.record.weight_kg = bmi * h * h;
    s.record.bmi = bmi;

    const auto sig = generate_signal(s.profile, options.duration_s, options.sample_rate_hz);
    s.truth = extract_features(sig.truth, bmi);

    const double ratio = rng.uniform(regime.fev1_fvc.lo, regime.fev1_fvc.hi);
    const double fvc = std::max(0.8, 1.2 + 0.06 * s.truth.tv + options.fvc_noise_sd * rng.normal());
    s.record.fvc_l = fvc;
    s.record.fev1_l = ratio * fvc;
    s.record.fev1_fvc = ratio;

    s.pct_signal = severity_estimate(options.pct_model, s.truth);
    double pct = s.pct_signal + options.noise_sd * rng.normal();
    // Noise may push a value out of the valid %predicted range.
    pct = std::clamp(pct, 1.0, 199.0);
    s.record.fev1_pct_pred = pct;

    cohort.subjects.push_back(std::move(s));
  }
  return cohort;
}

double SyntheticCohort::analytic_r_squared() const {
  if (subjects.size() < 2) fail(ErrorCode::InsufficientData, "cohort too small");
  double mean = 0.0;
  for (const auto& s : subjects) mean += s.pct_signal;
  mean /= static_cast<double>(subjects.size());
  double var = 0.0;
  for (const auto& s : subjects) var += (s.pct_signal - mean) * (s.pct_signal - mean);
  var /= static_cast<double>(subjects.size());
  return var / (var + noise_sd * noise_sd);
}

SyntheticSignal SyntheticCohort::signal_for(std::size_t i) const {
  auto sig = generate_signal(subjects.at(i).profile, options.duration_s, options.sample_rate_hz);
  return {RespiratorySignal(std::vector<double>(sig.signal.samples().begin(),
                                                sig.signal.samples().end()),
                            sig.signal.sample_rate_hz(), subjects[i].record.subject_id),
          std::move(sig.truth)};
}

}  // namespace tidal

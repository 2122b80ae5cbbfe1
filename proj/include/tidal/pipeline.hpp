#pragma once

// Batch commands. Each command is described by a RunManifest whose
// parameters are plain strings; run_command fills in defaults, performs the
// run, and writes the completed manifest next to its output so that the run
// can be replayed. Analytical outputs carry no timestamps or host details.
//
//   extract    signals_dir, subjects, out, min_cycles, min_cycle_s,
//              min_prominence ("auto" = 0.1 x IQR), detrend_window_s
//   correlate  features, subjects, out
//   fit        features, subjects, target, predictors, rmse_denominator, out
//   detect     features, subjects, k, knn_scaling, out
//   stage      features, subjects, rmse_denominator, out
//   synth      n, obstructed_fraction, seed, noise_sd, jitter, duration_s,
//              sample_rate_hz, out (a directory)

#include <map>
#include <string>
#include <vector>

namespace tidal {

std::string tool_version();

struct RunManifest {
  std::string command;
  std::vector<std::string> input_paths;
  std::map<std::string, std::string> parameters;
  std::string tool_version;

  std::string to_json() const;
  static RunManifest from_json(const std::string& text);
};

struct RunResult {
  RunManifest manifest;  // with defaults filled in
  std::vector<std::string> outputs;
  std::vector<std::string> warnings;
};

// Throws tidal::Error; input problems carry input error codes (exit 2),
// analysis failures the others (exit 3).
RunResult run_command(const RunManifest& manifest);

std::vector<std::string> known_commands();

}  // namespace tidal

// Command-line front end. Builds a run manifest from flags and hands it to
// the library through the C interface.

#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "tidal/tidal.h"

namespace {

struct Flag {
  std::string param;
  std::string value;
  CLI::Option* option = nullptr;
};

class Command {
 public:
  Command(CLI::App& app, const std::string& name, const std::string& help)
      : sub_(app.add_subcommand(name, help)), name_(name) {}

  Command& required(const std::string& flag, const std::string& param, const std::string& help) {
    add(flag, param, help)->required();
    return *this;
  }

  Command& optional(const std::string& flag, const std::string& param, const std::string& help) {
    add(flag, param, help);
    return *this;
  }

  CLI::App* app() const { return sub_; }
  const std::string& name() const { return name_; }

  std::string manifest_json() const {
    nlohmann::ordered_json j;
    j["command"] = name_;
    nlohmann::ordered_json params = nlohmann::ordered_json::object();
    for (const auto& f : flags_) {
      if (f->option->count() > 0) params[f->param] = f->value;
    }
    j["parameters"] = params;
    return j.dump();
  }

 private:
  CLI::Option* add(const std::string& flag, const std::string& param, const std::string& help) {
    flags_.push_back(std::make_unique<Flag>());
    Flag& f = *flags_.back();
    f.param = param;
    f.option = sub_->add_option(flag, f.value, help);
    return f.option;
  }

  CLI::App* sub_;
  std::string name_;
  std::vector<std::unique_ptr<Flag>> flags_;
};

int run_manifest(const std::string& manifest) {
  char* summary = nullptr;
  const tidal_status status = tidal_run(manifest.c_str(), &summary);
  if (status != TIDAL_OK) {
    std::cerr << "error (" << tidal_status_name(status) << "): " << tidal_last_error() << "\n";
    return tidal_exit_code(status);
  }
  const auto j = nlohmann::json::parse(summary);
  tidal_string_free(summary);
  for (const auto& w : j.at("warnings")) std::cerr << "warning: " << w.get<std::string>() << "\n";
  for (const auto& o : j.at("outputs")) std::cout << o.get<std::string>() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tidal breathing analysis"};
  app.set_version_flag("--version", std::string(tidal_version()));
  app.require_subcommand(1);

  const std::string rmse_help = "RMSE denominator: n or n-k-1";
  std::vector<std::unique_ptr<Command>> commands;
  auto make = [&](const std::string& name, const std::string& help) -> Command& {
    commands.push_back(std::make_unique<Command>(app, name, help));
    return *commands.back();
  };

  make("extract", "Segment signals and write per-subject tidal features")
      .required("--signals", "signals_dir", "Directory of <subject_id>.csv signal files")
      .required("--subjects", "subjects", "Subjects CSV")
      .required("--out", "out", "Output features CSV")
      .optional("--min-cycles", "min_cycles", "Minimum clean cycles (default 6)")
      .optional("--min-cycle-s", "min_cycle_s", "Shortest accepted cycle in seconds (default 1.5)")
      .optional("--min-prominence", "min_prominence", "Extremum prominence in N, or auto")
      .optional("--detrend-window-s", "detrend_window_s", "Baseline window in seconds (default 12)");

  make("correlate", "Correlate features with spirometry")
      .required("--features", "features", "Features CSV")
      .required("--subjects", "subjects", "Subjects CSV")
      .required("--out", "out", "Output JSON");

  make("fit", "Fit a linear model from features to a spirometric target")
      .required("--features", "features", "Features CSV")
      .required("--subjects", "subjects", "Subjects CSV")
      .required("--target", "target", "fev1_fvc, fev1_l, fvc_l or fev1_pct_pred")
      .optional("--predictors", "predictors", "Comma-separated subset of fit,rr,tv")
      .optional("--rmse-denominator", "rmse_denominator", rmse_help)
      .required("--out", "out", "Output model JSON");

  make("detect", "Leave-one-out KNN obstruction detection")
      .required("--features", "features", "Features CSV")
      .required("--subjects", "subjects", "Subjects CSV")
      .optional("--k", "k", "Neighbour count, odd (default 3)")
      .optional("--knn-scaling", "knn_scaling", "zscore or raw")
      .required("--out", "out", "Output report JSON");

  make("stage", "Leave-one-out severity staging of obstructed subjects")
      .required("--features", "features", "Features CSV")
      .required("--subjects", "subjects", "Subjects CSV")
      .optional("--rmse-denominator", "rmse_denominator", rmse_help)
      .required("--out", "out", "Output report JSON");

  make("synth", "Generate a synthetic cohort")
      .optional("--n", "n", "Number of subjects (default 25)")
      .optional("--obstructed-fraction", "obstructed_fraction", "Fraction obstructed (default 0.8)")
      .optional("--seed", "seed", "Random seed (default 7)")
      .optional("--noise-sd", "noise_sd", "FEV1 %pred noise sd (default 5)")
      .optional("--jitter", "jitter", "Breath-to-breath jitter (default 0.03)")
      .optional("--duration-s", "duration_s", "Recording length in seconds (default 75)")
      .optional("--sample-rate-hz", "sample_rate_hz", "Sample rate (default 50)")
      .required("--out", "out", "Output directory");

  std::string replay_path;
  auto* replay = app.add_subcommand("replay", "Re-run a command from a saved run manifest");
  replay->add_option("manifest", replay_path, "Manifest JSON file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (replay->parsed()) {
    std::ifstream in(replay_path, std::ios::binary);
    if (!in) {
      std::cerr << "error (io-error): cannot open " << replay_path << "\n";
      return 2;
    }
    std::ostringstream text;
    text << in.rdbuf();
    return run_manifest(text.str());
  }
  for (const auto& c : commands) {
    if (c->app()->parsed()) return run_manifest(c->manifest_json());
  }
  return 2;
}

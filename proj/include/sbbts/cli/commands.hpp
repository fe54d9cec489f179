#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "sbbts/core/config.hpp"
#include "sbbts/stochastic/heston.hpp"

namespace sbbts::cli {

inline constexpr const char* kRunConfigSchema = "sbbts-run/1";
inline constexpr const char* kOutDirEnv = "SBBTS_OUT_DIR";

/// Everything a command needs. Serialized as JSON with one object per
/// section; unknown keys are rejected on load.
struct RunConfig {
  std::string command;
  std::uint64_t seed = 0;
  std::string out = "out";
  core::SBBTSConfig model;

  struct Heston {
    std::size_t paths = 5000;
    std::size_t length = 252;
    double dt = 1.0 / 252.0;
    double x0 = 1.0;
    stochastic::HestonRanges ranges;
  } heston;

  struct Inputs {
    std::string data;          // paths CSV to train on
    std::string checkpoint;    // trained model
    std::string resume;        // checkpoint to continue training from
    std::string real, synth, synth_sb;
    std::string returns;       // returns CSV
    std::string factor_model;  // factor model JSON
  } inputs;

  struct Generate {
    std::size_t paths = 5000;
  } generate;

  struct Report {
    std::size_t bins = 30;
    std::size_t max_lag = 20;
  } report;

  struct Factors {
    std::size_t m = 16;
    std::size_t k = 3;
    std::size_t window = 253;
    std::size_t stride = 1;
    bool standardize = false;
    std::string baseline = "noise";  // noise | sbbts
    double lambda = 0.5;
    std::size_t copies = 1;
  } factors;
};

nlohmann::json run_config_to_json(const RunConfig& config);
/// Overlays the keys of `j` on `base`.
RunConfig run_config_from_json(const nlohmann::json& j, RunConfig base = {});

void cmd_simulate_heston(const RunConfig& config);
void cmd_train(const RunConfig& config);
void cmd_generate(const RunConfig& config);
void cmd_heston_bench(const RunConfig& config);
void cmd_eval(const RunConfig& config);
void cmd_factor_fit(const RunConfig& config);
void cmd_augment(const RunConfig& config);

/// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumerical = 4;

/// Parses arguments, runs the selected command and maps errors to exit codes.
int run_cli(int argc, char** argv);

}  // namespace sbbts::cli

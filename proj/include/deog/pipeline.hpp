#pragma once

#include <cstdint>
#include <string>

namespace deog {

// Parameters for the batch commands. Defaults mirror the production
// protocol: removal threshold 0.8, 50 epochs, batch 250, patience 2,
// 30% of subjects held out for testing. Values may be set in a JSON
// config file and overridden by command-line flags; every command echoes
// the merged config into its output directory.
struct RunConfig {
  // global
  std::uint64_t seed{7};
  std::string out;
  bool quiet{false};
  int threads{0};  // 0 = hardware concurrency

  // simulate
  int subjects{20};
  double duration_sec{30.0};
  double fs_hz{200.0};
  int channels{19};

  // train
  std::string data;  // dataset directory produced by `simulate`
  int epochs{50};
  int batch_size{250};
  int patience{2};
  double validation_fraction{0.2};
  double test_fraction{0.3};
  int segment_len{200};           // samples per training segment
  int segments_per_subject{250};
  double learning_rate{0.005};
  double lr_decay{0.97};

  // clean
  std::string model;
  std::string input;
  double threshold{0.8};
  std::string single_channel;  // label; empty = use every channel

  // evaluate
  std::string cleaned;
  std::string pure;
  std::string contaminated;  // optional baseline
  std::string eog_estimate;  // optional, normalized units
  std::string eog_true;      // optional, physical units
};

// Merges a JSON config file into cfg. Unknown keys are rejected.
void load_config_file(const std::string& path, RunConfig& cfg);

// Generates the per-subject dataset tree plus manifest.csv.
void cmd_simulate(const RunConfig& cfg);

// Cross-subject split, normalization, segmentation and training.
// Writes model.bin, history.csv, training_summary.json, split.json and
// per-recording normalization tables.
void cmd_train(const RunConfig& cfg);

// Runs the trained model plus source rejection on one recording.
// Writes cleaned.csv, eog_estimate.csv and removal_report.json.
void cmd_clean(const RunConfig& cfg);

// Compares a cleaned recording against the pure reference. Writes
// channel_metrics.csv, summary.csv, overlay.csv, plots.json, and
// eog_metrics.csv when EOG series are supplied.
void cmd_evaluate(const RunConfig& cfg);

}  // namespace deog

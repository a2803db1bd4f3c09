#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "deog/pipeline.hpp"

using deog::RunConfig;

int main(int argc, char** argv) {
  CLI::App app{"deog: LSTM + ICA based EOG artifact removal for EEG recordings"};
  app.fallthrough();
  app.require_subcommand(1);

  RunConfig cli;  // raw flag values; applied over the config file below
  std::string config_path;

  auto* o_config = app.add_option("--config", config_path, "JSON config file");
  auto* o_seed = app.add_option("--seed", cli.seed, "master seed");
  auto* o_out = app.add_option("--out", cli.out, "output directory");
  auto* o_quiet = app.add_flag("--quiet", cli.quiet, "suppress progress output");
  auto* o_threads = app.add_option("--threads", cli.threads, "worker threads (0 = auto)");

  auto* sim = app.add_subcommand("simulate", "generate a semi-simulated EEG/EOG dataset");
  auto* o_subjects = sim->add_option("--subjects", cli.subjects, "number of subjects");
  auto* o_duration = sim->add_option("--duration-sec", cli.duration_sec, "seconds per recording");
  auto* o_fs = sim->add_option("--fs", cli.fs_hz, "sampling rate in Hz");
  auto* o_channels = sim->add_option("--channels", cli.channels, "EEG channel count");

  auto* tr = app.add_subcommand("train", "train the EOG estimator on a dataset");
  auto* o_data = tr->add_option("--data", cli.data, "dataset directory from simulate");
  auto* o_epochs = tr->add_option("--epochs", cli.epochs, "maximum training epochs");
  auto* o_batch = tr->add_option("--batch-size", cli.batch_size, "segments per optimization step");
  auto* o_patience = tr->add_option("--patience", cli.patience, "early-stopping patience");
  auto* o_valfrac = tr->add_option("--val-fraction", cli.validation_fraction,
                                   "fraction of training subjects held out for validation");
  auto* o_testfrac = tr->add_option("--test-fraction", cli.test_fraction,
                                    "fraction of subjects reserved for testing");
  auto* o_seglen = tr->add_option("--segment-len", cli.segment_len, "training segment length");
  auto* o_segsub = tr->add_option("--segments-per-subject", cli.segments_per_subject,
                                  "training segments drawn per subject");
  auto* o_lr = tr->add_option("--learning-rate", cli.learning_rate, "Adam step size");
  auto* o_lrd = tr->add_option("--lr-decay", cli.lr_decay, "per-epoch step-size decay factor");
  auto* o_single_tr = tr->add_option("--single-channel", cli.single_channel,
                                     "train a single-channel model on this label");

  auto* cl = app.add_subcommand("clean", "remove EOG artifacts from a recording");
  auto* o_model = cl->add_option("--model", cli.model, "trained model file");
  auto* o_input = cl->add_option("--input", cli.input, "contaminated recording CSV");
  auto* o_threshold = cl->add_option("--threshold", cli.threshold,
                                     "source-rejection correlation threshold");
  auto* o_single_cl = cl->add_option("--single-channel", cli.single_channel,
                                     "clean only this channel (single-channel mode)");

  auto* ev = app.add_subcommand("evaluate", "score a cleaned recording against the reference");
  auto* o_cleaned = ev->add_option("--cleaned", cli.cleaned, "cleaned recording CSV");
  auto* o_pure = ev->add_option("--pure", cli.pure, "reference recording CSV");
  auto* o_cont = ev->add_option("--contaminated", cli.contaminated,
                                "contaminated recording CSV (baseline metrics)");
  auto* o_eog_est = ev->add_option("--eog-estimate", cli.eog_estimate,
                                   "estimated EOG CSV (normalized units)");
  auto* o_eog_true = ev->add_option("--eog-true", cli.eog_true, "ground-truth EOG CSV");

  CLI11_PARSE(app, argc, argv);

  try {
    // Precedence: built-in defaults, then the config file, then flags.
    RunConfig cfg;
    if (*o_config) deog::load_config_file(config_path, cfg);
    if (*o_seed) cfg.seed = cli.seed;
    if (*o_out) cfg.out = cli.out;
    if (*o_quiet) cfg.quiet = cli.quiet;
    if (*o_threads) cfg.threads = cli.threads;
    if (*o_subjects) cfg.subjects = cli.subjects;
    if (*o_duration) cfg.duration_sec = cli.duration_sec;
    if (*o_fs) cfg.fs_hz = cli.fs_hz;
    if (*o_channels) cfg.channels = cli.channels;
    if (*o_data) cfg.data = cli.data;
    if (*o_epochs) cfg.epochs = cli.epochs;
    if (*o_batch) cfg.batch_size = cli.batch_size;
    if (*o_patience) cfg.patience = cli.patience;
    if (*o_valfrac) cfg.validation_fraction = cli.validation_fraction;
    if (*o_testfrac) cfg.test_fraction = cli.test_fraction;
    if (*o_seglen) cfg.segment_len = cli.segment_len;
    if (*o_segsub) cfg.segments_per_subject = cli.segments_per_subject;
    if (*o_lr) cfg.learning_rate = cli.learning_rate;
    if (*o_lrd) cfg.lr_decay = cli.lr_decay;
    if (*o_single_tr || *o_single_cl) cfg.single_channel = cli.single_channel;
    if (*o_model) cfg.model = cli.model;
    if (*o_input) cfg.input = cli.input;
    if (*o_threshold) cfg.threshold = cli.threshold;
    if (*o_cleaned) cfg.cleaned = cli.cleaned;
    if (*o_pure) cfg.pure = cli.pure;
    if (*o_cont) cfg.contaminated = cli.contaminated;
    if (*o_eog_est) cfg.eog_estimate = cli.eog_estimate;
    if (*o_eog_true) cfg.eog_true = cli.eog_true;

    if (sim->parsed()) deog::cmd_simulate(cfg);
    else if (tr->parsed()) deog::cmd_train(cfg);
    else if (cl->parsed()) deog::cmd_clean(cfg);
    else if (ev->parsed()) deog::cmd_evaluate(cfg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

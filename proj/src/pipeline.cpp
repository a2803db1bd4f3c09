#include "deog/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "deog/datagen.hpp"
#include "deog/lstm.hpp"
#include "deog/numerics.hpp"
#include "deog/preprocess.hpp"
#include "deog/recording.hpp"
#include "deog/removal.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace deog {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void note(const RunConfig& cfg, const std::string& msg) {
  if (!cfg.quiet) std::cout << msg << '\n';
}

json config_to_json(const RunConfig& cfg) {
  return json{{"seed", cfg.seed},
              {"out", cfg.out},
              {"quiet", cfg.quiet},
              {"threads", cfg.threads},
              {"subjects", cfg.subjects},
              {"duration_sec", cfg.duration_sec},
              {"fs_hz", cfg.fs_hz},
              {"channels", cfg.channels},
              {"data", cfg.data},
              {"epochs", cfg.epochs},
              {"batch_size", cfg.batch_size},
              {"patience", cfg.patience},
              {"validation_fraction", cfg.validation_fraction},
              {"test_fraction", cfg.test_fraction},
              {"segment_len", cfg.segment_len},
              {"segments_per_subject", cfg.segments_per_subject},
              {"learning_rate", cfg.learning_rate},
              {"lr_decay", cfg.lr_decay},
              {"model", cfg.model},
              {"input", cfg.input},
              {"threshold", cfg.threshold},
              {"single_channel", cfg.single_channel},
              {"cleaned", cfg.cleaned},
              {"pure", cfg.pure},
              {"contaminated", cfg.contaminated},
              {"eog_estimate", cfg.eog_estimate},
              {"eog_true", cfg.eog_true}};
}

void write_config_echo(const fs::path& dir, const RunConfig& cfg,
                       const std::string& command) {
  json j = config_to_json(cfg);
  j["command"] = command;
  std::ofstream f(dir / "config.json", std::ios::binary);
  if (!f) throw std::runtime_error("cannot write config echo");
  f << j.dump(2) << '\n';
}

fs::path ensure_out_dir(const RunConfig& cfg) {
  if (cfg.out.empty()) throw std::runtime_error("output directory required (--out)");
  fs::path dir(cfg.out);
  fs::create_directories(dir);
  return dir;
}

std::string subject_dir_name(std::size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "subj%02zu", index + 1);
  return buf;
}

struct SubjectFiles {
  std::string id;
  Recording contaminated;
  Recording eog;
};

SubjectFiles load_subject(const fs::path& dataset_dir, const std::string& id) {
  SubjectFiles s;
  s.id = id;
  s.contaminated = read_recording_csv((dataset_dir / id / "contaminated.csv").string());
  s.eog = read_recording_csv((dataset_dir / id / "eog.csv").string());
  if (s.eog.n_channels() != 2)
    throw std::runtime_error("dataset: expected 2 EOG channels for " + id);
  if (s.eog.n_samples() != s.contaminated.n_samples())
    throw std::runtime_error("dataset: length mismatch for " + id);
  return s;
}

std::vector<std::string> read_manifest_subjects(const fs::path& dataset_dir) {
  std::ifstream f(dataset_dir / "manifest.csv");
  if (!f) throw std::runtime_error("missing dataset manifest in " + dataset_dir.string());
  std::vector<std::string> subjects;
  std::string line;
  std::getline(f, line);  // header
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    subjects.push_back(line.substr(0, comma));
  }
  if (subjects.empty()) throw std::runtime_error("dataset manifest lists no subjects");
  return subjects;
}

// Selects the EEG rows used for modeling: either the full montage or the
// one channel named by cfg.single_channel.
RealMatrix select_eeg_rows(const Recording& rec, const std::string& single_channel,
                           std::vector<std::string>* labels_out) {
  if (single_channel.empty()) {
    if (labels_out) *labels_out = rec.labels;
    return rec.data;
  }
  const std::size_t idx = rec.channel_index(single_channel);
  RealMatrix one(1, rec.n_samples());
  std::copy(rec.data.row_ptr(idx), rec.data.row_ptr(idx) + rec.n_samples(),
            one.row_ptr(0));
  if (labels_out) *labels_out = {rec.labels[idx]};
  return one;
}

void write_normalization_table(const fs::path& path, const std::vector<std::string>& labels,
                               const NormalizationParams& params) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << "channel,mean,std\n";
  for (std::size_t i = 0; i < params.size(); ++i)
    f << labels[i] << ',' << fmt(params.means[i]) << ',' << fmt(params.stds[i]) << '\n';
}

// Paired random slices of the normalized EEG/EOG, fixed length.
void append_segments(std::vector<SegmentPair>& dst, const RealMatrix& x_norm,
                     const RealMatrix& y_norm, int count, int len, SeededRng& rng) {
  const std::size_t t = x_norm.cols;
  if (static_cast<std::size_t>(len) > t)
    throw std::runtime_error("segment_len exceeds recording length");
  for (int k = 0; k < count; ++k) {
    const std::size_t offset = rng.uniform_index(t - static_cast<std::size_t>(len) + 1);
    SegmentPair seg;
    seg.x = RealMatrix(x_norm.rows, static_cast<std::size_t>(len));
    seg.y = RealMatrix(y_norm.rows, static_cast<std::size_t>(len));
    for (std::size_t i = 0; i < x_norm.rows; ++i)
      std::copy(x_norm.row_ptr(i) + offset, x_norm.row_ptr(i) + offset + len,
                seg.x.row_ptr(i));
    for (std::size_t i = 0; i < y_norm.rows; ++i)
      std::copy(y_norm.row_ptr(i) + offset, y_norm.row_ptr(i) + offset + len,
                seg.y.row_ptr(i));
    dst.push_back(std::move(seg));
  }
}

}  // namespace

void load_config_file(const std::string& path, RunConfig& cfg) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config file " + path);
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw std::runtime_error("bad config file: " + std::string(e.what()));
  }
  if (!j.is_object()) throw std::runtime_error("bad config file: expected an object");

  for (const auto& [key, value] : j.items()) {
    if (key == "seed") cfg.seed = value.get<std::uint64_t>();
    else if (key == "out") cfg.out = value.get<std::string>();
    else if (key == "quiet") cfg.quiet = value.get<bool>();
    else if (key == "threads") cfg.threads = value.get<int>();
    else if (key == "subjects") cfg.subjects = value.get<int>();
    else if (key == "duration_sec") cfg.duration_sec = value.get<double>();
    else if (key == "fs_hz") cfg.fs_hz = value.get<double>();
    else if (key == "channels") cfg.channels = value.get<int>();
    else if (key == "data") cfg.data = value.get<std::string>();
    else if (key == "epochs") cfg.epochs = value.get<int>();
    else if (key == "batch_size") cfg.batch_size = value.get<int>();
    else if (key == "patience") cfg.patience = value.get<int>();
    else if (key == "validation_fraction") cfg.validation_fraction = value.get<double>();
    else if (key == "test_fraction") cfg.test_fraction = value.get<double>();
    else if (key == "segment_len") cfg.segment_len = value.get<int>();
    else if (key == "segments_per_subject") cfg.segments_per_subject = value.get<int>();
    else if (key == "learning_rate") cfg.learning_rate = value.get<double>();
    else if (key == "lr_decay") cfg.lr_decay = value.get<double>();
    else if (key == "model") cfg.model = value.get<std::string>();
    else if (key == "input") cfg.input = value.get<std::string>();
    else if (key == "threshold") cfg.threshold = value.get<double>();
    else if (key == "single_channel") cfg.single_channel = value.get<std::string>();
    else if (key == "cleaned") cfg.cleaned = value.get<std::string>();
    else if (key == "pure") cfg.pure = value.get<std::string>();
    else if (key == "contaminated") cfg.contaminated = value.get<std::string>();
    else if (key == "eog_estimate") cfg.eog_estimate = value.get<std::string>();
    else if (key == "eog_true") cfg.eog_true = value.get<std::string>();
    else if (key == "command") { /* echoes carry this; ignore */ }
    else throw std::runtime_error("unknown config key '" + key + "'");
  }
}

void cmd_simulate(const RunConfig& cfg) {
  if (cfg.subjects < 1) throw std::runtime_error("subjects must be >= 1");
  if (cfg.channels < 1) throw std::runtime_error("channels must be >= 1");
  const auto t = static_cast<std::size_t>(std::llround(cfg.duration_sec * cfg.fs_hz));
  if (t < 2) throw std::runtime_error("duration too short");

  const fs::path dir = ensure_out_dir(cfg);
  std::ofstream manifest(dir / "manifest.csv", std::ios::binary);
  if (!manifest) throw std::runtime_error("cannot write manifest.csv");
  manifest << "subject,a,b\n";

  for (int i = 0; i < cfg.subjects; ++i) {
    const SemiSimDataset ds = make_semi_sim_subject(
        static_cast<std::size_t>(i), cfg.seed, static_cast<std::size_t>(cfg.channels), t,
        cfg.fs_hz);
    const fs::path subj_dir = dir / ds.subject_id;
    fs::create_directories(subj_dir);

    write_recording_csv((subj_dir / "pure.csv").string(), ds.pure);
    write_recording_csv((subj_dir / "contaminated.csv").string(), ds.contaminated);

    Recording eog;
    eog.subject = ds.subject_id;
    eog.fs_hz = ds.fs_hz;
    eog.labels = {"VEOG", "HEOG"};
    eog.data = RealMatrix(2, t);
    std::copy(ds.veog.begin(), ds.veog.end(), eog.data.row_ptr(0));
    std::copy(ds.heog.begin(), ds.heog.end(), eog.data.row_ptr(1));
    write_recording_csv((subj_dir / "eog.csv").string(), eog);

    manifest << ds.subject_id << ',' << fmt(ds.a) << ',' << fmt(ds.b) << '\n';
  }
  manifest.close();
  write_config_echo(dir, cfg, "simulate");
  note(cfg, "wrote " + std::to_string(cfg.subjects) + " subjects to " + dir.string());
}

void cmd_train(const RunConfig& cfg) {
  if (cfg.data.empty()) throw std::runtime_error("dataset directory required (--data)");
  if (cfg.epochs < 1) throw std::runtime_error("epochs must be >= 1");
  if (cfg.segments_per_subject < 1)
    throw std::runtime_error("segments_per_subject must be >= 1");
  const fs::path dataset_dir(cfg.data);
  const fs::path out_dir = ensure_out_dir(cfg);

  std::vector<std::string> subjects = read_manifest_subjects(dataset_dir);

  // Cross-subject split: the test subjects never contribute segments,
  // and the validation subjects come out of the training pool.
  SeededRng split_rng(SeededRng::derive_seed(cfg.seed, 11));
  for (std::size_t i = subjects.size(); i-- > 1;) {
    const std::size_t j = split_rng.uniform_index(i + 1);
    std::swap(subjects[i], subjects[j]);
  }
  const std::size_t n = subjects.size();
  std::size_t n_test = static_cast<std::size_t>(std::llround(cfg.test_fraction * n));
  n_test = std::min(n_test, n - 1);
  const std::size_t pool = n - n_test;
  std::size_t n_val = static_cast<std::size_t>(std::llround(cfg.validation_fraction * pool));
  if (cfg.validation_fraction > 0.0 && pool > 1) n_val = std::max<std::size_t>(1, n_val);
  n_val = std::min(n_val, pool - 1);

  std::vector<std::string> test_ids(subjects.begin(), subjects.begin() + n_test);
  std::vector<std::string> val_ids(subjects.begin() + n_test,
                                   subjects.begin() + n_test + n_val);
  std::vector<std::string> train_ids(subjects.begin() + n_test + n_val, subjects.end());
  std::sort(test_ids.begin(), test_ids.end());
  std::sort(val_ids.begin(), val_ids.end());
  std::sort(train_ids.begin(), train_ids.end());

  const fs::path norm_dir = out_dir / "normalization";
  fs::create_directories(norm_dir);

  std::size_t n_inputs = 0;
  std::vector<SegmentPair> train_segments, val_segments;
  std::uint64_t subject_ordinal = 0;
  // Validation loss only steers early stopping; 50 segments per subject
  // estimate it well enough without inflating the per-epoch cost.
  const int val_per_subject = std::min(cfg.segments_per_subject, 50);
  auto collect = [&](const std::vector<std::string>& ids, std::vector<SegmentPair>& dst,
                     int per_subject) {
    for (const auto& id : ids) {
      const SubjectFiles s = load_subject(dataset_dir, id);
      std::vector<std::string> labels;
      const RealMatrix eeg = select_eeg_rows(s.contaminated, cfg.single_channel, &labels);
      if (n_inputs == 0) n_inputs = eeg.rows;
      if (eeg.rows != n_inputs)
        throw std::runtime_error("dataset: channel-count mismatch for " + id);

      const NormalizedSignals norm = normalize_channels(eeg, s.eog.data);
      std::vector<std::string> param_labels = labels;
      param_labels.insert(param_labels.end(), s.eog.labels.begin(), s.eog.labels.end());
      write_normalization_table(norm_dir / (id + ".csv"), param_labels, norm.params);

      SeededRng seg_rng(SeededRng::derive_seed(cfg.seed, 1000 + subject_ordinal++));
      append_segments(dst, norm.eeg, norm.eog, per_subject, cfg.segment_len, seg_rng);
    }
  };
  collect(train_ids, train_segments, cfg.segments_per_subject);
  collect(val_ids, val_segments, val_per_subject);

  SeededRng model_rng(SeededRng::derive_seed(cfg.seed, 21));
  DeepLstmModel model = make_deep_lstm(n_inputs, model_rng);

  TrainConfig tc;
  tc.epochs = cfg.epochs;
  tc.batch_size = cfg.batch_size;
  tc.patience = cfg.patience;
  tc.validation_fraction = cfg.validation_fraction;
  tc.seed = cfg.seed;
  tc.threads = cfg.threads;
  tc.learning_rate = cfg.learning_rate;
  tc.lr_decay = cfg.lr_decay;

  SeededRng train_rng(SeededRng::derive_seed(cfg.seed, 31));
  const TrainHistory hist = train(model, train_segments, val_segments, tc, train_rng);

  save_model((out_dir / "model.bin").string(), model);

  {
    std::ofstream f(out_dir / "history.csv", std::ios::binary);
    if (!f) throw std::runtime_error("cannot write history.csv");
    f << "epoch,train_loss,val_loss,max_grad_norm\n";
    for (std::size_t e = 0; e < hist.epochs.size(); ++e) {
      const auto& st = hist.epochs[e];
      f << e << ',' << fmt(st.train_loss) << ',' << fmt(st.val_loss) << ','
        << fmt(st.max_grad_norm) << '\n';
    }
  }
  {
    json j;
    j["best_epoch"] = hist.best_epoch;
    j["best_val_loss"] = hist.epochs[static_cast<std::size_t>(hist.best_epoch)].val_loss;
    j["epochs_run"] = hist.epochs.size();
    j["train_segments"] = train_segments.size();
    j["val_segments"] = val_segments.size();
    std::ofstream f(out_dir / "training_summary.json", std::ios::binary);
    f << j.dump(2) << '\n';
  }
  {
    json j;
    j["train"] = train_ids;
    j["val"] = val_ids;
    j["test"] = test_ids;
    std::ofstream f(out_dir / "split.json", std::ios::binary);
    f << j.dump(2) << '\n';
  }
  write_config_echo(out_dir, cfg, "train");
  note(cfg, "trained on " + std::to_string(train_segments.size()) + " segments; best epoch " +
                std::to_string(hist.best_epoch));
}

void cmd_clean(const RunConfig& cfg) {
  if (cfg.model.empty()) throw std::runtime_error("model file required (--model)");
  if (cfg.input.empty()) throw std::runtime_error("input recording required (--input)");
  const fs::path out_dir = ensure_out_dir(cfg);

  const DeepLstmModel model = load_model(cfg.model);
  const Recording input = read_recording_csv(cfg.input);

  std::vector<std::string> labels;
  const RealMatrix eeg = select_eeg_rows(input, cfg.single_channel, &labels);
  if (eeg.rows != model.input_size())
    throw std::runtime_error("channel-count mismatch: model expects " +
                             std::to_string(model.input_size()) + " channels, input has " +
                             std::to_string(eeg.rows));

  const NormalizedSignals norm = normalize_channels(eeg, RealMatrix{});
  const RealMatrix y_est = predict_eog(model, norm.eeg);

  SeededRng rng(SeededRng::derive_seed(cfg.seed, 77));
  const RemovalOutcome outcome = remove_eog(norm.eeg, y_est, norm.params, cfg.threshold, rng);

  Recording cleaned;
  cleaned.subject = input.subject;
  cleaned.fs_hz = input.fs_hz;
  cleaned.labels = labels;
  cleaned.data = outcome.cleaned;
  write_recording_csv((out_dir / "cleaned.csv").string(), cleaned);

  Recording est;
  est.subject = input.subject;
  est.fs_hz = input.fs_hz;
  est.labels = {"VEOG", "HEOG"};
  est.data = y_est;
  write_recording_csv((out_dir / "eog_estimate.csv").string(), est);

  {
    json j;
    j["threshold"] = cfg.threshold;
    j["n_sources"] = outcome.correlations.cols;
    json removed = json::array();
    for (std::size_t id : outcome.removed_source_ids) removed.push_back(id + 1);
    j["removed_sources"] = removed;  // 1-based source ids
    json corr = json::array();
    for (std::size_t e = 0; e < outcome.correlations.rows; ++e) {
      json row = json::array();
      for (std::size_t i = 0; i < outcome.correlations.cols; ++i)
        row.push_back(outcome.correlations(e, i));
      corr.push_back(row);
    }
    j["correlations"] = corr;
    j["ica_iterations"] = outcome.ica.iterations;
    json conv = json::array();
    for (bool c : outcome.ica.converged) conv.push_back(c);
    j["ica_converged"] = conv;
    std::ofstream f(out_dir / "removal_report.json", std::ios::binary);
    f << j.dump(2) << '\n';
  }
  write_config_echo(out_dir, cfg, "clean");
  note(cfg, "removed " + std::to_string(outcome.removed_source_ids.size()) +
                " of " + std::to_string(outcome.correlations.cols) + " sources");
}

namespace {

// Channel-wise z-scored copies using the reference recording's moments,
// so normalized-unit errors are expressed in reference standard
// deviations.
std::pair<RealMatrix, RealMatrix> normalized_pair(const RealMatrix& reference,
                                                  const RealMatrix& estimate) {
  const NormalizedSignals ref_norm = normalize_channels(reference, RealMatrix{});
  RealMatrix est_norm(estimate.rows, estimate.cols);
  for (std::size_t i = 0; i < estimate.rows; ++i) {
    const double mu = ref_norm.params.means[i];
    const double sd = ref_norm.params.stds[i];
    const double* src = estimate.row_ptr(i);
    double* dst = est_norm.row_ptr(i);
    for (std::size_t j = 0; j < estimate.cols; ++j) dst[j] = (src[j] - mu) / sd;
  }
  return {ref_norm.eeg, est_norm};
}

void write_metrics_block(std::ofstream& f, const std::string& signal,
                         const std::string& unit, const MetricsReport& rep) {
  f << signal << ',' << unit << ",mse," << fmt(rep.mean.mse) << ',' << fmt(rep.stddev.mse)
    << '\n';
  f << signal << ',' << unit << ",mae," << fmt(rep.mean.mae) << ',' << fmt(rep.stddev.mae)
    << '\n';
  f << signal << ',' << unit << ",me," << fmt(rep.mean.me) << ',' << fmt(rep.stddev.me)
    << '\n';
}

}  // namespace

void cmd_evaluate(const RunConfig& cfg) {
  if (cfg.cleaned.empty() || cfg.pure.empty())
    throw std::runtime_error("cleaned and pure recordings required (--cleaned, --pure)");
  const fs::path out_dir = ensure_out_dir(cfg);

  const Recording cleaned = read_recording_csv(cfg.cleaned);
  const Recording pure = read_recording_csv(cfg.pure);
  if (cleaned.labels != pure.labels || cleaned.n_samples() != pure.n_samples())
    throw std::runtime_error("evaluate: shape/label mismatch between cleaned and pure");

  const MetricsReport physical = evaluate_channels(pure.data, cleaned.data);
  const auto [pure_n, cleaned_n] = normalized_pair(pure.data, cleaned.data);
  const MetricsReport normalized = evaluate_channels(pure_n, cleaned_n);

  {
    std::ofstream f(out_dir / "channel_metrics.csv", std::ios::binary);
    if (!f) throw std::runtime_error("cannot write channel_metrics.csv");
    f << "channel,mse,mae,me,mse_norm,mae_norm,me_norm\n";
    for (std::size_t i = 0; i < pure.n_channels(); ++i) {
      f << pure.labels[i] << ',' << fmt(physical.mse[i]) << ',' << fmt(physical.mae[i])
        << ',' << fmt(physical.me[i]) << ',' << fmt(normalized.mse[i]) << ','
        << fmt(normalized.mae[i]) << ',' << fmt(normalized.me[i]) << '\n';
    }
  }

  {
    std::ofstream f(out_dir / "summary.csv", std::ios::binary);
    if (!f) throw std::runtime_error("cannot write summary.csv");
    f << "signal,unit,metric,mean,std\n";
    write_metrics_block(f, "cleaned", "physical", physical);
    write_metrics_block(f, "cleaned", "normalized", normalized);
    if (!cfg.contaminated.empty()) {
      const Recording contaminated = read_recording_csv(cfg.contaminated);
      if (contaminated.labels != pure.labels ||
          contaminated.n_samples() != pure.n_samples())
        throw std::runtime_error("evaluate: shape/label mismatch for contaminated");
      const MetricsReport cont_phys = evaluate_channels(pure.data, contaminated.data);
      const auto [pure_n2, cont_n] = normalized_pair(pure.data, contaminated.data);
      const MetricsReport cont_norm = evaluate_channels(pure_n2, cont_n);
      write_metrics_block(f, "contaminated", "physical", cont_phys);
      write_metrics_block(f, "contaminated", "normalized", cont_norm);
    }
  }

  if (!cfg.eog_estimate.empty() && !cfg.eog_true.empty()) {
    const Recording est = read_recording_csv(cfg.eog_estimate);
    const Recording truth = read_recording_csv(cfg.eog_true);
    if (est.n_channels() != truth.n_channels() || est.n_samples() != truth.n_samples())
      throw std::runtime_error("evaluate: shape mismatch for EOG series");
    // The estimate is in normalized units; normalize the ground truth
    // the same way before comparing.
    const NormalizedSignals truth_norm = normalize_channels(truth.data, RealMatrix{});
    const EogErrorReport rep = estimate_eog_error(est.data, truth_norm.eeg);
    std::ofstream f(out_dir / "eog_metrics.csv", std::ios::binary);
    if (!f) throw std::runtime_error("cannot write eog_metrics.csv");
    f << "channel,mse,corr\n";
    for (std::size_t i = 0; i < est.n_channels(); ++i) {
      const double corr =
          corrcoef(est.data.row_ptr(i), truth_norm.eeg.row_ptr(i), est.n_samples());
      f << est.labels[i] << ',' << fmt(rep.mse[i]) << ',' << fmt(corr) << '\n';
    }
    f << "average," << fmt(rep.average) << ",\n";
  }

  {
    std::ofstream f(out_dir / "overlay.csv", std::ios::binary);
    if (!f) throw std::runtime_error("cannot write overlay.csv");
    f << "time";
    for (const auto& l : pure.labels) f << ",pure_" << l << ",cleaned_" << l;
    f << '\n';
    const double dt = pure.fs_hz > 0.0 ? 1.0 / pure.fs_hz : 1.0;
    for (std::size_t j = 0; j < pure.n_samples(); ++j) {
      f << fmt(static_cast<double>(j) * dt);
      for (std::size_t i = 0; i < pure.n_channels(); ++i)
        f << ',' << fmt(pure.data(i, j)) << ',' << fmt(cleaned.data(i, j));
      f << '\n';
    }
  }

  {
    json j;
    j["plots"] = json::array();
    json overlay;
    overlay["file"] = "overlay.csv";
    overlay["x"] = "time";
    overlay["kind"] = "line";
    json series = json::array();
    for (const auto& l : pure.labels) {
      series.push_back({{"y", "pure_" + l}, {"label", l + " reference"}});
      series.push_back({{"y", "cleaned_" + l}, {"label", l + " cleaned"}});
    }
    overlay["series"] = series;
    j["plots"].push_back(overlay);
    json bars;
    bars["file"] = "channel_metrics.csv";
    bars["kind"] = "bar";
    bars["x"] = "channel";
    bars["series"] = json::array({{{"y", "mse_norm"}, {"label", "MSE (normalized)"}}});
    j["plots"].push_back(bars);
    std::ofstream f(out_dir / "plots.json", std::ios::binary);
    f << j.dump(2) << '\n';
  }

  write_config_echo(out_dir, cfg, "evaluate");
  note(cfg, "mean normalized mse " + fmt(normalized.mean.mse));
}

}  // namespace deog

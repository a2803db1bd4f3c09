#include <doctest.h>

#include <stdexcept>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "deog/pipeline.hpp"
#include "deog/recording.hpp"

using namespace deog;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "deog_pipeline_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  REQUIRE(f);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// A dataset + trained model small enough for unit tests.
struct TrainedFixture {
  fs::path data_dir;
  fs::path run_dir;
  std::string test_subject;
};

const TrainedFixture& trained_fixture() {
  static TrainedFixture fx = [] {
    TrainedFixture f;
    f.data_dir = fresh_dir("fixture_data");
    RunConfig sim;
    sim.subjects = 5;
    sim.duration_sec = 10.0;
    sim.seed = 400;
    sim.out = f.data_dir.string();
    sim.quiet = true;
    cmd_simulate(sim);

    f.run_dir = fresh_dir("fixture_run");
    RunConfig tr;
    tr.data = f.data_dir.string();
    tr.out = f.run_dir.string();
    tr.seed = 400;
    tr.epochs = 2;
    tr.batch_size = 16;
    tr.segments_per_subject = 6;
    tr.segment_len = 150;
    tr.test_fraction = 0.2;
    tr.quiet = true;
    cmd_train(tr);

    const json split = json::parse(slurp(f.run_dir / "split.json"));
    f.test_subject = split["test"][0].get<std::string>();
    return f;
  }();
  return fx;
}

}  // namespace

TEST_CASE("simulate writes a deterministic dataset tree") {
  const fs::path out1 = fresh_dir("sim1");
  RunConfig cfg;
  cfg.subjects = 3;
  cfg.duration_sec = 5.0;
  cfg.seed = 9;
  cfg.out = out1.string();
  cfg.quiet = true;
  cmd_simulate(cfg);

  int subject_dirs = 0;
  for (const auto& entry : fs::directory_iterator(out1))
    if (entry.is_directory()) ++subject_dirs;
  CHECK(subject_dirs == 3);

  const std::string manifest = slurp(out1 / "manifest.csv");
  CHECK(std::count(manifest.begin(), manifest.end(), '\n') == 4);  // header + 3 rows

  const Recording eog = read_recording_csv((out1 / "subj01" / "eog.csv").string());
  CHECK(eog.labels == std::vector<std::string>{"VEOG", "HEOG"});
  CHECK(eog.fs_hz == 200.0);

  // Same config into a second directory: byte-identical files.
  const fs::path out2 = fresh_dir("sim2");
  cfg.out = out2.string();
  cmd_simulate(cfg);
  CHECK(slurp(out1 / "manifest.csv") == slurp(out2 / "manifest.csv"));
  CHECK(slurp(out1 / "subj02" / "contaminated.csv") ==
        slurp(out2 / "subj02" / "contaminated.csv"));
}

TEST_CASE("simulate validates its parameters") {
  RunConfig cfg;
  cfg.subjects = 0;
  cfg.out = fresh_dir("sim_invalid").string();
  CHECK_THROWS_AS(cmd_simulate(cfg), std::runtime_error);
}

TEST_CASE("train writes model, history, split and normalization tables") {
  const TrainedFixture& fx = trained_fixture();

  CHECK(fs::exists(fx.run_dir / "model.bin"));
  CHECK(fs::exists(fx.run_dir / "history.csv"));
  CHECK(fs::exists(fx.run_dir / "config.json"));

  // History rows never exceed the epoch budget.
  const std::string history = slurp(fx.run_dir / "history.csv");
  const auto rows = std::count(history.begin(), history.end(), '\n') - 1;
  CHECK(rows >= 1);
  CHECK(rows <= 2);

  // The reported best epoch is the argmin of the val column.
  const json summary = json::parse(slurp(fx.run_dir / "training_summary.json"));
  std::istringstream hs(history);
  std::string line;
  std::getline(hs, line);
  double best_val = 1e300;
  int best_epoch = -1;
  while (std::getline(hs, line)) {
    std::istringstream ls(line);
    std::string epoch_s, train_s, val_s;
    std::getline(ls, epoch_s, ',');
    std::getline(ls, train_s, ',');
    std::getline(ls, val_s, ',');
    const double val = std::stod(val_s);
    if (val < best_val) {
      best_val = val;
      best_epoch = std::stoi(epoch_s);
    }
  }
  CHECK(summary["best_epoch"].get<int>() == best_epoch);
  CHECK(summary["best_val_loss"].get<double>() == doctest::Approx(best_val));

  // The split partitions the subjects.
  const json split = json::parse(slurp(fx.run_dir / "split.json"));
  std::vector<std::string> all;
  for (const auto& part : {"train", "val", "test"})
    for (const auto& s : split[part]) all.push_back(s.get<std::string>());
  std::sort(all.begin(), all.end());
  CHECK(all == std::vector<std::string>{"subj01", "subj02", "subj03", "subj04", "subj05"});

  // Normalization tables exist for the train and val subjects.
  for (const auto& s : split["train"])
    CHECK(fs::exists(fx.run_dir / "normalization" / (s.get<std::string>() + ".csv")));
}

TEST_CASE("clean produces outputs wired to the report") {
  const TrainedFixture& fx = trained_fixture();
  const fs::path out = fresh_dir("clean_out");

  RunConfig cl;
  cl.model = (fx.run_dir / "model.bin").string();
  cl.input = (fx.data_dir / fx.test_subject / "contaminated.csv").string();
  cl.out = out.string();
  cl.seed = 5;
  cl.quiet = true;
  cmd_clean(cl);

  const Recording cleaned = read_recording_csv((out / "cleaned.csv").string());
  const Recording input = read_recording_csv(cl.input);
  CHECK(cleaned.labels == input.labels);
  CHECK(cleaned.n_samples() == input.n_samples());

  const Recording est = read_recording_csv((out / "eog_estimate.csv").string());
  CHECK(est.n_channels() == 2);

  const json report = json::parse(slurp(out / "removal_report.json"));
  CHECK(report["n_sources"].get<int>() == 21);
  for (const auto& id : report["removed_sources"]) {
    CHECK(id.get<int>() >= 1);
    CHECK(id.get<int>() <= 21);
  }
}

TEST_CASE("clean with an impossible threshold is a no-op") {
  const TrainedFixture& fx = trained_fixture();
  const fs::path out = fresh_dir("clean_noop");

  RunConfig cl;
  cl.model = (fx.run_dir / "model.bin").string();
  cl.input = (fx.data_dir / fx.test_subject / "contaminated.csv").string();
  cl.out = out.string();
  cl.seed = 5;
  cl.threshold = 1.01;
  cl.quiet = true;
  cmd_clean(cl);

  const json report = json::parse(slurp(out / "removal_report.json"));
  CHECK(report["removed_sources"].empty());

  const Recording cleaned = read_recording_csv((out / "cleaned.csv").string());
  const Recording input = read_recording_csv(cl.input);
  double worst = 0.0;
  for (std::size_t i = 0; i < input.data.data.size(); ++i)
    worst = std::max(worst, std::fabs(cleaned.data.data[i] - input.data.data[i]));
  CHECK(worst < 1e-6);
}

TEST_CASE("clean rejects a channel-count mismatch") {
  const TrainedFixture& fx = trained_fixture();
  RunConfig cl;
  cl.model = (fx.run_dir / "model.bin").string();
  cl.input = (fx.data_dir / fx.test_subject / "eog.csv").string();  // 2 channels
  cl.out = fresh_dir("clean_bad").string();
  cl.quiet = true;
  CHECK_THROWS_WITH_AS(cmd_clean(cl), doctest::Contains("channel-count mismatch"),
                       std::runtime_error);
}

TEST_CASE("evaluate against an identical recording reports zeros") {
  const TrainedFixture& fx = trained_fixture();
  const fs::path out = fresh_dir("eval_self");

  RunConfig ev;
  ev.cleaned = (fx.data_dir / fx.test_subject / "pure.csv").string();
  ev.pure = ev.cleaned;
  ev.out = out.string();
  ev.quiet = true;
  cmd_evaluate(ev);

  std::ifstream metrics(out / "channel_metrics.csv");
  std::string line;
  std::getline(metrics, line);  // header
  int rows = 0;
  while (std::getline(metrics, line)) {
    ++rows;
    std::istringstream ls(line);
    std::string cell;
    std::getline(ls, cell, ',');  // channel
    int col = 0;
    while (std::getline(ls, cell, ',')) {
      CHECK(std::stod(cell) == 0.0);
      ++col;
    }
    CHECK(col == 6);
  }
  CHECK(rows == 19);
  CHECK(fs::exists(out / "overlay.csv"));
  CHECK(fs::exists(out / "plots.json"));
}

TEST_CASE("single-channel training and cleaning") {
  const TrainedFixture& fx = trained_fixture();

  const fs::path run = fresh_dir("single_run");
  RunConfig tr;
  tr.data = fx.data_dir.string();
  tr.out = run.string();
  tr.seed = 401;
  tr.epochs = 1;
  tr.batch_size = 8;
  tr.segments_per_subject = 4;
  tr.segment_len = 120;
  tr.test_fraction = 0.2;
  tr.single_channel = "FP1";
  tr.quiet = true;
  cmd_train(tr);

  const fs::path out = fresh_dir("single_clean");
  RunConfig cl;
  cl.model = (run / "model.bin").string();
  cl.input = (fx.data_dir / fx.test_subject / "contaminated.csv").string();
  cl.out = out.string();
  cl.single_channel = "FP1";
  cl.seed = 5;
  cl.quiet = true;
  cmd_clean(cl);

  const Recording cleaned = read_recording_csv((out / "cleaned.csv").string());
  CHECK(cleaned.n_channels() == 1);
  CHECK(cleaned.labels[0] == "FP1");

  const json report = json::parse(slurp(out / "removal_report.json"));
  CHECK(report["n_sources"].get<int>() == 3);
}

TEST_CASE("config files reject unknown keys and merge known ones") {
  const fs::path dir = fresh_dir("config");
  {
    std::ofstream f(dir / "good.json");
    f << R"({"seed": 123, "threshold": 0.9, "epochs": 7})";
  }
  RunConfig cfg;
  load_config_file((dir / "good.json").string(), cfg);
  CHECK(cfg.seed == 123);
  CHECK(cfg.threshold == 0.9);
  CHECK(cfg.epochs == 7);
  CHECK(cfg.batch_size == 250);  // untouched default

  {
    std::ofstream f(dir / "bad.json");
    f << R"({"sed": 123})";
  }
  RunConfig cfg2;
  CHECK_THROWS_WITH_AS(load_config_file((dir / "bad.json").string(), cfg2),
                       doctest::Contains("unknown config key"), std::runtime_error);
}

TEST_CASE("one config file drives the whole chain") {
  const fs::path root = fresh_dir("chain");
  const fs::path cfg_path = root / "chain.json";
  {
    std::ofstream f(cfg_path);
    f << R"({
      "seed": 77,
      "subjects": 4,
      "duration_sec": 8.0,
      "epochs": 1,
      "batch_size": 8,
      "segments_per_subject": 4,
      "segment_len": 120,
      "test_fraction": 0.25,
      "threshold": 0.8,
      "quiet": true,
      "data": ")" << (root / "data").string() << R"(",
      "model": ")" << (root / "run" / "model.bin").string() << R"(",
      "input": ")" << (root / "data" / "subj01" / "contaminated.csv").string() << R"(",
      "cleaned": ")" << (root / "clean" / "cleaned.csv").string() << R"(",
      "pure": ")" << (root / "data" / "subj01" / "pure.csv").string() << R"("
    })";
  }

  auto step = [&](const std::string& out) {
    RunConfig cfg;
    load_config_file(cfg_path.string(), cfg);
    cfg.out = (root / out).string();
    return cfg;
  };
  cmd_simulate(step("data"));
  cmd_train(step("run"));
  cmd_clean(step("clean"));
  cmd_evaluate(step("eval"));
  CHECK(fs::exists(root / "eval" / "summary.csv"));
  CHECK(fs::exists(root / "eval" / "plots.json"));
}

TEST_CASE("training twice with one seed gives identical model bytes") {
  const TrainedFixture& fx = trained_fixture();

  auto run_once = [&](const std::string& name) {
    const fs::path run = fresh_dir(name);
    RunConfig tr;
    tr.data = fx.data_dir.string();
    tr.out = run.string();
    tr.seed = 402;
    tr.epochs = 1;
    tr.batch_size = 8;
    tr.segments_per_subject = 4;
    tr.segment_len = 120;
    tr.test_fraction = 0.2;
    tr.quiet = true;
    tr.threads = name.size() % 2 ? 1 : 2;  // thread count must not matter
    cmd_train(tr);
    return slurp(run / "model.bin");
  };
  CHECK(run_once("det_a") == run_once("det_bb"));
}

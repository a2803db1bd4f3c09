#include <doctest.h>

#include <stdexcept>
#include <cmath>
#include <filesystem>
#include <vector>

#include "deog/lstm.hpp"
#include "deog/numerics.hpp"

using namespace deog;

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

DeepLstmModel tiny_model(std::size_t n_inputs, std::size_t hidden, std::size_t layers,
                         std::uint64_t seed, double dropout = 0.0) {
  SeededRng rng(seed);
  return make_lstm_model(n_inputs, std::vector<std::size_t>(layers, hidden),
                         std::vector<double>(layers, dropout), 2, rng);
}

void zero_params(DeepLstmModel& m) {
  for (auto& ref : tensor_refs(m))
    for (std::size_t j = 0; j < ref.size(); ++j) ref.data[j] = 0.0;
}

// Central finite differences of the MSE loss for every parameter.
double max_relative_gradient_error(DeepLstmModel& model, const RealMatrix& x,
                                   const RealMatrix& y, double eps) {
  ForwardCache cache;
  forward(model, x, RunMode::train, nullptr, &cache);
  const DeepLstmModel grads = backprop(model, cache, y);

  auto params = tensor_refs(model);
  const auto grad_refs = tensor_refs(grads);
  double worst = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    for (std::size_t j = 0; j < params[i].size(); ++j) {
      double& p = params[i].data[j];
      const double saved = p;
      p = saved + eps;
      const double up = mse_loss(forward(model, x, RunMode::eval), y);
      p = saved - eps;
      const double down = mse_loss(forward(model, x, RunMode::eval), y);
      p = saved;
      const double fd = (up - down) / (2.0 * eps);
      const double bp = grad_refs[i].data[j];
      const double denom = std::max({1e-6, std::fabs(fd), std::fabs(bp)});
      worst = std::max(worst, std::fabs(fd - bp) / denom);
    }
  }
  return worst;
}

std::vector<SegmentPair> toy_task(std::size_t n_segments, std::size_t n_inputs,
                                  std::size_t t, std::uint64_t seed) {
  // Targets are smooth functions of the inputs so a small model can fit.
  SeededRng rng(seed);
  std::vector<SegmentPair> segs;
  for (std::size_t s = 0; s < n_segments; ++s) {
    SegmentPair seg;
    seg.x = randn(n_inputs, t, rng);
    seg.y = RealMatrix(2, t);
    for (std::size_t j = 0; j < t; ++j) {
      double acc = 0.0;
      for (std::size_t i = 0; i < n_inputs; ++i) acc += seg.x(i, j);
      seg.y(0, j) = std::tanh(acc);
      seg.y(1, j) = 0.5 * std::tanh(-acc);
    }
    segs.push_back(std::move(seg));
  }
  return segs;
}

bool models_identical(const DeepLstmModel& a, const DeepLstmModel& b) {
  const auto ra = tensor_refs(a);
  const auto rb = tensor_refs(b);
  if (ra.size() != rb.size()) return false;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    if (ra[i].size() != rb[i].size()) return false;
    for (std::size_t j = 0; j < ra[i].size(); ++j)
      if (ra[i].data[j] != rb[i].data[j]) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("cell_step with zero parameters") {
  LstmLayerParams p;
  p.hidden = 3;
  p.input = 2;
  p.w_f = p.w_i = p.w_s = p.w_o = RealMatrix(3, 5, 0.0);
  p.b_f.assign(3, 0.0);
  p.b_i.assign(3, 0.0);
  p.b_s.assign(3, 0.0);
  p.b_o.assign(3, 0.0);
  LstmState prev{std::vector<double>(3, 0.0), std::vector<double>(3, 0.0)};
  const LstmState next = cell_step({1.0, -2.0}, prev, p);
  for (double v : next.s) CHECK(v == 0.0);  // candidate tanh(0) kills the update
  for (double v : next.h) CHECK(v == 0.0);
}

TEST_CASE("saturated gates preserve the cell state") {
  LstmLayerParams p;
  p.hidden = 2;
  p.input = 1;
  p.w_f = p.w_i = p.w_s = p.w_o = RealMatrix(2, 3, 0.0);
  p.b_f.assign(2, 100.0);   // forget gate pinned open
  p.b_i.assign(2, -100.0);  // input gate pinned shut
  p.b_s.assign(2, 0.0);
  p.b_o.assign(2, 0.0);
  LstmState prev{std::vector<double>{0.3, -0.8}, std::vector<double>{0.7, -0.2}};
  const LstmState next = cell_step({0.5}, prev, p);
  CHECK(std::fabs(next.s[0] - 0.7) < 1e-8);
  CHECK(std::fabs(next.s[1] + 0.2) < 1e-8);
}

TEST_CASE("cell_step matches a direct scalar evaluation") {
  LstmLayerParams p;
  p.hidden = 1;
  p.input = 1;
  p.w_f = p.w_i = p.w_s = p.w_o = RealMatrix(1, 2, 0.5);
  p.b_f.assign(1, 0.0);
  p.b_i.assign(1, 0.0);
  p.b_s.assign(1, 0.0);
  p.b_o.assign(1, 0.0);
  LstmState prev{std::vector<double>{0.0}, std::vector<double>{0.0}};
  const LstmState next = cell_step({1.0}, prev, p);

  // The five equations evaluated by hand: every gate sees 0.5*0 + 0.5*1.
  const double z = 0.5;
  const double f = sigmoid(z);
  const double ig = sigmoid(z);
  const double sg = std::tanh(z);
  const double o = sigmoid(z);
  const double s = f * 0.0 + ig * sg;
  const double h = o * std::tanh(s);
  CHECK(next.s[0] == doctest::Approx(s).epsilon(1e-12));
  CHECK(next.h[0] == doctest::Approx(h).epsilon(1e-12));
}

TEST_CASE("zero model emits the head bias") {
  DeepLstmModel m = tiny_model(3, 4, 2, 1);
  zero_params(m);
  m.head_b = {0.25, -1.5};
  SeededRng rng(2);
  const RealMatrix x = randn(3, 6, rng);
  const RealMatrix y = forward(m, x, RunMode::eval);
  for (std::size_t j = 0; j < 6; ++j) {
    CHECK(y(0, j) == doctest::Approx(0.25));
    CHECK(y(1, j) == doctest::Approx(-1.5));
  }
}

TEST_CASE("train mode without dropout equals eval mode") {
  DeepLstmModel m = tiny_model(3, 5, 2, 3, 0.0);
  SeededRng rng(4);
  const RealMatrix x = randn(3, 10, rng);
  SeededRng drop_rng(5);
  ForwardCache cache;
  const RealMatrix train_out = forward(m, x, RunMode::train, &drop_rng, &cache);
  const RealMatrix eval_out = forward(m, x, RunMode::eval);
  CHECK(max_abs_diff(train_out, eval_out) == 0.0);
}

TEST_CASE("stacked forward agrees with a cell_step composition") {
  DeepLstmModel m = tiny_model(2, 3, 1, 6);
  SeededRng rng(7);
  const RealMatrix x = randn(2, 3, rng);
  const RealMatrix out = forward(m, x, RunMode::eval);

  LstmState state{std::vector<double>(3, 0.0), std::vector<double>(3, 0.0)};
  for (std::size_t t = 0; t < 3; ++t) {
    state = cell_step({x(0, t), x(1, t)}, state, m.layers[0]);
    for (std::size_t k = 0; k < 2; ++k) {
      double acc = m.head_b[k];
      for (std::size_t r = 0; r < 3; ++r) acc += m.head_w(k, r) * state.h[r];
      CHECK(out(k, t) == doctest::Approx(acc).epsilon(1e-12));
    }
  }
}

TEST_CASE("mse_loss reference values") {
  RealMatrix a(1, 2), b(1, 2, 0.0);
  a(0, 0) = 1.0;
  a(0, 1) = 2.0;
  CHECK(mse_loss(a, a) == 0.0);
  CHECK(mse_loss(a, b) == doctest::Approx(2.5));

  RealMatrix c(2, 3, 0.7), zero(2, 3, 0.0);
  CHECK(mse_loss(c, zero) == doctest::Approx(0.49));
}

TEST_CASE("gradients vanish at the loss minimum") {
  DeepLstmModel m = tiny_model(2, 3, 2, 8);
  SeededRng rng(9);
  const RealMatrix x = randn(2, 5, rng);
  ForwardCache cache;
  const RealMatrix y = forward(m, x, RunMode::train, nullptr, &cache);
  const DeepLstmModel grads = backprop(m, cache, y);
  for (const auto& ref : tensor_refs(grads))
    for (std::size_t j = 0; j < ref.size(); ++j) CHECK(ref.data[j] == 0.0);
}

TEST_CASE("gradient tensors mirror the parameter shapes") {
  DeepLstmModel m = tiny_model(2, 3, 2, 10);
  SeededRng rng(11);
  const RealMatrix x = randn(2, 4, rng);
  RealMatrix y = randn(2, 4, rng);
  ForwardCache cache;
  forward(m, x, RunMode::train, nullptr, &cache);
  const DeepLstmModel grads = backprop(m, cache, y);
  const auto pr = tensor_refs(m);
  const auto gr = tensor_refs(grads);
  REQUIRE(pr.size() == gr.size());
  for (std::size_t i = 0; i < pr.size(); ++i) {
    CHECK(pr[i].name == gr[i].name);
    CHECK(pr[i].rows == gr[i].rows);
    CHECK(pr[i].cols == gr[i].cols);
  }
}

TEST_CASE("backprop requires a cache") {
  DeepLstmModel m = tiny_model(2, 3, 1, 12);
  ForwardCache cache;  // never filled
  RealMatrix y(2, 4, 0.0);
  CHECK_THROWS_WITH_AS(backprop(m, cache, y), doctest::Contains("no cache"),
                       std::runtime_error);
}

TEST_CASE("backprop matches central finite differences") {
  DeepLstmModel m = tiny_model(2, 3, 2, 13);
  SeededRng rng(14);
  const RealMatrix x = randn(2, 5, rng);
  const RealMatrix y = randn(2, 5, rng);
  CHECK(max_relative_gradient_error(m, x, y, 1e-5) < 1e-4);
}

TEST_CASE("adam leaves parameters alone with zero gradients") {
  DeepLstmModel m = tiny_model(2, 3, 1, 15);
  const DeepLstmModel before = m;
  AdamState st = make_adam_state(m);
  adam_step(m, zeros_like(m), st);
  CHECK(models_identical(m, before));
}

TEST_CASE("first adam step moves by the learning rate") {
  DeepLstmModel m = tiny_model(2, 3, 1, 16);
  const DeepLstmModel before = m;
  DeepLstmModel grads = zeros_like(m);
  for (auto& ref : tensor_refs(grads))
    for (std::size_t j = 0; j < ref.size(); ++j) ref.data[j] = 1.0;
  AdamState st = make_adam_state(m);
  adam_step(m, grads, st);

  const auto pa = tensor_refs(m);
  const auto pb = tensor_refs(before);
  for (std::size_t i = 0; i < pa.size(); ++i) {
    for (std::size_t j = 0; j < pa[i].size(); ++j) {
      const double delta = pa[i].data[j] - pb[i].data[j];
      CHECK(std::fabs(delta + st.alpha * 1.0 / (1.0 + st.epsilon)) < 1e-9);
    }
  }
}

TEST_CASE("two adam steps match a scalar oracle") {
  // Drive a single scalar parameter through g = +1 then g = -1.
  const double alpha = 0.001, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  double theta = 0.4, m1 = 0.0, v1 = 0.0;
  const double gs[2] = {1.0, -1.0};
  for (int step = 1; step <= 2; ++step) {
    const double g = gs[step - 1];
    m1 = beta1 * m1 + (1.0 - beta1) * g;
    v1 = beta2 * v1 + (1.0 - beta2) * g * g;
    const double mh = m1 / (1.0 - std::pow(beta1, step));
    const double vh = v1 / (1.0 - std::pow(beta2, step));
    theta -= alpha * mh / (std::sqrt(vh) + eps);
  }

  DeepLstmModel m = tiny_model(1, 1, 1, 17);
  auto refs = tensor_refs(m);
  // Work on head.b specifically.
  double* cell = refs.back().data;
  *cell = 0.4;
  AdamState st = make_adam_state(m);
  DeepLstmModel grads = zeros_like(m);
  auto grefs = tensor_refs(grads);
  grefs.back().data[0] = 1.0;
  adam_step(m, grads, st);
  grefs.back().data[0] = -1.0;
  adam_step(m, grads, st);
  // Other tensors also moved; only the tracked scalar is compared.
  CHECK(tensor_refs(m).back().data[0] == doctest::Approx(theta).epsilon(1e-12));
}

TEST_CASE("training improves the loss and is deterministic") {
  const auto train_set = toy_task(12, 2, 40, 18);
  const auto val_set = toy_task(4, 2, 40, 19);

  TrainConfig cfg;
  cfg.epochs = 8;
  cfg.batch_size = 6;
  cfg.patience = 8;  // let it run
  cfg.seed = 20;
  cfg.threads = 2;

  DeepLstmModel m1 = tiny_model(2, 8, 2, 21);
  SeededRng r1(22);
  const TrainHistory h1 = train(m1, train_set, val_set, cfg, r1);

  REQUIRE(!h1.epochs.empty());
  CHECK(h1.epochs.size() <= 8);
  CHECK(h1.epochs.back().train_loss < h1.epochs.front().train_loss);

  // Best-epoch bookkeeping: the returned model scores the minimum
  // recorded validation loss.
  double best = h1.epochs.front().val_loss;
  for (const auto& e : h1.epochs) best = std::min(best, e.val_loss);
  CHECK(h1.epochs[static_cast<std::size_t>(h1.best_epoch)].val_loss == best);
  double acc = 0.0;
  for (const auto& seg : val_set)
    acc += mse_loss(forward(m1, seg.x, RunMode::eval), seg.y);
  CHECK(acc / val_set.size() == doctest::Approx(best).epsilon(1e-12));

  // Same seeds, same config: bit-identical parameters, any thread count.
  DeepLstmModel m2 = tiny_model(2, 8, 2, 21);
  SeededRng r2(22);
  TrainConfig cfg_single = cfg;
  cfg_single.threads = 1;
  const TrainHistory h2 = train(m2, train_set, val_set, cfg_single, r2);
  CHECK(models_identical(m1, m2));
  REQUIRE(h1.epochs.size() == h2.epochs.size());
  for (std::size_t e = 0; e < h1.epochs.size(); ++e)
    CHECK(h1.epochs[e].train_loss == h2.epochs[e].train_loss);
}

TEST_CASE("training reduces the loss well below its start on a desk-scale task") {
  // Five synthetic "subjects", a few segments each.
  std::vector<SegmentPair> train_set;
  for (std::uint64_t subj = 0; subj < 5; ++subj) {
    auto segs = toy_task(6, 2, 50, 100 + subj);
    train_set.insert(train_set.end(), segs.begin(), segs.end());
  }
  const auto val_set = toy_task(5, 2, 50, 200);

  TrainConfig cfg;
  cfg.epochs = 60;
  cfg.batch_size = 10;
  cfg.patience = 60;
  cfg.seed = 23;
  cfg.learning_rate = 0.003;

  DeepLstmModel m = tiny_model(2, 12, 2, 24);
  SeededRng rng(25);
  const TrainHistory hist = train(m, train_set, val_set, cfg, rng);
  CHECK(hist.epochs.back().train_loss <= 0.1 * hist.epochs.front().train_loss);
}

TEST_CASE("early stopping halts a non-improving run") {
  // Validation targets equal the untrained model's own output, so any
  // movement away from the initial parameters hurts validation.
  DeepLstmModel m = tiny_model(2, 6, 1, 26);
  SeededRng rng(27);
  const RealMatrix x = randn(2, 30, rng);
  SegmentPair val;
  val.x = x;
  val.y = forward(m, x, RunMode::eval);

  SegmentPair away;
  away.x = x;
  away.y = RealMatrix(2, 30, 10.0);  // drives the parameters hard

  TrainConfig cfg;
  cfg.epochs = 50;
  cfg.batch_size = 1;
  cfg.patience = 2;
  cfg.seed = 28;

  SeededRng train_rng(29);
  const TrainHistory hist = train(m, {away}, {val}, cfg, train_rng);
  CHECK(hist.epochs.size() < 50);
  CHECK(hist.best_epoch == 0);
}

TEST_CASE("empty training set is rejected") {
  DeepLstmModel m = tiny_model(2, 3, 1, 30);
  TrainConfig cfg;
  SeededRng rng(31);
  CHECK_THROWS_WITH_AS(train(m, {}, {}, cfg, rng), doctest::Contains("no data"),
                       std::runtime_error);
}

TEST_CASE("dropout expectation matches the eval activations") {
  // One layer with dropout only on its output: the recurrence is
  // untouched, so averaging train-mode outputs over many masks has to
  // approach the eval output.
  DeepLstmModel m = tiny_model(2, 8, 1, 32, 0.3);
  SeededRng rng(33);
  const RealMatrix x = randn(2, 5, rng);
  const RealMatrix eval_out = forward(m, x, RunMode::eval);

  RealMatrix mean(eval_out.rows, eval_out.cols, 0.0);
  const int draws = 10000;
  SeededRng mask_rng(34);
  for (int d = 0; d < draws; ++d) {
    const RealMatrix out = forward(m, x, RunMode::train, &mask_rng);
    for (std::size_t i = 0; i < out.data.size(); ++i) mean.data[i] += out.data[i];
  }
  for (double& v : mean.data) v /= draws;

  double scale = 0.0;
  for (double v : eval_out.data) scale = std::max(scale, std::fabs(v));
  for (std::size_t i = 0; i < mean.data.size(); ++i)
    CHECK(std::fabs(mean.data[i] - eval_out.data[i]) <= 0.02 * std::max(scale, 0.05));
}

TEST_CASE("eval-mode forward is pure") {
  DeepLstmModel m = tiny_model(3, 6, 2, 35, 0.2);
  SeededRng rng(36);
  const RealMatrix x = randn(3, 20, rng);
  const RealMatrix a = forward(m, x, RunMode::eval);
  const RealMatrix b = forward(m, x, RunMode::eval);
  CHECK(max_abs_diff(a, b) == 0.0);
}

TEST_CASE("predict accepts any sequence length but checks the width") {
  SeededRng rng(37);
  DeepLstmModel m = make_deep_lstm(19, rng);
  CHECK(m.layers.size() == 4);
  CHECK(m.layers[0].hidden == 64);
  CHECK(m.output_size() == 2);
  CHECK(m.dropout_rates == std::vector<double>{0.1, 0.3, 0.3, 0.1});

  const RealMatrix short_x = randn(19, 100, rng);
  const RealMatrix long_x = randn(19, 600, rng);
  CHECK(predict_eog(m, short_x).cols == 100);
  CHECK(predict_eog(m, long_x).cols == 600);
  CHECK(predict_eog(m, short_x).rows == 2);

  const RealMatrix wrong = randn(5, 100, rng);
  CHECK_THROWS_WITH_AS(predict_eog(m, wrong), doctest::Contains("input width"),
                       std::runtime_error);
}

TEST_CASE("model files round-trip exactly") {
  SeededRng rng(38);
  DeepLstmModel m = make_deep_lstm(7, rng);
  const auto path = (std::filesystem::temp_directory_path() / "deog_model_test.bin").string();
  save_model(path, m);
  const DeepLstmModel back = load_model(path);
  CHECK(models_identical(m, back));
  CHECK(back.dropout_rates == m.dropout_rates);
  CHECK(back.input_size() == 7);
}

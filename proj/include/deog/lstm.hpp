#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "deog/matrix.hpp"
#include "deog/rng.hpp"

namespace deog {

// One LSTM layer. Gate weights act on the concatenation [h_{t-1}, x_t],
// so every weight matrix is hidden x (hidden + input).
struct LstmLayerParams {
  std::size_t hidden{0};
  std::size_t input{0};
  RealMatrix w_f, w_i, w_s, w_o;
  std::vector<double> b_f, b_i, b_s, b_o;
};

struct LstmState {
  std::vector<double> h;  // hidden output
  std::vector<double> s;  // cell state
};

// Stacked LSTM regressor with a dense head. Gradients and Adam moments
// reuse this struct as a same-shaped container.
struct DeepLstmModel {
  std::vector<LstmLayerParams> layers;
  std::vector<double> dropout_rates;  // one per layer, applied to its output
  RealMatrix head_w;                  // outputs x hidden of last layer
  std::vector<double> head_b;

  std::size_t input_size() const { return layers.empty() ? 0 : layers.front().input; }
  std::size_t output_size() const { return head_b.size(); }
};

// General factory: `hidden_sizes[i]` units per layer, dropout per layer,
// `n_outputs` head units. Weights are uniform in +-1/sqrt(hidden+input),
// biases zero except the forget gate at +1.
DeepLstmModel make_lstm_model(std::size_t n_inputs,
                              const std::vector<std::size_t>& hidden_sizes,
                              const std::vector<double>& dropout_rates,
                              std::size_t n_outputs, SeededRng& rng);

// The production architecture: four layers of 64 units, dropout
// 0.1/0.3/0.3/0.1, two output channels (VEOG and HEOG estimates).
DeepLstmModel make_deep_lstm(std::size_t n_inputs, SeededRng& rng);

DeepLstmModel zeros_like(const DeepLstmModel& m);

// Named view over every parameter tensor in a fixed order:
// layer<i>.{w_f,w_i,w_s,w_o,b_f,b_i,b_s,b_o} for i = 0.., then
// head.w, head.b. The same order is used by Adam, gradient clipping
// and the model file, so alternate implementations interoperate.
struct TensorRef {
  std::string name;
  double* data;
  std::size_t rows;
  std::size_t cols;
  std::size_t size() const { return rows * cols; }
};
struct ConstTensorRef {
  std::string name;
  const double* data;
  std::size_t rows;
  std::size_t cols;
  std::size_t size() const { return rows * cols; }
};
std::vector<TensorRef> tensor_refs(DeepLstmModel& m);
std::vector<ConstTensorRef> tensor_refs(const DeepLstmModel& m);

// Single cell update for one time step.
LstmState cell_step(const std::vector<double>& x_t, const LstmState& prev,
                    const LstmLayerParams& p);

enum class RunMode { train, eval };

// Activations recorded by a train-mode forward pass, consumed by backprop.
// Cache matrices keep one row per time step so a step is contiguous.
struct LayerCache {
  RealMatrix concat;  // T x (hidden+input), row t = [h_{t-1}, x_t]
  RealMatrix f, ig, sg, o, s, tanh_s;  // T x hidden each
  RealMatrix mask;  // inverted-dropout factors, empty when rate == 0
};
struct ForwardCache {
  std::vector<LayerCache> layers;
  RealMatrix head_input;  // T x hidden, last layer's output after dropout
  bool valid{false};
};

// Runs the input column by column through the stacked layers and the
// dense head. Train mode applies inverted dropout to each layer's output
// (masks drawn per time step from rng) and fills `cache` when given;
// eval mode is deterministic and ignores rng/cache.
RealMatrix forward(const DeepLstmModel& model, const RealMatrix& x, RunMode mode,
                   SeededRng* rng = nullptr, ForwardCache* cache = nullptr);

// Mean over all entries of the squared difference.
double mse_loss(const RealMatrix& y_hat, const RealMatrix& y);

// Exact gradients of the MSE loss w.r.t. every parameter by
// backpropagation through time over the full sequence.
DeepLstmModel backprop(const DeepLstmModel& model, const ForwardCache& cache,
                       const RealMatrix& y);

struct AdamState {
  DeepLstmModel m;  // first moment
  DeepLstmModel v;  // second moment
  long step_count{0};
  double alpha{0.001};
  double beta1{0.9};
  double beta2{0.999};
  double epsilon{1e-8};
};

AdamState make_adam_state(const DeepLstmModel& model);

// Bias-corrected Adam update, applied tensor by tensor in tensor_refs order.
void adam_step(DeepLstmModel& params, const DeepLstmModel& grads, AdamState& state);

struct TrainConfig {
  int epochs{50};
  int batch_size{250};         // training segments per optimization step
  int patience{2};             // epochs without validation improvement
  double validation_fraction{0.2};
  std::uint64_t seed{0};
  int threads{0};              // 0 = hardware concurrency
  double grad_clip_norm{5.0};  // global L2 clip over all gradients
  double learning_rate{0.001};
  double lr_decay{1.0};        // per-epoch multiplicative step-size decay
};

struct SegmentPair {
  RealMatrix x;  // normalized EEG, channels x T
  RealMatrix y;  // normalized EOG targets, outputs x T
};

struct EpochStats {
  double train_loss{0.0};
  double val_loss{0.0};
  double max_grad_norm{0.0};  // largest pre-clip global gradient norm
};

struct TrainHistory {
  std::vector<EpochStats> epochs;
  int best_epoch{-1};  // epoch whose parameters were returned
};

// Mini-batch training with Adam and early stopping on validation loss.
// Batch gradients are averaged over segments; segments are processed in
// fixed logical chunks whose partial sums are reduced in chunk order, so
// results are bit-identical for any thread count. Returns the history
// and leaves the best-validation-epoch parameters in `model`.
TrainHistory train(DeepLstmModel& model, const std::vector<SegmentPair>& train_set,
                   const std::vector<SegmentPair>& val_set, const TrainConfig& config,
                   SeededRng& rng);

// Eval-mode forward: row 0 is the VEOG estimate, row 1 the HEOG estimate,
// both in normalized units. Accepts any sequence length.
RealMatrix predict_eog(const DeepLstmModel& model, const RealMatrix& x_norm);

// Versioned little-endian model file; layout documented in docs/formats.md.
void save_model(const std::string& path, const DeepLstmModel& model);
DeepLstmModel load_model(const std::string& path);

}  // namespace deog

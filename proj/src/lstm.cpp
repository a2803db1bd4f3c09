#include "deog/lstm.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "fast_math.hpp"

namespace deog {

namespace {

using detail::fast_sigmoid;
using detail::fast_tanh;

// Four-accumulator dot product: a fixed summation order that still
// leaves SIMD lanes available.
inline double dot(const double* a, const double* b, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    s0 += a[k] * b[k];
    s1 += a[k + 1] * b[k + 1];
    s2 += a[k + 2] * b[k + 2];
    s3 += a[k + 3] * b[k + 3];
  }
  double s = (s0 + s1) + (s2 + s3);
  for (; k < n; ++k) s += a[k] * b[k];
  return s;
}

inline void axpy(double* __restrict dst, const double* __restrict src, double scale,
                 std::size_t n) {
  for (std::size_t k = 0; k < n; ++k) dst[k] += scale * src[k];
}

// z[r] = b[r] + w.row(r) . concat
void gate_preact(const RealMatrix& w, const std::vector<double>& b,
                 const double* concat, double* z) {
  const std::size_t h = w.rows;
  const std::size_t width = w.cols;
  for (std::size_t r = 0; r < h; ++r) z[r] = b[r] + dot(w.row_ptr(r), concat, width);
}

// One cell update. `f/ig/sg/o` receive the gate activations, `s` holds
// s_{t-1} on entry and s_t on exit, `tanh_s` and `h` the derived outputs.
void lstm_step(const LstmLayerParams& p, const double* concat, double* f, double* ig,
               double* sg, double* o, double* s, double* tanh_s, double* h) {
  const std::size_t hdim = p.hidden;
  gate_preact(p.w_f, p.b_f, concat, f);
  gate_preact(p.w_i, p.b_i, concat, ig);
  gate_preact(p.w_s, p.b_s, concat, sg);
  gate_preact(p.w_o, p.b_o, concat, o);
  for (std::size_t r = 0; r < hdim; ++r) {
    f[r] = fast_sigmoid(f[r]);
    ig[r] = fast_sigmoid(ig[r]);
    sg[r] = fast_tanh(sg[r]);
    o[r] = fast_sigmoid(o[r]);
    s[r] = f[r] * s[r] + ig[r] * sg[r];
    tanh_s[r] = fast_tanh(s[r]);
    h[r] = o[r] * tanh_s[r];
  }
}

void check_layer_shapes(const LstmLayerParams& p) {
  const std::size_t width = p.hidden + p.input;
  auto bad = [&](const RealMatrix& w) { return w.rows != p.hidden || w.cols != width; };
  if (bad(p.w_f) || bad(p.w_i) || bad(p.w_s) || bad(p.w_o) ||
      p.b_f.size() != p.hidden || p.b_i.size() != p.hidden ||
      p.b_s.size() != p.hidden || p.b_o.size() != p.hidden)
    throw std::runtime_error("lstm: dimension error");
}

void add_scaled(DeepLstmModel& dst, const DeepLstmModel& src, double scale) {
  auto d = tensor_refs(dst);
  auto s = tensor_refs(src);
  if (d.size() != s.size()) throw std::runtime_error("lstm: dimension error");
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d[i].size() != s[i].size()) throw std::runtime_error("lstm: dimension error");
    for (std::size_t j = 0; j < d[i].size(); ++j) d[i].data[j] += scale * s[i].data[j];
  }
}

void scale_inplace(DeepLstmModel& m, double scale) {
  for (auto& ref : tensor_refs(m))
    for (std::size_t j = 0; j < ref.size(); ++j) ref.data[j] *= scale;
}

double global_norm(const DeepLstmModel& m) {
  double acc = 0.0;
  for (const auto& ref : tensor_refs(m))
    for (std::size_t j = 0; j < ref.size(); ++j) acc += ref.data[j] * ref.data[j];
  return std::sqrt(acc);
}

}  // namespace

DeepLstmModel make_lstm_model(std::size_t n_inputs,
                              const std::vector<std::size_t>& hidden_sizes,
                              const std::vector<double>& dropout_rates,
                              std::size_t n_outputs, SeededRng& rng) {
  if (hidden_sizes.empty() || n_inputs == 0 || n_outputs == 0)
    throw std::runtime_error("make_lstm_model: dimension error");
  if (dropout_rates.size() != hidden_sizes.size())
    throw std::runtime_error("make_lstm_model: dropout rate per layer required");

  DeepLstmModel m;
  m.dropout_rates = dropout_rates;
  std::size_t d_in = n_inputs;
  for (std::size_t hidden : hidden_sizes) {
    LstmLayerParams p;
    p.hidden = hidden;
    p.input = d_in;
    const std::size_t width = hidden + d_in;
    const double bound = 1.0 / std::sqrt(static_cast<double>(width));
    auto init_w = [&](RealMatrix& w) {
      w = RealMatrix(hidden, width);
      for (double& v : w.data) v = rng.uniform(-bound, bound);
    };
    init_w(p.w_f);
    init_w(p.w_i);
    init_w(p.w_s);
    init_w(p.w_o);
    p.b_f.assign(hidden, 1.0);  // open forget gates at the start
    p.b_i.assign(hidden, 0.0);
    p.b_s.assign(hidden, 0.0);
    p.b_o.assign(hidden, 0.0);
    m.layers.push_back(std::move(p));
    d_in = hidden;
  }
  const double bound = 1.0 / std::sqrt(static_cast<double>(d_in));
  m.head_w = RealMatrix(n_outputs, d_in);
  for (double& v : m.head_w.data) v = rng.uniform(-bound, bound);
  m.head_b.assign(n_outputs, 0.0);
  return m;
}

DeepLstmModel make_deep_lstm(std::size_t n_inputs, SeededRng& rng) {
  return make_lstm_model(n_inputs, {64, 64, 64, 64}, {0.1, 0.3, 0.3, 0.1}, 2, rng);
}

DeepLstmModel zeros_like(const DeepLstmModel& m) {
  DeepLstmModel z = m;
  for (auto& ref : tensor_refs(z)) std::fill_n(ref.data, ref.size(), 0.0);
  return z;
}

std::vector<TensorRef> tensor_refs(DeepLstmModel& m) {
  std::vector<TensorRef> refs;
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    auto& p = m.layers[l];
    const std::string prefix = "layer" + std::to_string(l) + ".";
    const std::size_t width = p.hidden + p.input;
    refs.push_back({prefix + "w_f", p.w_f.data.data(), p.hidden, width});
    refs.push_back({prefix + "w_i", p.w_i.data.data(), p.hidden, width});
    refs.push_back({prefix + "w_s", p.w_s.data.data(), p.hidden, width});
    refs.push_back({prefix + "w_o", p.w_o.data.data(), p.hidden, width});
    refs.push_back({prefix + "b_f", p.b_f.data(), p.hidden, 1});
    refs.push_back({prefix + "b_i", p.b_i.data(), p.hidden, 1});
    refs.push_back({prefix + "b_s", p.b_s.data(), p.hidden, 1});
    refs.push_back({prefix + "b_o", p.b_o.data(), p.hidden, 1});
  }
  refs.push_back({"head.w", m.head_w.data.data(), m.head_w.rows, m.head_w.cols});
  refs.push_back({"head.b", m.head_b.data(), m.head_b.size(), 1});
  return refs;
}

std::vector<ConstTensorRef> tensor_refs(const DeepLstmModel& m) {
  auto mutable_refs = tensor_refs(const_cast<DeepLstmModel&>(m));
  std::vector<ConstTensorRef> refs;
  refs.reserve(mutable_refs.size());
  for (auto& r : mutable_refs) refs.push_back({r.name, r.data, r.rows, r.cols});
  return refs;
}

LstmState cell_step(const std::vector<double>& x_t, const LstmState& prev,
                    const LstmLayerParams& p) {
  check_layer_shapes(p);
  if (x_t.size() != p.input || prev.h.size() != p.hidden || prev.s.size() != p.hidden)
    throw std::runtime_error("cell_step: dimension error");

  std::vector<double> concat(p.hidden + p.input);
  std::copy(prev.h.begin(), prev.h.end(), concat.begin());
  std::copy(x_t.begin(), x_t.end(), concat.begin() + static_cast<long>(p.hidden));

  LstmState next;
  next.h.resize(p.hidden);
  next.s = prev.s;
  std::vector<double> f(p.hidden), ig(p.hidden), sg(p.hidden), o(p.hidden),
      tanh_s(p.hidden);
  lstm_step(p, concat.data(), f.data(), ig.data(), sg.data(), o.data(), next.s.data(),
            tanh_s.data(), next.h.data());
  return next;
}

RealMatrix forward(const DeepLstmModel& model, const RealMatrix& x, RunMode mode,
                   SeededRng* rng, ForwardCache* cache) {
  if (model.layers.empty()) throw std::runtime_error("forward: empty model");
  if (x.rows != model.input_size()) throw std::runtime_error("forward: input width error");
  if (x.cols == 0) throw std::runtime_error("forward: empty input");
  for (const auto& p : model.layers) check_layer_shapes(p);

  const std::size_t t_len = x.cols;
  const std::size_t n_layers = model.layers.size();
  const bool training = mode == RunMode::train;

  bool any_dropout = false;
  for (double r : model.dropout_rates)
    if (r > 0.0) any_dropout = true;
  if (training && any_dropout && rng == nullptr)
    throw std::runtime_error("forward: rng required for dropout");

  const bool record = training && cache != nullptr;
  if (record) {
    cache->layers.assign(n_layers, LayerCache{});
    for (std::size_t l = 0; l < n_layers; ++l) {
      const auto& p = model.layers[l];
      auto& lc = cache->layers[l];
      lc.concat = RealMatrix(t_len, p.hidden + p.input);
      lc.f = RealMatrix(t_len, p.hidden);
      lc.ig = RealMatrix(t_len, p.hidden);
      lc.sg = RealMatrix(t_len, p.hidden);
      lc.o = RealMatrix(t_len, p.hidden);
      lc.s = RealMatrix(t_len, p.hidden);
      lc.tanh_s = RealMatrix(t_len, p.hidden);
      if (model.dropout_rates[l] > 0.0) lc.mask = RealMatrix(t_len, p.hidden);
    }
    cache->head_input = RealMatrix(t_len, model.layers.back().hidden);
    cache->valid = true;
  } else if (cache != nullptr) {
    cache->valid = false;
  }

  std::vector<std::vector<double>> h(n_layers), s(n_layers);
  for (std::size_t l = 0; l < n_layers; ++l) {
    h[l].assign(model.layers[l].hidden, 0.0);
    s[l].assign(model.layers[l].hidden, 0.0);
  }

  std::vector<double> input_col(x.rows);
  std::vector<double> concat;
  std::vector<double> f, ig, sg, o, tanh_s;

  RealMatrix out(model.output_size(), t_len);

  for (std::size_t t = 0; t < t_len; ++t) {
    input_col.resize(x.rows);
    for (std::size_t i = 0; i < x.rows; ++i) input_col[i] = x(i, t);

    for (std::size_t l = 0; l < n_layers; ++l) {
      const auto& p = model.layers[l];
      const std::size_t hd = p.hidden;
      const std::size_t width = hd + p.input;
      concat.resize(width);
      std::copy(h[l].begin(), h[l].end(), concat.begin());
      std::copy(input_col.begin(), input_col.end(), concat.begin() + static_cast<long>(hd));

      double* frow;
      double* irow;
      double* srow;
      double* orow;
      double* trow;
      if (record) {
        auto& lc = cache->layers[l];
        std::copy(concat.begin(), concat.end(), lc.concat.row_ptr(t));
        frow = lc.f.row_ptr(t);
        irow = lc.ig.row_ptr(t);
        srow = lc.sg.row_ptr(t);
        orow = lc.o.row_ptr(t);
        trow = lc.tanh_s.row_ptr(t);
      } else {
        f.resize(hd);
        ig.resize(hd);
        sg.resize(hd);
        o.resize(hd);
        tanh_s.resize(hd);
        frow = f.data();
        irow = ig.data();
        srow = sg.data();
        orow = o.data();
        trow = tanh_s.data();
      }

      lstm_step(p, concat.data(), frow, irow, srow, orow, s[l].data(), trow,
                h[l].data());
      if (record) std::copy(s[l].begin(), s[l].end(), cache->layers[l].s.row_ptr(t));

      // The layer's output becomes the next layer's input, with inverted
      // dropout in train mode.
      const double rate = model.dropout_rates[l];
      input_col.resize(hd);
      if (training && rate > 0.0) {
        const double keep_scale = 1.0 / (1.0 - rate);
        double* mrow = record && !cache->layers[l].mask.empty()
                           ? cache->layers[l].mask.row_ptr(t)
                           : nullptr;
        for (std::size_t r = 0; r < hd; ++r) {
          const double factor = rng->uniform() >= rate ? keep_scale : 0.0;
          if (mrow) mrow[r] = factor;
          input_col[r] = h[l][r] * factor;
        }
      } else {
        std::copy(h[l].begin(), h[l].end(), input_col.begin());
      }
      if (record && l + 1 == n_layers)
        std::copy(input_col.begin(), input_col.end(), cache->head_input.row_ptr(t));
    }

    for (std::size_t k = 0; k < model.output_size(); ++k) {
      const double* wrow = model.head_w.row_ptr(k);
      double acc = model.head_b[k];
      for (std::size_t r = 0; r < input_col.size(); ++r) acc += wrow[r] * input_col[r];
      out(k, t) = acc;
    }
  }
  return out;
}

double mse_loss(const RealMatrix& y_hat, const RealMatrix& y) {
  if (y_hat.rows != y.rows || y_hat.cols != y.cols)
    throw std::runtime_error("mse_loss: dimension error");
  if (y.data.empty()) throw std::runtime_error("mse_loss: empty input");
  double acc = 0.0;
  for (std::size_t i = 0; i < y.data.size(); ++i) {
    const double d = y_hat.data[i] - y.data[i];
    acc += d * d;
  }
  return acc / static_cast<double>(y.data.size());
}

DeepLstmModel backprop(const DeepLstmModel& model, const ForwardCache& cache,
                       const RealMatrix& y) {
  if (!cache.valid) throw std::runtime_error("backprop: no cache");
  const std::size_t n_layers = model.layers.size();
  if (cache.layers.size() != n_layers) throw std::runtime_error("backprop: no cache");
  const std::size_t t_len = cache.head_input.rows;
  const std::size_t n_out = model.output_size();
  if (y.rows != n_out || y.cols != t_len)
    throw std::runtime_error("backprop: dimension error");

  DeepLstmModel grads = zeros_like(model);
  const double dscale = 2.0 / static_cast<double>(n_out * t_len);

  // Head backward; d(head input) feeds the top layer.
  const std::size_t h_last = model.layers.back().hidden;
  RealMatrix dx(t_len, h_last, 0.0);
  auto& head_w_g = grads.head_w;
  for (std::size_t t = 0; t < t_len; ++t) {
    const double* hin = cache.head_input.row_ptr(t);
    double* dxrow = dx.row_ptr(t);
    for (std::size_t k = 0; k < n_out; ++k) {
      const double* wrow = model.head_w.row_ptr(k);
      double y_hat = model.head_b[k];
      for (std::size_t r = 0; r < h_last; ++r) y_hat += wrow[r] * hin[r];
      const double dy = (y_hat - y(k, t)) * dscale;
      double* wg = head_w_g.row_ptr(k);
      for (std::size_t r = 0; r < h_last; ++r) {
        wg[r] += dy * hin[r];
        dxrow[r] += dy * wrow[r];
      }
      grads.head_b[k] += dy;
    }
  }

  // Layers, top to bottom; within a layer, time runs backward.
  for (std::size_t li = n_layers; li-- > 0;) {
    const auto& p = model.layers[li];
    const auto& lc = cache.layers[li];
    auto& lg = grads.layers[li];
    const std::size_t hd = p.hidden;
    const std::size_t din = p.input;
    const std::size_t width = hd + din;

    // dx currently holds d(layer output after dropout); undo the mask.
    if (!lc.mask.empty()) {
      for (std::size_t i = 0; i < dx.data.size(); ++i) dx.data[i] *= lc.mask.data[i];
    }

    RealMatrix dx_below(t_len, din, 0.0);
    std::vector<double> dh_rec(hd, 0.0), ds_rec(hd, 0.0);
    std::vector<double> dzf(hd), dzi(hd), dzs(hd), dzo(hd), dconcat(width);

    for (std::size_t t = t_len; t-- > 0;) {
      const double* frow = lc.f.row_ptr(t);
      const double* irow = lc.ig.row_ptr(t);
      const double* srow = lc.sg.row_ptr(t);
      const double* orow = lc.o.row_ptr(t);
      const double* trow = lc.tanh_s.row_ptr(t);
      const double* s_prev = t > 0 ? lc.s.row_ptr(t - 1) : nullptr;
      const double* dxrow = dx.row_ptr(t);

      for (std::size_t r = 0; r < hd; ++r) {
        const double dh = dxrow[r] + dh_rec[r];
        const double o_v = orow[r];
        const double th = trow[r];
        const double dout = dh * th;
        double ds = ds_rec[r] + dh * o_v * (1.0 - th * th);
        const double sp = s_prev ? s_prev[r] : 0.0;
        const double f_v = frow[r];
        const double i_v = irow[r];
        const double g_v = srow[r];
        dzo[r] = dout * o_v * (1.0 - o_v);
        dzf[r] = ds * sp * f_v * (1.0 - f_v);
        dzi[r] = ds * g_v * i_v * (1.0 - i_v);
        dzs[r] = ds * i_v * (1.0 - g_v * g_v);
        ds_rec[r] = ds * f_v;
      }

      const double* concat = lc.concat.row_ptr(t);
      std::fill(dconcat.begin(), dconcat.end(), 0.0);
      auto accumulate_gate = [&](RealMatrix& wg, std::vector<double>& bg,
                                 const RealMatrix& w, const double* dz) {
        for (std::size_t r = 0; r < hd; ++r) {
          const double d = dz[r];
          if (d == 0.0) continue;
          axpy(wg.row_ptr(r), concat, d, width);
          axpy(dconcat.data(), w.row_ptr(r), d, width);
          bg[r] += d;
        }
      };
      accumulate_gate(lg.w_f, lg.b_f, p.w_f, dzf.data());
      accumulate_gate(lg.w_i, lg.b_i, p.w_i, dzi.data());
      accumulate_gate(lg.w_s, lg.b_s, p.w_s, dzs.data());
      accumulate_gate(lg.w_o, lg.b_o, p.w_o, dzo.data());

      std::copy(dconcat.begin(), dconcat.begin() + static_cast<long>(hd),
                dh_rec.begin());
      double* below = dx_below.row_ptr(t);
      for (std::size_t k = 0; k < din; ++k) below[k] = dconcat[hd + k];
    }
    dx = std::move(dx_below);
  }
  return grads;
}

AdamState make_adam_state(const DeepLstmModel& model) {
  AdamState st;
  st.m = zeros_like(model);
  st.v = zeros_like(model);
  return st;
}

void adam_step(DeepLstmModel& params, const DeepLstmModel& grads, AdamState& state) {
  auto p = tensor_refs(params);
  auto g = tensor_refs(grads);
  auto m = tensor_refs(state.m);
  auto v = tensor_refs(state.v);
  if (p.size() != g.size() || p.size() != m.size())
    throw std::runtime_error("adam_step: dimension error");

  ++state.step_count;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));

  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i].size() != g[i].size()) throw std::runtime_error("adam_step: dimension error");
    for (std::size_t j = 0; j < p[i].size(); ++j) {
      double& mj = m[i].data[j];
      double& vj = v[i].data[j];
      const double gj = g[i].data[j];
      mj = state.beta1 * mj + (1.0 - state.beta1) * gj;
      vj = state.beta2 * vj + (1.0 - state.beta2) * gj * gj;
      const double m_hat = mj / bc1;
      const double v_hat = vj / bc2;
      p[i].data[j] -= state.alpha * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
  }
}

TrainHistory train(DeepLstmModel& model, const std::vector<SegmentPair>& train_set,
                   const std::vector<SegmentPair>& val_set, const TrainConfig& config,
                   SeededRng& rng) {
  if (train_set.empty()) throw std::runtime_error("train: no data");
  if (config.epochs < 1 || config.batch_size < 1)
    throw std::runtime_error("train: bad config");
  for (const auto& seg : train_set) {
    if (seg.x.rows != model.input_size() || seg.y.rows != model.output_size() ||
        seg.x.cols != seg.y.cols)
      throw std::runtime_error("train: dimension error");
  }

  const std::size_t n = train_set.size();
  AdamState adam = make_adam_state(model);
  adam.alpha = config.learning_rate;
  TrainHistory hist;
  DeepLstmModel best = model;
  double best_val = std::numeric_limits<double>::infinity();
  int since_best = 0;

  unsigned hw = std::thread::hardware_concurrency();
  const std::size_t n_threads =
      config.threads > 0 ? static_cast<std::size_t>(config.threads)
                         : std::max(1u, hw);

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    if (epoch > 0 && config.lr_decay > 0.0) adam.alpha *= config.lr_decay;

    // Fisher-Yates shuffle from the caller's stream.
    for (std::size_t i = n; i-- > 1;) {
      const std::size_t j = rng.uniform_index(i + 1);
      std::swap(order[i], order[j]);
    }

    double loss_sum = 0.0;
    double max_gnorm = 0.0;
    std::size_t pos = 0;
    while (pos < n) {
      const std::size_t bn = std::min<std::size_t>(config.batch_size, n - pos);

      // Segments are grouped into fixed logical chunks; each chunk sums
      // its gradients sequentially and the chunks are reduced in index
      // order, so any thread count reproduces the same bits.
      const std::size_t n_chunks = std::min<std::size_t>(16, bn);
      std::vector<DeepLstmModel> chunk_grads;
      chunk_grads.reserve(n_chunks);
      for (std::size_t c = 0; c < n_chunks; ++c) chunk_grads.push_back(zeros_like(model));
      std::vector<double> chunk_loss(n_chunks, 0.0);

      std::atomic<std::size_t> next_chunk{0};
      std::exception_ptr worker_error;
      std::mutex error_mutex;
      auto worker = [&]() {
        try {
          for (;;) {
            const std::size_t c = next_chunk.fetch_add(1);
            if (c >= n_chunks) break;
            const std::size_t lo = bn * c / n_chunks;
            const std::size_t hi = bn * (c + 1) / n_chunks;
            for (std::size_t k = lo; k < hi; ++k) {
              const auto& seg = train_set[order[pos + k]];
              // Per-segment dropout stream: reproducible regardless of
              // the thread that runs it.
              SeededRng seg_rng(SeededRng::derive_seed(
                  config.seed,
                  (static_cast<std::uint64_t>(epoch) << 32) +
                      static_cast<std::uint64_t>(pos + k)));
              ForwardCache cache;
              const RealMatrix y_hat =
                  forward(model, seg.x, RunMode::train, &seg_rng, &cache);
              chunk_loss[c] += mse_loss(y_hat, seg.y);
              const DeepLstmModel g = backprop(model, cache, seg.y);
              add_scaled(chunk_grads[c], g, 1.0);
            }
          }
        } catch (...) {
          const std::lock_guard<std::mutex> lock(error_mutex);
          if (!worker_error) worker_error = std::current_exception();
        }
      };

      const std::size_t workers = std::min(n_threads, n_chunks);
      if (workers <= 1) {
        worker();
      } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
      }
      if (worker_error) std::rethrow_exception(worker_error);

      DeepLstmModel grads = zeros_like(model);
      for (std::size_t c = 0; c < n_chunks; ++c) {
        add_scaled(grads, chunk_grads[c], 1.0);
        loss_sum += chunk_loss[c];
      }
      scale_inplace(grads, 1.0 / static_cast<double>(bn));

      const double gnorm = global_norm(grads);
      max_gnorm = std::max(max_gnorm, gnorm);
      if (config.grad_clip_norm > 0.0 && gnorm > config.grad_clip_norm)
        scale_inplace(grads, config.grad_clip_norm / gnorm);

      adam_step(model, grads, adam);
      pos += bn;
    }

    EpochStats stats;
    stats.train_loss = loss_sum / static_cast<double>(n);
    stats.max_grad_norm = max_gnorm;
    if (val_set.empty()) {
      stats.val_loss = stats.train_loss;
    } else {
      double acc = 0.0;
      for (const auto& seg : val_set)
        acc += mse_loss(forward(model, seg.x, RunMode::eval), seg.y);
      stats.val_loss = acc / static_cast<double>(val_set.size());
    }
    hist.epochs.push_back(stats);

    if (stats.val_loss < best_val) {
      best_val = stats.val_loss;
      best = model;
      hist.best_epoch = epoch;
      since_best = 0;
    } else {
      ++since_best;
      if (config.patience > 0 && since_best >= config.patience) break;
    }
  }

  model = best;
  return hist;
}

RealMatrix predict_eog(const DeepLstmModel& model, const RealMatrix& x_norm) {
  if (x_norm.rows != model.input_size())
    throw std::runtime_error("predict_eog: input width error");
  return forward(model, x_norm, RunMode::eval);
}

namespace {

constexpr char kMagic[8] = {'D', 'E', 'O', 'G', 'L', 'S', 'T', 'M'};
constexpr std::uint32_t kFormatVersion = 1;

void put_u32(std::ofstream& f, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  f.write(reinterpret_cast<const char*>(b), 4);
}

void put_f64(std::ofstream& f, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
  f.write(reinterpret_cast<const char*>(b), 8);
}

std::uint32_t get_u32(std::ifstream& f) {
  unsigned char b[4];
  f.read(reinterpret_cast<char*>(b), 4);
  if (!f) throw std::runtime_error("load_model: truncated file");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

double get_f64(std::ifstream& f) {
  unsigned char b[8];
  f.read(reinterpret_cast<char*>(b), 8);
  if (!f) throw std::runtime_error("load_model: truncated file");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

}  // namespace

void save_model(const std::string& path, const DeepLstmModel& model) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("save_model: cannot open " + path);

  f.write(kMagic, 8);
  put_u32(f, kFormatVersion);
  put_u32(f, static_cast<std::uint32_t>(model.input_size()));
  put_u32(f, static_cast<std::uint32_t>(model.layers.size()));
  put_u32(f, static_cast<std::uint32_t>(model.layers.front().hidden));
  put_u32(f, static_cast<std::uint32_t>(model.output_size()));
  for (double r : model.dropout_rates) put_f64(f, r);

  const auto refs = tensor_refs(model);
  put_u32(f, static_cast<std::uint32_t>(refs.size()));
  for (const auto& ref : refs) {
    put_u32(f, static_cast<std::uint32_t>(ref.name.size()));
    f.write(ref.name.data(), static_cast<long>(ref.name.size()));
    put_u32(f, static_cast<std::uint32_t>(ref.rows));
    put_u32(f, static_cast<std::uint32_t>(ref.cols));
    for (std::size_t j = 0; j < ref.size(); ++j) put_f64(f, ref.data[j]);
  }
  if (!f) throw std::runtime_error("save_model: write failed for " + path);
}

DeepLstmModel load_model(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("load_model: cannot open " + path);

  char magic[8];
  f.read(magic, 8);
  if (!f || std::memcmp(magic, kMagic, 8) != 0)
    throw std::runtime_error("load_model: not a model file");
  const std::uint32_t version = get_u32(f);
  if (version != kFormatVersion)
    throw std::runtime_error("load_model: unsupported version");

  const std::uint32_t input_size = get_u32(f);
  const std::uint32_t layer_count = get_u32(f);
  const std::uint32_t hidden = get_u32(f);
  const std::uint32_t output_size = get_u32(f);

  DeepLstmModel m;
  m.dropout_rates.resize(layer_count);
  for (auto& r : m.dropout_rates) r = get_f64(f);
  m.layers.resize(layer_count);

  const std::uint32_t tensor_count = get_u32(f);
  for (std::uint32_t i = 0; i < tensor_count; ++i) {
    const std::uint32_t name_len = get_u32(f);
    std::string name(name_len, '\0');
    f.read(name.data(), name_len);
    const std::uint32_t rows = get_u32(f);
    const std::uint32_t cols = get_u32(f);
    RealMatrix tensor(rows, cols);
    for (auto& v : tensor.data) v = get_f64(f);

    const auto dot = name.find('.');
    if (dot == std::string::npos) throw std::runtime_error("load_model: bad tensor name");
    const std::string scope = name.substr(0, dot);
    const std::string field = name.substr(dot + 1);
    auto as_vector = [&]() {
      if (cols != 1) throw std::runtime_error("load_model: bad tensor shape");
      return std::vector<double>(tensor.data.begin(), tensor.data.end());
    };
    if (scope == "head") {
      if (field == "w") m.head_w = std::move(tensor);
      else if (field == "b") m.head_b = as_vector();
      else throw std::runtime_error("load_model: bad tensor name");
    } else if (scope.rfind("layer", 0) == 0) {
      const std::size_t idx = std::stoul(scope.substr(5));
      if (idx >= m.layers.size()) throw std::runtime_error("load_model: bad layer index");
      auto& p = m.layers[idx];
      if (field == "w_f") p.w_f = std::move(tensor);
      else if (field == "w_i") p.w_i = std::move(tensor);
      else if (field == "w_s") p.w_s = std::move(tensor);
      else if (field == "w_o") p.w_o = std::move(tensor);
      else if (field == "b_f") p.b_f = as_vector();
      else if (field == "b_i") p.b_i = as_vector();
      else if (field == "b_s") p.b_s = as_vector();
      else if (field == "b_o") p.b_o = as_vector();
      else throw std::runtime_error("load_model: bad tensor name");
    } else {
      throw std::runtime_error("load_model: bad tensor name");
    }
  }

  for (auto& p : m.layers) {
    p.hidden = p.w_f.rows;
    if (p.w_f.cols < p.hidden) throw std::runtime_error("load_model: bad tensor shape");
    p.input = p.w_f.cols - p.hidden;
    check_layer_shapes(p);
  }
  if (m.input_size() != input_size || m.layers.size() != layer_count ||
      m.layers.front().hidden != hidden || m.output_size() != output_size)
    throw std::runtime_error("load_model: header mismatch");
  return m;
}

}  // namespace deog

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "deog/datagen.hpp"
#include "deog/ica.hpp"
#include "deog/lstm.hpp"
#include "deog/numerics.hpp"
#include "deog/preprocess.hpp"
#include "deog/removal.hpp"

namespace py = pybind11;
using namespace deog;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

RealMatrix to_matrix(const Array& a) {
  const auto buf = a.request();
  if (buf.ndim != 2) throw std::runtime_error("expected a 2-d array");
  RealMatrix m(static_cast<std::size_t>(buf.shape[0]),
               static_cast<std::size_t>(buf.shape[1]));
  const double* src = static_cast<const double*>(buf.ptr);
  std::copy(src, src + m.size(), m.data.begin());
  return m;
}

py::array_t<double> to_array(const RealMatrix& m) {
  py::array_t<double> a({m.rows, m.cols});
  std::copy(m.data.begin(), m.data.end(), a.mutable_data());
  return a;
}

std::vector<double> to_vector(const Array& a) {
  const auto buf = a.request();
  if (buf.ndim != 1) throw std::runtime_error("expected a 1-d array");
  const double* src = static_cast<const double*>(buf.ptr);
  return std::vector<double>(src, src + buf.shape[0]);
}

py::array_t<double> to_array(const std::vector<double>& v) {
  py::array_t<double> a(v.size());
  std::copy(v.begin(), v.end(), a.mutable_data());
  return a;
}

std::vector<SegmentPair> to_segments(const std::vector<std::pair<Array, Array>>& pairs) {
  std::vector<SegmentPair> segs;
  segs.reserve(pairs.size());
  for (const auto& [x, y] : pairs) segs.push_back({to_matrix(x), to_matrix(y)});
  return segs;
}

}  // namespace

PYBIND11_MODULE(deog, m) {
  m.doc() = "EOG artifact removal for EEG: recurrent EOG estimation plus "
            "correlation-gated independent component rejection";

  m.def("covariance", [](const Array& x) { return to_array(covariance(to_matrix(x))); },
        py::arg("x"));

  m.def(
      "sym_eig",
      [](const Array& c) {
        const EigenDecomposition e = sym_eig(to_matrix(c));
        return py::make_tuple(to_array(e.vectors), to_array(e.values));
      },
      py::arg("c"), "Eigenvectors (columns) and descending eigenvalues.");

  m.def(
      "corrcoef",
      [](const Array& a, const Array& b) { return corrcoef(to_vector(a), to_vector(b)); },
      py::arg("a"), py::arg("b"));

  m.def(
      "randn",
      [](std::size_t rows, std::size_t cols, std::uint64_t seed) {
        SeededRng rng(seed);
        return to_array(randn(rows, cols, rng));
      },
      py::arg("rows"), py::arg("cols"), py::arg("seed"));

  m.def(
      "normalize_channels",
      [](const Array& eeg, const Array& eog) {
        const NormalizedSignals n = to_matrix(eog).empty()
                                        ? normalize_channels(to_matrix(eeg), RealMatrix{})
                                        : normalize_channels(to_matrix(eeg), to_matrix(eog));
        return py::make_tuple(to_array(n.eeg), to_array(n.eog), to_array(n.params.means),
                              to_array(n.params.stds));
      },
      py::arg("eeg"), py::arg("eog") = Array(std::vector<py::ssize_t>{0, 0}),
      "Channel-wise zero-mean unit-variance normalization; returns "
      "(eeg_n, eog_n, means, stds) with EEG params first.");

  m.def(
      "denormalize",
      [](const Array& x_n, const Array& means, const Array& stds) {
        return to_array(denormalize(to_matrix(x_n), to_vector(means), to_vector(stds)));
      },
      py::arg("x_n"), py::arg("means"), py::arg("stds"));

  m.def(
      "center_whiten",
      [](const Array& x) {
        const WhitenResult w = center_whiten(to_matrix(x));
        py::dict t;
        t["p"] = to_array(w.transform.p);
        t["mean"] = to_array(w.transform.mean);
        t["v"] = to_array(w.transform.v);
        t["d"] = to_array(w.transform.d);
        return py::make_tuple(to_array(w.x), t);
      },
      py::arg("x"));

  m.def(
      "fast_ica",
      [](const Array& x_white, std::size_t n_sources, std::uint64_t seed, double tol,
         int max_iter) {
        SeededRng rng(seed);
        const IcaResult r = fast_ica(to_matrix(x_white), n_sources, rng, tol, max_iter);
        py::dict out;
        out["w"] = to_array(r.w);
        out["s"] = to_array(r.s);
        out["iterations"] = r.iterations;
        out["converged"] = r.converged;
        return out;
      },
      py::arg("x_white"), py::arg("n_sources"), py::arg("seed"), py::arg("tol") = 1e-6,
      py::arg("max_iter") = 200);

  m.def(
      "remove_eog",
      [](const Array& x_norm, const Array& y_est, const Array& means, const Array& stds,
         double threshold, std::uint64_t seed) {
        NormalizationParams params{to_vector(means), to_vector(stds)};
        SeededRng rng(seed);
        const RemovalOutcome r =
            remove_eog(to_matrix(x_norm), to_matrix(y_est), params, threshold, rng);
        py::dict out;
        out["cleaned"] = to_array(r.cleaned);
        out["removed_source_ids"] = r.removed_source_ids;
        out["correlations"] = to_array(r.correlations);
        return out;
      },
      py::arg("x_norm"), py::arg("y_est"), py::arg("means"), py::arg("stds"),
      py::arg("threshold") = 0.8, py::arg("seed") = 0,
      "Stack, whiten, decompose, zero artifact-correlated sources and "
      "reconstruct; removed ids are 0-based.");

  m.def(
      "compute_metrics",
      [](const Array& y, const Array& y_hat) {
        const Metrics r = compute_metrics(to_vector(y), to_vector(y_hat));
        return py::make_tuple(r.mse, r.mae, r.me);
      },
      py::arg("y"), py::arg("y_hat"), "Returns (mse, mae, me) with me = mean(y - y_hat).");

  m.def(
      "evaluate_channels",
      [](const Array& reference, const Array& estimate) {
        const MetricsReport r = evaluate_channels(to_matrix(reference), to_matrix(estimate));
        py::dict out;
        out["mse"] = to_array(r.mse);
        out["mae"] = to_array(r.mae);
        out["me"] = to_array(r.me);
        out["mean"] = py::make_tuple(r.mean.mse, r.mean.mae, r.mean.me);
        out["std"] = py::make_tuple(r.stddev.mse, r.stddev.mae, r.stddev.me);
        return out;
      },
      py::arg("reference"), py::arg("estimate"));

  m.def(
      "bandpass",
      [](const Array& x, double lo_hz, double hi_hz, double fs) {
        return to_array(bandpass(to_vector(x), lo_hz, hi_hz, fs));
      },
      py::arg("x"), py::arg("lo_hz"), py::arg("hi_hz"), py::arg("fs"),
      "Zero-phase 4th-order Butterworth bandpass.");

  m.def(
      "synth_subject",
      [](std::size_t subject_index, std::uint64_t master_seed, std::size_t n_ch,
         std::size_t t, double fs) {
        const SemiSimDataset ds = make_semi_sim_subject(subject_index, master_seed, n_ch, t, fs);
        py::dict out;
        out["subject_id"] = ds.subject_id;
        out["labels"] = ds.pure.labels;
        out["fs"] = ds.fs_hz;
        out["pure"] = to_array(ds.pure.data);
        out["contaminated"] = to_array(ds.contaminated.data);
        out["veog"] = to_array(ds.veog);
        out["heog"] = to_array(ds.heog);
        out["a"] = ds.a;
        out["b"] = ds.b;
        return out;
      },
      py::arg("subject_index"), py::arg("master_seed"), py::arg("n_ch") = 19,
      py::arg("t") = 6000, py::arg("fs") = 200.0,
      "One synthetic subject; contaminated = pure + a*veog + b*heog.");

  m.def(
      "fit_mixing_coeffs",
      [](const Array& contaminated_ch, const Array& pure_ch, const Array& veog,
         const Array& heog) {
        const auto [a, b] = fit_mixing_coeffs(to_vector(contaminated_ch), to_vector(pure_ch),
                                              to_vector(veog), to_vector(heog));
        return py::make_tuple(a, b);
      },
      py::arg("contaminated_ch"), py::arg("pure_ch"), py::arg("veog"), py::arg("heog"));

  py::class_<DeepLstmModel>(m, "Model")
      .def_property_readonly("input_size", &DeepLstmModel::input_size)
      .def_property_readonly("output_size", &DeepLstmModel::output_size)
      .def_property_readonly("layer_count",
                             [](const DeepLstmModel& mod) { return mod.layers.size(); })
      .def("predict",
           [](const DeepLstmModel& mod, const Array& x_norm) {
             return to_array(predict_eog(mod, to_matrix(x_norm)));
           },
           py::arg("x_norm"), "Eval-mode forward; rows are VEOG and HEOG estimates.")
      .def("save", [](const DeepLstmModel& mod, const std::string& path) {
        save_model(path, mod);
      }, py::arg("path"));

  m.def(
      "make_model",
      [](std::size_t n_inputs, std::uint64_t seed) {
        SeededRng rng(seed);
        return make_deep_lstm(n_inputs, rng);
      },
      py::arg("n_inputs"), py::arg("seed"),
      "Four stacked 64-unit layers with a 2-channel head.");

  m.def("load_model", &load_model, py::arg("path"));

  m.def(
      "train_model",
      [](DeepLstmModel& model, const std::vector<std::pair<Array, Array>>& train_pairs,
         const std::vector<std::pair<Array, Array>>& val_pairs, int epochs, int batch_size,
         int patience, double learning_rate, std::uint64_t seed, int threads) {
        TrainConfig cfg;
        cfg.epochs = epochs;
        cfg.batch_size = batch_size;
        cfg.patience = patience;
        cfg.learning_rate = learning_rate;
        cfg.seed = seed;
        cfg.threads = threads;
        SeededRng rng(seed);
        const TrainHistory hist =
            train(model, to_segments(train_pairs), to_segments(val_pairs), cfg, rng);
        py::dict out;
        std::vector<double> train_loss, val_loss;
        for (const auto& e : hist.epochs) {
          train_loss.push_back(e.train_loss);
          val_loss.push_back(e.val_loss);
        }
        out["train_loss"] = to_array(train_loss);
        out["val_loss"] = to_array(val_loss);
        out["best_epoch"] = hist.best_epoch;
        return out;
      },
      py::arg("model"), py::arg("train_pairs"), py::arg("val_pairs"),
      py::arg("epochs") = 50, py::arg("batch_size") = 250, py::arg("patience") = 2,
      py::arg("learning_rate") = 0.001, py::arg("seed") = 0, py::arg("threads") = 0,
      "Trains in place; (x, y) pairs are (channels x T, 2 x T) arrays.");
}

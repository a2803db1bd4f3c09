#include "deog/removal.hpp"

#include <atomic>
#include <cmath>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "deog/numerics.hpp"

namespace deog {

RemovalOutcome remove_eog(const RealMatrix& x_norm, const RealMatrix& y_est,
                          const NormalizationParams& params, double threshold,
                          SeededRng& rng) {
  const std::size_t n_c = x_norm.rows;
  const std::size_t n_e = y_est.rows;
  const std::size_t t = x_norm.cols;
  if (n_c < 1 || n_e < 1) throw std::runtime_error("remove_eog: dimension error");
  if (y_est.cols != t) throw std::runtime_error("remove_eog: length mismatch");
  if (t < 2) throw std::runtime_error("remove_eog: insufficient samples");
  if (params.means.size() < n_c || params.stds.size() < n_c)
    throw std::runtime_error("remove_eog: params do not cover the EEG channels");

  // A constant estimate makes the correlation screen undefined and
  // signals an upstream failure; surface it instead of guessing.
  for (std::size_t e = 0; e < n_e; ++e) {
    const double* row = y_est.row_ptr(e);
    double mean = 0.0;
    for (std::size_t j = 0; j < t; ++j) mean += row[j];
    mean /= static_cast<double>(t);
    double var = 0.0;
    for (std::size_t j = 0; j < t; ++j) var += (row[j] - mean) * (row[j] - mean);
    if (var <= 0.0) throw std::runtime_error("remove_eog: zero variance in EOG estimate");
  }

  // Stack [X_N; Y_est], whiten, run a full square decomposition so the
  // unmixing is invertible.
  const std::size_t n = n_c + n_e;
  RealMatrix z(n, t);
  for (std::size_t i = 0; i < n_c; ++i)
    std::copy(x_norm.row_ptr(i), x_norm.row_ptr(i) + t, z.row_ptr(i));
  for (std::size_t e = 0; e < n_e; ++e)
    std::copy(y_est.row_ptr(e), y_est.row_ptr(e) + t, z.row_ptr(n_c + e));

  WhitenResult white = center_whiten(z);

  // Deflation occasionally converges onto a fixed point that mixes the
  // two artifacts, which leaves artifact power below the screening
  // threshold. Run a few restarts and keep the decomposition whose
  // worst-captured estimate is matched best; the choice ignores the
  // threshold, so loosening it can only grow the removal set.
  constexpr int kRestarts = 4;
  std::vector<std::uint64_t> seeds(kRestarts);
  for (auto& s : seeds) s = rng.next_u64();

  struct Candidate {
    IcaResult ica;
    RealMatrix correlations;
    double objective{-1.0};
  };
  std::vector<Candidate> candidates(kRestarts);
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&]() {
    try {
      for (;;) {
        const int c = next.fetch_add(1);
        if (c >= kRestarts) break;
        Candidate& cand = candidates[static_cast<std::size_t>(c)];
        SeededRng cand_rng(seeds[static_cast<std::size_t>(c)]);
        cand.ica = fast_ica(white.x, n, cand_rng);
        cand.correlations = RealMatrix(n_e, n);
        double objective = 1.0;
        for (std::size_t e = 0; e < n_e; ++e) {
          double best = 0.0;
          for (std::size_t i = 0; i < n; ++i) {
            const double corr =
                std::fabs(corrcoef(y_est.row_ptr(e), cand.ica.s.row_ptr(i), t));
            cand.correlations(e, i) = corr;
            best = std::max(best, corr);
          }
          objective = std::min(objective, best);
        }
        cand.objective = objective;
      }
    } catch (...) {
      const std::lock_guard<std::mutex> lock(error_mutex);
      if (!error) error = std::current_exception();
    }
  };
  {
    std::thread other(worker);
    worker();
    other.join();
  }
  if (error) std::rethrow_exception(error);

  std::size_t chosen = 0;
  for (std::size_t c = 1; c < candidates.size(); ++c)
    if (candidates[c].objective > candidates[chosen].objective) chosen = c;

  RemovalOutcome out;
  out.ica = std::move(candidates[chosen].ica);
  out.correlations = std::move(candidates[chosen].correlations);

  std::vector<bool> removed(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t e = 0; e < n_e; ++e) {
      if (out.correlations(e, i) >= threshold) {
        removed[i] = true;
        break;
      }
    }
    if (removed[i]) out.removed_source_ids.push_back(i);
  }

  // Back-projection matrix: sources were formed as S = W^T Z_white, so
  // reconstruction uses (W^T)^{-1}, which is W itself while the columns
  // stay orthonormal. Fall back to a general inverse if they drifted.
  RealMatrix mixing;
  const RealMatrix wt = transpose(out.ica.w);
  if (max_abs_diff(matmul(wt, out.ica.w), identity(n)) <= 1e-6) {
    mixing = out.ica.w;
  } else {
    mixing = invert_square(wt);
  }

  for (std::size_t id : out.removed_source_ids)
    for (std::size_t r = 0; r < n; ++r) mixing(r, id) = 0.0;

  const RealMatrix rebuilt_white = matmul(mixing, out.ica.s);
  const RealMatrix rebuilt = unwhiten(white.transform, rebuilt_white);

  RealMatrix cleaned_norm(n_c, t);
  for (std::size_t i = 0; i < n_c; ++i)
    std::copy(rebuilt.row_ptr(i), rebuilt.row_ptr(i) + t, cleaned_norm.row_ptr(i));

  const std::vector<double> eeg_means(params.means.begin(), params.means.begin() + n_c);
  const std::vector<double> eeg_stds(params.stds.begin(), params.stds.begin() + n_c);
  out.cleaned = denormalize(cleaned_norm, eeg_means, eeg_stds);
  return out;
}

Metrics compute_metrics(const double* y, const double* y_hat, std::size_t n) {
  if (n == 0) throw std::runtime_error("compute_metrics: empty input");
  Metrics m;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = y[i] - y_hat[i];
    m.mse += d * d;
    m.mae += std::fabs(d);
    m.me += d;
  }
  const double inv = 1.0 / static_cast<double>(n);
  m.mse *= inv;
  m.mae *= inv;
  m.me *= inv;
  return m;
}

Metrics compute_metrics(const std::vector<double>& y, const std::vector<double>& y_hat) {
  if (y.size() != y_hat.size()) throw std::runtime_error("compute_metrics: length mismatch");
  return compute_metrics(y.data(), y_hat.data(), y.size());
}

MetricsReport evaluate_channels(const RealMatrix& reference, const RealMatrix& estimate) {
  if (reference.rows != estimate.rows || reference.cols != estimate.cols)
    throw std::runtime_error("evaluate_channels: dimension error");
  const std::size_t n_ch = reference.rows;
  if (n_ch == 0) throw std::runtime_error("evaluate_channels: empty input");

  MetricsReport rep;
  rep.mse.resize(n_ch);
  rep.mae.resize(n_ch);
  rep.me.resize(n_ch);
  for (std::size_t i = 0; i < n_ch; ++i) {
    const Metrics m =
        compute_metrics(reference.row_ptr(i), estimate.row_ptr(i), reference.cols);
    rep.mse[i] = m.mse;
    rep.mae[i] = m.mae;
    rep.me[i] = m.me;
  }

  auto mean_of = [n_ch](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(n_ch);
  };
  auto std_of = [n_ch](const std::vector<double>& v, double mean) {
    double s = 0.0;
    for (double x : v) s += (x - mean) * (x - mean);
    return std::sqrt(s / static_cast<double>(n_ch));
  };
  rep.mean.mse = mean_of(rep.mse);
  rep.mean.mae = mean_of(rep.mae);
  rep.mean.me = mean_of(rep.me);
  rep.stddev.mse = std_of(rep.mse, rep.mean.mse);
  rep.stddev.mae = std_of(rep.mae, rep.mean.mae);
  rep.stddev.me = std_of(rep.me, rep.mean.me);
  return rep;
}

EogErrorReport estimate_eog_error(const RealMatrix& y_est, const RealMatrix& y_true) {
  if (y_est.rows != y_true.rows || y_est.cols != y_true.cols)
    throw std::runtime_error("estimate_eog_error: dimension error");
  if (y_est.rows == 0) throw std::runtime_error("estimate_eog_error: empty input");

  EogErrorReport rep;
  rep.mse.resize(y_est.rows);
  for (std::size_t i = 0; i < y_est.rows; ++i) {
    const Metrics m = compute_metrics(y_true.row_ptr(i), y_est.row_ptr(i), y_est.cols);
    rep.mse[i] = m.mse;
    rep.average += m.mse;
  }
  rep.average /= static_cast<double>(y_est.rows);
  return rep;
}

}  // namespace deog

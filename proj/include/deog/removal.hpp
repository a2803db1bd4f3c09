#pragma once

#include <cstddef>
#include <vector>

#include "deog/ica.hpp"
#include "deog/matrix.hpp"
#include "deog/preprocess.hpp"
#include "deog/rng.hpp"

namespace deog {

struct RemovalOutcome {
  RealMatrix cleaned;                   // N_c x T, original physical units
  std::vector<std::size_t> removed_source_ids;
  RealMatrix correlations;              // N_E x N, |corrcoef(EOG est, source)|
  IcaResult ica;                        // decomposition of the stacked data
};

// Online removal stage. Stacks the normalized EEG with the estimated EOG
// rows, whitens, runs a full square FastICA (a handful of seeded
// restarts, keeping the decomposition that captures the estimates best),
// zeroes the back-projection columns of every source whose absolute
// correlation with an estimated EOG row reaches `threshold`,
// reconstructs, undoes the whitening, keeps the EEG rows and maps them
// back to physical units with `params` (whose first N_c entries must
// describe the EEG channels).
RemovalOutcome remove_eog(const RealMatrix& x_norm, const RealMatrix& y_est,
                          const NormalizationParams& params, double threshold,
                          SeededRng& rng);

struct Metrics {
  double mse{0.0};
  double mae{0.0};
  double me{0.0};  // signed, mean of (y - y_hat)
};

Metrics compute_metrics(const std::vector<double>& y, const std::vector<double>& y_hat);
Metrics compute_metrics(const double* y, const double* y_hat, std::size_t n);

struct MetricsReport {
  std::vector<double> mse, mae, me;  // one entry per channel
  Metrics mean;                      // arithmetic means of the vectors
  Metrics stddev;                    // population std over channels
};

// Per-channel comparison of a reference signal against an estimate.
MetricsReport evaluate_channels(const RealMatrix& reference, const RealMatrix& estimate);

struct EogErrorReport {
  std::vector<double> mse;  // per EOG row
  double average{0.0};
};

// MSE between estimated and true EOG rows (normalized units).
EogErrorReport estimate_eog_error(const RealMatrix& y_est, const RealMatrix& y_true);

}  // namespace deog

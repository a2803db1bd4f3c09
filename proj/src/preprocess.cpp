#include "deog/preprocess.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace deog {

namespace {

// Normalizes the rows of `x` in place into `out`, appending each
// channel's mean/std to `params`. `offset` shifts the channel index
// reported in errors.
void normalize_rows(const RealMatrix& x, RealMatrix& out, NormalizationParams& params,
                    std::size_t offset) {
  const std::size_t t = x.cols;
  if (t < 2) throw std::runtime_error("normalize_channels: insufficient samples");
  out = RealMatrix(x.rows, t);
  for (std::size_t i = 0; i < x.rows; ++i) {
    const double* row = x.row_ptr(i);
    double mean = 0.0;
    for (std::size_t j = 0; j < t; ++j) mean += row[j];
    mean /= static_cast<double>(t);
    double var = 0.0;
    for (std::size_t j = 0; j < t; ++j) {
      const double d = row[j] - mean;
      var += d * d;
    }
    var /= static_cast<double>(t);
    if (var <= 0.0)
      throw std::runtime_error("normalize_channels: zero-variance channel " +
                               std::to_string(offset + i));
    const double sd = std::sqrt(var);
    double* orow = out.row_ptr(i);
    for (std::size_t j = 0; j < t; ++j) orow[j] = (row[j] - mean) / sd;
    params.means.push_back(mean);
    params.stds.push_back(sd);
  }
}

}  // namespace

NormalizedSignals normalize_channels(const RealMatrix& eeg, const RealMatrix& eog) {
  if (!eog.empty() && eog.cols != eeg.cols)
    throw std::runtime_error("normalize_channels: length mismatch");
  NormalizedSignals out;
  normalize_rows(eeg, out.eeg, out.params, 0);
  if (!eog.empty()) normalize_rows(eog, out.eog, out.params, eeg.rows);
  return out;
}

RealMatrix denormalize(const RealMatrix& x_n, const std::vector<double>& means,
                       const std::vector<double>& stds) {
  if (means.size() != x_n.rows || stds.size() != x_n.rows)
    throw std::runtime_error("denormalize: dimension error");
  RealMatrix out(x_n.rows, x_n.cols);
  for (std::size_t i = 0; i < x_n.rows; ++i) {
    if (!(stds[i] > 0.0)) throw std::runtime_error("denormalize: invalid std");
    const double* row = x_n.row_ptr(i);
    double* orow = out.row_ptr(i);
    for (std::size_t j = 0; j < x_n.cols; ++j) orow[j] = row[j] * stds[i] + means[i];
  }
  return out;
}

}  // namespace deog

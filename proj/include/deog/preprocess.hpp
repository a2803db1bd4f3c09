#pragma once

#include <vector>

#include "deog/matrix.hpp"

namespace deog {

// Per-channel mean/std in concatenation order: all EEG channels first,
// then all EOG channels. Stds are strictly positive.
struct NormalizationParams {
  std::vector<double> means;
  std::vector<double> stds;

  std::size_t size() const { return means.size(); }
};

struct NormalizedSignals {
  RealMatrix eeg;  // each row zero mean, unit variance (population divisor)
  RealMatrix eog;  // empty when no EOG was supplied
  NormalizationParams params;
};

// Channel-wise zero-mean unit-variance normalization of EEG and EOG.
// `eog` may be an empty matrix when only EEG is being normalized (the
// params then cover just the EEG channels). A constant channel is an
// error: it would divide by zero and poisons downstream separation.
NormalizedSignals normalize_channels(const RealMatrix& eeg, const RealMatrix& eog);

// Inverse map: row i of the result is x_n[i] * stds[i] + means[i].
RealMatrix denormalize(const RealMatrix& x_n, const std::vector<double>& means,
                       const std::vector<double>& stds);

}  // namespace deog

#pragma once

#include <string>
#include <vector>

#include "deog/matrix.hpp"

namespace deog {

// Multi-channel real-valued time series. One matrix row per channel.
struct Recording {
  std::string subject;              // empty when unknown
  double fs_hz{0.0};
  std::vector<std::string> labels;  // one per channel
  RealMatrix data;                  // channels x samples

  std::size_t n_channels() const { return data.rows; }
  std::size_t n_samples() const { return data.cols; }

  // Index of a channel label, or throws.
  std::size_t channel_index(const std::string& label) const;
};

// Writes `path` as CSV (header "time,<label>,..." and one row per sample,
// values printed with %.17g so doubles round-trip exactly) plus a
// `<path minus .csv>.meta` sidecar with key=value lines: fs, subject,
// roles. Roles are derived from labels: VEOG/HEOG map to veog/heog,
// everything else is eeg.
void write_recording_csv(const std::string& path, const Recording& rec);

// Reads a CSV written by write_recording_csv (or any file in the same
// layout). Malformed rows raise an error naming the 1-based line.
Recording read_recording_csv(const std::string& path);

}  // namespace deog

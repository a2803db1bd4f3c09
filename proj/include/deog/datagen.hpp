#pragma once

#include <cstdint>
#include <vector>

#include "deog/recording.hpp"
#include "deog/rng.hpp"

namespace deog {

// One synthetic subject: clean EEG, the two bipolar EOG signals, the
// mixing coefficients and the contaminated EEG they produce. The
// contamination is exact: contaminated = pure + a*veog + b*heog on every
// channel row.
struct SemiSimDataset {
  Recording pure;               // n_ch x T, microvolts
  std::vector<double> veog;     // T samples
  std::vector<double> heog;     // T samples
  double a{0.0};                // VEOG propagation coefficient
  double b{0.0};                // HEOG propagation coefficient
  Recording contaminated;       // pure + a*veog + b*heog
  double fs_hz{200.0};
  std::string subject_id;
};

// The 10-20 montage labels used for generated recordings.
const std::vector<std::string>& standard_montage_19();

// Clean multi-channel EEG: shared cortical sources (alpha-dominant plus
// 1/f background, built from harmonics on the 0.5-40 Hz bins so the
// band limit is exact) spatially mixed into the channels, plus a small
// independent component per channel so the covariance stays full rank.
Recording synth_pure_eeg(std::size_t n_ch, std::size_t t, double fs, std::uint64_t seed);

struct BlinkEvent {
  std::size_t onset;   // sample index
  std::size_t width;   // samples, 200-400 ms worth
  double amplitude;    // microvolts
};

struct EogSignals {
  std::vector<double> veog;
  std::vector<double> heog;
  std::vector<BlinkEvent> blinks;  // the events baked into veog
};

// Vertical EOG (sparse blink bumps plus slow drift) and horizontal EOG
// (step-like saccades plus drift), both bandpassed to 0.5-5 Hz.
EogSignals synth_eog(std::size_t t, double fs, std::uint64_t seed);

// Zero-phase 4th-order recursive bandpass: a 2nd-order Butterworth
// high-pass at lo_hz cascaded with a 2nd-order Butterworth low-pass at
// hi_hz, run forward and backward with odd-reflection padding of three
// times the filter order and steady-state initial conditions.
std::vector<double> bandpass(const std::vector<double>& x, double lo_hz, double hi_hz,
                             double fs);

// out[ch][t] = pure[ch][t] + a*veog[t] + b*heog[t]
Recording contaminate(const Recording& pure, const std::vector<double>& veog,
                      const std::vector<double>& heog, double a, double b);

// Least-squares (a, b) minimizing |(contaminated - pure) - a*veog - b*heog|^2.
std::pair<double, double> fit_mixing_coeffs(const std::vector<double>& contaminated_ch,
                                            const std::vector<double>& pure_ch,
                                            const std::vector<double>& veog,
                                            const std::vector<double>& heog);

struct SegmentSpec {
  std::size_t count{250};
  std::size_t min_len{2};
  std::size_t max_len{0};  // required; must be <= recording length
  bool overlap_allowed{true};
  std::uint64_t seed{0};
};

// Random segments with lengths uniform in [min_len, max_len] and random
// offsets; overlaps are allowed. Deterministic under spec.seed.
std::vector<Recording> segment(const Recording& rec, const SegmentSpec& spec);

// Full subject synthesis. The per-subject stream is derived as
// master seed + subject index, so subjects can be generated in any
// order or concurrently. (a, b) are drawn from [0.2, 1.0] x [0.1, 0.6]
// with random signs.
SemiSimDataset make_semi_sim_subject(std::size_t subject_index, std::uint64_t master_seed,
                                     std::size_t n_ch = 19, std::size_t t = 6000,
                                     double fs = 200.0);

}  // namespace deog

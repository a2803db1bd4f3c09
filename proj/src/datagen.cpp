#include "deog/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <stdexcept>

namespace deog {

namespace {

struct Biquad {
  double b0, b1, b2, a1, a2;
};

Biquad butter2_lowpass(double fc, double fs) {
  const double k = std::tan(std::numbers::pi * fc / fs);
  const double q = std::numbers::sqrt2 / 2.0;
  const double norm = 1.0 / (1.0 + k / q + k * k);
  Biquad f;
  f.b0 = k * k * norm;
  f.b1 = 2.0 * f.b0;
  f.b2 = f.b0;
  f.a1 = 2.0 * (k * k - 1.0) * norm;
  f.a2 = (1.0 - k / q + k * k) * norm;
  return f;
}

Biquad butter2_highpass(double fc, double fs) {
  const double k = std::tan(std::numbers::pi * fc / fs);
  const double q = std::numbers::sqrt2 / 2.0;
  const double norm = 1.0 / (1.0 + k / q + k * k);
  Biquad f;
  f.b0 = norm;
  f.b1 = -2.0 * norm;
  f.b2 = norm;
  f.a1 = 2.0 * (k * k - 1.0) * norm;
  f.a2 = (1.0 - k / q + k * k) * norm;
  return f;
}

// Direct form II transposed, with the internal state initialized to the
// steady state for the first sample so constant inputs produce constant
// outputs from sample zero.
void biquad_inplace(const Biquad& f, std::vector<double>& x) {
  if (x.empty()) return;
  const double dc_gain = (f.b0 + f.b1 + f.b2) / (1.0 + f.a1 + f.a2);
  const double z2_unit = f.b2 - f.a2 * dc_gain;
  const double z1_unit = f.b1 - f.a1 * dc_gain + z2_unit;
  double z1 = z1_unit * x.front();
  double z2 = z2_unit * x.front();
  for (double& v : x) {
    const double y = f.b0 * v + z1;
    z1 = f.b1 * v - f.a1 * y + z2;
    z2 = f.b2 * v - f.a2 * y;
    v = y;
  }
}

}  // namespace

std::vector<double> bandpass(const std::vector<double>& x, double lo_hz, double hi_hz,
                             double fs) {
  if (!(lo_hz > 0.0) || !(hi_hz > lo_hz) || !(hi_hz < fs / 2.0))
    throw std::runtime_error("bandpass: bad band edges");
  if (x.size() < 2) throw std::runtime_error("bandpass: insufficient samples");

  const Biquad hp = butter2_highpass(lo_hz, fs);
  const Biquad lp = butter2_lowpass(hi_hz, fs);

  constexpr std::size_t kOrder = 4;
  const std::size_t pad = std::min<std::size_t>(3 * kOrder, x.size() - 1);

  // Odd reflection around the end points.
  std::vector<double> work;
  work.reserve(x.size() + 2 * pad);
  for (std::size_t i = pad; i >= 1; --i) work.push_back(2.0 * x.front() - x[i]);
  work.insert(work.end(), x.begin(), x.end());
  for (std::size_t i = 1; i <= pad; ++i)
    work.push_back(2.0 * x.back() - x[x.size() - 1 - i]);

  biquad_inplace(hp, work);
  biquad_inplace(lp, work);
  std::reverse(work.begin(), work.end());
  biquad_inplace(hp, work);
  biquad_inplace(lp, work);
  std::reverse(work.begin(), work.end());

  return std::vector<double>(work.begin() + static_cast<long>(pad),
                             work.begin() + static_cast<long>(pad + x.size()));
}

const std::vector<std::string>& standard_montage_19() {
  static const std::vector<std::string> labels = {
      "FP1", "FP2", "F3", "F4", "C3", "C4", "P3", "P4", "O1", "O2",
      "F7",  "F8",  "T3", "T4", "T5", "T6", "Fz", "Cz", "Pz"};
  return labels;
}

namespace {

// Sum of sinusoids on the DFT bin grid of the full recording, with
// 1/f-shaped amplitudes and an optional alpha-band boost. Staying on the
// bin grid keeps the spectral content exactly inside the chosen band.
std::vector<double> band_limited_noise(std::size_t t, double fs, double lo_hz,
                                       double hi_hz, std::size_t n_components,
                                       double alpha_boost, SeededRng& rng) {
  const double df = fs / static_cast<double>(t);
  const std::uint64_t k_lo =
      std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::ceil(lo_hz / df)));
  const std::uint64_t k_hi = static_cast<std::uint64_t>(std::floor(hi_hz / df));
  if (k_hi < k_lo) throw std::runtime_error("band_limited_noise: band too narrow");

  std::vector<double> out(t, 0.0);
  for (std::size_t c = 0; c < n_components; ++c) {
    const std::uint64_t k = k_lo + rng.uniform_index(k_hi - k_lo + 1);
    const double f = static_cast<double>(k) * df;
    double amp = 1.0 / std::sqrt(f);
    if (f >= 8.0 && f <= 13.0) amp *= alpha_boost;
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double w = 2.0 * std::numbers::pi * f / fs;
    for (std::size_t j = 0; j < t; ++j)
      out[j] += amp * std::sin(w * static_cast<double>(j) + phase);
  }
  return out;
}

double rms_of(const std::vector<double>& x) {
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return std::sqrt(acc / static_cast<double>(x.size()));
}

void scale_to_rms(std::vector<double>& x, double target) {
  const double r = rms_of(x);
  if (r <= 0.0) return;
  const double s = target / r;
  for (double& v : x) v *= s;
}

}  // namespace

Recording synth_pure_eeg(std::size_t n_ch, std::size_t t, double fs, std::uint64_t seed) {
  if (t < 2) throw std::runtime_error("synth_pure_eeg: insufficient samples");
  SeededRng rng(seed);

  constexpr std::size_t kSources = 6;
  std::vector<std::vector<double>> sources(kSources);
  for (auto& src : sources) {
    src = band_limited_noise(t, fs, 0.5, 40.0, 120, 4.0, rng);
    scale_to_rms(src, 1.0);
  }

  // Random spatial mixing spreads the shared sources over the montage.
  std::vector<std::vector<double>> mixing(n_ch, std::vector<double>(kSources));
  for (auto& row : mixing)
    for (auto& w : row) w = rng.normal() / std::sqrt(static_cast<double>(kSources));

  Recording rec;
  rec.fs_hz = fs;
  rec.data = RealMatrix(n_ch, t);
  if (n_ch == standard_montage_19().size()) {
    rec.labels = standard_montage_19();
  } else {
    for (std::size_t i = 0; i < n_ch; ++i) rec.labels.push_back("Ch" + std::to_string(i + 1));
  }

  for (std::size_t i = 0; i < n_ch; ++i) {
    std::vector<double> ch(t, 0.0);
    for (std::size_t k = 0; k < kSources; ++k) {
      const double w = mixing[i][k];
      for (std::size_t j = 0; j < t; ++j) ch[j] += w * sources[k][j];
    }
    // Small independent activity keeps the channel covariance full rank.
    std::vector<double> local = band_limited_noise(t, fs, 0.5, 40.0, 40, 2.0, rng);
    scale_to_rms(local, 0.15);
    for (std::size_t j = 0; j < t; ++j) ch[j] += local[j];

    // The harmonic construction sits on 0.5-40 Hz bins exactly, so the
    // channel is already ideally band limited; a recursive filter pass
    // would only smear the edges.
    scale_to_rms(ch, rng.uniform(7.0, 14.0));  // microvolt scale
    std::copy(ch.begin(), ch.end(), rec.data.row_ptr(i));
  }
  return rec;
}

EogSignals synth_eog(std::size_t t, double fs, std::uint64_t seed) {
  if (t < 2) throw std::runtime_error("synth_eog: insufficient samples");
  SeededRng rng(seed);
  EogSignals out;
  out.veog.assign(t, 0.0);
  out.heog.assign(t, 0.0);

  // Blinks: raised-cosine bumps, 200-400 ms wide, up to 800 uV.
  const double duration_sec = static_cast<double>(t) / fs;
  const std::size_t min_width = static_cast<std::size_t>(std::lround(0.2 * fs));
  const std::size_t max_width = static_cast<std::size_t>(std::lround(0.4 * fs));
  const std::size_t n_blinks =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(
                                   duration_sec * rng.uniform(0.35, 0.5))));
  const std::size_t min_gap = static_cast<std::size_t>(std::lround(0.6 * fs));

  std::vector<std::size_t> onsets;
  for (std::size_t k = 0; k < n_blinks; ++k) {
    bool placed = false;
    for (int attempt = 0; attempt < 64 && !placed; ++attempt) {
      if (t <= max_width + 1) break;
      const std::size_t onset = rng.uniform_index(t - max_width);
      placed = true;
      for (std::size_t other : onsets) {
        const std::size_t gap = onset > other ? onset - other : other - onset;
        if (gap < min_gap) {
          placed = false;
          break;
        }
      }
      if (placed) onsets.push_back(onset);
    }
  }
  std::sort(onsets.begin(), onsets.end());

  for (std::size_t onset : onsets) {
    BlinkEvent ev;
    ev.onset = onset;
    ev.width = min_width + rng.uniform_index(max_width - min_width + 1);
    ev.amplitude = rng.uniform(300.0, 550.0);
    for (std::size_t j = 0; j < ev.width && onset + j < t; ++j) {
      const double phase = std::numbers::pi * static_cast<double>(j) /
                           static_cast<double>(ev.width);
      out.veog[onset + j] += ev.amplitude * std::sin(phase) * std::sin(phase);
    }
    out.blinks.push_back(ev);
  }

  // Slow ocular drift, kept inside the 0.5-5 Hz band.
  {
    std::vector<double> drift = band_limited_noise(t, fs, 0.5, 0.9, 3, 1.0, rng);
    scale_to_rms(drift, 4.0);
    for (std::size_t j = 0; j < t; ++j) out.veog[j] += drift[j];
  }

  // Saccades: piecewise-constant gaze levels with short smoothstep ramps.
  {
    const std::size_t ramp = std::max<std::size_t>(2, static_cast<std::size_t>(
                                                          std::lround(0.03 * fs)));
    double level = 0.0;
    std::size_t cursor = 0;
    while (cursor < t) {
      // Short holds keep the step fundamentals inside the passband.
      const std::size_t hold = static_cast<std::size_t>(
          std::lround(rng.uniform(0.8, 2.0) * fs));
      const std::size_t hold_end = std::min(t, cursor + hold);
      for (std::size_t j = cursor; j < hold_end; ++j) out.heog[j] = level;
      cursor = hold_end;
      if (cursor >= t) break;
      double next = rng.uniform(200.0, 420.0);
      if (rng.uniform() < 0.5) next = -next;
      const std::size_t ramp_end = std::min(t, cursor + ramp);
      for (std::size_t j = cursor; j < ramp_end; ++j) {
        const double u = static_cast<double>(j - cursor + 1) /
                         static_cast<double>(ramp_end - cursor);
        const double smooth = u * u * (3.0 - 2.0 * u);
        out.heog[j] = level + (next - level) * smooth;
      }
      level = next;
      cursor = ramp_end;
    }
    std::vector<double> drift = band_limited_noise(t, fs, 0.5, 0.9, 3, 1.0, rng);
    scale_to_rms(drift, 4.0);
    for (std::size_t j = 0; j < t; ++j) out.heog[j] += drift[j];
  }

  out.veog = bandpass(out.veog, 0.5, 5.0, fs);
  // The gaze plateaus carry strong near-DC power that survives one
  // high-pass; a second pass pushes the sub-band residue below a few
  // percent.
  out.heog = bandpass(bandpass(out.heog, 0.5, 5.0, fs), 0.5, 5.0, fs);
  // Match the horizontal channel's energy to the vertical one so the
  // mixing coefficients alone decide each artifact's share.
  scale_to_rms(out.heog, rms_of(out.veog));
  return out;
}

Recording contaminate(const Recording& pure, const std::vector<double>& veog,
                      const std::vector<double>& heog, double a, double b) {
  const std::size_t t = pure.n_samples();
  if (veog.size() != t || heog.size() != t)
    throw std::runtime_error("contaminate: length mismatch");
  Recording out = pure;
  for (std::size_t i = 0; i < out.n_channels(); ++i) {
    double* row = out.data.row_ptr(i);
    for (std::size_t j = 0; j < t; ++j) row[j] += a * veog[j] + b * heog[j];
  }
  return out;
}

std::pair<double, double> fit_mixing_coeffs(const std::vector<double>& contaminated_ch,
                                            const std::vector<double>& pure_ch,
                                            const std::vector<double>& veog,
                                            const std::vector<double>& heog) {
  const std::size_t t = contaminated_ch.size();
  if (pure_ch.size() != t || veog.size() != t || heog.size() != t)
    throw std::runtime_error("fit_mixing_coeffs: length mismatch");
  if (t < 2) throw std::runtime_error("fit_mixing_coeffs: insufficient samples");

  double svv = 0.0, svh = 0.0, shh = 0.0, dv = 0.0, dh = 0.0;
  for (std::size_t j = 0; j < t; ++j) {
    const double d = contaminated_ch[j] - pure_ch[j];
    svv += veog[j] * veog[j];
    svh += veog[j] * heog[j];
    shh += heog[j] * heog[j];
    dv += d * veog[j];
    dh += d * heog[j];
  }
  const double det = svv * shh - svh * svh;
  if (!(det > 1e-12 * std::max(1.0, svv * shh)))
    throw std::runtime_error("fit_mixing_coeffs: rank-deficient regressors");
  return {(dv * shh - dh * svh) / det, (dh * svv - dv * svh) / det};
}

std::vector<Recording> segment(const Recording& rec, const SegmentSpec& spec) {
  const std::size_t t = rec.n_samples();
  if (spec.min_len < 2) throw std::runtime_error("segment: min_len too small");
  if (spec.max_len < spec.min_len) throw std::runtime_error("segment: bad lengths");
  if (spec.max_len > t) throw std::runtime_error("segment: max_len exceeds recording");

  SeededRng rng(spec.seed);
  std::vector<Recording> out;
  out.reserve(spec.count);
  std::vector<std::pair<std::size_t, std::size_t>> taken;  // [offset, end)

  for (std::size_t k = 0; k < spec.count; ++k) {
    const std::size_t len = spec.min_len + rng.uniform_index(spec.max_len - spec.min_len + 1);
    std::size_t offset = 0;
    if (spec.overlap_allowed) {
      offset = rng.uniform_index(t - len + 1);
    } else {
      bool placed = false;
      for (int attempt = 0; attempt < 256 && !placed; ++attempt) {
        offset = rng.uniform_index(t - len + 1);
        placed = true;
        for (const auto& iv : taken) {
          if (offset < iv.second && iv.first < offset + len) {
            placed = false;
            break;
          }
        }
      }
      if (!placed) throw std::runtime_error("segment: cannot place segments without overlap");
      taken.emplace_back(offset, offset + len);
    }

    Recording seg;
    seg.subject = rec.subject;
    seg.fs_hz = rec.fs_hz;
    seg.labels = rec.labels;
    seg.data = RealMatrix(rec.n_channels(), len);
    for (std::size_t i = 0; i < rec.n_channels(); ++i)
      std::copy(rec.data.row_ptr(i) + offset, rec.data.row_ptr(i) + offset + len,
                seg.data.row_ptr(i));
    out.push_back(std::move(seg));
  }
  return out;
}

SemiSimDataset make_semi_sim_subject(std::size_t subject_index, std::uint64_t master_seed,
                                     std::size_t n_ch, std::size_t t, double fs) {
  // Per-subject stream: master seed + subject index, so any subject can
  // be generated independently.
  const std::uint64_t subject_seed = master_seed + subject_index;

  SemiSimDataset ds;
  ds.fs_hz = fs;
  char idbuf[16];
  std::snprintf(idbuf, sizeof(idbuf), "subj%02zu", subject_index + 1);
  ds.subject_id = idbuf;

  ds.pure = synth_pure_eeg(n_ch, t, fs, SeededRng::derive_seed(subject_seed, 1));
  ds.pure.subject = ds.subject_id;

  EogSignals eog = synth_eog(t, fs, SeededRng::derive_seed(subject_seed, 2));
  ds.veog = std::move(eog.veog);
  ds.heog = std::move(eog.heog);

  // Positive propagation coefficients: frontal EOG spread keeps its
  // polarity, and a consistent sign keeps the cross-subject regression
  // identifiable at desk scale. The coefficient ratio is bounded so
  // neither artifact hides behind the other, and the pair is then
  // rescaled to a calibrated contamination severity (mixture RMS a few
  // times the EEG floor): severe enough that the artifact dominates,
  // mild enough that near-total removal is attainable.
  SeededRng mix_rng(SeededRng::derive_seed(subject_seed, 3));
  ds.a = mix_rng.uniform(0.35, 0.65);
  const double ratio = mix_rng.uniform(0.85, 1.25);
  ds.b = ds.a / ratio;

  double mix_power = 0.0;
  for (std::size_t j = 0; j < t; ++j) {
    const double m = ds.a * ds.veog[j] + ds.b * ds.heog[j];
    mix_power += m * m;
  }
  const double mix_rms = std::sqrt(mix_power / static_cast<double>(t));
  double eeg_power = 0.0;
  for (double v : ds.pure.data.data) eeg_power += v * v;
  const double eeg_rms = std::sqrt(eeg_power / static_cast<double>(ds.pure.data.size()));
  const double severity = mix_rng.uniform(2.5, 4.5);
  const double rescale = severity * eeg_rms / mix_rms;
  ds.a *= rescale;
  ds.b *= rescale;

  ds.contaminated = contaminate(ds.pure, ds.veog, ds.heog, ds.a, ds.b);
  ds.contaminated.subject = ds.subject_id;
  return ds;
}

}  // namespace deog

#include "budcheck/loudness.hpp"

#include <algorithm>
#include <cmath>

#include "budcheck/errors.hpp"
#include "budcheck/metrics.hpp"

namespace budcheck::loudness {

namespace {

constexpr double kBandStepBark = 0.25;
constexpr double kBandLoHz = 80.0;
constexpr double kBandHiHz = 16000.0;

struct BandLayout {
  std::vector<double> centers_bark;
  std::vector<double> centers_hz;
  std::vector<double> internal;        // noise floor per band
  std::vector<int> bin_band;           // FFT bin -> band index, -1 outside
  std::vector<double> bin_weight;      // ear weighting per bin, linear power
  double power_scale = 0.0;            // |DFT|^2 -> sinusoid peak power
  std::vector<double> window;

  BandLayout() {
    const std::size_t frame_len = audio::FrameSpec{}.frame_len;
    window = audio::make_window(audio::Window::hann, frame_len);
    double window_energy = 0.0;
    for (double w : window) window_energy += w * w;
    // Calibrated so a sinusoid of amplitude A lands at band energy ~A^2;
    // full scale then sits ~120 dB above kReferenceEnergy.
    power_scale = 4.0 / (static_cast<double>(frame_len) * window_energy);

    const double z_lo = bark_from_hz(kBandLoHz);
    const double z_hi = bark_from_hz(kBandHiHz);
    const auto band_count = static_cast<std::size_t>((z_hi - z_lo) / kBandStepBark);
    centers_bark.resize(band_count);
    centers_hz.resize(band_count);
    internal.resize(band_count);
    for (std::size_t b = 0; b < band_count; ++b) {
      centers_bark[b] = z_lo + (static_cast<double>(b) + 0.5) * kBandStepBark;
      centers_hz[b] = hz_from_bark(centers_bark[b]);
      internal[b] = internal_noise(centers_hz[b]);
    }

    const std::size_t bins = frame_len / 2 + 1;
    bin_band.assign(bins, -1);
    bin_weight.assign(bins, 0.0);
    for (std::size_t k = 1; k < bins; ++k) {
      const double f = static_cast<double>(k) * kSupportedRateHz /
                       static_cast<double>(frame_len);
      if (f < kBandLoHz || f >= kBandHiHz) continue;
      const auto band = static_cast<std::size_t>((bark_from_hz(f) - z_lo) / kBandStepBark);
      if (band >= band_count) continue;
      bin_band[k] = static_cast<int>(band);
      bin_weight[k] = std::pow(10.0, ear_weighting_db(f) / 10.0);
    }
  }
};

const BandLayout& layout() {
  static const BandLayout instance;
  return instance;
}

double specific_loudness(double excitation) {
  return std::pow(excitation / kReferenceEnergy, 0.23);
}

}  // namespace

double bark_from_hz(double f_hz) { return 7.0 * std::asinh(f_hz / 650.0); }

double hz_from_bark(double z) { return 650.0 * std::sinh(z / 7.0); }

double ear_weighting_db(double f_hz) {
  const double k = f_hz / 1000.0;
  return -0.6 * 3.64 * std::pow(k, -0.8) +
         6.5 * std::exp(-0.6 * (k - 3.3) * (k - 3.3)) -
         1e-3 * std::pow(k, 3.6);
}

double internal_noise(double band_center_hz) {
  const double k = band_center_hz / 1000.0;
  return std::pow(10.0, 0.4 * 0.364 * std::pow(k, -0.8)) * kReferenceEnergy;
}

ExcitationPattern ear_model(const audio::Recording& rec,
                            double silence_threshold_dbfs) {
  if (rec.sample_rate_hz != kSupportedRateHz) {
    fail(errc::rate_mismatch, "ear model supports 44100 Hz only, got " +
                                  std::to_string(rec.sample_rate_hz));
  }
  if (!metrics::is_measurable(rec, silence_threshold_dbfs)) {
    fail(errc::unmeasurable, "recording below the measurability threshold");
  }
  const audio::FrameSpec frames;
  if (rec.samples.size() < frames.frame_len) {
    fail(errc::bad_argument, "recording shorter than one analysis frame");
  }

  const BandLayout& bands = layout();
  ExcitationPattern pattern;
  pattern.band_centers_bark = bands.centers_bark;
  pattern.band_centers_hz = bands.centers_hz;

  audio::RealFft fft(frames.frame_len);
  std::vector<double> windowed(frames.frame_len);
  std::vector<std::complex<double>> bins;
  for (std::size_t start = 0; start + frames.frame_len <= rec.samples.size();
       start += frames.hop) {
    for (std::size_t i = 0; i < frames.frame_len; ++i) {
      windowed[i] = rec.samples[start + i] * bands.window[i];
    }
    fft.forward(windowed, bins);

    std::vector<double> excitation(bands.centers_bark.size(), 0.0);
    for (std::size_t k = 0; k < bins.size(); ++k) {
      const int band = bands.bin_band[k];
      if (band < 0) continue;
      excitation[static_cast<std::size_t>(band)] +=
          bands.bin_weight[k] * bands.power_scale * std::norm(bins[k]);
    }
    for (std::size_t b = 0; b < excitation.size(); ++b) {
      excitation[b] += bands.internal[b];
    }
    pattern.excitation.push_back(std::move(excitation));
  }
  return pattern;
}

NoiseLoudnessResult rms_noise_loudness(const audio::Recording& test,
                                       const audio::Recording& ref,
                                       double silence_threshold_dbfs) {
  if (test.sample_rate_hz != ref.sample_rate_hz) {
    fail(errc::rate_mismatch, "test and reference sample rates differ");
  }
  const std::size_t nt = test.samples.size();
  const std::size_t nr = ref.samples.size();
  const std::size_t longer = std::max(nt, nr);
  if (longer == 0) fail(errc::empty_audio, "empty recordings");
  if (static_cast<double>(longer - std::min(nt, nr)) > 0.05 * static_cast<double>(longer)) {
    fail(errc::length_mismatch,
         "test and reference lengths differ by more than 5%; wrong pairing?");
  }
  if (!metrics::is_measurable(ref, silence_threshold_dbfs)) {
    fail(errc::unmeasurable, "reference below the measurability threshold");
  }

  const std::size_t common = std::min(nt, nr);
  audio::Recording test_cut{{test.samples.begin(), test.samples.begin() + static_cast<std::ptrdiff_t>(common)},
                            test.sample_rate_hz,
                            test.label};
  audio::Recording ref_cut{{ref.samples.begin(), ref.samples.begin() + static_cast<std::ptrdiff_t>(common)},
                           ref.sample_rate_hz,
                           ref.label};

  const ExcitationPattern et = ear_model(test_cut, silence_threshold_dbfs);
  const ExcitationPattern er = ear_model(ref_cut, silence_threshold_dbfs);
  const std::size_t n_frames = std::min(et.excitation.size(), er.excitation.size());
  const std::size_t n_bands = et.band_centers_bark.size();

  NoiseLoudnessResult result;
  result.per_frame.resize(n_frames);
  double acc = 0.0;
  for (std::size_t f = 0; f < n_frames; ++f) {
    double frame_loudness = 0.0;
    for (std::size_t b = 0; b < n_bands; ++b) {
      const double d =
          specific_loudness(et.excitation[f][b]) - specific_loudness(er.excitation[f][b]);
      if (d > 0.0) frame_loudness += d;
    }
    frame_loudness /= static_cast<double>(n_bands);
    result.per_frame[f] = frame_loudness;
    acc += frame_loudness * frame_loudness;
  }
  result.rms_noise_loudness =
      n_frames > 0 ? std::sqrt(acc / static_cast<double>(n_frames)) : 0.0;
  return result;
}

}  // namespace budcheck::loudness

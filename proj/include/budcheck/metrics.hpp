#pragma once

#include <vector>

#include "budcheck/audio.hpp"
#include "budcheck/siggen.hpp"

namespace budcheck::metrics {

/// Total harmonic distortion of a steady tone. thd_dbc is
/// 10*log10(sum of harmonic powers / fundamental power), -inf when no
/// harmonic energy was found.
struct ThdResult {
  double thd_dbc = 0.0;
  double fundamental_hz = 0.0;
  double fundamental_power = 0.0;
  std::vector<double> harmonic_powers;  // 2f .. (1+n)f
};

/// Magnitude response in dB sampled on a fixed log-frequency grid.
/// Uncalibrated: 0 dB means "as loud as the clean stimulus".
struct FrequencyResponse {
  std::vector<double> grid_hz;
  std::vector<double> magnitude_db;
};

struct DegradationMeasures {
  double correlation = 1.0;     // in [-1, 1]
  double difference_mss = 0.0;  // dB^2, >= 0
};

/// True iff the recording's RMS level is at or above threshold_dbfs.
bool is_measurable(const audio::Recording& rec,
                   double threshold_dbfs = audio::kSilenceThresholdDbfs);

/// Measures THD from the Hann-windowed spectrum of the whole recording.
/// The fundamental peak is searched within +-5% of fundamental_hz (clock
/// skew tolerance); each power is the sum over a +-3-bin neighborhood of
/// the located peak. Harmonics are 2f..(1+n_harmonics)f.
ThdResult thd(const audio::Recording& rec, double fundamental_hz = 1000.0,
              int n_harmonics = 5,
              double silence_threshold_dbfs = audio::kSilenceThresholdDbfs);

/// Log-spaced frequency grid, default 256 points over 40 Hz - 16 kHz.
std::vector<double> make_log_grid(double lo_hz = 40.0, double hi_hz = 16000.0,
                                  std::size_t points = 256);

/// Estimates the magnitude response of a channel from its recording of a
/// linear sweep. Per STFT frame, the power in a +-2-bin band around the
/// sweep's instantaneous frequency is read off and calibrated against the
/// clean synthetic sweep's median band power, so the identity channel
/// reads ~0 dB. The per-frame samples are interpolated onto the grid,
/// linear in log frequency, clamping beyond the covered range.
///
/// Construction measures the clean sweep once; reuse one estimator when
/// analyzing many recordings of the same stimulus.
class ResponseEstimator {
 public:
  ResponseEstimator(const siggen::SweepSpec& spec, std::vector<double> grid,
                    audio::FrameSpec frames = {});

  /// rec must be time-aligned to the sweep start (see audio::align), at the
  /// stimulus sample rate, and above the silence threshold. Shorter
  /// recordings are zero-padded to the stimulus length; at least one full
  /// frame of audio is required.
  FrequencyResponse estimate(
      const audio::Recording& rec,
      double silence_threshold_dbfs = audio::kSilenceThresholdDbfs) const;

  const std::vector<double>& grid() const { return grid_; }
  const siggen::SweepSpec& spec() const { return spec_; }

 private:
  std::vector<double> band_powers(std::span<const double> samples,
                                  audio::RealFft& fft) const;

  siggen::SweepSpec spec_;
  std::vector<double> grid_;
  audio::FrameSpec frames_;
  std::size_t stimulus_len_ = 0;
  std::vector<double> window_;
  std::vector<double> frame_freq_hz_;
  double calibration_power_ = 1.0;
};

/// One-shot convenience wrapper around ResponseEstimator.
FrequencyResponse frequency_response(const audio::Recording& rec,
                                     const siggen::SweepSpec& spec,
                                     std::vector<double> grid);

/// Pearson correlation of the two magnitude vectors (shape change).
double response_correlation(const FrequencyResponse& test,
                            const FrequencyResponse& ref);

/// Mean of squared dB differences over the grid (magnitude change).
double response_difference_mss(const FrequencyResponse& test,
                               const FrequencyResponse& ref);

DegradationMeasures degradation_measures(const FrequencyResponse& test,
                                         const FrequencyResponse& ref);

}  // namespace budcheck::metrics

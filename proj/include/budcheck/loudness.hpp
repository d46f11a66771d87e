#pragma once

#include <vector>

#include "budcheck/audio.hpp"

namespace budcheck::loudness {

/// Reference energy: a full-scale sine maps to roughly 120 dB above E0.
/// Arbitrary but fixed, since recordings are uncalibrated.
constexpr double kReferenceEnergy = 1e-12;

constexpr int kSupportedRateHz = 44100;

/// Bark scale used for band grouping: z(f) = 7 * asinh(f / 650).
double bark_from_hz(double f_hz);
double hz_from_bark(double z);

/// Outer/middle-ear transfer weight in dB.
double ear_weighting_db(double f_hz);

/// Band-dependent internal noise added to every excitation.
double internal_noise(double band_center_hz);

/// Per-frame excitation energies in quarter-Bark bands spanning
/// 80 Hz - 16 kHz.
struct ExcitationPattern {
  std::vector<double> band_centers_bark;
  std::vector<double> band_centers_hz;
  std::vector<std::vector<double>> excitation;  // [frame][band]
};

struct NoiseLoudnessResult {
  double rms_noise_loudness = 0.0;
  std::vector<double> per_frame;
};

/// Simplified basilar-membrane representation: 2048-sample Hann frames at
/// 50% overlap; the ear-weighted power spectrum is grouped into
/// quarter-Bark bands and an internal-noise floor is added per band.
/// Requires a 44.1 kHz recording above the silence threshold.
ExcitationPattern ear_model(
    const audio::Recording& rec,
    double silence_threshold_dbfs = audio::kSilenceThresholdDbfs);

/// Loudness of what the test signal contains beyond the reference, RMS
/// averaged over frames. Per band the specific loudness is the Zwicker
/// compression (E/E0)^0.23; only positive test-minus-reference differences
/// count, so pure attenuation scores zero. Inputs must be time-aligned and
/// within 5% of each other's length.
NoiseLoudnessResult rms_noise_loudness(
    const audio::Recording& test, const audio::Recording& ref,
    double silence_threshold_dbfs = audio::kSilenceThresholdDbfs);

}  // namespace budcheck::loudness

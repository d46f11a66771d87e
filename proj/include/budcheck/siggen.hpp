#pragma once

#include "budcheck/audio.hpp"

namespace budcheck::siggen {

/// Linear sweep stimulus. Defaults: 20 Hz to 20 kHz over 15 s at -14 dBFS,
/// 44.1 kHz.
struct SweepSpec {
  double f0_hz = 20.0;
  double f1_hz = 20000.0;
  double duration_s = 15.0;
  double level_dbfs = -14.0;
  int sample_rate_hz = 44100;
};

/// Steady test tone. Defaults: 1 kHz over 15 s at -14 dBFS, 44.1 kHz.
struct ToneSpec {
  double freq_hz = 1000.0;
  double duration_s = 15.0;
  double level_dbfs = -14.0;
  int sample_rate_hz = 44100;
};

/// Throw errc::bad_argument naming the violated invariant.
void validate(const SweepSpec& spec);
void validate(const ToneSpec& spec);

/// Sine with zero initial phase and peak amplitude 10^(level_dbfs/20).
/// ramp_s > 0 applies a raised-cosine fade at both ends (playback comfort;
/// leave at 0 for analysis).
audio::Recording gen_tone(const ToneSpec& spec, double ramp_s = 0.0);

/// x(t) = A sin(2*pi*(f0*t + (f1-f0)*t^2/(2T))): instantaneous frequency
/// rises linearly from f0 to f1 over the duration.
audio::Recording gen_linear_sweep(const SweepSpec& spec, double ramp_s = 0.0);

/// f0 + (f1 - f0) * t / T for t in [0, duration].
double instantaneous_frequency(const SweepSpec& spec, double t_s);

/// Raised-cosine fade-in/out over ramp_s seconds at each end, in place.
void apply_fade(audio::Recording& rec, double ramp_s);

}  // namespace budcheck::siggen

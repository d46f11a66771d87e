#include "budcheck/siggen.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "budcheck/errors.hpp"

namespace budcheck::siggen {

namespace {

using std::numbers::pi;

// Generated samples are snapped to 32-bit float precision so the in-memory
// signal is identical to its WAV round trip.
double quantize(double v) { return static_cast<double>(static_cast<float>(v)); }

std::size_t sample_count(double duration_s, int rate) {
  return static_cast<std::size_t>(std::llround(duration_s * rate));
}

}  // namespace

void validate(const SweepSpec& spec) {
  if (spec.sample_rate_hz <= 0) fail(errc::bad_argument, "sample_rate_hz must be > 0");
  if (!(spec.f0_hz > 0.0)) fail(errc::bad_argument, "f0_hz must be > 0");
  if (!(spec.f0_hz < spec.f1_hz)) fail(errc::bad_argument, "f0_hz must be < f1_hz");
  if (!(spec.f1_hz < spec.sample_rate_hz / 2.0)) {
    fail(errc::bad_argument, "f1_hz must be below the Nyquist frequency");
  }
  if (!(spec.duration_s > 0.0)) fail(errc::bad_argument, "duration_s must be > 0");
  if (!(spec.level_dbfs <= 0.0)) fail(errc::bad_argument, "level_dbfs must be <= 0");
}

void validate(const ToneSpec& spec) {
  if (spec.sample_rate_hz <= 0) fail(errc::bad_argument, "sample_rate_hz must be > 0");
  if (!(spec.freq_hz > 0.0)) fail(errc::bad_argument, "freq_hz must be > 0");
  if (!(spec.freq_hz < spec.sample_rate_hz / 2.0)) {
    fail(errc::bad_argument, "freq_hz must be below the Nyquist frequency");
  }
  if (!(spec.duration_s > 0.0)) fail(errc::bad_argument, "duration_s must be > 0");
  if (!(spec.level_dbfs <= 0.0)) fail(errc::bad_argument, "level_dbfs must be <= 0");
}

audio::Recording gen_tone(const ToneSpec& spec, double ramp_s) {
  validate(spec);
  const double amp = std::pow(10.0, spec.level_dbfs / 20.0);
  const std::size_t n = sample_count(spec.duration_s, spec.sample_rate_hz);

  audio::Recording rec;
  rec.sample_rate_hz = spec.sample_rate_hz;
  rec.label = "tone " + std::to_string(spec.freq_hz) + " Hz";
  rec.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / spec.sample_rate_hz;
    rec.samples[i] = quantize(amp * std::sin(2.0 * pi * spec.freq_hz * t));
  }
  if (ramp_s > 0.0) apply_fade(rec, ramp_s);
  return rec;
}

audio::Recording gen_linear_sweep(const SweepSpec& spec, double ramp_s) {
  validate(spec);
  const double amp = std::pow(10.0, spec.level_dbfs / 20.0);
  const double rate_hz_per_s = (spec.f1_hz - spec.f0_hz) / spec.duration_s;
  const std::size_t n = sample_count(spec.duration_s, spec.sample_rate_hz);

  audio::Recording rec;
  rec.sample_rate_hz = spec.sample_rate_hz;
  rec.label = "sweep " + std::to_string(spec.f0_hz) + "-" + std::to_string(spec.f1_hz) + " Hz";
  rec.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / spec.sample_rate_hz;
    const double phase = 2.0 * pi * (spec.f0_hz * t + 0.5 * rate_hz_per_s * t * t);
    rec.samples[i] = quantize(amp * std::sin(phase));
  }
  if (ramp_s > 0.0) apply_fade(rec, ramp_s);
  return rec;
}

double instantaneous_frequency(const SweepSpec& spec, double t_s) {
  validate(spec);
  if (t_s < 0.0 || t_s > spec.duration_s) {
    fail(errc::bad_argument, "time outside the sweep duration");
  }
  return spec.f0_hz + (spec.f1_hz - spec.f0_hz) * t_s / spec.duration_s;
}

void apply_fade(audio::Recording& rec, double ramp_s) {
  if (ramp_s <= 0.0) return;
  const std::size_t n = rec.samples.size();
  std::size_t ramp = static_cast<std::size_t>(std::llround(ramp_s * rec.sample_rate_hz));
  ramp = std::min(ramp, n / 2);
  for (std::size_t i = 0; i < ramp; ++i) {
    const double g = 0.5 - 0.5 * std::cos(pi * static_cast<double>(i) / ramp);
    rec.samples[i] = quantize(rec.samples[i] * g);
    rec.samples[n - 1 - i] = quantize(rec.samples[n - 1 - i] * g);
  }
}

}  // namespace budcheck::siggen

#include "budcheck/audio.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "budcheck/errors.hpp"
#include "budcheck/siggen.hpp"
#include "test_support.hpp"

using namespace budcheck;
using testsupport::TempDir;

TEST_SUITE_BEGIN("audio");

TEST_CASE("read_wav decodes 32-bit float mono unchanged") {
  TempDir tmp("wav_float");
  std::vector<double> samples(1000);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    samples[i] = static_cast<double>(static_cast<float>(std::sin(0.01 * i) * 0.5));
  }
  testsupport::write_raw_wav(tmp.path() / "f.wav", testsupport::RawFormat::float32, 1,
                             44100, {samples});
  const audio::Recording rec = audio::read_wav(tmp.path() / "f.wav");
  REQUIRE(rec.samples.size() == samples.size());
  CHECK(rec.sample_rate_hz == 44100);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    CHECK(rec.samples[i] == samples[i]);
  }
}

TEST_CASE("read_wav maps 16-bit full scale to ~1.0") {
  TempDir tmp("wav_pcm16");
  std::vector<double> samples(64, 32767.0);
  testsupport::write_raw_wav(tmp.path() / "p.wav", testsupport::RawFormat::pcm16, 1,
                             48000, {samples});
  const audio::Recording rec = audio::read_wav(tmp.path() / "p.wav");
  for (double s : rec.samples) CHECK(s == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("read_wav averages stereo channels") {
  TempDir tmp("wav_stereo");
  std::vector<double> left(128);
  std::vector<double> right(128);
  for (std::size_t i = 0; i < left.size(); ++i) {
    left[i] = std::sin(0.05 * i) * 0.3;
    right[i] = -left[i];
  }
  testsupport::write_raw_wav(tmp.path() / "s.wav", testsupport::RawFormat::float32, 2,
                             44100, {left, right});
  const audio::Recording rec = audio::read_wav(tmp.path() / "s.wav");
  for (double s : rec.samples) CHECK(s == 0.0);
}

TEST_CASE("read_wav scales 24-bit and 32-bit integer PCM") {
  TempDir tmp("wav_int");
  testsupport::write_raw_wav(tmp.path() / "p24.wav", testsupport::RawFormat::pcm24, 1,
                             44100, {{4194304.0, -4194304.0}});  // +-2^22 = +-0.5
  const audio::Recording r24 = audio::read_wav(tmp.path() / "p24.wav");
  CHECK(r24.samples[0] == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(r24.samples[1] == doctest::Approx(-0.5).epsilon(1e-9));

  testsupport::write_raw_wav(tmp.path() / "p32.wav", testsupport::RawFormat::pcm32, 1,
                             44100, {{1073741824.0, -2147483648.0}});
  const audio::Recording r32 = audio::read_wav(tmp.path() / "p32.wav");
  CHECK(r32.samples[0] == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(r32.samples[1] == doctest::Approx(-1.0).epsilon(1e-9));
}

TEST_CASE("read_wav reports distinct error categories") {
  TempDir tmp("wav_err");

  CHECK(testsupport::error_code_of(
            [&] { audio::read_wav(tmp.path() / "missing.wav"); }) == errc::io);

  {
    std::ofstream bad(tmp.path() / "bad.wav", std::ios::binary);
    bad << "definitely not a wav file at all";
  }
  CHECK(testsupport::error_code_of(
            [&] { audio::read_wav(tmp.path() / "bad.wav"); }) == errc::bad_format);

  testsupport::write_raw_wav(tmp.path() / "empty.wav", testsupport::RawFormat::float32,
                             1, 44100, {{}});
  CHECK(testsupport::error_code_of(
            [&] { audio::read_wav(tmp.path() / "empty.wav"); }) == errc::empty_audio);
}

TEST_CASE("write_wav round trip is bit exact for float32 data") {
  TempDir tmp("wav_rt");
  audio::Recording rec;
  rec.sample_rate_hz = 44100;
  for (double v : testsupport::random_samples(5000, 7)) {
    rec.samples.push_back(static_cast<double>(static_cast<float>(v)));
  }
  audio::write_wav(tmp.path() / "rt.wav", rec);
  const audio::Recording back = audio::read_wav(tmp.path() / "rt.wav");
  REQUIRE(back.samples.size() == rec.samples.size());
  CHECK(back.sample_rate_hz == rec.sample_rate_hz);
  for (std::size_t i = 0; i < rec.samples.size(); ++i) {
    CHECK(back.samples[i] == rec.samples[i]);
  }
}

TEST_CASE("write_wav round trips generated signals exactly") {
  TempDir tmp("wav_gen_rt");
  siggen::ToneSpec spec;
  spec.duration_s = 0.25;
  const audio::Recording tone = siggen::gen_tone(spec);
  audio::write_wav(tmp.path() / "tone.wav", tone);
  const audio::Recording back = audio::read_wav(tmp.path() / "tone.wav");
  REQUIRE(back.samples.size() == tone.samples.size());
  for (std::size_t i = 0; i < tone.samples.size(); ++i) {
    CHECK(back.samples[i] == tone.samples[i]);
  }
}

TEST_CASE("write_wav refuses empty recordings") {
  TempDir tmp("wav_empty");
  audio::Recording rec;
  rec.sample_rate_hz = 44100;
  CHECK(testsupport::error_code_of(
            [&] { audio::write_wav(tmp.path() / "x.wav", rec); }) == errc::empty_audio);
}

TEST_CASE("15 s at 44100 Hz writes 661500 frames") {
  TempDir tmp("wav_len");
  siggen::ToneSpec spec;  // 15 s default
  const audio::Recording tone = siggen::gen_tone(spec);
  audio::write_wav(tmp.path() / "t.wav", tone);
  const audio::Recording back = audio::read_wav(tmp.path() / "t.wav");
  CHECK(back.samples.size() == 661500);
}

TEST_CASE("magnitude_spectrum of silence is zero") {
  std::vector<double> frame(512, 0.0);
  const audio::Spectrum spec = audio::magnitude_spectrum(frame, 44100);
  for (double m : spec.magnitudes) CHECK(m == 0.0);
}

TEST_CASE("magnitude_spectrum isolates an exact-bin sinusoid") {
  const std::size_t n = 1024;
  const int rate = 44100;
  const double freq = 32.0 * rate / static_cast<double>(n);
  std::vector<double> frame(n);
  for (std::size_t i = 0; i < n; ++i) {
    frame[i] = 0.7 * std::sin(2.0 * std::numbers::pi * freq * i / rate);
  }
  const audio::Spectrum spec =
      audio::magnitude_spectrum(frame, rate, audio::Window::rectangular);
  const double peak = spec.magnitudes[32];
  CHECK(peak == doctest::Approx(0.7 * n / 2.0).epsilon(1e-9));
  const double floor_limit = peak * std::pow(10.0, -250.0 / 20.0);
  for (std::size_t k = 0; k < spec.magnitudes.size(); ++k) {
    if (k + 2 <= 32 || k >= 34) CHECK(spec.magnitudes[k] <= floor_limit);
  }
}

TEST_CASE("magnitude_spectrum satisfies Parseval against the time-domain sum") {
  for (std::uint64_t seed : {1ull, 2ull, 3ull, 4ull}) {
    const std::size_t n = seed % 2 == 0 ? 1000 : 1025;  // even and odd sizes
    const std::vector<double> frame = testsupport::random_samples(n, seed);
    for (audio::Window window : {audio::Window::rectangular, audio::Window::hann}) {
      const audio::Spectrum spec = audio::magnitude_spectrum(frame, 44100, window);
      const std::vector<double> w = audio::make_window(window, n);
      double time_energy = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        time_energy += frame[i] * w[i] * frame[i] * w[i];
      }
      const double freq_energy = testsupport::spectral_energy(spec, n);
      CHECK(freq_energy == doctest::Approx(time_energy).epsilon(1e-9));
    }
  }
}

TEST_CASE("magnitude_spectrum is homogeneous in the input gain") {
  const std::vector<double> frame = testsupport::random_samples(777, 11);
  std::vector<double> scaled = frame;
  const double gain = 0.125;  // power of two: scaling is exact
  for (double& v : scaled) v *= gain;
  const audio::Spectrum a = audio::magnitude_spectrum(frame, 44100, audio::Window::hann);
  const audio::Spectrum b = audio::magnitude_spectrum(scaled, 44100, audio::Window::hann);
  for (std::size_t k = 0; k < a.magnitudes.size(); ++k) {
    if (a.magnitudes[k] == 0.0) {
      CHECK(b.magnitudes[k] == 0.0);
    } else {
      CHECK(b.magnitudes[k] / a.magnitudes[k] == doctest::Approx(gain).epsilon(1e-12));
    }
  }
}

TEST_CASE("magnitude_spectrum rejects tiny frames") {
  std::vector<double> frame(8, 0.1);
  CHECK(testsupport::error_code_of(
            [&] { audio::magnitude_spectrum(frame, 44100); }) == errc::bad_argument);
}

TEST_CASE("align finds the zero lag for identical recordings") {
  audio::Recording rec;
  rec.sample_rate_hz = 44100;
  rec.samples = testsupport::random_samples(5000, 21);
  CHECK(audio::align(rec, rec) == 0);
}

TEST_CASE("align recovers a pure delay") {
  siggen::SweepSpec spec;
  spec.duration_s = 1.0;
  const audio::Recording ref = siggen::gen_linear_sweep(spec);
  const audio::Recording delayed = testsupport::shift_recording(ref, 4410);
  CHECK(audio::align(delayed, ref) == 4410);
}

TEST_CASE("align matches the exhaustive search under noise") {
  audio::Recording ref;
  ref.sample_rate_hz = 44100;
  ref.samples = testsupport::random_samples(6000, 31, 0.4);
  audio::Recording rec = testsupport::shift_recording(ref, 1000);
  // White noise at 20 dB SNR.
  const double sig_rms = audio::rms(ref.samples);
  const double noise_rms = sig_rms * std::pow(10.0, -20.0 / 20.0);
  std::mt19937_64 rng(99);
  std::normal_distribution<double> dist(0.0, noise_rms);
  for (double& s : rec.samples) s += dist(rng);

  CHECK(audio::align(rec, ref) == 1000);
  CHECK(testsupport::exhaustive_align(rec, ref) == 1000);
}

TEST_CASE("align of a noiseless shift is exact for random offsets") {
  std::mt19937_64 rng(5);
  audio::Recording base;
  base.sample_rate_hz = 44100;
  base.samples = testsupport::random_samples(4000, 17);
  std::uniform_int_distribution<std::int64_t> offsets(-1999, 1999);
  for (int trial = 0; trial < 12; ++trial) {
    const std::int64_t k = offsets(rng);
    const audio::Recording shifted = testsupport::shift_recording(base, k);
    CHECK(audio::align(shifted, base) == k);
  }
}

TEST_CASE("align rejects silent and mismatched inputs") {
  audio::Recording loud;
  loud.sample_rate_hz = 44100;
  loud.samples = testsupport::random_samples(2000, 3);
  audio::Recording quiet = loud;
  for (double& s : quiet.samples) s *= 1e-5;  // ~-106 dBFS

  CHECK(testsupport::error_code_of([&] { audio::align(quiet, loud); }) ==
        errc::silent_input);
  CHECK(testsupport::error_code_of([&] { audio::align(loud, quiet); }) ==
        errc::silent_input);

  audio::Recording other_rate = loud;
  other_rate.sample_rate_hz = 48000;
  CHECK(testsupport::error_code_of([&] { audio::align(other_rate, loud); }) ==
        errc::rate_mismatch);
}

TEST_SUITE_END();

#include "budcheck/loudness.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "budcheck/degrade.hpp"
#include "budcheck/errors.hpp"
#include "budcheck/siggen.hpp"
#include "test_support.hpp"

using namespace budcheck;

namespace {

audio::Recording short_tone(double level_dbfs = -14.0, double duration_s = 1.0) {
  siggen::ToneSpec spec;
  spec.level_dbfs = level_dbfs;
  spec.duration_s = duration_s;
  return siggen::gen_tone(spec);
}

}  // namespace

TEST_SUITE_BEGIN("loudness");

TEST_CASE("bark scale closed-form values") {
  CHECK(loudness::bark_from_hz(650.0) == doctest::Approx(6.16962).epsilon(1e-4));
  CHECK(loudness::hz_from_bark(loudness::bark_from_hz(3200.0)) ==
        doctest::Approx(3200.0).epsilon(1e-9));
  CHECK(loudness::bark_from_hz(80.0) < loudness::bark_from_hz(81.0));
}

TEST_CASE("ear model band layout spans 80 Hz to 16 kHz in quarter barks") {
  const loudness::ExcitationPattern pattern = loudness::ear_model(short_tone());
  REQUIRE(!pattern.band_centers_bark.empty());
  CHECK(pattern.band_centers_bark.size() == pattern.band_centers_hz.size());
  for (std::size_t b = 1; b < pattern.band_centers_bark.size(); ++b) {
    CHECK(pattern.band_centers_bark[b] - pattern.band_centers_bark[b - 1] ==
          doctest::Approx(0.25).epsilon(1e-9));
  }
  CHECK(pattern.band_centers_hz.front() > 80.0);
  CHECK(pattern.band_centers_hz.back() < 16000.0);
  for (const auto& frame : pattern.excitation) {
    REQUIRE(frame.size() == pattern.band_centers_bark.size());
    for (double e : frame) CHECK(e > 0.0);  // internal noise keeps bands positive
  }
}

TEST_CASE("ear model rejects silence and unsupported rates") {
  audio::Recording silent;
  silent.sample_rate_hz = 44100;
  silent.samples.assign(44100, 0.0);
  CHECK(testsupport::error_code_of([&] { loudness::ear_model(silent); }) ==
        errc::unmeasurable);

  audio::Recording wrong_rate = short_tone();
  wrong_rate.sample_rate_hz = 48000;
  CHECK(testsupport::error_code_of([&] { loudness::ear_model(wrong_rate); }) ==
        errc::rate_mismatch);
}

TEST_CASE("excitation above the internal floor scales with squared gain") {
  const audio::Recording full = short_tone();
  audio::Recording half = full;
  for (double& s : half.samples) s *= 0.5;  // exact scaling

  const loudness::ExcitationPattern ef = loudness::ear_model(full);
  const loudness::ExcitationPattern eh = loudness::ear_model(half);
  REQUIRE(ef.excitation.size() == eh.excitation.size());
  for (std::size_t f = 0; f < ef.excitation.size(); ++f) {
    for (std::size_t b = 0; b < ef.excitation[f].size(); ++b) {
      const double floor = loudness::internal_noise(ef.band_centers_hz[b]);
      const double sig_full = ef.excitation[f][b] - floor;
      const double sig_half = eh.excitation[f][b] - floor;
      if (sig_full > 1e-6) {
        CHECK(sig_half / sig_full == doctest::Approx(0.25).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("noise loudness of a recording against itself is exactly zero") {
  const audio::Recording tone = short_tone();
  const loudness::NoiseLoudnessResult result = loudness::rms_noise_loudness(tone, tone);
  CHECK(result.rms_noise_loudness == 0.0);
  for (double v : result.per_frame) CHECK(v == 0.0);
}

TEST_CASE("pure attenuation scores zero noise loudness") {
  const audio::Recording ref = short_tone();
  const audio::Recording attenuated = degrade::apply_attenuation(ref, -6.0);
  const loudness::NoiseLoudnessResult result =
      loudness::rms_noise_loudness(attenuated, ref);
  CHECK(result.rms_noise_loudness == 0.0);
}

TEST_CASE("noise loudness grows with additive noise power") {
  const audio::Recording ref = short_tone(-14.0, 2.0);
  double previous = -1.0;
  for (double snr : {40.0, 32.5, 25.0, 17.5, 10.0}) {
    // Same seed throughout: one fixed noise realization, scaled.
    const audio::Recording test = degrade::apply_noise(ref, snr, 4242);
    const double value = loudness::rms_noise_loudness(test, ref).rms_noise_loudness;
    CHECK(value > previous);
    previous = value;
  }
  CHECK(previous > 0.0);
}

TEST_CASE("noise loudness is asymmetric by construction") {
  const audio::Recording ref = short_tone(-14.0, 1.0);
  const audio::Recording noisy = degrade::apply_noise(ref, 15.0, 7);
  const double forward = loudness::rms_noise_loudness(noisy, ref).rms_noise_loudness;
  const double backward = loudness::rms_noise_loudness(ref, noisy).rms_noise_loudness;
  CHECK(forward > 0.0);
  CHECK(forward != backward);
  CHECK(forward > backward);  // only test-exceeds-reference energy counts
}

TEST_CASE("per-frame noise loudness is nonnegative and consistent with the RMS") {
  const audio::Recording ref = short_tone(-14.0, 1.0);
  const audio::Recording test = degrade::apply_noise(ref, 20.0, 11);
  const loudness::NoiseLoudnessResult result = loudness::rms_noise_loudness(test, ref);
  double acc = 0.0;
  for (double v : result.per_frame) {
    CHECK(v >= 0.0);
    acc += v * v;
  }
  CHECK(result.rms_noise_loudness ==
        doctest::Approx(std::sqrt(acc / result.per_frame.size())).epsilon(1e-12));
}

TEST_CASE("noise loudness rejects mismatched inputs") {
  const audio::Recording ref = short_tone();
  audio::Recording wrong_rate = ref;
  wrong_rate.sample_rate_hz = 48000;
  CHECK(testsupport::error_code_of(
            [&] { loudness::rms_noise_loudness(wrong_rate, ref); }) == errc::rate_mismatch);

  audio::Recording truncated = ref;
  truncated.samples.resize(ref.samples.size() / 2);
  CHECK(testsupport::error_code_of(
            [&] { loudness::rms_noise_loudness(truncated, ref); }) == errc::length_mismatch);

  audio::Recording silent_ref = ref;
  std::fill(silent_ref.samples.begin(), silent_ref.samples.end(), 0.0);
  CHECK(testsupport::error_code_of(
            [&] { loudness::rms_noise_loudness(ref, silent_ref); }) == errc::unmeasurable);
}

TEST_SUITE_END();

#include "budcheck/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "budcheck/errors.hpp"

namespace budcheck::metrics {

namespace {

constexpr double kPowerFloor = 1e-30;  // keeps response magnitudes finite

double band_power_around(const std::vector<double>& magnitudes, std::size_t center,
                         std::size_t halfwidth) {
  const std::size_t lo = center >= halfwidth ? center - halfwidth : 0;
  const std::size_t hi = std::min(center + halfwidth, magnitudes.size() - 1);
  double acc = 0.0;
  for (std::size_t k = lo; k <= hi; ++k) acc += magnitudes[k] * magnitudes[k];
  return acc;
}

// Largest-magnitude bin within [lo_hz, hi_hz]; second result is the median
// magnitude of the searched range (peak validation).
std::pair<std::size_t, double> peak_bin_in(const audio::Spectrum& spec, double lo_hz,
                                           double hi_hz) {
  const double bin_hz = spec.bin_freqs_hz[1] - spec.bin_freqs_hz[0];
  auto lo = static_cast<std::size_t>(std::max(0.0, std::ceil(lo_hz / bin_hz)));
  auto hi = static_cast<std::size_t>(std::floor(hi_hz / bin_hz));
  hi = std::min(hi, spec.magnitudes.size() - 1);
  if (lo > hi) fail(errc::bad_argument, "empty search band");

  std::size_t best = lo;
  for (std::size_t k = lo + 1; k <= hi; ++k) {
    if (spec.magnitudes[k] > spec.magnitudes[best]) best = k;
  }
  std::vector<double> window(spec.magnitudes.begin() + static_cast<std::ptrdiff_t>(lo),
                             spec.magnitudes.begin() + static_cast<std::ptrdiff_t>(hi) + 1);
  auto mid = window.begin() + static_cast<std::ptrdiff_t>(window.size() / 2);
  std::nth_element(window.begin(), mid, window.end());
  return {best, *mid};
}

}  // namespace

bool is_measurable(const audio::Recording& rec, double threshold_dbfs) {
  if (rec.samples.empty()) return false;
  return audio::rms_dbfs(rec.samples) >= threshold_dbfs;
}

ThdResult thd(const audio::Recording& rec, double fundamental_hz, int n_harmonics,
              double silence_threshold_dbfs) {
  if (rec.samples.empty()) fail(errc::empty_audio, "empty recording");
  if (fundamental_hz <= 0.0) fail(errc::bad_argument, "fundamental_hz must be > 0");
  if (n_harmonics < 1) fail(errc::bad_argument, "n_harmonics must be >= 1");
  const double nyquist = rec.sample_rate_hz / 2.0;
  if ((n_harmonics + 1) * fundamental_hz * 1.05 >= nyquist) {
    fail(errc::bad_argument, "harmonics extend beyond the Nyquist frequency");
  }
  if (!is_measurable(rec, silence_threshold_dbfs)) {
    fail(errc::unmeasurable, "recording below the measurability threshold");
  }

  const audio::Spectrum spec =
      audio::magnitude_spectrum(rec.samples, rec.sample_rate_hz, audio::Window::hann);
  const double bin_hz = spec.bin_freqs_hz[1] - spec.bin_freqs_hz[0];

  const auto [k0, median_mag] =
      peak_bin_in(spec, 0.95 * fundamental_hz, 1.05 * fundamental_hz);
  // A genuine tone towers over the local spectrum; anything else means the
  // stimulus is wrong or missing.
  if (spec.magnitudes[k0] < 10.0 * median_mag) {
    fail(errc::peak_not_found,
         "no fundamental peak within 5% of " + std::to_string(fundamental_hz) + " Hz");
  }

  ThdResult result;
  result.fundamental_hz = static_cast<double>(k0) * bin_hz;
  result.fundamental_power = band_power_around(spec.magnitudes, k0, 3);

  double harmonic_total = 0.0;
  for (int h = 2; h <= n_harmonics + 1; ++h) {
    const double nominal = h * fundamental_hz;
    const auto [kh, ignored] = peak_bin_in(spec, 0.95 * nominal, 1.05 * nominal);
    (void)ignored;
    const double p = band_power_around(spec.magnitudes, kh, 3);
    result.harmonic_powers.push_back(p);
    harmonic_total += p;
  }

  result.thd_dbc = harmonic_total > 0.0
                       ? 10.0 * std::log10(harmonic_total / result.fundamental_power)
                       : -std::numeric_limits<double>::infinity();
  return result;
}

std::vector<double> make_log_grid(double lo_hz, double hi_hz, std::size_t points) {
  if (!(lo_hz > 0.0) || !(hi_hz > lo_hz)) {
    fail(errc::bad_argument, "grid bounds must satisfy 0 < lo < hi");
  }
  if (points < 2) fail(errc::bad_argument, "grid needs at least 2 points");
  std::vector<double> grid(points);
  const double ratio = hi_hz / lo_hz;
  for (std::size_t i = 0; i < points; ++i) {
    grid[i] = lo_hz * std::pow(ratio, static_cast<double>(i) / (points - 1));
  }
  return grid;
}

ResponseEstimator::ResponseEstimator(const siggen::SweepSpec& spec,
                                     std::vector<double> grid, audio::FrameSpec frames)
    : spec_(spec), grid_(std::move(grid)), frames_(frames) {
  siggen::validate(spec_);
  if (grid_.size() < 2) fail(errc::bad_argument, "response grid needs >= 2 points");
  for (std::size_t i = 1; i < grid_.size(); ++i) {
    if (!(grid_[i] > grid_[i - 1])) {
      fail(errc::bad_argument, "response grid must be strictly increasing");
    }
  }
  if (grid_.front() <= 0.0) fail(errc::bad_argument, "response grid must be positive");
  if (frames_.hop == 0 || frames_.hop > frames_.frame_len) {
    fail(errc::bad_argument, "frame hop must satisfy 0 < hop <= frame_len");
  }

  const audio::Recording ideal = siggen::gen_linear_sweep(spec_);
  stimulus_len_ = ideal.samples.size();
  if (stimulus_len_ < frames_.frame_len) {
    fail(errc::bad_argument, "sweep shorter than one analysis frame");
  }
  window_ = audio::make_window(frames_.window, frames_.frame_len);

  audio::RealFft fft(frames_.frame_len);
  for (std::size_t start = 0; start + frames_.frame_len <= stimulus_len_;
       start += frames_.hop) {
    const double t_center =
        (static_cast<double>(start) + frames_.frame_len / 2.0) / spec_.sample_rate_hz;
    frame_freq_hz_.push_back(siggen::instantaneous_frequency(spec_, t_center));
  }
  // 0 dB is "as loud as the clean stimulus": calibrate on the median band
  // power of the synthetic sweep through the same analysis.
  std::vector<double> ideal_powers = band_powers(ideal.samples, fft);
  std::nth_element(ideal_powers.begin(), ideal_powers.begin() + ideal_powers.size() / 2,
                   ideal_powers.end());
  calibration_power_ = ideal_powers[ideal_powers.size() / 2];
}

std::vector<double> ResponseEstimator::band_powers(std::span<const double> samples,
                                                   audio::RealFft& fft) const {
  const std::size_t n = frames_.frame_len;
  const double bin_hz = static_cast<double>(spec_.sample_rate_hz) / static_cast<double>(n);
  std::vector<double> windowed(n);
  std::vector<std::complex<double>> bins;
  std::vector<double> powers;
  powers.reserve(frame_freq_hz_.size());

  std::size_t frame = 0;
  for (std::size_t start = 0; start + n <= samples.size() && frame < frame_freq_hz_.size();
       start += frames_.hop, ++frame) {
    for (std::size_t i = 0; i < n; ++i) windowed[i] = samples[start + i] * window_[i];
    fft.forward(windowed, bins);

    const auto center = static_cast<std::size_t>(
        std::llround(frame_freq_hz_[frame] / bin_hz));
    const std::size_t lo = center >= 2 ? center - 2 : 0;
    const std::size_t hi = std::min(center + 2, bins.size() - 1);
    double acc = 0.0;
    for (std::size_t k = lo; k <= hi; ++k) acc += std::norm(bins[k]);
    powers.push_back(acc);
  }
  return powers;
}

FrequencyResponse ResponseEstimator::estimate(const audio::Recording& rec,
                                              double silence_threshold_dbfs) const {
  if (rec.sample_rate_hz != spec_.sample_rate_hz) {
    fail(errc::rate_mismatch, "recording rate does not match the sweep stimulus");
  }
  if (rec.samples.size() < frames_.frame_len) {
    fail(errc::bad_argument, "recording shorter than one analysis frame");
  }
  if (!is_measurable(rec, silence_threshold_dbfs)) {
    fail(errc::unmeasurable, "recording below the measurability threshold");
  }

  std::vector<double> padded = rec.samples;
  padded.resize(stimulus_len_, 0.0);

  audio::RealFft fft(frames_.frame_len);
  const std::vector<double> measured = band_powers(padded, fft);

  std::vector<double> frame_db(measured.size());
  for (std::size_t i = 0; i < measured.size(); ++i) {
    frame_db[i] =
        10.0 * std::log10(std::max(measured[i], kPowerFloor) / calibration_power_);
  }

  // Interpolate onto the grid, linear in log frequency; frame frequencies
  // ascend because the sweep law is monotone.
  FrequencyResponse response;
  response.grid_hz = grid_;
  response.magnitude_db.resize(grid_.size());
  for (std::size_t g = 0; g < grid_.size(); ++g) {
    const double f = grid_[g];
    if (f <= frame_freq_hz_.front()) {
      response.magnitude_db[g] = frame_db.front();
    } else if (f >= frame_freq_hz_.back()) {
      response.magnitude_db[g] = frame_db.back();
    } else {
      const auto it =
          std::upper_bound(frame_freq_hz_.begin(), frame_freq_hz_.end(), f);
      const std::size_t j = static_cast<std::size_t>(it - frame_freq_hz_.begin());
      const double x0 = std::log(frame_freq_hz_[j - 1]);
      const double x1 = std::log(frame_freq_hz_[j]);
      const double w = (std::log(f) - x0) / (x1 - x0);
      response.magnitude_db[g] = (1.0 - w) * frame_db[j - 1] + w * frame_db[j];
    }
  }
  return response;
}

FrequencyResponse frequency_response(const audio::Recording& rec,
                                     const siggen::SweepSpec& spec,
                                     std::vector<double> grid) {
  return ResponseEstimator(spec, std::move(grid)).estimate(rec);
}

namespace {

void require_same_grid(const FrequencyResponse& a, const FrequencyResponse& b) {
  if (a.grid_hz.size() != b.grid_hz.size() ||
      !std::equal(a.grid_hz.begin(), a.grid_hz.end(), b.grid_hz.begin())) {
    fail(errc::grid_mismatch, "responses sampled on different grids");
  }
  if (a.grid_hz.empty()) fail(errc::bad_argument, "empty response");
}

}  // namespace

double response_correlation(const FrequencyResponse& test, const FrequencyResponse& ref) {
  require_same_grid(test, ref);
  const std::size_t n = test.magnitude_db.size();

  double mean_t = 0.0;
  double mean_r = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mean_t += test.magnitude_db[i];
    mean_r += ref.magnitude_db[i];
  }
  mean_t /= static_cast<double>(n);
  mean_r /= static_cast<double>(n);

  double stt = 0.0;
  double srr = 0.0;
  double str = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dt = test.magnitude_db[i] - mean_t;
    const double dr = ref.magnitude_db[i] - mean_r;
    stt += dt * dt;
    srr += dr * dr;
    str += dt * dr;
  }
  if (stt < 1e-20 || srr < 1e-20) {
    fail(errc::zero_variance, "correlation undefined for a constant response");
  }
  return std::clamp(str / std::sqrt(stt * srr), -1.0, 1.0);
}

double response_difference_mss(const FrequencyResponse& test,
                               const FrequencyResponse& ref) {
  require_same_grid(test, ref);
  double acc = 0.0;
  for (std::size_t i = 0; i < test.magnitude_db.size(); ++i) {
    const double d = ref.magnitude_db[i] - test.magnitude_db[i];
    acc += d * d;
  }
  return acc / static_cast<double>(test.magnitude_db.size());
}

DegradationMeasures degradation_measures(const FrequencyResponse& test,
                                         const FrequencyResponse& ref) {
  return {response_correlation(test, ref), response_difference_mss(test, ref)};
}

}  // namespace budcheck::metrics

#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace budcheck::audio {

/// Recordings below this RMS level count as silence. Shared by alignment
/// and the measurability gate.
constexpr double kSilenceThresholdDbfs = -60.0;

/// Mono audio with provenance. Samples are full-scale normalized: +-1.0 is
/// digital full scale regardless of the on-disk encoding.
struct Recording {
  std::vector<double> samples;
  int sample_rate_hz = 44100;
  std::string label;

  double duration_s() const {
    return static_cast<double>(samples.size()) / sample_rate_hz;
  }
};

enum class Window { rectangular, hann };

/// STFT framing parameters used by the response and loudness pipelines.
struct FrameSpec {
  std::size_t frame_len = 2048;
  std::size_t hop = 1024;
  Window window = Window::hann;
};

/// One-sided magnitude spectrum. Bin k of an N-point frame sits at
/// k * rate / N Hz; magnitudes are unnormalized |DFT| values.
struct Spectrum {
  std::vector<double> bin_freqs_hz;
  std::vector<double> magnitudes;
};

double rms(std::span<const double> samples);
double rms_dbfs(std::span<const double> samples);

std::vector<double> make_window(Window window, std::size_t len);

/// Real-to-complex FFT of a fixed size. Plan setup is comparatively
/// expensive, so reuse one instance when transforming many frames.
/// Instances are not safe for concurrent use; construction is.
class RealFft {
 public:
  explicit RealFft(std::size_t n);
  ~RealFft();
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  std::size_t size() const;

  /// in.size() must equal size(); out is resized to size()/2 + 1 bins.
  void forward(std::span<const double> in,
               std::vector<std::complex<double>>& out);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Decodes a RIFF/WAVE file to a mono Recording. Accepts 16/24/32-bit
/// integer PCM and 32-bit IEEE float, 1 or 2 channels; stereo is downmixed
/// by channel averaging. Throws Error with code errc::io (unreadable),
/// errc::bad_format (unsupported encoding), or errc::empty_audio.
Recording read_wav(const std::filesystem::path& path);

/// Writes a mono 32-bit float RIFF/WAVE file. Reading it back reproduces
/// the samples bit-exactly whenever they are representable in 32-bit float.
void write_wav(const std::filesystem::path& path, const Recording& rec);

/// One-sided magnitude spectrum of a windowed frame (length >= 16).
Spectrum magnitude_spectrum(std::span<const double> frame, int sample_rate_hz,
                            Window window = Window::rectangular);

/// Lag that maximizes the cross-correlation of rec against ref; positive
/// offsets mean rec is ref delayed. Ties break toward the smallest
/// absolute lag. Both inputs must share a sample rate and be above the
/// silence threshold.
std::int64_t align(const Recording& rec, const Recording& ref,
                   double silence_threshold_dbfs = kSilenceThresholdDbfs);

/// rec[offset .. offset+length), zero-padded where the window leaves the
/// recording. Used to place an aligned recording on a reference time base.
std::vector<double> extract_segment(const Recording& rec, std::int64_t offset,
                                    std::size_t length);

}  // namespace budcheck::audio

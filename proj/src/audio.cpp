#include "budcheck/audio.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <mutex>
#include <numbers>

#include "budcheck/errors.hpp"

namespace budcheck {

const char* to_string(errc code) noexcept {
  switch (code) {
    case errc::io: return "io";
    case errc::bad_format: return "bad_format";
    case errc::empty_audio: return "empty_audio";
    case errc::bad_argument: return "bad_argument";
    case errc::rate_mismatch: return "rate_mismatch";
    case errc::silent_input: return "silent_input";
    case errc::unmeasurable: return "unmeasurable";
    case errc::peak_not_found: return "peak_not_found";
    case errc::grid_mismatch: return "grid_mismatch";
    case errc::zero_variance: return "zero_variance";
    case errc::length_mismatch: return "length_mismatch";
    case errc::rank_deficient: return "rank_deficient";
    case errc::insufficient_data: return "insufficient_data";
    case errc::missing_value: return "missing_value";
    case errc::unknown_key: return "unknown_key";
  }
  return "unknown";
}

}  // namespace budcheck

namespace budcheck::audio {

namespace {

// The FFTW planner is not thread-safe; plan creation/destruction is
// serialized so the free functions here stay safe for concurrent callers.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

double rms(std::span<const double> samples) {
  if (samples.empty()) return 0.0;
  double acc = 0.0;
  for (double s : samples) acc += s * s;
  return std::sqrt(acc / static_cast<double>(samples.size()));
}

double rms_dbfs(std::span<const double> samples) {
  double r = rms(samples);
  if (r <= 0.0) return -std::numeric_limits<double>::infinity();
  return 20.0 * std::log10(r);
}

std::vector<double> make_window(Window window, std::size_t len) {
  std::vector<double> w(len, 1.0);
  if (window == Window::hann) {
    for (std::size_t n = 0; n < len; ++n) {
      w[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * n / len);
    }
  }
  return w;
}

// ---------------------------------------------------------------------------
// FFT

struct RealFft::Impl {
  std::size_t n = 0;
  double* in = nullptr;
  fftw_complex* out = nullptr;
  fftw_plan plan = nullptr;

  explicit Impl(std::size_t size) : n(size) {
    std::lock_guard lock(planner_mutex());
    in = fftw_alloc_real(n);
    out = fftw_alloc_complex(n / 2 + 1);
    plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), in, out, FFTW_ESTIMATE);
  }

  ~Impl() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan);
    fftw_free(in);
    fftw_free(out);
  }
};

RealFft::RealFft(std::size_t n) {
  if (n < 2) fail(errc::bad_argument, "FFT size must be at least 2");
  impl_ = std::make_unique<Impl>(n);
}

RealFft::~RealFft() = default;

std::size_t RealFft::size() const { return impl_->n; }

void RealFft::forward(std::span<const double> in,
                      std::vector<std::complex<double>>& out) {
  if (in.size() != impl_->n) {
    fail(errc::bad_argument, "FFT input length does not match plan size");
  }
  std::copy(in.begin(), in.end(), impl_->in);
  fftw_execute(impl_->plan);
  const std::size_t bins = impl_->n / 2 + 1;
  out.resize(bins);
  for (std::size_t k = 0; k < bins; ++k) {
    out[k] = {impl_->out[k][0], impl_->out[k][1]};
  }
}

// ---------------------------------------------------------------------------
// WAV I/O

namespace {

constexpr std::uint16_t kFormatPcm = 0x0001;
constexpr std::uint16_t kFormatFloat = 0x0003;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

struct WavFormat {
  std::uint16_t format = 0;
  std::uint16_t channels = 0;
  std::uint32_t sample_rate = 0;
  std::uint16_t block_align = 0;
  std::uint16_t bits = 0;
};

double decode_sample(const unsigned char* p, const WavFormat& fmt) {
  switch (fmt.bits) {
    case 16: {
      auto v = static_cast<std::int16_t>(read_u16(p));
      return v / 32768.0;
    }
    case 24: {
      std::int32_t v = p[0] | (p[1] << 8) | (p[2] << 16);
      if (v & 0x800000) v |= ~0xFFFFFF;  // sign extend
      return v / 8388608.0;
    }
    case 32: {
      std::uint32_t raw = read_u32(p);
      if (fmt.format == kFormatFloat) {
        float f;
        std::memcpy(&f, &raw, sizeof f);
        return static_cast<double>(f);
      }
      auto v = static_cast<std::int32_t>(raw);
      return v / 2147483648.0;
    }
    default:
      break;
  }
  fail(errc::bad_format, "unsupported bit depth");
}

void append_u32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
  out.push_back(static_cast<char>((v >> 16) & 0xFF));
  out.push_back(static_cast<char>((v >> 24) & 0xFF));
}

void append_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
}

}  // namespace

Recording read_wav(const std::filesystem::path& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) fail(errc::io, "cannot open " + path.string());

  unsigned char header[12];
  if (!file.read(reinterpret_cast<char*>(header), 12)) {
    fail(errc::bad_format, path.string() + ": truncated RIFF header");
  }
  if (std::memcmp(header, "RIFF", 4) != 0 || std::memcmp(header + 8, "WAVE", 4) != 0) {
    fail(errc::bad_format, path.string() + ": not a RIFF/WAVE file");
  }

  WavFormat fmt;
  bool have_fmt = false;
  std::vector<unsigned char> data;
  bool have_data = false;

  while (file) {
    unsigned char chunk[8];
    if (!file.read(reinterpret_cast<char*>(chunk), 8)) break;
    const std::uint32_t size = read_u32(chunk + 4);
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16) fail(errc::bad_format, path.string() + ": short fmt chunk");
      std::vector<unsigned char> buf(size);
      if (!file.read(reinterpret_cast<char*>(buf.data()), size)) {
        fail(errc::bad_format, path.string() + ": truncated fmt chunk");
      }
      fmt.format = read_u16(buf.data());
      fmt.channels = read_u16(buf.data() + 2);
      fmt.sample_rate = read_u32(buf.data() + 4);
      fmt.block_align = read_u16(buf.data() + 12);
      fmt.bits = read_u16(buf.data() + 14);
      if (fmt.format == kFormatExtensible) {
        // Actual format is the leading word of the SubFormat GUID.
        if (size < 40) fail(errc::bad_format, path.string() + ": short extensible fmt chunk");
        fmt.format = read_u16(buf.data() + 24);
      }
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data.resize(size);
      if (size > 0 && !file.read(reinterpret_cast<char*>(data.data()), size)) {
        fail(errc::bad_format, path.string() + ": truncated data chunk");
      }
      have_data = true;
    } else {
      file.seekg(size, std::ios::cur);
    }
    if (size % 2 == 1) file.seekg(1, std::ios::cur);  // chunks are word-aligned
  }

  if (!have_fmt || !have_data) {
    fail(errc::bad_format, path.string() + ": missing fmt or data chunk");
  }
  const bool supported = (fmt.format == kFormatPcm &&
                          (fmt.bits == 16 || fmt.bits == 24 || fmt.bits == 32)) ||
                         (fmt.format == kFormatFloat && fmt.bits == 32);
  if (!supported) {
    fail(errc::bad_format, path.string() + ": unsupported encoding (format " +
                               std::to_string(fmt.format) + ", " +
                               std::to_string(fmt.bits) + " bit)");
  }
  if (fmt.channels != 1 && fmt.channels != 2) {
    fail(errc::bad_format, path.string() + ": unsupported channel count " +
                               std::to_string(fmt.channels));
  }
  if (fmt.sample_rate == 0) fail(errc::bad_format, path.string() + ": zero sample rate");
  const std::size_t bytes_per_sample = fmt.bits / 8;
  const std::size_t frame_bytes = bytes_per_sample * fmt.channels;
  if (fmt.block_align != 0 && fmt.block_align != frame_bytes) {
    fail(errc::bad_format, path.string() + ": inconsistent block alignment");
  }
  const std::size_t frames = data.size() / frame_bytes;
  if (frames == 0) fail(errc::empty_audio, path.string() + ": no audio frames");

  Recording rec;
  rec.sample_rate_hz = static_cast<int>(fmt.sample_rate);
  rec.label = path.filename().string();
  rec.samples.resize(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    const unsigned char* p = data.data() + i * frame_bytes;
    double value = decode_sample(p, fmt);
    if (fmt.channels == 2) {
      value = 0.5 * (value + decode_sample(p + bytes_per_sample, fmt));
    }
    rec.samples[i] = value;
  }
  return rec;
}

void write_wav(const std::filesystem::path& path, const Recording& rec) {
  if (rec.samples.empty()) {
    fail(errc::empty_audio, "refusing to write a recording with no samples");
  }
  if (rec.sample_rate_hz <= 0) {
    fail(errc::bad_argument, "sample_rate_hz must be positive");
  }

  const std::uint32_t n = static_cast<std::uint32_t>(rec.samples.size());
  const std::uint32_t data_bytes = n * 4;
  std::string out;
  out.reserve(60 + data_bytes);
  out.append("RIFF");
  append_u32(out, 4 + (8 + 16) + (8 + 4) + (8 + data_bytes));
  out.append("WAVE");
  out.append("fmt ");
  append_u32(out, 16);
  append_u16(out, kFormatFloat);
  append_u16(out, 1);
  append_u32(out, static_cast<std::uint32_t>(rec.sample_rate_hz));
  append_u32(out, static_cast<std::uint32_t>(rec.sample_rate_hz) * 4);
  append_u16(out, 4);
  append_u16(out, 32);
  out.append("fact");
  append_u32(out, 4);
  append_u32(out, n);
  out.append("data");
  append_u32(out, data_bytes);
  for (double s : rec.samples) {
    float f = static_cast<float>(s);
    std::uint32_t raw;
    std::memcpy(&raw, &f, sizeof raw);
    append_u32(out, raw);
  }

  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) fail(errc::io, "cannot open " + path.string() + " for writing");
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
  file.flush();
  if (!file) fail(errc::io, "write failed for " + path.string());
}

// ---------------------------------------------------------------------------
// Spectra and alignment

Spectrum magnitude_spectrum(std::span<const double> frame, int sample_rate_hz,
                            Window window) {
  if (frame.size() < 16) {
    fail(errc::bad_argument, "frame too short: need at least 16 samples");
  }
  if (sample_rate_hz <= 0) fail(errc::bad_argument, "sample rate must be positive");

  const std::size_t n = frame.size();
  const std::vector<double> w = make_window(window, n);
  std::vector<double> buf(n);
  for (std::size_t i = 0; i < n; ++i) buf[i] = frame[i] * w[i];

  RealFft fft(n);
  std::vector<std::complex<double>> bins;
  fft.forward(buf, bins);

  // For odd n the r2c layout already stops at (n-1)/2, i.e. below Nyquist.
  Spectrum spec;
  spec.bin_freqs_hz.resize(bins.size());
  spec.magnitudes.resize(bins.size());
  for (std::size_t k = 0; k < bins.size(); ++k) {
    spec.bin_freqs_hz[k] = static_cast<double>(k) * sample_rate_hz / static_cast<double>(n);
    spec.magnitudes[k] = std::abs(bins[k]);
  }
  return spec;
}

std::int64_t align(const Recording& rec, const Recording& ref,
                   double silence_threshold_dbfs) {
  if (rec.samples.empty() || ref.samples.empty()) {
    fail(errc::empty_audio, "cannot align empty recordings");
  }
  if (rec.sample_rate_hz != ref.sample_rate_hz) {
    fail(errc::rate_mismatch, "alignment requires matching sample rates");
  }
  if (rms_dbfs(rec.samples) < silence_threshold_dbfs ||
      rms_dbfs(ref.samples) < silence_threshold_dbfs) {
    fail(errc::silent_input, "alignment undefined for silent input");
  }

  const std::size_t nr = rec.samples.size();
  const std::size_t ns = ref.samples.size();
  std::size_t m = 1;
  while (m < nr + ns - 1) m <<= 1;

  double* a = fftw_alloc_real(m);
  double* b = fftw_alloc_real(m);
  const std::size_t bins = m / 2 + 1;
  fftw_complex* fa = fftw_alloc_complex(bins);
  fftw_complex* fb = fftw_alloc_complex(bins);
  fftw_plan plan_a, plan_b, plan_inv;
  {
    std::lock_guard lock(planner_mutex());
    plan_a = fftw_plan_dft_r2c_1d(static_cast<int>(m), a, fa, FFTW_ESTIMATE);
    plan_b = fftw_plan_dft_r2c_1d(static_cast<int>(m), b, fb, FFTW_ESTIMATE);
    plan_inv = fftw_plan_dft_c2r_1d(static_cast<int>(m), fa, a, FFTW_ESTIMATE);
  }
  std::fill(a, a + m, 0.0);
  std::fill(b, b + m, 0.0);
  std::copy(rec.samples.begin(), rec.samples.end(), a);
  std::copy(ref.samples.begin(), ref.samples.end(), b);
  fftw_execute(plan_a);
  fftw_execute(plan_b);
  // Correlation spectrum: FFT(rec) * conj(FFT(ref)).
  for (std::size_t k = 0; k < bins; ++k) {
    const double re = fa[k][0] * fb[k][0] + fa[k][1] * fb[k][1];
    const double im = fa[k][1] * fb[k][0] - fa[k][0] * fb[k][1];
    fa[k][0] = re;
    fa[k][1] = im;
  }
  fftw_execute(plan_inv);

  const auto corr_at = [&](std::int64_t lag) {
    const std::int64_t idx = lag >= 0 ? lag : static_cast<std::int64_t>(m) + lag;
    return a[idx];
  };

  std::int64_t best_lag = -(static_cast<std::int64_t>(ns) - 1);
  double best_value = corr_at(best_lag);
  for (std::int64_t lag = best_lag + 1; lag <= static_cast<std::int64_t>(nr) - 1; ++lag) {
    const double v = corr_at(lag);
    if (v > best_value ||
        (v == best_value && std::llabs(lag) < std::llabs(best_lag))) {
      best_value = v;
      best_lag = lag;
    }
  }

  {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan_a);
    fftw_destroy_plan(plan_b);
    fftw_destroy_plan(plan_inv);
  }
  fftw_free(a);
  fftw_free(b);
  fftw_free(fa);
  fftw_free(fb);
  return best_lag;
}

std::vector<double> extract_segment(const Recording& rec, std::int64_t offset,
                                    std::size_t length) {
  std::vector<double> out(length, 0.0);
  const auto n = static_cast<std::int64_t>(rec.samples.size());
  for (std::size_t i = 0; i < length; ++i) {
    const std::int64_t src = offset + static_cast<std::int64_t>(i);
    if (src >= 0 && src < n) out[i] = rec.samples[static_cast<std::size_t>(src)];
  }
  return out;
}

}  // namespace budcheck::audio

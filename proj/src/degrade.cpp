#include "budcheck/degrade.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <set>
#include <string>

#include <json.hpp>

#include "budcheck/errors.hpp"

namespace budcheck::degrade {

namespace {

using nlohmann::json;

// Box-Muller over mt19937_64. std::normal_distribution is implementation
// defined, so corpora would not reproduce across standard libraries.
class GaussianSource {
 public:
  explicit GaussianSource(std::uint64_t seed) : rng_(seed) {}

  double operator()() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = uniform_open();
    const double u2 = uniform_open();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    have_spare_ = true;
    return radius * std::cos(angle);
  }

 private:
  double uniform_open() {  // (0, 1]
    return (static_cast<double>(rng_() >> 11) + 1.0) * 0x1.0p-53;
  }

  std::mt19937_64 rng_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

std::uint64_t splitmix_finalize(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

void validate_notch(const NotchSpec& notch, const std::string& where) {
  if (!(notch.center_hz > 0.0)) fail(errc::bad_argument, where + ": center_hz must be > 0");
  if (!(notch.q_factor > 0.0)) fail(errc::bad_argument, where + ": q_factor must be > 0");
  if (!(notch.depth_db <= 0.0)) fail(errc::bad_argument, where + ": depth_db must be <= 0");
}

}  // namespace

bool CycleDamage::is_identity() const {
  return broadband_gain_db == 0.0 && notches.empty() && clip_drive == 1.0 &&
         !noise_snr_db && !failure;
}

void DamageProfile::validate() const {
  if (cycles.empty()) fail(errc::bad_argument, "profile has no cycles");
  bool failed = false;
  for (std::size_t i = 0; i < cycles.size(); ++i) {
    const auto& c = cycles[i];
    const std::string where = "cycles[" + std::to_string(i) + "]";
    if (c.cycle != static_cast<int>(i)) {
      fail(errc::bad_argument, where + ": cycles must be contiguous from 0");
    }
    if (!(c.broadband_gain_db <= 0.0)) {
      fail(errc::bad_argument, where + ".broadband_gain_db: must be <= 0");
    }
    if (!(c.clip_drive >= 1.0)) fail(errc::bad_argument, where + ".clip_drive: must be >= 1");
    for (std::size_t k = 0; k < c.notches.size(); ++k) {
      validate_notch(c.notches[k], where + ".notches[" + std::to_string(k) + "]");
    }
    if (c.noise_snr_db && !std::isfinite(*c.noise_snr_db)) {
      fail(errc::bad_argument, where + ".noise_snr_db: must be finite");
    }
    if (i == 0 && !c.is_identity()) {
      fail(errc::bad_argument, "cycles[0] must be the undamaged identity");
    }
    if (failed && !c.failure) {
      fail(errc::bad_argument, where + ": failure cannot revert at a later cycle");
    }
    failed = failed || c.failure;
  }
}

void SimulationConfig::validate() const {
  profile.validate();
  if (plan.pairs.empty()) fail(errc::bad_argument, "session.pairs must not be empty");
  if (plan.sides.empty()) fail(errc::bad_argument, "session.sides must not be empty");
  if (plan.sources.empty()) fail(errc::bad_argument, "session.sources must not be empty");
  if (plan.runs < 1) fail(errc::bad_argument, "session.runs must be >= 1");
  if (plan.signals.empty()) fail(errc::bad_argument, "session.signals must not be empty");
  siggen::validate(signals.sweep);
  siggen::validate(signals.tone);
  const bool wants_music =
      std::find(plan.signals.begin(), plan.signals.end(), session::SignalKind::music) !=
      plan.signals.end();
  if (wants_music && !signals.music_path) {
    fail(errc::bad_argument, "signals.music path required when the plan includes music");
  }
}

SimulationConfig SimulationConfig::load(const std::filesystem::path& path) {
  std::ifstream file(path);
  if (!file) fail(errc::io, "cannot open " + path.string());
  json j;
  try {
    j = json::parse(file);
  } catch (const json::parse_error& e) {
    fail(errc::bad_format, path.string() + ": " + e.what());
  }

  SimulationConfig config;
  try {
    if (j.contains("session")) {
      const json& s = j.at("session");
      if (s.contains("pairs")) config.plan.pairs = s.at("pairs").get<std::vector<std::string>>();
      if (s.contains("sides")) {
        config.plan.sides.clear();
        for (const auto& v : s.at("sides")) {
          config.plan.sides.push_back(session::side_from_string(v.get<std::string>()));
        }
      }
      if (s.contains("sources")) {
        config.plan.sources.clear();
        for (const auto& v : s.at("sources")) {
          config.plan.sources.push_back(session::source_from_string(v.get<std::string>()));
        }
      }
      if (s.contains("runs")) config.plan.runs = s.at("runs").get<int>();
    }
    if (j.contains("signals")) {
      const json& s = j.at("signals");
      if (s.contains("kinds")) {
        config.plan.signals.clear();
        for (const auto& v : s.at("kinds")) {
          config.plan.signals.push_back(session::signal_from_string(v.get<std::string>()));
        }
      }
      if (s.contains("sweep")) {
        const json& sw = s.at("sweep");
        auto& spec = config.signals.sweep;
        if (sw.contains("f0_hz")) spec.f0_hz = sw.at("f0_hz").get<double>();
        if (sw.contains("f1_hz")) spec.f1_hz = sw.at("f1_hz").get<double>();
        if (sw.contains("duration_s")) spec.duration_s = sw.at("duration_s").get<double>();
        if (sw.contains("level_dbfs")) spec.level_dbfs = sw.at("level_dbfs").get<double>();
        if (sw.contains("sample_rate_hz")) spec.sample_rate_hz = sw.at("sample_rate_hz").get<int>();
      }
      if (s.contains("tone")) {
        const json& tn = s.at("tone");
        auto& spec = config.signals.tone;
        if (tn.contains("freq_hz")) spec.freq_hz = tn.at("freq_hz").get<double>();
        if (tn.contains("duration_s")) spec.duration_s = tn.at("duration_s").get<double>();
        if (tn.contains("level_dbfs")) spec.level_dbfs = tn.at("level_dbfs").get<double>();
        if (tn.contains("sample_rate_hz")) spec.sample_rate_hz = tn.at("sample_rate_hz").get<int>();
      }
      if (s.contains("music")) {
        // Relative music paths resolve against the profile's directory.
        std::filesystem::path music(s.at("music").get<std::string>());
        if (!music.is_absolute()) {
          music = std::filesystem::absolute(path).parent_path() / music;
        }
        config.signals.music_path = music;
      }
    }
    if (!j.contains("cycles") || !j.at("cycles").is_array()) {
      fail(errc::bad_format, path.string() + ": missing cycles array");
    }
    for (const json& jc : j.at("cycles")) {
      CycleDamage c;
      c.cycle = jc.contains("cycle") ? jc.at("cycle").get<int>()
                                     : static_cast<int>(config.profile.cycles.size());
      if (jc.contains("broadband_gain_db")) c.broadband_gain_db = jc.at("broadband_gain_db").get<double>();
      if (jc.contains("clip_drive")) c.clip_drive = jc.at("clip_drive").get<double>();
      if (jc.contains("noise_snr_db")) c.noise_snr_db = jc.at("noise_snr_db").get<double>();
      if (jc.contains("failure")) c.failure = jc.at("failure").get<bool>();
      if (jc.contains("notches")) {
        for (const json& jn : jc.at("notches")) {
          NotchSpec n;
          if (jn.contains("center_hz")) n.center_hz = jn.at("center_hz").get<double>();
          if (jn.contains("q_factor")) n.q_factor = jn.at("q_factor").get<double>();
          if (jn.contains("depth_db")) n.depth_db = jn.at("depth_db").get<double>();
          c.notches.push_back(n);
        }
      }
      config.profile.cycles.push_back(std::move(c));
    }
  } catch (const json::exception& e) {
    fail(errc::bad_format, path.string() + ": " + e.what());
  }
  config.validate();
  return config;
}

audio::Recording apply_attenuation(const audio::Recording& rec, double gain_db) {
  if (!(gain_db <= 0.0)) fail(errc::bad_argument, "gain_db must be <= 0");
  const double gain = std::pow(10.0, gain_db / 20.0);
  audio::Recording out = rec;
  for (double& s : out.samples) s *= gain;
  return out;
}

audio::Recording apply_notch(const audio::Recording& rec, double center_hz,
                             double q_factor, double depth_db) {
  const double nyquist = rec.sample_rate_hz / 2.0;
  if (!(center_hz > 0.0) || !(center_hz < nyquist)) {
    fail(errc::bad_argument, "notch center must lie between 0 and Nyquist");
  }
  if (!(q_factor > 0.0)) fail(errc::bad_argument, "q_factor must be > 0");
  if (!(depth_db <= 0.0)) fail(errc::bad_argument, "depth_db must be <= 0");

  // RBJ peaking EQ with A = 10^(depth/40); the center gain is exactly depth_db.
  const double a_gain = std::pow(10.0, depth_db / 40.0);
  const double w0 = 2.0 * std::numbers::pi * center_hz / rec.sample_rate_hz;
  const double alpha = std::sin(w0) / (2.0 * q_factor);
  const double a0 = 1.0 + alpha / a_gain;
  const double b0 = (1.0 + alpha * a_gain) / a0;
  const double b1 = (-2.0 * std::cos(w0)) / a0;
  const double b2 = (1.0 - alpha * a_gain) / a0;
  const double a1 = b1;  // shared numerator term in this topology
  const double a2 = (1.0 - alpha / a_gain) / a0;

  audio::Recording out = rec;
  double x1 = 0.0, x2 = 0.0, y1 = 0.0, y2 = 0.0;
  for (std::size_t i = 0; i < rec.samples.size(); ++i) {
    const double x = rec.samples[i];
    const double y = b0 * x + b1 * x1 + b2 * x2 - a1 * y1 - a2 * y2;
    x2 = x1;
    x1 = x;
    y2 = y1;
    y1 = y;
    out.samples[i] = y;
  }
  return out;
}

audio::Recording apply_clip_distortion(const audio::Recording& rec, double drive) {
  if (!(drive >= 1.0)) fail(errc::bad_argument, "drive must be >= 1");
  const double norm = std::tanh(drive);
  audio::Recording out = rec;
  for (double& s : out.samples) s = std::tanh(drive * s) / norm;
  return out;
}

audio::Recording apply_noise(const audio::Recording& rec, double snr_db,
                             std::uint64_t seed) {
  if (!std::isfinite(snr_db)) fail(errc::bad_argument, "snr_db must be finite");
  double signal_power = 0.0;
  for (double s : rec.samples) signal_power += s * s;
  signal_power /= static_cast<double>(rec.samples.size());
  if (signal_power <= 0.0) fail(errc::silent_input, "SNR undefined for silent input");

  const double sigma = std::sqrt(signal_power * std::pow(10.0, -snr_db / 10.0));
  GaussianSource noise(seed);
  audio::Recording out = rec;
  for (double& s : out.samples) s += sigma * noise();
  return out;
}

audio::Recording apply_cycle(const audio::Recording& clean, const CycleDamage& damage,
                             std::optional<std::uint64_t> noise_seed) {
  if (damage.failure) {
    audio::Recording silent = clean;
    std::fill(silent.samples.begin(), silent.samples.end(), 0.0);
    return silent;
  }
  // Clipping acts on the full-level signal, so its distortion depends on
  // the drive alone and grows with it even when later cycles also lose
  // level. Attenuation and notches after that, capture noise last.
  audio::Recording out = clean;
  if (damage.clip_drive > 1.0) out = apply_clip_distortion(out, damage.clip_drive);
  for (const auto& notch : damage.notches) {
    out = apply_notch(out, notch.center_hz, notch.q_factor, notch.depth_db);
  }
  if (damage.broadband_gain_db < 0.0) out = apply_attenuation(out, damage.broadband_gain_db);
  if (damage.noise_snr_db && noise_seed) {
    out = apply_noise(out, *damage.noise_snr_db, *noise_seed);
  }
  return out;
}

std::uint64_t derive_seed(std::uint64_t master, const std::string& key) {
  std::uint64_t h = 0xCBF29CE484222325ULL;  // FNV-1a
  for (unsigned char c : key) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return splitmix_finalize(h ^ splitmix_finalize(master));
}

session::SessionManifest simulate_trajectory(const SimulationConfig& config,
                                             const std::filesystem::path& out_dir,
                                             std::uint64_t seed) {
  config.validate();
  std::filesystem::create_directories(out_dir);

  // Clean stimuli, rendered once.
  std::vector<std::pair<session::SignalKind, audio::Recording>> stimuli;
  for (session::SignalKind kind : config.plan.signals) {
    switch (kind) {
      case session::SignalKind::sweep:
        stimuli.emplace_back(kind, siggen::gen_linear_sweep(config.signals.sweep));
        break;
      case session::SignalKind::tone:
        stimuli.emplace_back(kind, siggen::gen_tone(config.signals.tone));
        break;
      case session::SignalKind::music:
        stimuli.emplace_back(kind, audio::read_wav(*config.signals.music_path));
        break;
    }
  }

  session::SessionManifest manifest;
  manifest.baseline_cycle = 0;
  manifest.signals = config.signals;

  for (const CycleDamage& damage : config.profile.cycles) {
    for (const auto& [kind, clean] : stimuli) {
      for (const std::string& pair : config.plan.pairs) {
        for (session::Side side : config.plan.sides) {
          for (session::Source source : config.plan.sources) {
            for (int run = 1; run <= config.plan.runs; ++run) {
              session::ManifestEntry entry;
              entry.pair = pair;
              entry.side = side;
              entry.source = source;
              entry.signal = kind;
              entry.cycle = damage.cycle;
              entry.run = run;
              entry.path = pair + "_" + session::to_string(side) + "_" +
                           session::to_string(source) + "_" + session::to_string(kind) +
                           "_LC" + std::to_string(damage.cycle) + "_run" +
                           std::to_string(run) + ".wav";

              std::optional<std::uint64_t> noise_seed;
              if (damage.cycle > 0) {
                noise_seed = derive_seed(seed, entry.path.string());
              }
              audio::Recording damaged = apply_cycle(clean, damage, noise_seed);
              damaged.label = entry.path.string();
              audio::write_wav(out_dir / entry.path, damaged);
              manifest.entries.push_back(std::move(entry));
            }
          }
        }
      }
    }
  }
  manifest.validate();
  return manifest;
}

}  // namespace budcheck::degrade

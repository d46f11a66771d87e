#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "budcheck/audio.hpp"
#include "budcheck/session.hpp"

namespace budcheck::degrade {

struct NotchSpec {
  double center_hz = 1000.0;
  double q_factor = 2.0;
  double depth_db = -6.0;  // <= 0
};

/// Damage applied at one cycle. clip_drive 1 means no clipping; a set
/// noise_snr_db adds run-distinct white noise; failure replaces the output
/// with silence.
struct CycleDamage {
  int cycle = 0;
  double broadband_gain_db = 0.0;  // <= 0
  std::vector<NotchSpec> notches;
  double clip_drive = 1.0;  // >= 1
  std::optional<double> noise_snr_db;
  bool failure = false;

  bool is_identity() const;
};

/// Cycle-indexed damage schedule. Cycle 0 must be the identity and once a
/// cycle fails every later cycle fails too.
struct DamageProfile {
  std::vector<CycleDamage> cycles;

  void validate() const;
};

/// Which pairs/sides/sources/runs a simulated session records.
struct SessionPlan {
  std::vector<std::string> pairs{"Alpha"};
  std::vector<session::Side> sides{session::Side::left, session::Side::right};
  std::vector<session::Source> sources{session::Source::mic, session::Source::phone};
  int runs = 3;
  std::vector<session::SignalKind> signals{session::SignalKind::sweep,
                                           session::SignalKind::tone};
};

/// Full contents of a simulation profile file.
struct SimulationConfig {
  DamageProfile profile;
  SessionPlan plan;
  session::SignalSpecs signals;

  static SimulationConfig load(const std::filesystem::path& path);
  void validate() const;
};

audio::Recording apply_attenuation(const audio::Recording& rec, double gain_db);

/// Second-order peaking cut at center_hz: the magnitude response at the
/// center matches depth_db within 1 dB for Q >= 1.
audio::Recording apply_notch(const audio::Recording& rec, double center_hz,
                             double q_factor, double depth_db);

/// Normalized odd-symmetric soft clip y = tanh(drive*x)/tanh(drive).
audio::Recording apply_clip_distortion(const audio::Recording& rec, double drive);

/// Adds white Gaussian noise at the requested SNR (signal power over noise
/// power). Deterministic for a fixed seed across platforms.
audio::Recording apply_noise(const audio::Recording& rec, double snr_db,
                             std::uint64_t seed);

/// Damage chain for one cycle: clip, notches, attenuation, then noise when
/// noise_seed is set. Failure short-circuits to silence.
audio::Recording apply_cycle(const audio::Recording& clean, const CycleDamage& damage,
                             std::optional<std::uint64_t> noise_seed);

/// Stable per-recording seed so runs (and sources) get distinct but
/// reproducible noise.
std::uint64_t derive_seed(std::uint64_t master, const std::string& key);

/// Renders the full corpus under out_dir: every (cycle, signal, pair,
/// side, source, run) combination becomes one WAV named
/// {pair}_{side}_{source}_{signal}_LC{cycle}_run{run}.wav. Returns the
/// matching manifest (paths relative to out_dir). Cycle-0 outputs are the
/// clean signals bit-exactly; noise is only applied from cycle 1 on.
session::SessionManifest simulate_trajectory(const SimulationConfig& config,
                                             const std::filesystem::path& out_dir,
                                             std::uint64_t seed);

}  // namespace budcheck::degrade

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "budcheck/degrade.hpp"
#include "budcheck/metrics.hpp"
#include "budcheck/session.hpp"

namespace budcheck::commands {

struct GenOptions {
  std::filesystem::path out_dir;
  bool want_sweep = true;
  bool want_tone = true;
  siggen::SweepSpec sweep;
  siggen::ToneSpec tone;
  double ramp_s = 0.0;
};

/// Writes sweep.wav / tone.wav per the options; returns the written paths.
std::vector<std::filesystem::path> run_gen(const GenOptions& options);

struct SimulateOptions {
  std::filesystem::path profile;
  std::filesystem::path out_dir;
  std::uint64_t seed = 0;
};

/// Renders the damage-trajectory corpus and writes manifest.json beside the
/// WAV files; returns the manifest.
session::SessionManifest run_simulate(const SimulateOptions& options);

struct AnalyzeOptions {
  std::filesystem::path manifest;
  std::filesystem::path out_dir;
  std::optional<int> baseline_cycle;  // overrides the manifest when set
  double silence_threshold_dbfs = audio::kSilenceThresholdDbfs;
  std::size_t grid_points = 256;
  double band_lo_hz = 40.0;
  double band_hi_hz = 16000.0;
  int harmonics = 5;
};

struct StoredResponse {
  session::ManifestEntry entry;
  std::vector<double> magnitude_db;
};

struct AnalysisOutput {
  session::ResultsTable table;
  std::vector<double> response_grid_hz;
  std::vector<StoredResponse> responses;
};

/// Analyzes every manifest entry against its baseline: alignment to the
/// ideal stimulus, measurability gate, THD for tones, frequency-response
/// correlation/difference for sweeps, noise loudness for tones and music.
/// Writes results.csv, results.json, and responses.json under out_dir.
/// Throws when every row fails or a fatal input problem occurs; row-level
/// problems are recorded in table.errors and the run continues.
AnalysisOutput run_analyze(const AnalyzeOptions& options);

struct ReportOptions {
  std::filesystem::path results;  // results.csv or results.json
  std::filesystem::path out_dir;
  std::vector<std::string> models;  // formulas, e.g. "cycle ~ thd_dbc"
  double failure_cycle = 6.0;
};

/// Emits metric-vs-cycle plots, fitted-trend plots with +-2 SE bands,
/// per-transducer response overlays (when responses.json sits beside the
/// results), and model summaries (models.json / models.txt).
void run_report(const ReportOptions& options);

}  // namespace budcheck::commands

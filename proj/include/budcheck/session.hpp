#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "budcheck/siggen.hpp"

namespace budcheck::session {

enum class Side { left, right };
enum class Source { mic, phone };
enum class SignalKind { sweep, tone, music };

const char* to_string(Side side);
const char* to_string(Source source);
const char* to_string(SignalKind kind);
Side side_from_string(const std::string& s);
Source source_from_string(const std::string& s);
SignalKind signal_from_string(const std::string& s);

/// The stimuli a session was recorded with. Sweep and tone are synthesized
/// from their specs; music is an arbitrary user-supplied reference file.
struct SignalSpecs {
  siggen::SweepSpec sweep;
  siggen::ToneSpec tone;
  std::optional<std::filesystem::path> music_path;
};

struct ManifestEntry {
  std::string pair;
  Side side = Side::left;
  Source source = Source::mic;
  SignalKind signal = SignalKind::sweep;
  int cycle = 0;
  int run = 1;
  std::filesystem::path path;  // relative paths resolve against the manifest
};

/// Index of a recorded corpus. Entry keys (pair, side, source, signal,
/// cycle, run) must be unique; analysis expects baseline-cycle entries for
/// every analyzed combination.
struct SessionManifest {
  int baseline_cycle = 0;
  SignalSpecs signals;
  std::vector<ManifestEntry> entries;

  /// Throws errc::bad_format on duplicate keys or invalid fields.
  void validate() const;

  static SessionManifest load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
};

/// One analyzed recording. Metrics stay unset where they do not apply to
/// the signal kind or the recording was unmeasurable; nothing is invented.
struct ResultsRow {
  std::string pair;
  Side side = Side::left;
  Source source = Source::mic;
  SignalKind signal = SignalKind::sweep;
  int cycle = 0;
  int run = 1;
  bool measurable = false;
  std::optional<double> thd_dbc;
  std::optional<double> rms_noise_loudness;
  std::optional<double> correlation;
  std::optional<double> difference_mss;
};

struct RowError {
  ManifestEntry entry;
  std::string message;
};

struct ResultsTable {
  std::vector<ResultsRow> rows;
  std::vector<RowError> errors;

  void write_csv(const std::filesystem::path& path) const;
  void write_json(const std::filesystem::path& path) const;

  /// Reads back either the CSV or the JSON form, chosen by extension.
  static ResultsTable load(const std::filesystem::path& path);
};

/// Locale-independent shortest-round-trip formatting used in all emitted
/// tables.
std::string format_double(double value);

}  // namespace budcheck::session

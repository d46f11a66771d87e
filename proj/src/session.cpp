#include "budcheck/session.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "budcheck/errors.hpp"

namespace budcheck::session {

namespace {

using nlohmann::json;

json sweep_to_json(const siggen::SweepSpec& s) {
  return json{{"f0_hz", s.f0_hz},
              {"f1_hz", s.f1_hz},
              {"duration_s", s.duration_s},
              {"level_dbfs", s.level_dbfs},
              {"sample_rate_hz", s.sample_rate_hz}};
}

json tone_to_json(const siggen::ToneSpec& s) {
  return json{{"freq_hz", s.freq_hz},
              {"duration_s", s.duration_s},
              {"level_dbfs", s.level_dbfs},
              {"sample_rate_hz", s.sample_rate_hz}};
}

template <typename T>
T get_field(const json& j, const char* key, T fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    fail(errc::bad_format, where + "." + key + ": wrong type");
  }
}

siggen::SweepSpec sweep_from_json(const json& j, const std::string& where) {
  siggen::SweepSpec s;
  s.f0_hz = get_field(j, "f0_hz", s.f0_hz, where);
  s.f1_hz = get_field(j, "f1_hz", s.f1_hz, where);
  s.duration_s = get_field(j, "duration_s", s.duration_s, where);
  s.level_dbfs = get_field(j, "level_dbfs", s.level_dbfs, where);
  s.sample_rate_hz = get_field(j, "sample_rate_hz", s.sample_rate_hz, where);
  return s;
}

siggen::ToneSpec tone_from_json(const json& j, const std::string& where) {
  siggen::ToneSpec s;
  s.freq_hz = get_field(j, "freq_hz", s.freq_hz, where);
  s.duration_s = get_field(j, "duration_s", s.duration_s, where);
  s.level_dbfs = get_field(j, "level_dbfs", s.level_dbfs, where);
  s.sample_rate_hz = get_field(j, "sample_rate_hz", s.sample_rate_hz, where);
  return s;
}

std::string entry_key(const ManifestEntry& e) {
  return e.pair + "|" + to_string(e.side) + "|" + to_string(e.source) + "|" +
         to_string(e.signal) + "|" + std::to_string(e.cycle) + "|" +
         std::to_string(e.run);
}

std::optional<double> parse_optional_double(const std::string& cell,
                                            const std::string& where) {
  if (cell.empty()) return std::nullopt;
  double value = 0.0;
  const auto* begin = cell.data();
  const auto* end = begin + cell.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc{} || ptr != end) {
    fail(errc::bad_format, where + ": not a number: '" + cell + "'");
  }
  return value;
}

}  // namespace

const char* to_string(Side side) { return side == Side::left ? "left" : "right"; }

const char* to_string(Source source) { return source == Source::mic ? "mic" : "phone"; }

const char* to_string(SignalKind kind) {
  switch (kind) {
    case SignalKind::sweep: return "sweep";
    case SignalKind::tone: return "tone";
    case SignalKind::music: return "music";
  }
  return "?";
}

Side side_from_string(const std::string& s) {
  if (s == "left") return Side::left;
  if (s == "right") return Side::right;
  fail(errc::bad_format, "unknown side '" + s + "' (expected left|right)");
}

Source source_from_string(const std::string& s) {
  if (s == "mic") return Source::mic;
  if (s == "phone") return Source::phone;
  fail(errc::bad_format, "unknown source '" + s + "' (expected mic|phone)");
}

SignalKind signal_from_string(const std::string& s) {
  if (s == "sweep") return SignalKind::sweep;
  if (s == "tone") return SignalKind::tone;
  if (s == "music") return SignalKind::music;
  fail(errc::bad_format, "unknown signal '" + s + "' (expected sweep|tone|music)");
}

void SessionManifest::validate() const {
  std::set<std::string> seen;
  for (const auto& e : entries) {
    if (e.pair.empty()) fail(errc::bad_format, "manifest entry with empty pair id");
    if (e.pair.find_first_of(",\n|\"") != std::string::npos) {
      fail(errc::bad_format, "pair id '" + e.pair + "' contains a reserved character");
    }
    if (e.cycle < 0) fail(errc::bad_format, "negative cycle in manifest");
    if (e.run < 1) fail(errc::bad_format, "run indices start at 1");
    if (e.path.empty()) fail(errc::bad_format, "manifest entry with empty path");
    if (!seen.insert(entry_key(e)).second) {
      fail(errc::bad_format, "duplicate manifest entry " + entry_key(e));
    }
  }
  if (baseline_cycle < 0) fail(errc::bad_format, "baseline_cycle must be >= 0");
}

SessionManifest SessionManifest::load(const std::filesystem::path& path) {
  std::ifstream file(path);
  if (!file) fail(errc::io, "cannot open " + path.string());
  json j;
  try {
    j = json::parse(file);
  } catch (const json::parse_error& e) {
    fail(errc::bad_format, path.string() + ": " + e.what());
  }

  SessionManifest manifest;
  manifest.baseline_cycle = get_field(j, "baseline_cycle", 0, "manifest");
  if (j.contains("signals")) {
    const json& sig = j.at("signals");
    if (sig.contains("sweep")) manifest.signals.sweep = sweep_from_json(sig.at("sweep"), "signals.sweep");
    if (sig.contains("tone")) manifest.signals.tone = tone_from_json(sig.at("tone"), "signals.tone");
    if (sig.contains("music")) {
      manifest.signals.music_path = std::filesystem::path(sig.at("music").get<std::string>());
    }
  }
  if (!j.contains("entries") || !j.at("entries").is_array()) {
    fail(errc::bad_format, path.string() + ": missing entries array");
  }
  std::size_t index = 0;
  for (const json& je : j.at("entries")) {
    const std::string where = "entries[" + std::to_string(index++) + "]";
    ManifestEntry e;
    if (!je.contains("pair")) fail(errc::bad_format, where + ": missing pair");
    e.pair = je.at("pair").get<std::string>();
    e.side = side_from_string(get_field<std::string>(je, "side", "left", where));
    e.source = source_from_string(get_field<std::string>(je, "source", "mic", where));
    e.signal = signal_from_string(get_field<std::string>(je, "signal", "sweep", where));
    e.cycle = get_field(je, "cycle", 0, where);
    e.run = get_field(je, "run", 1, where);
    if (!je.contains("path")) fail(errc::bad_format, where + ": missing path");
    e.path = std::filesystem::path(je.at("path").get<std::string>());
    manifest.entries.push_back(std::move(e));
  }
  manifest.validate();
  return manifest;
}

void SessionManifest::save(const std::filesystem::path& path) const {
  validate();
  json j;
  j["baseline_cycle"] = baseline_cycle;
  j["signals"]["sweep"] = sweep_to_json(signals.sweep);
  j["signals"]["tone"] = tone_to_json(signals.tone);
  if (signals.music_path) j["signals"]["music"] = signals.music_path->string();
  j["entries"] = json::array();
  for (const auto& e : entries) {
    j["entries"].push_back(json{{"pair", e.pair},
                                {"side", to_string(e.side)},
                                {"source", to_string(e.source)},
                                {"signal", to_string(e.signal)},
                                {"cycle", e.cycle},
                                {"run", e.run},
                                {"path", e.path.generic_string()}});
  }
  std::ofstream file(path, std::ios::trunc);
  if (!file) fail(errc::io, "cannot open " + path.string() + " for writing");
  file << j.dump(2) << '\n';
  if (!file) fail(errc::io, "write failed for " + path.string());
}

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc{}) return "nan";
  return std::string(buf, ptr);
}

namespace {

constexpr const char* kCsvHeader =
    "pair,side,source,signal,cycle,run,measurable,thd_dbc,rms_noise_loudness,"
    "correlation,difference_mss";

std::string cell(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string();
}

}  // namespace

void ResultsTable::write_csv(const std::filesystem::path& path) const {
  std::ofstream file(path, std::ios::trunc);
  if (!file) fail(errc::io, "cannot open " + path.string() + " for writing");
  file << kCsvHeader << '\n';
  for (const auto& r : rows) {
    file << r.pair << ',' << to_string(r.side) << ',' << to_string(r.source) << ','
         << to_string(r.signal) << ',' << r.cycle << ',' << r.run << ','
         << (r.measurable ? "true" : "false") << ',' << cell(r.thd_dbc) << ','
         << cell(r.rms_noise_loudness) << ',' << cell(r.correlation) << ','
         << cell(r.difference_mss) << '\n';
  }
  if (!file) fail(errc::io, "write failed for " + path.string());
}

void ResultsTable::write_json(const std::filesystem::path& path) const {
  json j;
  j["rows"] = json::array();
  for (const auto& r : rows) {
    json row{{"pair", r.pair},
             {"side", to_string(r.side)},
             {"source", to_string(r.source)},
             {"signal", to_string(r.signal)},
             {"cycle", r.cycle},
             {"run", r.run},
             {"measurable", r.measurable}};
    row["thd_dbc"] = r.thd_dbc ? json(*r.thd_dbc) : json();
    row["rms_noise_loudness"] = r.rms_noise_loudness ? json(*r.rms_noise_loudness) : json();
    row["correlation"] = r.correlation ? json(*r.correlation) : json();
    row["difference_mss"] = r.difference_mss ? json(*r.difference_mss) : json();
    j["rows"].push_back(std::move(row));
  }
  j["errors"] = json::array();
  for (const auto& e : errors) {
    j["errors"].push_back(json{{"pair", e.entry.pair},
                               {"side", to_string(e.entry.side)},
                               {"source", to_string(e.entry.source)},
                               {"signal", to_string(e.entry.signal)},
                               {"cycle", e.entry.cycle},
                               {"run", e.entry.run},
                               {"path", e.entry.path.generic_string()},
                               {"message", e.message}});
  }
  std::ofstream file(path, std::ios::trunc);
  if (!file) fail(errc::io, "cannot open " + path.string() + " for writing");
  file << j.dump(2) << '\n';
  if (!file) fail(errc::io, "write failed for " + path.string());
}

namespace {

ResultsRow row_from_cells(const std::vector<std::string>& cells, const std::string& where) {
  if (cells.size() != 11) {
    fail(errc::bad_format, where + ": expected 11 columns, got " + std::to_string(cells.size()));
  }
  ResultsRow r;
  r.pair = cells[0];
  r.side = side_from_string(cells[1]);
  r.source = source_from_string(cells[2]);
  r.signal = signal_from_string(cells[3]);
  r.cycle = std::stoi(cells[4]);
  r.run = std::stoi(cells[5]);
  if (cells[6] == "true") {
    r.measurable = true;
  } else if (cells[6] == "false") {
    r.measurable = false;
  } else {
    fail(errc::bad_format, where + ": measurable must be true|false");
  }
  r.thd_dbc = parse_optional_double(cells[7], where);
  r.rms_noise_loudness = parse_optional_double(cells[8], where);
  r.correlation = parse_optional_double(cells[9], where);
  r.difference_mss = parse_optional_double(cells[10], where);
  return r;
}

ResultsTable load_csv(const std::filesystem::path& path) {
  std::ifstream file(path);
  if (!file) fail(errc::io, "cannot open " + path.string());
  std::string line;
  if (!std::getline(file, line) || line != kCsvHeader) {
    fail(errc::bad_format, path.string() + ": unexpected or missing CSV header");
  }
  ResultsTable table;
  std::size_t line_no = 1;
  while (std::getline(file, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) cells.push_back(c);
    while (cells.size() < 11) cells.emplace_back();  // trailing empties
    table.rows.push_back(
        row_from_cells(cells, path.string() + ":" + std::to_string(line_no)));
  }
  return table;
}

ResultsTable load_json(const std::filesystem::path& path) {
  std::ifstream file(path);
  if (!file) fail(errc::io, "cannot open " + path.string());
  json j;
  try {
    j = json::parse(file);
  } catch (const json::parse_error& e) {
    fail(errc::bad_format, path.string() + ": " + e.what());
  }
  if (!j.contains("rows") || !j.at("rows").is_array()) {
    fail(errc::bad_format, path.string() + ": missing rows array");
  }
  ResultsTable table;
  for (const json& jr : j.at("rows")) {
    ResultsRow r;
    r.pair = jr.at("pair").get<std::string>();
    r.side = side_from_string(jr.at("side").get<std::string>());
    r.source = source_from_string(jr.at("source").get<std::string>());
    r.signal = signal_from_string(jr.at("signal").get<std::string>());
    r.cycle = jr.at("cycle").get<int>();
    r.run = jr.at("run").get<int>();
    r.measurable = jr.at("measurable").get<bool>();
    const auto opt = [&](const char* key) -> std::optional<double> {
      if (!jr.contains(key) || jr.at(key).is_null()) return std::nullopt;
      return jr.at(key).get<double>();
    };
    r.thd_dbc = opt("thd_dbc");
    r.rms_noise_loudness = opt("rms_noise_loudness");
    r.correlation = opt("correlation");
    r.difference_mss = opt("difference_mss");
    table.rows.push_back(std::move(r));
  }
  return table;
}

}  // namespace

ResultsTable ResultsTable::load(const std::filesystem::path& path) {
  if (path.extension() == ".json") return load_json(path);
  return load_csv(path);
}

}  // namespace budcheck::session

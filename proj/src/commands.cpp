#include "budcheck/commands.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <set>

#include <json.hpp>

#include "budcheck/errors.hpp"
#include "budcheck/loudness.hpp"

namespace budcheck::commands {

namespace {

using nlohmann::json;

std::string describe(const session::ManifestEntry& e) {
  return e.pair + "/" + session::to_string(e.side) + "/" + session::to_string(e.source) +
         "/" + session::to_string(e.signal) + "/LC" + std::to_string(e.cycle) + "/run" +
         std::to_string(e.run);
}

// Baseline recordings aligned to the ideal stimulus, cached per group+run.
struct PreparedRecording {
  audio::Recording segment;              // on the ideal time base
  std::optional<metrics::FrequencyResponse> response;  // sweeps only
};

std::string group_key(const session::ManifestEntry& e) {
  return e.pair + "|" + session::to_string(e.side) + "|" + session::to_string(e.source) +
         "|" + session::to_string(e.signal);
}

}  // namespace

std::vector<std::filesystem::path> run_gen(const GenOptions& options) {
  siggen::validate(options.sweep);
  siggen::validate(options.tone);
  std::filesystem::create_directories(options.out_dir);
  std::vector<std::filesystem::path> written;
  if (options.want_sweep) {
    const auto path = options.out_dir / "sweep.wav";
    audio::write_wav(path, siggen::gen_linear_sweep(options.sweep, options.ramp_s));
    written.push_back(path);
  }
  if (options.want_tone) {
    const auto path = options.out_dir / "tone.wav";
    audio::write_wav(path, siggen::gen_tone(options.tone, options.ramp_s));
    written.push_back(path);
  }
  return written;
}

session::SessionManifest run_simulate(const SimulateOptions& options) {
  const degrade::SimulationConfig config = degrade::SimulationConfig::load(options.profile);
  session::SessionManifest manifest =
      degrade::simulate_trajectory(config, options.out_dir, options.seed);
  manifest.save(options.out_dir / "manifest.json");
  return manifest;
}

AnalysisOutput run_analyze(const AnalyzeOptions& options) {
  session::SessionManifest manifest = session::SessionManifest::load(options.manifest);
  if (options.baseline_cycle) manifest.baseline_cycle = *options.baseline_cycle;
  const std::filesystem::path manifest_dir =
      std::filesystem::absolute(options.manifest).parent_path();
  const auto resolve = [&](const std::filesystem::path& p) {
    return p.is_absolute() ? p : manifest_dir / p;
  };

  std::filesystem::create_directories(options.out_dir);

  // Ideal stimuli; recordings are aligned against these so that test and
  // baseline end up on a common time base.
  const audio::Recording ideal_sweep = siggen::gen_linear_sweep(manifest.signals.sweep);
  const audio::Recording ideal_tone = siggen::gen_tone(manifest.signals.tone);
  std::optional<audio::Recording> ideal_music;
  const bool has_music_entries =
      std::any_of(manifest.entries.begin(), manifest.entries.end(), [](const auto& e) {
        return e.signal == session::SignalKind::music;
      });
  if (has_music_entries) {
    if (!manifest.signals.music_path) {
      fail(errc::bad_format, "manifest has music entries but no signals.music path");
    }
    ideal_music = audio::read_wav(resolve(*manifest.signals.music_path));
  }
  const auto ideal_for = [&](session::SignalKind kind) -> const audio::Recording& {
    switch (kind) {
      case session::SignalKind::sweep: return ideal_sweep;
      case session::SignalKind::tone: return ideal_tone;
      case session::SignalKind::music: return *ideal_music;
    }
    fail(errc::bad_argument, "unknown signal kind");
  };

  const std::vector<double> grid =
      metrics::make_log_grid(options.band_lo_hz, options.band_hi_hz, options.grid_points);
  const metrics::ResponseEstimator estimator(manifest.signals.sweep, grid);

  const auto prepare = [&](const session::ManifestEntry& entry) -> PreparedRecording {
    const audio::Recording rec = audio::read_wav(resolve(entry.path));
    const audio::Recording& ideal = ideal_for(entry.signal);
    if (rec.sample_rate_hz != ideal.sample_rate_hz) {
      fail(errc::rate_mismatch, describe(entry) + ": sample rate " +
                                    std::to_string(rec.sample_rate_hz) +
                                    " does not match the stimulus");
    }
    if (!metrics::is_measurable(rec, options.silence_threshold_dbfs)) {
      fail(errc::unmeasurable, describe(entry) + ": unmeasurable");
    }
    const std::int64_t offset = audio::align(rec, ideal, options.silence_threshold_dbfs);
    PreparedRecording prepared;
    prepared.segment.sample_rate_hz = rec.sample_rate_hz;
    prepared.segment.label = rec.label;
    prepared.segment.samples = audio::extract_segment(rec, offset, ideal.samples.size());
    if (entry.signal == session::SignalKind::sweep) {
      prepared.response =
          estimator.estimate(prepared.segment, options.silence_threshold_dbfs);
    }
    return prepared;
  };

  // Index baseline entries per analysis group; prefer the matching run,
  // fall back to the lowest run present.
  std::map<std::string, std::map<int, const session::ManifestEntry*>> baselines;
  for (const auto& entry : manifest.entries) {
    if (entry.cycle == manifest.baseline_cycle) {
      baselines[group_key(entry)][entry.run] = &entry;
    }
  }
  std::map<std::string, PreparedRecording> baseline_cache;
  const auto baseline_for =
      [&](const session::ManifestEntry& entry) -> const PreparedRecording& {
    const auto group = baselines.find(group_key(entry));
    if (group == baselines.end() || group->second.empty()) {
      fail(errc::missing_value,
           describe(entry) + ": no baseline entry at cycle " +
               std::to_string(manifest.baseline_cycle) + " for this group");
    }
    const auto run_it = group->second.find(entry.run);
    const session::ManifestEntry* base =
        run_it != group->second.end() ? run_it->second : group->second.begin()->second;
    const std::string cache_key = group_key(*base) + "|run" + std::to_string(base->run);
    const auto cached = baseline_cache.find(cache_key);
    if (cached != baseline_cache.end()) return cached->second;
    return baseline_cache.emplace(cache_key, prepare(*base)).first->second;
  };

  AnalysisOutput output;
  output.response_grid_hz = grid;

  for (const auto& entry : manifest.entries) {
    session::ResultsRow row;
    row.pair = entry.pair;
    row.side = entry.side;
    row.source = entry.source;
    row.signal = entry.signal;
    row.cycle = entry.cycle;
    row.run = entry.run;
    try {
      const audio::Recording rec = audio::read_wav(resolve(entry.path));
      const audio::Recording& ideal = ideal_for(entry.signal);
      if (rec.sample_rate_hz != ideal.sample_rate_hz) {
        fail(errc::rate_mismatch, "sample rate does not match the stimulus");
      }
      row.measurable = metrics::is_measurable(rec, options.silence_threshold_dbfs);
      if (row.measurable) {
        const PreparedRecording& baseline = baseline_for(entry);
        const std::int64_t offset =
            audio::align(rec, ideal, options.silence_threshold_dbfs);
        audio::Recording segment;
        segment.sample_rate_hz = rec.sample_rate_hz;
        segment.label = rec.label;
        segment.samples = audio::extract_segment(rec, offset, ideal.samples.size());

        switch (entry.signal) {
          case session::SignalKind::sweep: {
            const metrics::FrequencyResponse response =
                estimator.estimate(segment, options.silence_threshold_dbfs);
            const metrics::DegradationMeasures measures =
                metrics::degradation_measures(response, *baseline.response);
            row.correlation = measures.correlation;
            row.difference_mss = measures.difference_mss;
            output.responses.push_back({entry, response.magnitude_db});
            break;
          }
          case session::SignalKind::tone: {
            row.thd_dbc = metrics::thd(segment, manifest.signals.tone.freq_hz,
                                       options.harmonics,
                                       options.silence_threshold_dbfs)
                              .thd_dbc;
            row.rms_noise_loudness =
                loudness::rms_noise_loudness(segment, baseline.segment,
                                             options.silence_threshold_dbfs)
                    .rms_noise_loudness;
            break;
          }
          case session::SignalKind::music: {
            row.rms_noise_loudness =
                loudness::rms_noise_loudness(segment, baseline.segment,
                                             options.silence_threshold_dbfs)
                    .rms_noise_loudness;
            break;
          }
        }
      }
      output.table.rows.push_back(std::move(row));
    } catch (const Error& e) {
      std::cerr << "analyze: " << describe(entry) << ": " << e.what() << '\n';
      output.table.errors.push_back({entry, e.what()});
    }
  }

  if (output.table.rows.empty()) {
    fail(errc::insufficient_data, "analysis failed for every manifest entry");
  }

  output.table.write_csv(options.out_dir / "results.csv");
  output.table.write_json(options.out_dir / "results.json");

  json responses_json;
  responses_json["grid_hz"] = output.response_grid_hz;
  responses_json["responses"] = json::array();
  for (const auto& stored : output.responses) {
    responses_json["responses"].push_back(
        json{{"pair", stored.entry.pair},
             {"side", session::to_string(stored.entry.side)},
             {"source", session::to_string(stored.entry.source)},
             {"cycle", stored.entry.cycle},
             {"run", stored.entry.run},
             {"magnitude_db", stored.magnitude_db}});
  }
  std::ofstream responses_file(options.out_dir / "responses.json", std::ios::trunc);
  if (!responses_file) fail(errc::io, "cannot write responses.json");
  responses_file << responses_json.dump(2) << '\n';

  return output;
}

}  // namespace budcheck::commands

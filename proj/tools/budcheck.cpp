#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "budcheck/commands.hpp"
#include "budcheck/errors.hpp"

namespace {

bool parse_band(const std::string& text, double& lo, double& hi) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) return false;
  try {
    lo = std::stod(text.substr(0, colon));
    hi = std::stod(text.substr(colon + 1));
  } catch (const std::exception&) {
    return false;
  }
  return lo > 0.0 && hi > lo;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"budcheck: transducer degradation measurement toolkit"};
  app.require_subcommand(1);

  using budcheck::commands::AnalyzeOptions;
  using budcheck::commands::GenOptions;
  using budcheck::commands::ReportOptions;
  using budcheck::commands::SimulateOptions;

  // gen ----------------------------------------------------------------
  GenOptions gen;
  std::string gen_signal = "all";
  double gen_ramp_ms = 0.0;
  auto* cmd_gen = app.add_subcommand("gen", "write the test signals as WAV files");
  cmd_gen->add_option("--out", gen.out_dir, "output directory")->required();
  cmd_gen->add_option("--signal", gen_signal, "sweep|tone|all (default all)")
      ->check(CLI::IsMember({"sweep", "tone", "all"}));
  cmd_gen->add_option("--f0", gen.sweep.f0_hz, "sweep start frequency (Hz)");
  cmd_gen->add_option("--f1", gen.sweep.f1_hz, "sweep end frequency (Hz)");
  cmd_gen->add_option("--duration", gen.sweep.duration_s, "signal duration (s)");
  cmd_gen->add_option("--level-dbfs", gen.sweep.level_dbfs, "peak level (dBFS)");
  cmd_gen->add_option("--rate", gen.sweep.sample_rate_hz, "sample rate (Hz)");
  cmd_gen->add_option("--tone-freq", gen.tone.freq_hz, "tone frequency (Hz)");
  cmd_gen->add_option("--ramp-ms", gen_ramp_ms, "raised-cosine fade length (ms, 0 = off)");

  // simulate -----------------------------------------------------------
  SimulateOptions simulate;
  auto* cmd_simulate =
      app.add_subcommand("simulate", "render a synthetic degradation corpus");
  cmd_simulate->add_option("--profile", simulate.profile, "damage profile JSON file")
      ->required();
  cmd_simulate->add_option("--out", simulate.out_dir, "output directory")->required();
  cmd_simulate->add_option("--seed", simulate.seed, "master random seed")
      ->envname("BUDCHECK_SEED");

  // analyze ------------------------------------------------------------
  AnalyzeOptions analyze;
  int analyze_baseline = -1;
  std::string analyze_band = "40:16000";
  auto* cmd_analyze =
      app.add_subcommand("analyze", "compute quality metrics for a recorded corpus");
  cmd_analyze->add_option("--manifest", analyze.manifest, "session manifest JSON file")
      ->required();
  cmd_analyze->add_option("--out", analyze.out_dir, "output directory")->required();
  cmd_analyze->add_option("--baseline-cycle", analyze_baseline,
                          "reference cycle (default: manifest value)");
  cmd_analyze->add_option("--silence-threshold-dbfs", analyze.silence_threshold_dbfs,
                          "measurability threshold (default -60)");
  cmd_analyze->add_option("--grid-points", analyze.grid_points,
                          "response grid size (default 256)");
  cmd_analyze->add_option("--band", analyze_band,
                          "response comparison band LO:HI in Hz (default 40:16000)");
  cmd_analyze->add_option("--harmonics", analyze.harmonics,
                          "distortion harmonics counted in THD (default 5)");

  // report -------------------------------------------------------------
  ReportOptions report;
  auto* cmd_report =
      app.add_subcommand("report", "emit plots and model summaries from results");
  cmd_report->add_option("--results", report.results, "results.csv or results.json")
      ->required();
  cmd_report->add_option("--out", report.out_dir, "output directory")->required();
  cmd_report->add_option("--model", report.models,
                         "model formula, e.g. 'cycle ~ thd_dbc' (repeatable)");
  cmd_report->add_option("--failure-cycle", report.failure_cycle,
                         "cycle treated as total failure for health indices");

  CLI11_PARSE(app, argc, argv);

  try {
    if (cmd_gen->parsed()) {
      gen.want_sweep = gen_signal != "tone";
      gen.want_tone = gen_signal != "sweep";
      gen.tone.duration_s = gen.sweep.duration_s;
      gen.tone.level_dbfs = gen.sweep.level_dbfs;
      gen.tone.sample_rate_hz = gen.sweep.sample_rate_hz;
      gen.ramp_s = gen_ramp_ms / 1000.0;
      for (const auto& path : budcheck::commands::run_gen(gen)) {
        std::cout << "wrote " << path.string() << '\n';
      }
      if (gen.want_sweep) {
        std::cout << "sweep: " << gen.sweep.f0_hz << "-" << gen.sweep.f1_hz << " Hz, "
                  << gen.sweep.duration_s << " s, " << gen.sweep.level_dbfs << " dBFS, "
                  << gen.sweep.sample_rate_hz << " Hz\n";
      }
      if (gen.want_tone) {
        std::cout << "tone: " << gen.tone.freq_hz << " Hz, " << gen.tone.duration_s
                  << " s, " << gen.tone.level_dbfs << " dBFS, "
                  << gen.tone.sample_rate_hz << " Hz\n";
      }
    } else if (cmd_simulate->parsed()) {
      const auto manifest = budcheck::commands::run_simulate(simulate);
      std::cout << "wrote " << manifest.entries.size() << " recordings and manifest to "
                << simulate.out_dir.string() << '\n';
    } else if (cmd_analyze->parsed()) {
      if (analyze_baseline >= 0) analyze.baseline_cycle = analyze_baseline;
      if (!parse_band(analyze_band, analyze.band_lo_hz, analyze.band_hi_hz)) {
        std::cerr << "error: --band must be LO:HI with 0 < LO < HI\n";
        return 1;
      }
      const auto output = budcheck::commands::run_analyze(analyze);
      std::cout << "analyzed " << output.table.rows.size() << " entries ("
                << output.table.errors.size() << " errors) -> "
                << analyze.out_dir.string() << '\n';
    } else if (cmd_report->parsed()) {
      budcheck::commands::run_report(report);
      std::cout << "report written to " << report.out_dir.string() << '\n';
    }
  } catch (const budcheck::Error& e) {
    std::cerr << "error (" << budcheck::to_string(e.code()) << "): " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

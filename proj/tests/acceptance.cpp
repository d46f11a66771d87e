// Acceptance suite: end-to-end checks of the measurement pipeline against
// analytic oracles and property families. Prints one line per criterion
// and exits nonzero if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "budcheck/commands.hpp"
#include "budcheck/degrade.hpp"
#include "budcheck/health.hpp"
#include "budcheck/loudness.hpp"
#include "budcheck/metrics.hpp"
#include "budcheck/siggen.hpp"

using namespace budcheck;

namespace {

int failures = 0;

void report(int id, const std::string& name, bool pass, const std::string& detail) {
  std::printf("[%s] %2d %-34s %s\n", pass ? "PASS" : "FAIL", id, name.c_str(),
              detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

double seconds_since(const std::chrono::steady_clock::time_point& start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string fmt(double v) {
  std::ostringstream out;
  out.precision(4);
  out << v;
  return out.str();
}

audio::Recording tone_with_harmonics(double fundamental_hz,
                                     const std::vector<std::pair<int, double>>& partials,
                                     double duration_s = 15.0, double amplitude = 0.2) {
  audio::Recording rec;
  rec.sample_rate_hz = 44100;
  const auto n = static_cast<std::size_t>(duration_s * 44100);
  rec.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / 44100.0;
    double v = amplitude * std::sin(2.0 * std::numbers::pi * fundamental_hz * t);
    for (const auto& [h, a] : partials) {
      v += amplitude * a * std::sin(2.0 * std::numbers::pi * h * fundamental_hz * t);
    }
    rec.samples[i] = v;
  }
  return rec;
}

audio::Recording one_pole_lowpass(const audio::Recording& rec, double cutoff_hz) {
  const double a = 1.0 - std::exp(-2.0 * std::numbers::pi * cutoff_hz / rec.sample_rate_hz);
  audio::Recording out = rec;
  double state = 0.0;
  for (double& s : out.samples) {
    state += a * (s - state);
    s = state;
  }
  return out;
}

double one_pole_magnitude_db(double f_hz, double cutoff_hz, int rate) {
  const double a = 1.0 - std::exp(-2.0 * std::numbers::pi * cutoff_hz / rate);
  const double w = 2.0 * std::numbers::pi * f_hz / rate;
  const double b = 1.0 - a;
  return 20.0 * std::log10(a / std::sqrt(1.0 - 2.0 * b * std::cos(w) + b * b));
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

struct Scratch {
  std::filesystem::path dir;
  Scratch() {
    dir = std::filesystem::temp_directory_path() / "budcheck_acceptance";
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
  }
  ~Scratch() {
    std::error_code ec;
    std::filesystem::remove_all(dir, ec);
  }
};

// ---------------------------------------------------------------------------

void criterion_1_thd_correctness() {
  const auto start = std::chrono::steady_clock::now();
  bool pass = true;
  std::string detail;

  const double equal_power = metrics::thd(tone_with_harmonics(1000.0, {{2, 1.0}})).thd_dbc;
  pass = pass && std::abs(equal_power) <= 0.05;
  detail += "0dBc case " + fmt(equal_power);

  const double two_harmonics =
      metrics::thd(tone_with_harmonics(1000.0, {{2, 0.1}, {3, 0.1}})).thd_dbc;
  pass = pass && std::abs(two_harmonics - 10.0 * std::log10(0.02)) <= 0.05;
  detail += ", analytic " + fmt(two_harmonics);

  const double pure = metrics::thd(siggen::gen_tone(siggen::ToneSpec{})).thd_dbc;
  pass = pass && pure <= -100.0;
  detail += ", pure tone " + fmt(pure);

  const double elapsed = seconds_since(start);
  pass = pass && elapsed < 5.0;
  detail += ", " + fmt(elapsed) + "s";
  report(1, "THD correctness", pass, detail);
}

void criterion_2_thd_gain_invariance() {
  siggen::ToneSpec spec;
  spec.duration_s = 5.0;
  const audio::Recording base =
      degrade::apply_clip_distortion(siggen::gen_tone(spec), 2.0);
  const double reference = metrics::thd(base).thd_dbc;

  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> gains(0.01, 1.0);
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    audio::Recording scaled = base;
    const double g = gains(rng);
    for (double& s : scaled.samples) s *= g;
    worst = std::max(worst, std::abs(metrics::thd(scaled).thd_dbc - reference));
  }
  report(2, "THD gain invariance", worst < 1e-6,
         "max deviation " + fmt(worst) + " dB over 50 gains");
}

void criterion_3_response_fidelity() {
  const siggen::SweepSpec spec;
  const metrics::ResponseEstimator estimator(spec, metrics::make_log_grid());
  const audio::Recording sweep = siggen::gen_linear_sweep(spec);
  bool pass = true;
  std::string detail;

  const metrics::FrequencyResponse identity = estimator.estimate(sweep);
  double lo = identity.magnitude_db[0];
  double hi = lo;
  for (double v : identity.magnitude_db) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  pass = pass && (hi - lo) <= 1.0;
  detail += "identity span " + fmt(hi - lo) + " dB";

  const metrics::FrequencyResponse filtered =
      estimator.estimate(one_pole_lowpass(sweep, 1000.0));
  double worst_filter = 0.0;
  for (std::size_t i = 0; i < filtered.grid_hz.size(); ++i) {
    const double f = filtered.grid_hz[i];
    if (f < 100.0 || f > 10000.0) continue;
    const double analytic = one_pole_magnitude_db(f, 1000.0, spec.sample_rate_hz);
    worst_filter = std::max(worst_filter, std::abs(filtered.magnitude_db[i] - analytic));
  }
  pass = pass && worst_filter <= 1.5;
  detail += ", low-pass error " + fmt(worst_filter) + " dB";

  const metrics::FrequencyResponse attenuated =
      estimator.estimate(degrade::apply_attenuation(sweep, -6.02));
  double worst_shift = 0.0;
  for (std::size_t i = 0; i < identity.magnitude_db.size(); ++i) {
    worst_shift = std::max(
        worst_shift,
        std::abs(attenuated.magnitude_db[i] - identity.magnitude_db[i] + 6.02));
  }
  pass = pass && worst_shift <= 0.1;
  detail += ", shift error " + fmt(worst_shift) + " dB";
  report(3, "frequency response fidelity", pass, detail);
}

void criterion_4_correlation_mss_semantics() {
  const siggen::SweepSpec spec;
  const metrics::ResponseEstimator estimator(spec, metrics::make_log_grid());
  const audio::Recording sweep = siggen::gen_linear_sweep(spec);
  bool pass = true;
  std::string detail;

  const metrics::FrequencyResponse ref = estimator.estimate(sweep);
  const metrics::FrequencyResponse self = estimator.estimate(sweep);
  const double self_corr = metrics::response_correlation(self, ref);
  const double self_mss = metrics::response_difference_mss(self, ref);
  pass = pass && std::abs(self_corr - 1.0) <= 1e-6 && self_mss < 1e-6;
  detail += "self corr " + fmt(self_corr) + ", mss " + fmt(self_mss);

  const double g = 6.02;
  metrics::FrequencyResponse offset = ref;
  for (double& v : offset.magnitude_db) v += g;
  const double off_corr = metrics::response_correlation(offset, ref);
  const double off_mss = metrics::response_difference_mss(offset, ref);
  pass = pass && std::abs(off_corr - 1.0) <= 1e-6;
  pass = pass && std::abs(off_mss - g * g) <= 0.01 * g * g;
  detail += ", offset corr " + fmt(off_corr) + ", mss " + fmt(off_mss);

  const double corr_5 = metrics::response_correlation(
      estimator.estimate(degrade::apply_notch(sweep, 1000.0, 2.0, -5.0)), ref);
  const double corr_20 = metrics::response_correlation(
      estimator.estimate(degrade::apply_notch(sweep, 1000.0, 2.0, -20.0)), ref);
  pass = pass && corr_20 < corr_5;
  detail += ", notch corr " + fmt(corr_5) + " -> " + fmt(corr_20);
  report(4, "correlation/MSS semantics", pass, detail);
}

void criterion_5_noise_loudness_properties() {
  siggen::ToneSpec spec;  // default 15 s stimulus
  const audio::Recording ref = siggen::gen_tone(spec);
  bool pass = true;
  std::string detail;

  const double self = loudness::rms_noise_loudness(ref, ref).rms_noise_loudness;
  pass = pass && self == 0.0;
  detail += "self " + fmt(self);

  double previous = -1.0;
  bool increasing = true;
  for (double snr : {40.0, 32.5, 25.0, 17.5, 10.0}) {
    const double value =
        loudness::rms_noise_loudness(degrade::apply_noise(ref, snr, 31337), ref)
            .rms_noise_loudness;
    increasing = increasing && value > previous;
    previous = value;
  }
  pass = pass && increasing;
  detail += std::string(", SNR family ") + (increasing ? "increasing" : "NOT increasing");

  const double attenuated =
      loudness::rms_noise_loudness(degrade::apply_attenuation(ref, -6.0), ref)
          .rms_noise_loudness;
  pass = pass && attenuated == 0.0;
  detail += ", attenuation " + fmt(attenuated);
  report(5, "noise loudness properties", pass, detail);
}

void criterion_6_regression_recovery() {
  const auto start = std::chrono::steady_clock::now();
  const std::vector<double> truth{-0.5, 0.0, 0.5, -0.5, 0.0, 0.5};
  int passes = 0;
  for (int seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(9000 + static_cast<std::uint64_t>(seed));
    std::normal_distribution<double> noise(0.0, 0.1);
    std::vector<health::Observation> data;
    for (std::size_t t = 0; t < truth.size(); ++t) {
      for (int c = 0; c < 6; ++c) {
        for (int run = 1; run <= 3; ++run) {
          health::Observation obs;
          obs.pair = "P" + std::to_string(t / 2);
          obs.side = t % 2 == 0 ? session::Side::left : session::Side::right;
          obs.run = run;
          obs.metrics["m"] = static_cast<double>(c);
          obs.metrics["y"] = 2.0 * c + truth[t] + noise(rng);
          data.push_back(std::move(obs));
        }
      }
    }
    const health::ModelFit fit = health::fit(data, {"y", {"m"}, std::nullopt});
    bool ok = std::abs(fit.term("m").estimate - 2.0) <= 0.1;
    for (std::size_t t = 0; t < truth.size(); ++t) {
      ok = ok && std::abs(fit.intercepts[t].second - truth[t]) <= 0.15;
    }
    if (ok) ++passes;
  }
  const double elapsed = seconds_since(start);
  report(6, "regression recovery", passes >= 95 && elapsed < 10.0,
         std::to_string(passes) + "/100 seeds, " + fmt(elapsed) + "s");
}

void criterion_7_null_source_effect() {
  int insignificant = 0;
  for (int seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(40000 + static_cast<std::uint64_t>(seed));
    std::normal_distribution<double> noise(0.0, 0.1);
    std::vector<health::Observation> data;
    for (int t = 0; t < 6; ++t) {
      for (int c = 0; c < 6; ++c) {
        for (int rep = 0; rep < 2; ++rep) {
          // Mic and phone streams generated by the same law, independent
          // noise draws; the source flag carries no information.
          health::Observation obs;
          obs.pair = "P" + std::to_string(t / 2);
          obs.side = t % 2 == 0 ? session::Side::left : session::Side::right;
          obs.source = rep == 0 ? session::Source::mic : session::Source::phone;
          obs.metrics["m"] = static_cast<double>(c);
          obs.metrics["y"] = 2.0 * c + 0.25 * (t % 3) + noise(rng);
          data.push_back(std::move(obs));
        }
      }
    }
    const health::ModelFit fit = health::fit(data, {"y", {"m", "source"}, std::nullopt});
    if (std::abs(fit.term("source").t_stat) < 2.0) ++insignificant;
  }
  report(7, "null source effect", insignificant >= 90,
         std::to_string(insignificant) + "/100 replications with |t| < 2");
}

void criterion_8_end_to_end_trajectory() {
  const auto start = std::chrono::steady_clock::now();
  Scratch scratch;
  bool pass = true;
  std::string detail;

  const std::filesystem::path profile_path = scratch.dir / "profile.json";
  {
    std::ofstream out(profile_path);
    out << R"({
  "session": {"pairs": ["Alpha"], "sides": ["left", "right"], "sources": ["mic"], "runs": 1},
  "signals": {"kinds": ["sweep", "tone"]},
  "cycles": [
    {"cycle": 0},
    {"cycle": 1, "broadband_gain_db": -4, "clip_drive": 1.5},
    {"cycle": 2, "broadband_gain_db": -8, "clip_drive": 2.0},
    {"cycle": 3, "broadband_gain_db": -12, "clip_drive": 2.5},
    {"cycle": 4, "broadband_gain_db": -16, "clip_drive": 3.0},
    {"cycle": 5, "broadband_gain_db": -20, "clip_drive": 3.5},
    {"cycle": 6, "failure": true}
  ]
})";
  }

  commands::SimulateOptions sim;
  sim.profile = profile_path;
  sim.out_dir = scratch.dir / "corpus";
  sim.seed = 1;
  commands::run_simulate(sim);

  commands::AnalyzeOptions analyze;
  analyze.manifest = scratch.dir / "corpus" / "manifest.json";
  analyze.out_dir = scratch.dir / "analysis";
  const commands::AnalysisOutput output = commands::run_analyze(analyze);
  pass = pass && output.table.errors.empty();

  // Per-transducer metric sequences over cycles 0..5.
  std::map<std::string, std::map<int, double>> thd_by_transducer;
  std::map<std::string, std::map<int, double>> mss_by_transducer;
  int failure_rows = 0;
  int mismarked = 0;
  for (const auto& row : output.table.rows) {
    const std::string key = row.pair + ":" + session::to_string(row.side);
    if (row.cycle == 6) {
      ++failure_rows;
      if (row.measurable || row.thd_dbc || row.difference_mss || row.correlation ||
          row.rms_noise_loudness) {
        ++mismarked;
      }
      continue;
    }
    if (row.thd_dbc) thd_by_transducer[key][row.cycle] = *row.thd_dbc;
    if (row.difference_mss) mss_by_transducer[key][row.cycle] = *row.difference_mss;
  }
  pass = pass && failure_rows == 4 && mismarked == 0;  // 2 signals x 2 sides
  detail += "failure rows " + std::to_string(failure_rows);

  bool monotone = true;
  for (const auto* family : {&thd_by_transducer, &mss_by_transducer}) {
    for (const auto& [key, series] : *family) {
      double previous = -1e300;
      for (int c = 0; c <= 5; ++c) {
        const auto it = series.find(c);
        if (it == series.end()) {
          monotone = false;
          continue;
        }
        monotone = monotone && it->second >= previous;
        previous = it->second;
      }
    }
  }
  pass = pass && monotone;
  detail += std::string(", sequences ") + (monotone ? "nondecreasing" : "NOT monotone");

  const std::vector<health::Observation> observations =
      health::observations_from_results(output.table);
  const auto with_metric = [&](const std::string& name) {
    std::vector<health::Observation> subset;
    for (const auto& obs : observations) {
      if (obs.metrics.count(name) > 0) subset.push_back(obs);
    }
    return subset;
  };
  const health::ModelFit thd_fit =
      health::fit(with_metric("thd_dbc"), {"cycle", {"thd_dbc"}, std::nullopt});
  const health::ModelFit mss_fit = health::fit(with_metric("difference_mss"),
                                               {"cycle", {"difference_mss"}, std::nullopt});
  pass = pass && thd_fit.term("thd_dbc").estimate > 0.0 &&
         thd_fit.term("thd_dbc").t_stat > 2.0;
  pass = pass && mss_fit.term("difference_mss").estimate > 0.0 &&
         mss_fit.term("difference_mss").t_stat > 2.0;
  detail += ", t(thd) " + fmt(thd_fit.term("thd_dbc").t_stat) + ", t(mss) " +
            fmt(mss_fit.term("difference_mss").t_stat);

  const double elapsed = seconds_since(start);
  pass = pass && elapsed < 120.0;
  detail += ", " + fmt(elapsed) + "s";
  report(8, "end-to-end monotone trajectory", pass, detail);
}

void criterion_9_interaction_structure() {
  // Difference is informative for the cycle only while correlation is high.
  std::mt19937_64 rng(777);
  std::uniform_real_distribution<double> corr_dist(0.4, 1.0);
  std::uniform_real_distribution<double> diff_dist(0.0, 60.0);
  std::normal_distribution<double> noise(0.0, 0.05);
  const double beta_d = -0.04;
  const double beta_cd = 0.08;
  std::vector<health::Observation> data;
  for (int t = 0; t < 6; ++t) {
    for (int i = 0; i < 40; ++i) {
      health::Observation obs;
      obs.pair = "P" + std::to_string(t / 2);
      obs.side = t % 2 == 0 ? session::Side::left : session::Side::right;
      const double c = corr_dist(rng);
      const double d = diff_dist(rng);
      obs.metrics["correlation"] = c;
      obs.metrics["difference_mss"] = d;
      obs.metrics["y"] = -2.0 * c + (beta_d + beta_cd * c) * d + noise(rng);
      data.push_back(std::move(obs));
    }
  }
  const health::ModelFit fit = health::fit(
      data, {"y",
             {"correlation", "difference_mss"},
             std::pair<std::string, std::string>{"correlation", "difference_mss"}});
  const double at_high =
      health::marginal_effect(fit, "difference_mss", {{"correlation", 1.0}});
  const double at_half =
      health::marginal_effect(fit, "difference_mss", {{"correlation", 0.5}});
  const double truth_high = beta_d + beta_cd * 1.0;
  const bool pass = at_high > at_half && at_high * truth_high > 0.0;
  report(9, "interaction structure", pass,
         "effect at corr 1.0 = " + fmt(at_high) + ", at 0.5 = " + fmt(at_half));
}

void criterion_10_determinism() {
  Scratch scratch;
  bool pass = true;
  std::string detail;

  const std::filesystem::path profile_path = scratch.dir / "profile.json";
  {
    std::ofstream out(profile_path);
    out << R"({
  "session": {"pairs": ["Alpha"], "sides": ["left"], "sources": ["mic", "phone"], "runs": 2},
  "signals": {"kinds": ["sweep", "tone"],
              "sweep": {"duration_s": 2.0}, "tone": {"duration_s": 2.0}},
  "cycles": [
    {"cycle": 0},
    {"cycle": 1, "broadband_gain_db": -3, "clip_drive": 1.5, "noise_snr_db": 40},
    {"cycle": 2, "failure": true}
  ]
})";
  }

  commands::SimulateOptions sim;
  sim.profile = profile_path;
  sim.seed = 99;
  sim.out_dir = scratch.dir / "a";
  const session::SessionManifest manifest = commands::run_simulate(sim);
  sim.out_dir = scratch.dir / "b";
  commands::run_simulate(sim);

  bool identical_corpora =
      read_file(scratch.dir / "a" / "manifest.json") ==
      read_file(scratch.dir / "b" / "manifest.json");
  for (const auto& entry : manifest.entries) {
    identical_corpora = identical_corpora &&
                        read_file(scratch.dir / "a" / entry.path) ==
                            read_file(scratch.dir / "b" / entry.path);
  }
  pass = pass && identical_corpora;
  detail += std::string("corpora ") + (identical_corpora ? "identical" : "DIFFER");

  commands::AnalyzeOptions analyze;
  analyze.manifest = scratch.dir / "a" / "manifest.json";
  analyze.out_dir = scratch.dir / "analysis1";
  commands::run_analyze(analyze);
  analyze.out_dir = scratch.dir / "analysis2";
  commands::run_analyze(analyze);
  const bool identical_tables =
      read_file(scratch.dir / "analysis1" / "results.csv") ==
          read_file(scratch.dir / "analysis2" / "results.csv") &&
      read_file(scratch.dir / "analysis1" / "results.json") ==
          read_file(scratch.dir / "analysis2" / "results.json");
  pass = pass && identical_tables;
  detail += std::string(", tables ") + (identical_tables ? "identical" : "DIFFER");
  report(10, "determinism", pass, detail);
}

}  // namespace

int main() {
  std::printf("acceptance suite\n");
  criterion_1_thd_correctness();
  criterion_2_thd_gain_invariance();
  criterion_3_response_fidelity();
  criterion_4_correlation_mss_semantics();
  criterion_5_noise_loudness_properties();
  criterion_6_regression_recovery();
  criterion_7_null_source_effect();
  criterion_8_end_to_end_trajectory();
  criterion_9_interaction_structure();
  criterion_10_determinism();
  if (failures == 0) {
    std::printf("all criteria passed\n");
  } else {
    std::printf("%d criteria FAILED\n", failures);
  }
  return failures == 0 ? 0 : 1;
}

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <set>

#include <json.hpp>

#include "budcheck/commands.hpp"
#include "budcheck/errors.hpp"
#include "budcheck/health.hpp"
#include "budcheck/svg.hpp"

namespace budcheck::commands {

namespace {

using nlohmann::json;

constexpr const char* kMetricColumns[] = {"thd_dbc", "rms_noise_loudness", "correlation",
                                          "difference_mss"};

std::optional<double> metric_of(const session::ResultsRow& row, const std::string& name) {
  if (name == "thd_dbc") return row.thd_dbc;
  if (name == "rms_noise_loudness") return row.rms_noise_loudness;
  if (name == "correlation") return row.correlation;
  if (name == "difference_mss") return row.difference_mss;
  return std::nullopt;
}

std::string sanitize(const std::string& text) {
  std::string out;
  for (char c : text) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      out += c;
    } else if (!out.empty() && out.back() != '_') {
      out += '_';
    }
  }
  while (!out.empty() && out.back() == '_') out.pop_back();
  return out;
}

// Variance of w' beta from the stored coefficient covariance.
double prediction_variance(const health::ModelFit& fit, const std::vector<double>& w) {
  const std::size_t p = w.size();
  double acc = 0.0;
  for (std::size_t r = 0; r < p; ++r) {
    if (w[r] == 0.0) continue;
    for (std::size_t c = 0; c < p; ++c) {
      acc += w[r] * fit.coef_cov[r * p + c] * w[c];
    }
  }
  return acc;
}

// Weight vector for "the average transducer" at the given term values.
std::vector<double> mean_weights(const health::ModelFit& fit,
                                 const std::map<std::string, double>& term_values) {
  const std::size_t n_groups = fit.intercepts.size();
  std::vector<double> w(n_groups + fit.terms.size(), 0.0);
  for (std::size_t g = 0; g < n_groups; ++g) w[g] = 1.0 / static_cast<double>(n_groups);
  for (std::size_t t = 0; t < fit.terms.size(); ++t) {
    w[n_groups + t] = term_values.at(fit.terms[t].name);
  }
  return w;
}

double evaluate_mean(const health::ModelFit& fit,
                     const std::map<std::string, double>& term_values) {
  double acc = fit.mean_intercept();
  for (const auto& t : fit.terms) acc += t.estimate * term_values.at(t.name);
  return acc;
}

void plot_metric_vs_cycle(const session::ResultsTable& table, const std::string& metric,
                          const std::filesystem::path& out_dir) {
  std::map<std::string, std::map<int, std::vector<double>>> by_series;
  for (const auto& row : table.rows) {
    const auto value = metric_of(row, metric);
    if (!row.measurable || !value) continue;
    const std::string key = row.pair + " " + session::to_string(row.side) + " " +
                            session::to_string(row.source);
    by_series[key][row.cycle].push_back(*value);
  }
  if (by_series.empty()) return;

  svg::Plot plot(metric + " by cycle", "cycle", metric);
  std::size_t color = 0;
  for (const auto& [label, cycles] : by_series) {
    svg::Series line{label, svg::palette_color(color), {}, true, false};
    svg::Series dots{"", svg::palette_color(color), {}, false, true};
    for (const auto& [cycle, values] : cycles) {
      double mean = 0.0;
      for (double v : values) {
        mean += v;
        dots.points.push_back({static_cast<double>(cycle), v});
      }
      line.points.push_back({static_cast<double>(cycle),
                             mean / static_cast<double>(values.size())});
    }
    plot.add_series(std::move(line));
    plot.add_series(std::move(dots));
    ++color;
  }
  plot.write(out_dir / ("metric_" + metric + ".svg"));
}

void plot_fitted_trend(const health::ModelFit& fit, const health::FitSpec& spec,
                       std::span<const health::Observation> observations,
                       const std::filesystem::path& out_dir,
                       const std::string& file_stem) {
  if (fit.interaction) {
    // Marginal effect of one interaction factor against the other.
    const auto& [a, b] = *fit.interaction;
    double lo = 0.0, hi = 1.0;
    bool first = true;
    for (const auto& obs : observations) {
      const auto it = obs.metrics.find(a);
      if (it == obs.metrics.end()) continue;
      if (first || it->second < lo) lo = it->second;
      if (first || it->second > hi) hi = it->second;
      first = false;
    }
    svg::Plot plot("effect of " + b + " conditioned on " + a, a,
                   "d(" + fit.response + ")/d(" + b + ")");
    svg::Series line{"marginal effect", svg::palette_color(0), {}, true, false};
    svg::Band band;
    const std::size_t n_groups = fit.intercepts.size();
    std::size_t b_col = 0, ab_col = 0;
    for (std::size_t t = 0; t < fit.terms.size(); ++t) {
      if (fit.terms[t].name == b) b_col = n_groups + t;
      if (fit.terms[t].name == a + ":" + b) ab_col = n_groups + t;
    }
    for (int i = 0; i <= 40; ++i) {
      const double c = lo + (hi - lo) * i / 40.0;
      const double effect = health::marginal_effect(fit, b, {{a, c}});
      std::vector<double> w(n_groups + fit.terms.size(), 0.0);
      w[b_col] = 1.0;
      w[ab_col] = c;
      const double se = std::sqrt(prediction_variance(fit, w));
      line.points.push_back({c, effect});
      band.lower.push_back({c, effect - 2.0 * se});
      band.upper.push_back({c, effect + 2.0 * se});
    }
    plot.add_band(std::move(band));
    plot.add_series(std::move(line));
    plot.write(out_dir / (file_stem + ".svg"));
    return;
  }

  // Metric term whose trend is displayed; "source" only splits the lines.
  std::string metric_term;
  for (const auto& name : spec.terms) {
    if (name != "source" && name != "cycle") metric_term = name;
  }

  if (fit.response == "cycle" && !metric_term.empty()) {
    // The model predicts cycle; cycle is displayed on the x-axis with the
    // band drawn horizontally in the prediction direction.
    double lo = 0.0, hi = 0.0;
    bool first = true;
    for (const auto& obs : observations) {
      const auto it = obs.metrics.find(metric_term);
      if (it == obs.metrics.end()) continue;
      if (first || it->second < lo) lo = it->second;
      if (first || it->second > hi) hi = it->second;
      first = false;
    }
    svg::Plot plot(fit.response + " ~ " + metric_term, "cycle", metric_term);
    svg::Series dots{"observations", "#555555", {}, false, true};
    for (const auto& obs : observations) {
      const auto it = obs.metrics.find(metric_term);
      if (it != obs.metrics.end()) {
        dots.points.push_back({static_cast<double>(obs.cycle), it->second});
      }
    }
    svg::Series line{"fit", svg::palette_color(1), {}, true, false};
    svg::Band band;
    for (int i = 0; i <= 40; ++i) {
      const double m = lo + (hi - lo) * i / 40.0;
      std::map<std::string, double> values;
      for (const auto& t : fit.terms) values[t.name] = t.name == metric_term ? m : 0.0;
      const double cycle_hat = evaluate_mean(fit, values);
      const double se = std::sqrt(prediction_variance(fit, mean_weights(fit, values)));
      line.points.push_back({cycle_hat, m});
      band.lower.push_back({cycle_hat - 2.0 * se, m});
      band.upper.push_back({cycle_hat + 2.0 * se, m});
    }
    plot.add_band(std::move(band));
    plot.add_series(std::move(line));
    plot.add_series(std::move(dots));
    plot.write(out_dir / (file_stem + ".svg"));
    return;
  }

  // Response explained by cycle (plus optionally source): response on y.
  const bool has_source =
      std::find(spec.terms.begin(), spec.terms.end(), "source") != spec.terms.end();
  int max_cycle = 0;
  for (const auto& obs : observations) max_cycle = std::max(max_cycle, obs.cycle);

  svg::Plot plot(fit.response + " ~ cycle" + (has_source ? " + source" : ""), "cycle",
                 fit.response);
  svg::Series dots{"observations", "#555555", {}, false, true};
  for (const auto& obs : observations) {
    const auto it = obs.metrics.find(fit.response);
    if (it != obs.metrics.end()) {
      dots.points.push_back({static_cast<double>(obs.cycle), it->second});
    }
  }
  const std::vector<double> source_levels =
      has_source ? std::vector<double>{0.0, 1.0} : std::vector<double>{0.0};
  std::size_t color = 1;
  for (double source : source_levels) {
    svg::Series line{has_source ? (source == 0.0 ? "mic" : "phone") : "fit",
                     svg::palette_color(color++),
                     {},
                     true,
                     false};
    svg::Band band;
    for (int c = 0; c <= max_cycle; ++c) {
      std::map<std::string, double> values;
      for (const auto& t : fit.terms) {
        values[t.name] = t.name == "cycle" ? static_cast<double>(c)
                        : t.name == "source" ? source
                                             : 0.0;
      }
      const double y = evaluate_mean(fit, values);
      const double se = std::sqrt(prediction_variance(fit, mean_weights(fit, values)));
      line.points.push_back({static_cast<double>(c), y});
      band.lower.push_back({static_cast<double>(c), y - 2.0 * se});
      band.upper.push_back({static_cast<double>(c), y + 2.0 * se});
    }
    plot.add_band(std::move(band));
    plot.add_series(std::move(line));
  }
  plot.add_series(std::move(dots));
  plot.write(out_dir / (file_stem + ".svg"));
}

void plot_response_overlays(const std::filesystem::path& responses_path,
                            const std::filesystem::path& out_dir) {
  std::ifstream file(responses_path);
  if (!file) return;
  json j;
  try {
    j = json::parse(file);
  } catch (const json::parse_error& e) {
    std::cerr << "report: skipping overlays, " << responses_path.string() << ": "
              << e.what() << '\n';
    return;
  }
  const std::vector<double> grid = j.at("grid_hz").get<std::vector<double>>();

  // (pair, side, source) -> cycle -> accumulated curves over runs.
  std::map<std::string, std::map<int, std::pair<std::vector<double>, int>>> groups;
  for (const json& jr : j.at("responses")) {
    const std::string key = jr.at("pair").get<std::string>() + "_" +
                            jr.at("side").get<std::string>() + "_" +
                            jr.at("source").get<std::string>();
    const int cycle = jr.at("cycle").get<int>();
    const auto curve = jr.at("magnitude_db").get<std::vector<double>>();
    auto& [sum, count] = groups[key][cycle];
    if (sum.empty()) sum.assign(curve.size(), 0.0);
    for (std::size_t i = 0; i < curve.size(); ++i) sum[i] += curve[i];
    ++count;
  }

  for (const auto& [key, cycles] : groups) {
    svg::Plot plot("frequency response " + key, "frequency (Hz)", "magnitude (dB)");
    plot.set_log_x(true);
    for (const auto& [cycle, acc] : cycles) {
      const auto& [sum, count] = acc;
      svg::Series series{"LC" + std::to_string(cycle),
                         svg::palette_color(static_cast<std::size_t>(cycle)),
                         {},
                         true,
                         false};
      for (std::size_t i = 0; i < grid.size() && i < sum.size(); ++i) {
        series.points.push_back({grid[i], sum[i] / count});
      }
      plot.add_series(std::move(series));
    }
    plot.write(out_dir / ("response_" + key + ".svg"));
  }
}

json fit_to_json(const std::string& formula, const health::ModelFit& fit) {
  json j;
  j["formula"] = formula;
  j["response"] = fit.response;
  j["n_obs"] = fit.n_obs;
  j["dof"] = fit.dof;
  j["residual_sd"] = fit.residual_sd;
  j["terms"] = json::array();
  for (const auto& t : fit.terms) {
    j["terms"].push_back(
        json{{"name", t.name}, {"estimate", t.estimate}, {"se", t.se}, {"t", t.t_stat}});
  }
  j["intercepts"] = json::object();
  for (const auto& [key, value] : fit.intercepts) j["intercepts"][key] = value;
  return j;
}

std::string fmt6(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

void append_fit_text(std::ostream& out, const std::string& formula,
                     const health::ModelFit& fit) {
  out << "model: " << formula << '\n';
  out << "  n_obs " << fit.n_obs << ", dof " << fit.dof << ", residual_sd "
      << fmt6(fit.residual_sd) << '\n';
  out << "  term                          estimate          SE           t\n";
  for (const auto& t : fit.terms) {
    char line[160];
    std::snprintf(line, sizeof line, "  %-28s %12.6g %12.6g %10.4g\n", t.name.c_str(),
                  t.estimate, t.se, t.t_stat);
    out << line;
  }
  out << "  intercepts:";
  for (const auto& [key, value] : fit.intercepts) {
    out << ' ' << key << '=' << fmt6(value);
  }
  out << '\n';
}

}  // namespace

void run_report(const ReportOptions& options) {
  const session::ResultsTable table = session::ResultsTable::load(options.results);
  if (table.rows.empty()) {
    fail(errc::insufficient_data, options.results.string() + " contains no rows");
  }
  std::filesystem::create_directories(options.out_dir);

  for (const char* metric : kMetricColumns) {
    plot_metric_vs_cycle(table, metric, options.out_dir);
  }
  plot_response_overlays(options.results.parent_path() / "responses.json",
                         options.out_dir);

  const std::vector<health::Observation> observations =
      health::observations_from_results(table);

  json models_json;
  models_json["models"] = json::array();
  models_json["skipped"] = json::array();
  std::ofstream text(options.out_dir / "models.txt", std::ios::trunc);

  for (const std::string& formula : options.models) {
    try {
      const health::FitSpec spec = health::parse_formula(formula);
      // Only observations carrying every used column enter the fit.
      std::vector<health::Observation> usable;
      for (const auto& obs : observations) {
        bool ok = true;
        std::vector<std::string> needed = spec.terms;
        needed.push_back(spec.response);
        for (const auto& name : needed) {
          if (name == "cycle" || name == "source") continue;
          ok = ok && obs.metrics.count(name) > 0;
        }
        if (ok) usable.push_back(obs);
      }
      const health::ModelFit fit = health::fit(usable, spec);
      json jm = fit_to_json(formula, fit);
      append_fit_text(text, formula, fit);

      if (fit.response == "cycle") {
        // Health summary: predictions at each transducer's latest
        // measurable metrics.
        json health_json;
        health_json["failure_cycle"] = options.failure_cycle;
        health_json["per_transducer"] = json::object();
        std::map<std::string, std::pair<int, std::map<std::string, double>>> latest;
        std::map<std::string, std::map<std::string, std::pair<double, int>>> sums;
        for (const auto& obs : usable) {
          const std::string key = obs.transducer();
          auto& slot = latest[key];
          if (obs.cycle > slot.first) {
            slot.first = obs.cycle;
            sums[key].clear();
          }
          if (obs.cycle == slot.first) {
            for (const auto& name : spec.terms) {
              double value = name == "source"
                                 ? (obs.source == session::Source::phone ? 1.0 : 0.0)
                                 : obs.metrics.at(name);
              auto& [total, count] = sums[key][name];
              total += value;
              ++count;
            }
          }
        }
        text << "  health (failure_cycle=" << options.failure_cycle << "):";
        for (auto& [key, slot] : latest) {
          std::map<std::string, double> values;
          for (const auto& [name, acc] : sums[key]) {
            values[name] = acc.first / acc.second;
          }
          const double predicted = health::predict(fit, values, key);
          const double index = health::health_index(fit, values, key, options.failure_cycle);
          health_json["per_transducer"][key] = json{
              {"at_cycle", slot.first}, {"predicted_cycle", predicted}, {"health_index", index}};
          text << ' ' << key << ": predicted=" << fmt6(predicted)
               << " index=" << fmt6(index);
        }
        text << '\n';
        jm["health"] = std::move(health_json);
      }
      if (fit.interaction) {
        const auto& [a, b] = *fit.interaction;
        json effects = json::array();
        for (double c : {0.5, 0.75, 1.0}) {
          effects.push_back(json{{a, c},
                                 {"effect_of_" + b, health::marginal_effect(fit, b, {{a, c}})}});
        }
        jm["marginal_effects"] = std::move(effects);
      }
      models_json["models"].push_back(std::move(jm));

      plot_fitted_trend(fit, spec, usable, options.out_dir,
                        "model_" + sanitize(formula));
      text << '\n';
    } catch (const Error& e) {
      std::cerr << "report: skipping model '" << formula << "': " << e.what() << '\n';
      models_json["skipped"].push_back(json{{"formula", formula}, {"reason", e.what()}});
      text << "model: " << formula << "\n  skipped: " << e.what() << "\n\n";
    }
  }

  std::ofstream models_file(options.out_dir / "models.json", std::ios::trunc);
  if (!models_file) fail(errc::io, "cannot write models.json");
  models_file << models_json.dump(2) << '\n';
}

}  // namespace budcheck::commands

#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "budcheck/session.hpp"

namespace budcheck::health {

/// One analyzed data point. The transducer key is (pair, side); metrics
/// may be a subset (failure cycles carry none).
struct Observation {
  std::string pair;
  session::Side side = session::Side::left;
  session::Source source = session::Source::mic;
  int run = 1;
  int cycle = 0;
  std::map<std::string, double> metrics;

  std::string transducer() const {
    return pair + ":" + session::to_string(side);
  }
};

/// What to fit: response and fixed-effect terms by name. Valid names are
/// "cycle", "source" (coded mic=0, phone=1), and any metric column. An
/// interaction adds the product column of two terms.
struct FitSpec {
  std::string response;
  std::vector<std::string> terms;
  std::optional<std::pair<std::string, std::string>> interaction;
};

/// Parses "response ~ a + b" or "response ~ a * b" (the * form expands to
/// a + b + a:b). Metric aliases: thd -> thd_dbc, rms -> rms_noise_loudness,
/// difference/mss -> difference_mss.
FitSpec parse_formula(const std::string& text);

struct TermEstimate {
  std::string name;
  double estimate = 0.0;
  double se = 0.0;
  double t_stat = 0.0;
};

/// Least-squares fit with one indicator intercept per transducer plus the
/// requested fixed-effect columns.
struct ModelFit {
  std::string response;
  std::vector<TermEstimate> terms;  // fixed terms, then "a:b" when present
  std::vector<std::pair<std::string, double>> intercepts;  // by transducer key
  std::optional<std::pair<std::string, std::string>> interaction;
  double residual_sd = 0.0;
  std::size_t n_obs = 0;
  std::size_t dof = 0;

  /// Coefficient covariance, row-major over [intercepts..., terms...];
  /// feeds the +-2 SE bands in reports.
  std::vector<double> coef_cov;

  const TermEstimate& term(const std::string& name) const;
  double intercept(const std::string& transducer) const;
  double mean_intercept() const;
};

/// Observations missing any used value are rejected; failure-cycle rows
/// must be filtered out by the caller (analysis tables mark them
/// unmeasurable). Throws errc::insufficient_data or errc::rank_deficient.
ModelFit fit(std::span<const Observation> observations, const FitSpec& spec);

/// Linear predictor at the given term values for one transducer.
/// Unclamped; callers may see values outside [0, max cycle].
double predict(const ModelFit& fit, const std::map<std::string, double>& values,
               const std::string& transducer);

/// 1 - clamp(predicted / failure_cycle, 0, 1): 1 is pristine, 0 is at or
/// beyond failure.
double health_index(const ModelFit& fit, const std::map<std::string, double>& values,
                    const std::string& transducer, double failure_cycle);

/// d(response)/d(term) at the conditioning values:
/// beta_term + beta_interaction * partner value. Requires a fit with an
/// interaction involving term.
double marginal_effect(const ModelFit& fit, const std::string& term,
                       const std::map<std::string, double>& at);

/// Measurable results rows as observations (metric columns that are
/// present become metric values).
std::vector<Observation> observations_from_results(const session::ResultsTable& table);

}  // namespace budcheck::health

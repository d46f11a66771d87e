#include "budcheck/health.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <set>

#include "budcheck/errors.hpp"

namespace budcheck::health {

namespace {

std::string canonical_name(std::string name) {
  // Trim surrounding whitespace.
  const auto first = name.find_first_not_of(" \t");
  const auto last = name.find_last_not_of(" \t");
  if (first == std::string::npos) return {};
  name = name.substr(first, last - first + 1);
  if (name == "thd") return "thd_dbc";
  if (name == "rms") return "rms_noise_loudness";
  if (name == "difference" || name == "mss") return "difference_mss";
  return name;
}

double resolve_value(const Observation& obs, const std::string& name) {
  if (name == "cycle") return static_cast<double>(obs.cycle);
  if (name == "source") return obs.source == session::Source::phone ? 1.0 : 0.0;
  const auto it = obs.metrics.find(name);
  if (it == obs.metrics.end()) {
    fail(errc::missing_value, "observation (" + obs.transducer() + ", cycle " +
                                  std::to_string(obs.cycle) + ") has no value for '" +
                                  name + "'");
  }
  return it->second;
}

}  // namespace

FitSpec parse_formula(const std::string& text) {
  const auto tilde = text.find('~');
  if (tilde == std::string::npos) {
    fail(errc::bad_argument, "formula must look like 'response ~ term [+ term]'");
  }
  FitSpec spec;
  spec.response = canonical_name(text.substr(0, tilde));
  if (spec.response.empty()) fail(errc::bad_argument, "formula has an empty response");

  std::string rhs = text.substr(tilde + 1);
  std::size_t pos = 0;
  while (pos <= rhs.size()) {
    const auto plus = rhs.find('+', pos);
    const std::string piece =
        rhs.substr(pos, plus == std::string::npos ? std::string::npos : plus - pos);
    const auto star = piece.find('*');
    if (star != std::string::npos) {
      const std::string a = canonical_name(piece.substr(0, star));
      const std::string b = canonical_name(piece.substr(star + 1));
      if (a.empty() || b.empty()) fail(errc::bad_argument, "malformed interaction term");
      if (spec.interaction) fail(errc::bad_argument, "only one interaction is supported");
      spec.terms.push_back(a);
      spec.terms.push_back(b);
      spec.interaction = {a, b};
    } else {
      const std::string name = canonical_name(piece);
      if (name.empty()) fail(errc::bad_argument, "formula has an empty term");
      spec.terms.push_back(name);
    }
    if (plus == std::string::npos) break;
    pos = plus + 1;
  }
  if (spec.terms.empty()) fail(errc::bad_argument, "formula has no terms");
  return spec;
}

const TermEstimate& ModelFit::term(const std::string& name) const {
  for (const auto& t : terms) {
    if (t.name == name) return t;
  }
  fail(errc::unknown_key, "term '" + name + "' not in fit");
}

double ModelFit::intercept(const std::string& transducer) const {
  for (const auto& [key, value] : intercepts) {
    if (key == transducer) return value;
  }
  fail(errc::unknown_key, "transducer '" + transducer + "' not in fit");
}

double ModelFit::mean_intercept() const {
  double acc = 0.0;
  for (const auto& [key, value] : intercepts) acc += value;
  return acc / static_cast<double>(intercepts.size());
}

ModelFit fit(std::span<const Observation> observations, const FitSpec& spec) {
  const std::size_t n = observations.size();
  if (n == 0) fail(errc::insufficient_data, "no observations");

  std::vector<std::string> transducers;
  std::map<std::string, std::size_t> transducer_index;
  std::map<std::string, std::size_t> transducer_count;
  for (const auto& obs : observations) {
    const std::string key = obs.transducer();
    if (transducer_index.emplace(key, transducers.size()).second) {
      transducers.push_back(key);
    }
    ++transducer_count[key];
  }
  for (const auto& [key, count] : transducer_count) {
    if (count < 2) {
      fail(errc::insufficient_data, "transducer " + key + " has fewer than 2 observations");
    }
  }

  std::set<double> distinct_responses;
  for (const auto& obs : observations) {
    distinct_responses.insert(resolve_value(obs, spec.response));
  }
  if (distinct_responses.size() < 2) {
    fail(errc::insufficient_data, "response '" + spec.response + "' never varies");
  }

  const std::size_t n_groups = transducers.size();
  const std::size_t n_terms = spec.terms.size() + (spec.interaction ? 1 : 0);
  const std::size_t p = n_groups + n_terms;
  if (n < p + 1) {
    fail(errc::insufficient_data, "need at least " + std::to_string(p + 1) +
                                      " observations for " + std::to_string(p) +
                                      " parameters");
  }

  Eigen::MatrixXd design = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n),
                                                 static_cast<Eigen::Index>(p));
  Eigen::VectorXd response(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const auto& obs = observations[i];
    const auto row = static_cast<Eigen::Index>(i);
    design(row, static_cast<Eigen::Index>(transducer_index.at(obs.transducer()))) = 1.0;
    for (std::size_t t = 0; t < spec.terms.size(); ++t) {
      design(row, static_cast<Eigen::Index>(n_groups + t)) =
          resolve_value(obs, spec.terms[t]);
    }
    if (spec.interaction) {
      design(row, static_cast<Eigen::Index>(p - 1)) =
          resolve_value(obs, spec.interaction->first) *
          resolve_value(obs, spec.interaction->second);
    }
    response(row) = resolve_value(obs, spec.response);
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  qr.setThreshold(1e-10);
  if (qr.rank() < static_cast<Eigen::Index>(p)) {
    fail(errc::rank_deficient,
         "design matrix is rank deficient (a term may be constant or collinear)");
  }
  const Eigen::VectorXd beta = qr.solve(response);
  const Eigen::VectorXd residuals = response - design * beta;
  const std::size_t dof = n - p;
  const double sigma2 = residuals.squaredNorm() / static_cast<double>(dof);
  const Eigen::MatrixXd xtx_inv = (design.transpose() * design).inverse();
  const Eigen::MatrixXd cov = sigma2 * xtx_inv;

  ModelFit result;
  result.response = spec.response;
  result.interaction = spec.interaction;
  result.residual_sd = std::sqrt(sigma2);
  result.n_obs = n;
  result.dof = dof;
  for (std::size_t g = 0; g < n_groups; ++g) {
    result.intercepts.emplace_back(transducers[g], beta(static_cast<Eigen::Index>(g)));
  }
  std::vector<std::string> term_names = spec.terms;
  if (spec.interaction) {
    term_names.push_back(spec.interaction->first + ":" + spec.interaction->second);
  }
  for (std::size_t t = 0; t < n_terms; ++t) {
    const auto col = static_cast<Eigen::Index>(n_groups + t);
    TermEstimate est;
    est.name = term_names[t];
    est.estimate = beta(col);
    est.se = std::sqrt(cov(col, col));
    est.t_stat = est.se > 0.0 ? est.estimate / est.se : 0.0;
    result.terms.push_back(std::move(est));
  }
  result.coef_cov.resize(p * p);
  for (std::size_t r = 0; r < p; ++r) {
    for (std::size_t c = 0; c < p; ++c) {
      result.coef_cov[r * p + c] =
          cov(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    }
  }
  return result;
}

double predict(const ModelFit& fit, const std::map<std::string, double>& values,
               const std::string& transducer) {
  double acc = fit.intercept(transducer);
  const auto value_of = [&](const std::string& name) {
    const auto it = values.find(name);
    if (it == values.end()) {
      fail(errc::missing_value, "no value provided for term '" + name + "'");
    }
    return it->second;
  };
  for (const auto& t : fit.terms) {
    if (t.name.find(':') != std::string::npos) continue;  // interaction below
    acc += t.estimate * value_of(t.name);
  }
  if (fit.interaction) {
    const auto& [a, b] = *fit.interaction;
    acc += fit.term(a + ":" + b).estimate * value_of(a) * value_of(b);
  }
  return acc;
}

double health_index(const ModelFit& fit, const std::map<std::string, double>& values,
                    const std::string& transducer, double failure_cycle) {
  if (!(failure_cycle > 0.0)) fail(errc::bad_argument, "failure_cycle must be > 0");
  const double predicted = predict(fit, values, transducer);
  return 1.0 - std::clamp(predicted / failure_cycle, 0.0, 1.0);
}

double marginal_effect(const ModelFit& fit, const std::string& term,
                       const std::map<std::string, double>& at) {
  if (!fit.interaction) {
    fail(errc::unknown_key, "fit has no interaction term");
  }
  const auto& [a, b] = *fit.interaction;
  if (term != a && term != b) {
    fail(errc::unknown_key, "term '" + term + "' is not part of the interaction");
  }
  const std::string partner = term == a ? b : a;
  const auto it = at.find(partner);
  if (it == at.end()) {
    fail(errc::missing_value, "conditioning value for '" + partner + "' required");
  }
  return fit.term(term).estimate + fit.term(a + ":" + b).estimate * it->second;
}

std::vector<Observation> observations_from_results(const session::ResultsTable& table) {
  std::vector<Observation> out;
  for (const auto& row : table.rows) {
    if (!row.measurable) continue;
    Observation obs;
    obs.pair = row.pair;
    obs.side = row.side;
    obs.source = row.source;
    obs.run = row.run;
    obs.cycle = row.cycle;
    if (row.thd_dbc) obs.metrics["thd_dbc"] = *row.thd_dbc;
    if (row.rms_noise_loudness) obs.metrics["rms_noise_loudness"] = *row.rms_noise_loudness;
    if (row.correlation) obs.metrics["correlation"] = *row.correlation;
    if (row.difference_mss) obs.metrics["difference_mss"] = *row.difference_mss;
    out.push_back(std::move(obs));
  }
  return out;
}

}  // namespace budcheck::health

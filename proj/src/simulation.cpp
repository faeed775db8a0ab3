#include "targetpop/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>

#include "targetpop/parallel.hpp"
#include "targetpop/quadrature.hpp"
#include "targetpop/rng.hpp"
#include "targetpop/root_finding.hpp"

namespace targetpop {

namespace {

using nlohmann::json;

double vector_norm(const std::vector<double>& v, std::size_t from = 0) {
  double ss = 0.0;
  for (std::size_t i = from; i < v.size(); ++i) ss += v[i] * v[i];
  return std::sqrt(ss);
}

void check_scenario(const SimScenario& s) {
  if (s.cohort_size == 0 || s.target_trial_size == 0 ||
      s.target_trial_size >= s.cohort_size)
    throw InputError("scenario: need 0 < target trial size < cohort size");
  if (s.replicates < 1) throw InputError("scenario: need at least 1 replicate");
  if (s.theta_rest.size() != 3)
    throw InputError("scenario: theta_rest must have 3 components");
  if (s.zeta.size() != 4)
    throw InputError("scenario: zeta must have 4 components (intercept, x1..x3)");
  if (s.outcome_kind == OutcomeKind::continuous && !(s.noise_sd > 0.0))
    throw InputError("scenario: noise_sd must be positive");
}

std::vector<Contrast> scenario_contrasts(OutcomeKind kind) {
  if (kind == OutcomeKind::continuous) return {Contrast::difference};
  return {Contrast::odds_ratio, Contrast::difference, Contrast::ratio};
}

}  // namespace

const char* outcome_kind_name(OutcomeKind kind) {
  return kind == OutcomeKind::continuous ? "continuous" : "binary";
}

SimScenario make_scenario(OutcomeKind kind, std::size_t cohort_size,
                          std::size_t target_trial_size, double tau, double psi) {
  SimScenario s;
  s.outcome_kind = kind;
  s.cohort_size = cohort_size;
  s.target_trial_size = target_trial_size;
  s.tau = tau;
  s.psi = psi;
  s.zeta = kind == OutcomeKind::continuous
               ? std::vector<double>{-3.0, 1.0, 1.0, 1.0}
               : std::vector<double>{0.0, 1.0, 1.0, 1.0};
  return s;
}

CalibrationResult calibrate_intercept(const std::vector<double>& theta_rest,
                                      double fraction) {
  if (!(fraction > 0.0 && fraction < 1.0))
    throw InputError("calibrate_intercept: fraction must lie in (0,1)");
  // X * theta_rest is N(0, |theta_rest|^2), so the expectation reduces to a
  // scalar Gaussian integral.
  const double sd = vector_norm(theta_rest);
  const auto objective = [&](double theta0) {
    return expected_expit(theta0, sd) - fraction;
  };
  CalibrationResult out;
  out.value = bisect_root(objective, -5.0, 5.0);
  out.residual = std::abs(objective(out.value));
  if (out.residual > 1e-6)
    throw NumericalError("calibrate_intercept: residual above 1e-6");
  return out;
}

CalibrationResult calibrate_intercept(const std::vector<double>& theta_rest,
                                      std::size_t cohort_size,
                                      std::size_t target_trial_size) {
  if (cohort_size == 0)
    throw InputError("calibrate_intercept: empty cohort");
  return calibrate_intercept(theta_rest, static_cast<double>(target_trial_size) /
                                              static_cast<double>(cohort_size));
}

BinaryTrueMeans binary_true_means(double tau, double psi,
                                  const std::vector<double>& zeta) {
  if (zeta.size() != 4)
    throw InputError("binary_true_means: zeta must have 4 components");
  // Linear predictors are Gaussian: under a=1 the X1 slope gains psi and the
  // intercept gains tau.
  const double sd1 = std::sqrt((zeta[1] + psi) * (zeta[1] + psi) +
                               zeta[2] * zeta[2] + zeta[3] * zeta[3]);
  const double sd0 = vector_norm(zeta, 1);
  BinaryTrueMeans out;
  out.p1 = expected_expit(zeta[0] + tau, sd1);
  out.p0 = expected_expit(zeta[0], sd0);
  return out;
}

CalibrationResult calibrate_tau_binary(double target_marginal_or, double psi,
                                       const std::vector<double>& zeta) {
  if (!(target_marginal_or > 0.0))
    throw InputError("calibrate_tau_binary: marginal odds ratio must be positive");
  const double p0 = binary_true_means(0.0, psi, zeta).p0;
  const double target_log_odds =
      std::log(target_marginal_or) + std::log(p0 / (1.0 - p0));
  const auto objective = [&](double tau) {
    const double p1 = binary_true_means(tau, psi, zeta).p1;
    return std::log(p1 / (1.0 - p1)) - target_log_odds;
  };
  CalibrationResult out;
  out.value = bisect_root(objective, -2.0, 2.0);
  out.residual = std::abs(objective(out.value));
  if (out.residual > 1e-6)
    throw NumericalError("calibrate_tau_binary: residual above 1e-6 on the log-OR scale");
  return out;
}

CohortDataset generate_cohort(const SimScenario& scenario, double theta0,
                              std::size_t replicate_index) {
  check_scenario(scenario);
  const std::size_t n = scenario.cohort_size;
  RandomStream rng(scenario.seed, replicate_index);

  CohortDataset data;
  data.treatment_levels = {"0", "1"};
  data.covariate_names = {"x1", "x2", "x3"};
  data.covariates.resize(static_cast<Eigen::Index>(n), 3);
  data.participation.resize(n);
  data.treatment.assign(n, -1);
  data.outcome.assign(n, std::numeric_limits<double>::quiet_NaN());

  for (std::size_t i = 0; i < n; ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    const double x1 = rng.normal();
    const double x2 = rng.normal();
    const double x3 = rng.normal();
    data.covariates(row, 0) = x1;
    data.covariates(row, 1) = x2;
    data.covariates(row, 2) = x3;
    const double select_lp = theta0 + scenario.theta_rest[0] * x1 +
                             scenario.theta_rest[1] * x2 +
                             scenario.theta_rest[2] * x3;
    const bool in_trial = rng.bernoulli(expit(select_lp));
    data.participation[i] = in_trial ? 1 : 0;
    if (!in_trial) continue;
    const int a = rng.bernoulli(0.5) ? 1 : 0;
    data.treatment[i] = a;
    const double base = scenario.zeta[0] + scenario.zeta[1] * x1 +
                        scenario.zeta[2] * x2 + scenario.zeta[3] * x3;
    const double effect_lp = scenario.tau * a + scenario.psi * x1 * a + base;
    if (scenario.outcome_kind == OutcomeKind::continuous) {
      data.outcome[i] = effect_lp + scenario.noise_sd * rng.normal();
    } else {
      data.outcome[i] = rng.bernoulli(expit(effect_lp)) ? 1.0 : 0.0;
    }
  }
  return data;
}

double true_effect(const SimScenario& scenario, Contrast contrast) {
  if (scenario.outcome_kind == OutcomeKind::continuous) {
    if (contrast != Contrast::difference)
      throw InputError("true_effect: continuous scenarios target the mean difference");
    return scenario.tau;  // E[X1] = 0 removes the effect-modification term
  }
  const BinaryTrueMeans means =
      binary_true_means(scenario.tau, scenario.psi, scenario.zeta);
  return contrast_value(means.p1, means.p0, contrast);
}

std::vector<SimSummary> run_scenario(const SimScenario& scenario,
                                     const SimOptions& options) {
  check_scenario(scenario);
  const double theta0 =
      calibrate_intercept(scenario.theta_rest, scenario.cohort_size,
                          scenario.target_trial_size)
          .value;

  const std::vector<std::size_t> default_cols = {0, 1, 2};
  AnalysisSpec spec;
  spec.participation_covariates =
      options.participation_covariates.value_or(default_cols);
  spec.outcome_covariates = options.outcome_covariates.value_or(default_cols);
  spec.treatment_covariates = default_cols;
  spec.treatment_mode = TreatmentProbMode::estimated;
  spec.outcome_family = scenario.outcome_kind == OutcomeKind::continuous
                            ? GlmFamily::gaussian_identity
                            : GlmFamily::binomial_logit;
  spec.contrasts = scenario_contrasts(scenario.outcome_kind);
  spec.contrast_arm_a = 1;
  spec.contrast_arm_b = 0;
  spec.hajek_ipw = options.hajek_ipw;

  const std::size_t n_contrasts = spec.contrasts.size();
  const std::size_t n_estimators = kAllEstimators.size();
  // estimates[replicate][estimator * n_contrasts + contrast]
  std::vector<std::vector<double>> estimates(scenario.replicates);
  std::vector<std::uint8_t> ok(scenario.replicates, 0);

  parallel_for(scenario.replicates, options.threads, [&](std::size_t r) {
    try {
      const CohortDataset data = generate_cohort(scenario, theta0, r);
      data.validate();
      const AnalysisResult res = analyze(data, spec);
      std::vector<double> row(n_estimators * n_contrasts);
      for (const auto& effect : res.effects) {
        const auto e = static_cast<std::size_t>(effect.estimator);
        const auto c = static_cast<std::size_t>(
            std::find(spec.contrasts.begin(), spec.contrasts.end(), effect.contrast) -
            spec.contrasts.begin());
        row[e * n_contrasts + c] = effect.point;
      }
      estimates[r] = std::move(row);
      ok[r] = 1;
    } catch (const std::exception&) {
      ok[r] = 0;
    }
  });

  std::size_t completed = 0;
  for (auto flag : ok) completed += flag;
  const std::size_t skipped = scenario.replicates - completed;
  if (static_cast<double>(skipped) >
      options.max_skip_fraction * static_cast<double>(scenario.replicates)) {
    std::ostringstream msg;
    msg << "run_scenario: " << skipped << " of " << scenario.replicates
        << " replicates failed (limit " << options.max_skip_fraction * 100.0
        << "%)";
    throw NumericalError(msg.str());
  }
  if (completed == 0) throw NumericalError("run_scenario: no replicate completed");

  std::vector<SimSummary> summaries;
  summaries.reserve(n_contrasts);
  for (std::size_t c = 0; c < n_contrasts; ++c) {
    SimSummary summary;
    summary.contrast = spec.contrasts[c];
    summary.true_effect = true_effect(scenario, spec.contrasts[c]);
    summary.replicates_completed = completed;
    summary.replicates_skipped = skipped;
    for (std::size_t e = 0; e < n_estimators; ++e) {
      double mean = 0.0;
      for (std::size_t r = 0; r < scenario.replicates; ++r)
        if (ok[r]) mean += estimates[r][e * n_contrasts + c];
      mean /= static_cast<double>(completed);
      double variance = 0.0;
      double mse = 0.0;
      for (std::size_t r = 0; r < scenario.replicates; ++r) {
        if (!ok[r]) continue;
        const double est = estimates[r][e * n_contrasts + c];
        variance += (est - mean) * (est - mean);
        mse += (est - summary.true_effect) * (est - summary.true_effect);
      }
      summary.perf[e].bias = mean - summary.true_effect;
      summary.perf[e].variance = variance / static_cast<double>(completed);
      summary.perf[e].mse = mse / static_cast<double>(completed);
    }
    summaries.push_back(summary);
  }
  return summaries;
}

std::vector<ScenarioRecord> run_factorial(const std::vector<SimScenario>& grid,
                                          const SimOptions& options) {
  if (grid.empty()) throw InputError("run_factorial: empty scenario grid");
  std::vector<ScenarioRecord> records;
  records.reserve(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    ScenarioRecord record;
    record.index = i;
    record.scenario = grid[i];
    try {
      record.summaries = run_scenario(grid[i], options);
    } catch (const std::exception& e) {
      record.error = e.what();
    }
    records.push_back(std::move(record));
  }
  return records;
}

std::vector<SimScenario> load_scenario_grid(
    const std::string& json_text, std::optional<std::uint64_t> seed_override,
    std::optional<std::size_t> replicates_override) {
  json config;
  try {
    config = json::parse(json_text);
  } catch (const json::exception& e) {
    throw InputError(std::string("scenario config: invalid JSON: ") + e.what());
  }

  const std::uint64_t master_seed =
      seed_override.value_or(config.value("master_seed", 20240801ULL));
  const std::size_t default_replicates =
      replicates_override.value_or(config.value("replicates", 200ULL));

  auto parse_outcome = [](const std::string& name) {
    if (name == "continuous") return OutcomeKind::continuous;
    if (name == "binary") return OutcomeKind::binary;
    throw InputError("scenario config: unknown outcome kind '" + name + "'");
  };

  std::vector<SimScenario> grid;
  auto derived_seed = [&](std::size_t index) {
    return mix64(master_seed ^ mix64(static_cast<std::uint64_t>(index) + 1));
  };

  try {
    if (config.contains("scenarios")) {
      for (const auto& item : config.at("scenarios")) {
        SimScenario s = make_scenario(
            parse_outcome(item.value("outcome", std::string("continuous"))),
            item.at("cohort_size").get<std::size_t>(),
            item.at("trial_size").get<std::size_t>(), item.value("tau", 0.0),
            item.value("psi", 0.0));
        if (item.contains("marginal_or")) {
          if (s.outcome_kind != OutcomeKind::binary)
            throw InputError("scenario config: marginal_or requires a binary outcome");
          s.tau = calibrate_tau_binary(item.at("marginal_or").get<double>(), s.psi,
                                       s.zeta)
                      .value;
        }
        if (item.contains("zeta")) s.zeta = item.at("zeta").get<std::vector<double>>();
        if (item.contains("theta_rest"))
          s.theta_rest = item.at("theta_rest").get<std::vector<double>>();
        if (item.contains("noise_sd")) s.noise_sd = item.at("noise_sd").get<double>();
        s.replicates = item.value("replicates", default_replicates);
        s.seed = item.contains("seed") ? item.at("seed").get<std::uint64_t>()
                                       : derived_seed(grid.size());
        grid.push_back(std::move(s));
      }
    }
    if (config.contains("factorial")) {
      const auto& f = config.at("factorial");
      const OutcomeKind kind =
          parse_outcome(f.value("outcome", std::string("continuous")));
      const auto cohort_sizes = f.at("cohort_sizes").get<std::vector<std::size_t>>();
      const auto trial_sizes = f.at("trial_sizes").get<std::vector<std::size_t>>();
      const auto psis = f.at("psis").get<std::vector<double>>();
      std::vector<double> taus;
      std::vector<double> marginal_ors;
      if (kind == OutcomeKind::binary && f.contains("marginal_ors"))
        marginal_ors = f.at("marginal_ors").get<std::vector<double>>();
      else
        taus = f.at("taus").get<std::vector<double>>();
      const std::size_t n_effects =
          marginal_ors.empty() ? taus.size() : marginal_ors.size();
      for (std::size_t N : cohort_sizes) {
        for (std::size_t ei = 0; ei < n_effects; ++ei) {
          for (double psi : psis) {
            for (std::size_t n : trial_sizes) {
              SimScenario s = make_scenario(kind, N, n, 0.0, psi);
              if (marginal_ors.empty()) {
                s.tau = taus[ei];
              } else {
                s.tau = calibrate_tau_binary(marginal_ors[ei], psi, s.zeta).value;
              }
              s.replicates = default_replicates;
              s.seed = derived_seed(grid.size());
              grid.push_back(std::move(s));
            }
          }
        }
      }
    }
  } catch (const json::exception& e) {
    throw InputError(std::string("scenario config: ") + e.what());
  }
  if (grid.empty())
    throw InputError("scenario config: no scenarios (need 'scenarios' or 'factorial')");
  return grid;
}

std::string summaries_to_csv(const std::vector<ScenarioRecord>& records) {
  std::ostringstream out;
  out.precision(10);
  out << "scenario,outcome,cohort_size,trial_size,tau,psi,contrast,metric,"
         "trial,om,ipw,dr1,dr2,true_effect,replicates,skipped\n";
  static const char* metric_names[3] = {"bias", "variance", "mse"};
  for (const auto& record : records) {
    if (!record.error.empty()) continue;
    for (const auto& summary : record.summaries) {
      for (int m = 0; m < 3; ++m) {
        out << record.index + 1 << ',' << outcome_kind_name(record.scenario.outcome_kind)
            << ',' << record.scenario.cohort_size << ','
            << record.scenario.target_trial_size << ',' << record.scenario.tau
            << ',' << record.scenario.psi << ',' << contrast_name(summary.contrast)
            << ',' << metric_names[m];
        for (const auto& perf : summary.perf) {
          const double value = m == 0 ? perf.bias : m == 1 ? perf.variance : perf.mse;
          out << ',' << value;
        }
        out << ',' << summary.true_effect << ',' << summary.replicates_completed
            << ',' << summary.replicates_skipped << '\n';
      }
    }
  }
  return out.str();
}

}  // namespace targetpop

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>

#include "targetpop/bootstrap.hpp"
#include "targetpop/oracle.hpp"
#include "targetpop/simulation.hpp"

namespace py = pybind11;
namespace tp = targetpop;

namespace {

tp::GlmFamily family_from_name(const std::string& name) {
  if (name == "gaussian_identity" || name == "gaussian")
    return tp::GlmFamily::gaussian_identity;
  if (name == "binomial_logit" || name == "binomial")
    return tp::GlmFamily::binomial_logit;
  throw tp::InputError("unknown family '" + name + "'");
}

tp::Estimator estimator_from_name(const std::string& name) {
  if (name == "trial" || name == "trial_only") return tp::Estimator::trial_only;
  if (name == "om") return tp::Estimator::om;
  if (name == "ipw") return tp::Estimator::ipw;
  if (name == "dr1") return tp::Estimator::dr1;
  if (name == "dr2") return tp::Estimator::dr2;
  throw tp::InputError("unknown estimator '" + name + "'");
}

tp::Contrast contrast_from_name(const std::string& name) {
  if (name == "difference") return tp::Contrast::difference;
  if (name == "ratio") return tp::Contrast::ratio;
  if (name == "odds_ratio") return tp::Contrast::odds_ratio;
  throw tp::InputError("unknown contrast '" + name + "'");
}

tp::CohortDataset dataset_from_arrays(const Eigen::MatrixXd& covariates,
                                      const std::vector<int>& participation,
                                      const std::vector<int>& treatment,
                                      const std::vector<double>& outcome) {
  const std::size_t n = participation.size();
  if (static_cast<std::size_t>(covariates.rows()) != n || treatment.size() != n ||
      outcome.size() != n)
    throw tp::InputError("dataset arrays must share the row count");
  tp::CohortDataset data;
  data.covariates = covariates;
  data.participation.resize(n);
  data.treatment.resize(n);
  data.outcome.resize(n);
  int max_level = -1;
  for (std::size_t i = 0; i < n; ++i) {
    data.participation[i] = participation[i] ? 1 : 0;
    data.treatment[i] = participation[i] ? treatment[i] : -1;
    data.outcome[i] = participation[i]
                          ? outcome[i]
                          : std::numeric_limits<double>::quiet_NaN();
    if (participation[i]) max_level = std::max(max_level, treatment[i]);
  }
  if (max_level < 0) throw tp::InputError("no randomized rows");
  for (int a = 0; a <= max_level; ++a)
    data.treatment_levels.push_back(std::to_string(a));
  data.validate();
  return data;
}

tp::AnalysisSpec spec_from_args(const std::vector<std::size_t>& participation_cov,
                                const std::vector<std::size_t>& outcome_cov,
                                const std::vector<std::size_t>& treatment_cov,
                                const std::vector<double>& treatment_probs,
                                const std::string& family,
                                const std::vector<std::string>& estimators,
                                const std::vector<std::string>& contrasts,
                                int arm_a, int arm_b, bool hajek,
                                std::optional<double> truncation) {
  tp::AnalysisSpec spec;
  spec.participation_covariates = participation_cov;
  spec.outcome_covariates = outcome_cov;
  spec.treatment_covariates = treatment_cov;
  if (!treatment_probs.empty()) {
    spec.treatment_mode = tp::TreatmentProbMode::known;
    spec.known_treatment_probs = treatment_probs;
  }
  spec.outcome_family = family_from_name(family);
  spec.estimators.clear();
  for (const auto& name : estimators) spec.estimators.push_back(estimator_from_name(name));
  spec.contrasts.clear();
  for (const auto& name : contrasts) spec.contrasts.push_back(contrast_from_name(name));
  spec.contrast_arm_a = arm_a;
  spec.contrast_arm_b = arm_b;
  spec.hajek_ipw = hajek;
  spec.truncation = truncation;
  return spec;
}

py::dict analysis_to_dict(const tp::CohortDataset& data,
                          const tp::AnalysisResult& analysis,
                          const tp::BootstrapResult* boot) {
  py::dict out;
  py::dict means;
  for (std::size_t m = 0; m < analysis.means.size(); ++m) {
    const auto& entry = analysis.means[m];
    py::dict arms;
    for (std::size_t a = 0; a < entry.per_arm.size(); ++a) {
      py::dict arm;
      arm["mean"] = entry.per_arm[a];
      if (boot != nullptr) {
        arm["ci"] = py::make_tuple(boot->mean_intervals[m][a].lo,
                                   boot->mean_intervals[m][a].hi);
      }
      arms[py::str(data.treatment_levels[a])] = arm;
    }
    means[py::str(tp::estimator_name(entry.estimator))] = arms;
  }
  out["means"] = means;

  py::list effects;
  for (const auto& effect : analysis.effects) {
    py::dict e;
    e["estimator"] = tp::estimator_name(effect.estimator);
    e["contrast"] = tp::contrast_name(effect.contrast);
    e["arms"] = py::make_tuple(data.treatment_levels[static_cast<std::size_t>(effect.arm_a)],
                               data.treatment_levels[static_cast<std::size_t>(effect.arm_b)]);
    e["point"] = effect.point;
    if (effect.ci_low.has_value())
      e["ci"] = py::make_tuple(*effect.ci_low, *effect.ci_high);
    effects.append(e);
  }
  out["effects"] = effects;

  py::dict diag;
  diag["min_participation_prob"] = analysis.diagnostics.min_participation_prob;
  diag["max_participation_prob"] = analysis.diagnostics.max_participation_prob;
  diag["min_weight_per_arm"] = analysis.diagnostics.min_weight_per_arm;
  diag["truncated_rows"] = analysis.diagnostics.truncated_rows;
  out["diagnostics"] = diag;

  if (boot != nullptr) {
    py::dict b;
    b["replicates"] = boot->diagnostics.replicates_requested;
    b["completed"] = boot->diagnostics.replicates_completed;
    b["skipped"] = boot->diagnostics.replicates_skipped;
    b["ci_level"] = boot->diagnostics.ci_level;
    b["seed"] = boot->diagnostics.seed;
    out["bootstrap"] = b;
  }
  return out;
}

tp::SimScenario scenario_from_args(const std::string& outcome, std::size_t cohort_size,
                                   std::size_t trial_size, double tau, double psi,
                                   std::size_t replicates, std::uint64_t seed,
                                   std::optional<double> noise_sd,
                                   std::optional<std::vector<double>> zeta) {
  const tp::OutcomeKind kind = outcome == "binary" ? tp::OutcomeKind::binary
                                                   : tp::OutcomeKind::continuous;
  if (outcome != "binary" && outcome != "continuous")
    throw tp::InputError("outcome must be 'continuous' or 'binary'");
  tp::SimScenario s = tp::make_scenario(kind, cohort_size, trial_size, tau, psi);
  s.replicates = replicates;
  s.seed = seed;
  if (noise_sd.has_value()) s.noise_sd = *noise_sd;
  if (zeta.has_value()) s.zeta = *zeta;
  return s;
}

py::dict summary_to_dict(const tp::SimSummary& summary) {
  py::dict out;
  out["contrast"] = tp::contrast_name(summary.contrast);
  out["true_effect"] = summary.true_effect;
  out["replicates_completed"] = summary.replicates_completed;
  out["replicates_skipped"] = summary.replicates_skipped;
  py::dict perf;
  for (std::size_t e = 0; e < tp::kAllEstimators.size(); ++e) {
    py::dict one;
    one["bias"] = summary.perf[e].bias;
    one["variance"] = summary.perf[e].variance;
    one["mse"] = summary.perf[e].mse;
    perf[py::str(tp::estimator_name(tp::kAllEstimators[e]))] = one;
  }
  out["estimators"] = perf;
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() =
      "Estimators for average treatment effects in the target population of "
      "trial-eligible individuals, with bootstrap inference and the "
      "simulation engine";

  py::register_exception<tp::InputError>(m, "InputError", PyExc_ValueError);
  py::register_exception<tp::NumericalError>(m, "NumericalError", PyExc_RuntimeError);

  m.def(
      "fit_glm",
      [](const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
         std::optional<Eigen::VectorXd> weights, const std::string& family) {
        const tp::FittedGlm fit =
            weights.has_value()
                ? tp::fit_glm(design, response, *weights, family_from_name(family))
                : tp::fit_glm(design, response, family_from_name(family));
        py::dict out;
        out["coefficients"] = fit.coefficients;
        out["converged"] = fit.converged;
        out["iterations"] = fit.iterations;
        out["max_score"] = fit.max_score;
        return out;
      },
      py::arg("design"), py::arg("response"), py::arg("weights") = std::nullopt,
      py::arg("family") = "gaussian_identity",
      "Weighted GLM fit (IRLS) for the gaussian-identity or binomial-logit family");

  m.def(
      "estimate",
      [](const Eigen::MatrixXd& covariates, const std::vector<int>& participation,
         const std::vector<int>& treatment, const std::vector<double>& outcome,
         const std::vector<std::size_t>& participation_covariates,
         const std::vector<std::size_t>& outcome_covariates,
         const std::vector<std::size_t>& treatment_covariates,
         const std::vector<double>& treatment_probs, const std::string& family,
         const std::vector<std::string>& estimators,
         const std::vector<std::string>& contrasts, int arm_a, int arm_b,
         bool hajek, std::optional<double> truncation) {
        const tp::CohortDataset data =
            dataset_from_arrays(covariates, participation, treatment, outcome);
        const tp::AnalysisSpec spec = spec_from_args(
            participation_covariates, outcome_covariates, treatment_covariates,
            treatment_probs, family, estimators, contrasts, arm_a, arm_b, hajek,
            truncation);
        const tp::AnalysisResult analysis = tp::analyze(data, spec);
        return analysis_to_dict(data, analysis, nullptr);
      },
      py::arg("covariates"), py::arg("participation"), py::arg("treatment"),
      py::arg("outcome"), py::arg("participation_covariates"),
      py::arg("outcome_covariates"), py::arg("treatment_covariates") = std::vector<std::size_t>{},
      py::arg("treatment_probs") = std::vector<double>{},
      py::arg("family") = "gaussian_identity",
      py::arg("estimators") = std::vector<std::string>{"trial", "om", "ipw", "dr1", "dr2"},
      py::arg("contrasts") = std::vector<std::string>{"difference"},
      py::arg("arm_a") = 1, py::arg("arm_b") = 0, py::arg("hajek") = false,
      py::arg("truncation") = std::nullopt,
      "Trial-only, outcome-model, IP-weighted, and doubly robust estimates");

  m.def(
      "bootstrap_ci",
      [](const Eigen::MatrixXd& covariates, const std::vector<int>& participation,
         const std::vector<int>& treatment, const std::vector<double>& outcome,
         const std::vector<std::size_t>& participation_covariates,
         const std::vector<std::size_t>& outcome_covariates,
         const std::vector<std::size_t>& treatment_covariates,
         const std::vector<double>& treatment_probs, const std::string& family,
         const std::vector<std::string>& estimators,
         const std::vector<std::string>& contrasts, int arm_a, int arm_b,
         bool hajek, std::optional<double> truncation, std::size_t replicates,
         std::uint64_t seed, double ci_level, unsigned threads) {
        const tp::CohortDataset data =
            dataset_from_arrays(covariates, participation, treatment, outcome);
        const tp::AnalysisSpec spec = spec_from_args(
            participation_covariates, outcome_covariates, treatment_covariates,
            treatment_probs, family, estimators, contrasts, arm_a, arm_b, hajek,
            truncation);
        tp::BootstrapConfig config;
        config.replicates = replicates;
        config.seed = seed;
        config.ci_level = ci_level;
        config.threads = threads;
        const tp::BootstrapResult result = tp::bootstrap_ci(data, spec, config);
        return analysis_to_dict(data, result.analysis, &result);
      },
      py::arg("covariates"), py::arg("participation"), py::arg("treatment"),
      py::arg("outcome"), py::arg("participation_covariates"),
      py::arg("outcome_covariates"), py::arg("treatment_covariates") = std::vector<std::size_t>{},
      py::arg("treatment_probs") = std::vector<double>{},
      py::arg("family") = "gaussian_identity",
      py::arg("estimators") = std::vector<std::string>{"trial", "om", "ipw", "dr1", "dr2"},
      py::arg("contrasts") = std::vector<std::string>{"difference"},
      py::arg("arm_a") = 1, py::arg("arm_b") = 0, py::arg("hajek") = false,
      py::arg("truncation") = std::nullopt, py::arg("replicates") = 1000,
      py::arg("seed") = 20240801, py::arg("ci_level") = 0.95,
      py::arg("threads") = 0,
      "Percentile-bootstrap intervals; every replicate refits all nuisance models");

  m.def(
      "calibrate_intercept",
      [](const std::vector<double>& theta_rest, double fraction) {
        const tp::CalibrationResult r = tp::calibrate_intercept(theta_rest, fraction);
        return py::make_tuple(r.value, r.residual);
      },
      py::arg("theta_rest"), py::arg("fraction"),
      "Selection-model intercept for a target trial fraction; returns "
      "(theta0, residual)");

  m.def(
      "calibrate_tau_binary",
      [](double marginal_or, double psi, const std::vector<double>& zeta) {
        const tp::CalibrationResult r = tp::calibrate_tau_binary(marginal_or, psi, zeta);
        return py::make_tuple(r.value, r.residual);
      },
      py::arg("marginal_or"), py::arg("psi") = 0.0,
      py::arg("zeta") = std::vector<double>{0.0, 1.0, 1.0, 1.0},
      "Conditional effect giving the target marginal odds ratio; returns "
      "(tau, log-OR residual)");

  m.def(
      "true_effect",
      [](const std::string& outcome, double tau, double psi,
         const std::string& contrast, std::optional<std::vector<double>> zeta) {
        tp::SimScenario s = scenario_from_args(outcome, 1000, 100, tau, psi, 1, 0,
                                               std::nullopt, zeta);
        return tp::true_effect(s, contrast_from_name(contrast));
      },
      py::arg("outcome"), py::arg("tau"), py::arg("psi") = 0.0,
      py::arg("contrast") = "difference", py::arg("zeta") = std::nullopt,
      "Population effect implied by the generative model");

  m.def(
      "generate_cohort",
      [](const std::string& outcome, std::size_t cohort_size, std::size_t trial_size,
         double tau, double psi, std::uint64_t seed, std::size_t replicate,
         std::optional<double> noise_sd, std::optional<std::vector<double>> zeta) {
        tp::SimScenario s = scenario_from_args(outcome, cohort_size, trial_size, tau,
                                               psi, 1, seed, noise_sd, zeta);
        const double theta0 =
            tp::calibrate_intercept(s.theta_rest, cohort_size, trial_size).value;
        const tp::CohortDataset data = tp::generate_cohort(s, theta0, replicate);
        py::dict out;
        out["covariates"] = data.covariates;
        out["participation"] = data.participation;
        out["treatment"] = data.treatment;
        out["outcome"] = data.outcome;
        return out;
      },
      py::arg("outcome"), py::arg("cohort_size"), py::arg("trial_size"),
      py::arg("tau"), py::arg("psi") = 0.0, py::arg("seed") = 20240801,
      py::arg("replicate") = 0, py::arg("noise_sd") = std::nullopt,
      py::arg("zeta") = std::nullopt,
      "One simulated cohort from the factorial data-generating process");

  m.def(
      "run_scenario",
      [](const std::string& outcome, std::size_t cohort_size, std::size_t trial_size,
         double tau, double psi, std::size_t replicates, std::uint64_t seed,
         std::optional<double> noise_sd, std::optional<std::vector<double>> zeta,
         unsigned threads, bool hajek_ipw,
         std::optional<std::vector<std::size_t>> participation_covariates,
         std::optional<std::vector<std::size_t>> outcome_covariates) {
        const tp::SimScenario s = scenario_from_args(
            outcome, cohort_size, trial_size, tau, psi, replicates, seed, noise_sd, zeta);
        tp::SimOptions options;
        options.threads = threads;
        options.hajek_ipw = hajek_ipw;
        options.participation_covariates = participation_covariates;
        options.outcome_covariates = outcome_covariates;
        py::list out;
        for (const auto& summary : tp::run_scenario(s, options))
          out.append(summary_to_dict(summary));
        return out;
      },
      py::arg("outcome"), py::arg("cohort_size"), py::arg("trial_size"),
      py::arg("tau"), py::arg("psi") = 0.0, py::arg("replicates") = 200,
      py::arg("seed") = 20240801, py::arg("noise_sd") = std::nullopt,
      py::arg("zeta") = std::nullopt, py::arg("threads") = 0,
      py::arg("hajek_ipw") = true,
      py::arg("participation_covariates") = std::nullopt,
      py::arg("outcome_covariates") = std::nullopt,
      "Bias/variance/MSE of the five estimators over scenario replicates; the "
      "covariate overrides drop columns from the working models for "
      "misspecification studies");
}

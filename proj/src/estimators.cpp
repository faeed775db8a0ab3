#include "targetpop/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace targetpop {

namespace {

// Design, response, and weight rows restricted to one trial arm.
struct ArmRows {
  Eigen::MatrixXd design;
  Eigen::VectorXd response;
  std::vector<std::size_t> rows;
};

ArmRows arm_rows(const CohortDataset& data,
                 const std::vector<std::size_t>& covariate_columns, int arm) {
  ArmRows out;
  for (std::size_t i = 0; i < data.n_rows(); ++i) {
    if (data.participation[i] && data.treatment[i] == arm) out.rows.push_back(i);
  }
  const Eigen::Index m = static_cast<Eigen::Index>(out.rows.size());
  Eigen::MatrixXd sub(m, data.covariates.cols());
  out.response.resize(m);
  for (Eigen::Index r = 0; r < m; ++r) {
    sub.row(r) = data.covariates.row(static_cast<Eigen::Index>(out.rows[r]));
    out.response(r) = data.outcome[out.rows[r]];
  }
  out.design = design_matrix(sub, covariate_columns);
  return out;
}

FittedGlm fit_labeled(const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
                      const Eigen::VectorXd& weights, GlmFamily family,
                      const std::string& label) {
  try {
    return fit_glm(design, response, weights, family);
  } catch (const GlmError& e) {
    throw GlmError(e.kind, label + ": " + e.what(), e.iterations, e.max_score,
                   e.column);
  }
}

int require_arm(const CohortDataset& data, int arm) {
  if (arm < 0 || static_cast<std::size_t>(arm) >= data.treatment_levels.size())
    throw InputError("estimator: treatment arm index out of range");
  return arm;
}

}  // namespace

const char* estimator_name(Estimator e) {
  switch (e) {
    case Estimator::trial_only: return "trial_only";
    case Estimator::om: return "om";
    case Estimator::ipw: return "ipw";
    case Estimator::dr1: return "dr1";
    case Estimator::dr2: return "dr2";
  }
  return "?";
}

const char* contrast_name(Contrast c) {
  switch (c) {
    case Contrast::difference: return "difference";
    case Contrast::ratio: return "ratio";
    case Contrast::odds_ratio: return "odds_ratio";
  }
  return "?";
}

NuisanceModels fit_nuisance_models(
    const CohortDataset& data,
    const std::vector<std::size_t>& participation_covariates,
    const std::vector<std::size_t>& outcome_covariates, GlmFamily outcome_family,
    TreatmentProbMode treatment_mode,
    const std::vector<std::size_t>& treatment_covariates,
    const std::vector<double>& known_treatment_probs,
    std::optional<double> truncation) {
  const std::size_t n_rows = data.n_rows();
  const std::size_t n_trial = data.n_trial();
  const std::size_t n_arms = data.treatment_levels.size();

  NuisanceModels out;
  out.weights.participation_columns = participation_covariates;
  out.weights.treatment_columns = treatment_covariates;
  out.weights.truncation = truncation;
  out.outcomes.columns = outcome_covariates;
  out.outcomes.family = outcome_family;

  // Participation model over the whole cohort. When every row is randomized
  // the probability is identically 1 and the logit MLE does not exist, so
  // that case is handled exactly instead of fit.
  if (n_trial < n_rows) {
    Eigen::VectorXd s(static_cast<Eigen::Index>(n_rows));
    for (std::size_t i = 0; i < n_rows; ++i)
      s(static_cast<Eigen::Index>(i)) = data.participation[i] ? 1.0 : 0.0;
    const Eigen::MatrixXd design =
        design_matrix(data.covariates, participation_covariates);
    out.weights.participation_model =
        fit_labeled(design, s, Eigen::VectorXd::Ones(design.rows()),
                    GlmFamily::binomial_logit, "participation model");
  }

  // Treatment models on randomized rows only.
  if (treatment_mode == TreatmentProbMode::known) {
    if (known_treatment_probs.size() != n_arms)
      throw InputError("fit_nuisance_models: need one known treatment probability per arm");
    double total = 0.0;
    for (double p : known_treatment_probs) {
      if (!(p > 0.0 && p <= 1.0))
        throw InputError("fit_nuisance_models: known treatment probabilities must lie in (0,1]");
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-8)
      throw InputError("fit_nuisance_models: known treatment probabilities must sum to 1");
    out.weights.treatment.known = known_treatment_probs;
  } else {
    std::vector<std::size_t> trial_rows;
    trial_rows.reserve(n_trial);
    for (std::size_t i = 0; i < n_rows; ++i)
      if (data.participation[i]) trial_rows.push_back(i);
    Eigen::MatrixXd trial_cov(static_cast<Eigen::Index>(n_trial),
                              data.covariates.cols());
    for (std::size_t r = 0; r < n_trial; ++r)
      trial_cov.row(static_cast<Eigen::Index>(r)) =
          data.covariates.row(static_cast<Eigen::Index>(trial_rows[r]));
    const Eigen::MatrixXd design = design_matrix(trial_cov, treatment_covariates);
    out.weights.treatment.models.reserve(n_arms);
    for (std::size_t a = 0; a < n_arms; ++a) {
      Eigen::VectorXd y(static_cast<Eigen::Index>(n_trial));
      for (std::size_t r = 0; r < n_trial; ++r)
        y(static_cast<Eigen::Index>(r)) =
            data.treatment[trial_rows[r]] == static_cast<int>(a) ? 1.0 : 0.0;
      out.weights.treatment.models.push_back(
          fit_labeled(design, y, Eigen::VectorXd::Ones(design.rows()),
                      GlmFamily::binomial_logit,
                      "treatment model (" + data.treatment_levels[a] + ")"));
    }
  }

  // One outcome model per arm on that arm's trial rows.
  out.outcomes.per_arm.reserve(n_arms);
  for (std::size_t a = 0; a < n_arms; ++a) {
    const ArmRows rows = arm_rows(data, outcome_covariates, static_cast<int>(a));
    if (rows.rows.size() < outcome_covariates.size() + 1)
      throw InputError("fit_nuisance_models: arm '" + data.treatment_levels[a] +
                       "' has fewer trial rows than outcome-model parameters");
    out.outcomes.per_arm.push_back(fit_labeled(
        rows.design, rows.response, Eigen::VectorXd::Ones(rows.design.rows()),
        outcome_family, "outcome model (" + data.treatment_levels[a] + ")"));
  }
  return out;
}

Eigen::VectorXd participation_probabilities(const CohortDataset& data,
                                            const WeightModel& weights) {
  if (!weights.participation_model.has_value())
    return Eigen::VectorXd::Ones(static_cast<Eigen::Index>(data.n_rows()));
  const Eigen::MatrixXd design =
      design_matrix(data.covariates, weights.participation_columns);
  return predict_mean(*weights.participation_model, design);
}

Eigen::VectorXd treatment_probabilities(const CohortDataset& data,
                                        const WeightModel& weights, int arm) {
  require_arm(data, arm);
  const std::size_t n_arms = data.treatment_levels.size();
  if (!weights.treatment.estimated()) {
    if (weights.treatment.known.size() != n_arms)
      throw InputError("treatment_probabilities: missing known probabilities");
    return Eigen::VectorXd::Constant(static_cast<Eigen::Index>(data.n_rows()),
                                     weights.treatment.known[static_cast<std::size_t>(arm)]);
  }
  if (weights.treatment.models.size() != n_arms)
    throw InputError("treatment_probabilities: missing per-arm models");
  const Eigen::MatrixXd design =
      design_matrix(data.covariates, weights.treatment_columns);
  Eigen::VectorXd target;
  Eigen::VectorXd total =
      Eigen::VectorXd::Zero(static_cast<Eigen::Index>(data.n_rows()));
  for (std::size_t a = 0; a < n_arms; ++a) {
    Eigen::VectorXd p = predict_mean(weights.treatment.models[a], design);
    total += p;
    if (a == static_cast<std::size_t>(arm)) target = std::move(p);
  }
  return (target.array() / total.array()).matrix();
}

ArmWeights arm_weights(const CohortDataset& data, const WeightModel& weights,
                       int arm) {
  const Eigen::VectorXd ps = participation_probabilities(data, weights);
  const Eigen::VectorXd pa = treatment_probabilities(data, weights, arm);
  ArmWeights out;
  out.values = (ps.array() * pa.array()).matrix();
  if (weights.truncation.has_value()) {
    const double bound = *weights.truncation;
    for (Eigen::Index i = 0; i < out.values.size(); ++i) {
      if (out.values(i) < bound) {
        out.values(i) = bound;
        ++out.truncated;
      }
    }
  }
  return out;
}

double estimate_trial_only(const CohortDataset& data, int arm) {
  require_arm(data, arm);
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < data.n_rows(); ++i) {
    if (data.participation[i] && data.treatment[i] == arm) {
      sum += data.outcome[i];
      ++count;
    }
  }
  if (count == 0)
    throw InputError("trial_only: no trial rows in arm '" +
                     data.treatment_levels[static_cast<std::size_t>(arm)] + "'");
  return sum / static_cast<double>(count);
}

double estimate_om(const CohortDataset& data, const OutcomeModels& outcomes,
                   int arm) {
  require_arm(data, arm);
  const FittedGlm& model = outcomes.per_arm.at(static_cast<std::size_t>(arm));
  if (!model.converged)
    throw NumericalError("om: outcome model for arm '" +
                         data.treatment_levels[static_cast<std::size_t>(arm)] +
                         "' did not converge");
  const Eigen::MatrixXd design = design_matrix(data.covariates, outcomes.columns);
  return predict_mean(model, design).mean();
}

double estimate_ipw(const CohortDataset& data, const WeightModel& weights,
                    int arm, bool hajek) {
  require_arm(data, arm);
  const ArmWeights w = arm_weights(data, weights, arm);
  double num = 0.0;
  double denom = 0.0;
  for (std::size_t i = 0; i < data.n_rows(); ++i) {
    if (!data.participation[i] || data.treatment[i] != arm) continue;
    const double wi = w.values(static_cast<Eigen::Index>(i));
    if (!(wi > 0.0))
      throw NumericalError("ipw: nonpositive weight for trial row " +
                           std::to_string(i));
    num += data.outcome[i] / wi;
    denom += 1.0 / wi;
  }
  const double estimate =
      hajek ? num / denom : num / static_cast<double>(data.n_rows());
  if (!std::isfinite(estimate))
    throw NumericalError("ipw: non-finite estimate");
  return estimate;
}

double estimate_dr1(const CohortDataset& data, const WeightModel& weights,
                    const OutcomeModels& outcomes, int arm) {
  require_arm(data, arm);
  const FittedGlm& model = outcomes.per_arm.at(static_cast<std::size_t>(arm));
  const Eigen::MatrixXd design = design_matrix(data.covariates, outcomes.columns);
  const Eigen::VectorXd pred = predict_mean(model, design);
  const ArmWeights w = arm_weights(data, weights, arm);
  double acc = 0.0;
  for (std::size_t i = 0; i < data.n_rows(); ++i) {
    const auto idx = static_cast<Eigen::Index>(i);
    if (data.participation[i] && data.treatment[i] == arm) {
      const double wi = w.values(idx);
      if (!(wi > 0.0))
        throw NumericalError("dr1: nonpositive weight for trial row " +
                             std::to_string(i));
      acc += data.outcome[i] / wi + ((wi - 1.0) / wi) * pred(idx);
    } else {
      // (w - 0) / w * g: non-participating and other-arm rows contribute g
      acc += pred(idx);
    }
  }
  const double estimate = acc / static_cast<double>(data.n_rows());
  if (!std::isfinite(estimate))
    throw NumericalError("dr1: non-finite estimate");
  return estimate;
}

double estimate_dr2(const CohortDataset& data, const WeightModel& weights,
                    const std::vector<std::size_t>& outcome_covariates,
                    GlmFamily outcome_family, int arm) {
  require_arm(data, arm);
  const ArmWeights w = arm_weights(data, weights, arm);
  ArmRows rows = arm_rows(data, outcome_covariates, arm);
  Eigen::VectorXd fit_weights(static_cast<Eigen::Index>(rows.rows.size()));
  for (std::size_t r = 0; r < rows.rows.size(); ++r) {
    const double wi = w.values(static_cast<Eigen::Index>(rows.rows[r]));
    if (!(wi > 0.0))
      throw NumericalError("dr2: nonpositive weight for trial row " +
                           std::to_string(rows.rows[r]));
    fit_weights(static_cast<Eigen::Index>(r)) = 1.0 / wi;
  }
  const FittedGlm weighted = fit_labeled(
      rows.design, rows.response, fit_weights, outcome_family,
      "weighted outcome model (" +
          data.treatment_levels[static_cast<std::size_t>(arm)] + ")");
  const Eigen::MatrixXd design = design_matrix(data.covariates, outcome_covariates);
  return predict_mean(weighted, design).mean();
}

double contrast_value(double mu_a, double mu_b, Contrast kind) {
  switch (kind) {
    case Contrast::difference:
      return mu_a - mu_b;
    case Contrast::ratio:
      if (mu_b == 0.0) throw NumericalError("contrast: ratio with zero reference mean");
      return mu_a / mu_b;
    case Contrast::odds_ratio:
      if (!(mu_a > 0.0 && mu_a < 1.0 && mu_b > 0.0 && mu_b < 1.0))
        throw NumericalError("contrast: odds ratio needs both means in (0,1)");
      return (mu_a / (1.0 - mu_a)) / (mu_b / (1.0 - mu_b));
  }
  throw InputError("contrast: unknown kind");
}

AnalysisResult analyze(const CohortDataset& data, const AnalysisSpec& spec) {
  const std::size_t n_arms = data.treatment_levels.size();
  if (spec.contrast_arm_a < 0 ||
      static_cast<std::size_t>(spec.contrast_arm_a) >= n_arms ||
      spec.contrast_arm_b < 0 ||
      static_cast<std::size_t>(spec.contrast_arm_b) >= n_arms)
    throw InputError("analyze: contrast arm out of range");

  const bool needs_nuisance =
      std::any_of(spec.estimators.begin(), spec.estimators.end(),
                  [](Estimator e) { return e != Estimator::trial_only; });

  AnalysisResult result;
  NuisanceModels nuisance;
  if (needs_nuisance) {
    nuisance = fit_nuisance_models(
        data, spec.participation_covariates, spec.outcome_covariates,
        spec.outcome_family, spec.treatment_mode, spec.treatment_covariates,
        spec.known_treatment_probs, spec.truncation);

    const Eigen::VectorXd ps = participation_probabilities(data, nuisance.weights);
    result.diagnostics.min_participation_prob = ps.minCoeff();
    result.diagnostics.max_participation_prob = ps.maxCoeff();
    result.diagnostics.min_weight_per_arm.assign(n_arms, 1.0);
    for (std::size_t a = 0; a < n_arms; ++a) {
      const ArmWeights w = arm_weights(data, nuisance.weights, static_cast<int>(a));
      result.diagnostics.truncated_rows += w.truncated;
      double min_w = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < data.n_rows(); ++i) {
        if (data.participation[i] && data.treatment[i] == static_cast<int>(a))
          min_w = std::min(min_w, w.values(static_cast<Eigen::Index>(i)));
      }
      result.diagnostics.min_weight_per_arm[a] = min_w;
    }
  }

  for (Estimator e : spec.estimators) {
    PotentialMeanEstimates means;
    means.estimator = e;
    means.per_arm.resize(n_arms);
    means.n_used = e == Estimator::trial_only ? data.n_trial() : data.n_rows();
    for (std::size_t a = 0; a < n_arms; ++a) {
      const int arm = static_cast<int>(a);
      switch (e) {
        case Estimator::trial_only:
          means.per_arm[a] = estimate_trial_only(data, arm);
          break;
        case Estimator::om:
          means.per_arm[a] = estimate_om(data, nuisance.outcomes, arm);
          break;
        case Estimator::ipw:
          means.per_arm[a] =
              estimate_ipw(data, nuisance.weights, arm, spec.hajek_ipw);
          break;
        case Estimator::dr1:
          means.per_arm[a] = estimate_dr1(data, nuisance.weights,
                                          nuisance.outcomes, arm);
          break;
        case Estimator::dr2:
          means.per_arm[a] =
              estimate_dr2(data, nuisance.weights, spec.outcome_covariates,
                           spec.outcome_family, arm);
          break;
      }
    }
    for (Contrast c : spec.contrasts) {
      EffectReport report;
      report.estimator = e;
      report.contrast = c;
      report.arm_a = spec.contrast_arm_a;
      report.arm_b = spec.contrast_arm_b;
      report.point = contrast_value(
          means.per_arm[static_cast<std::size_t>(spec.contrast_arm_a)],
          means.per_arm[static_cast<std::size_t>(spec.contrast_arm_b)], c);
      result.effects.push_back(report);
    }
    result.means.push_back(std::move(means));
  }
  return result;
}

}  // namespace targetpop

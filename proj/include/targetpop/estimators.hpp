#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "targetpop/dataset.hpp"
#include "targetpop/glm.hpp"

namespace targetpop {

enum class Estimator { trial_only, om, ipw, dr1, dr2 };
enum class Contrast { difference, ratio, odds_ratio };

const char* estimator_name(Estimator e);
const char* contrast_name(Contrast c);

enum class TreatmentProbMode { estimated, known };

// Pr[A = a | X, S = 1]: one one-vs-rest logit per arm (predictions are
// normalized across arms row by row) or fixed probabilities for designed
// randomization.
struct TreatmentProbs {
  std::vector<FittedGlm> models;  // estimated mode; one per treatment level
  std::vector<double> known;      // known mode; one per treatment level
  bool estimated() const { return !models.empty(); }
};

struct WeightModel {
  // nullopt means every cohort row is randomized; participation probability
  // is exactly 1 and no model is fit.
  std::optional<FittedGlm> participation_model;
  std::vector<std::size_t> participation_columns;
  TreatmentProbs treatment;
  std::vector<std::size_t> treatment_columns;
  std::optional<double> truncation;  // lower bound applied to w_a
};

struct OutcomeModels {
  std::vector<FittedGlm> per_arm;  // indexed by treatment level
  std::vector<std::size_t> columns;
  GlmFamily family = GlmFamily::gaussian_identity;
};

struct NuisanceModels {
  WeightModel weights;
  OutcomeModels outcomes;
};

// Fits participation model on all rows, treatment models on randomized rows
// (estimated mode), and one outcome model per arm on that arm's trial rows.
// GLM failures are rethrown with the failing nuisance model named.
NuisanceModels fit_nuisance_models(
    const CohortDataset& data,
    const std::vector<std::size_t>& participation_covariates,
    const std::vector<std::size_t>& outcome_covariates, GlmFamily outcome_family,
    TreatmentProbMode treatment_mode = TreatmentProbMode::estimated,
    const std::vector<std::size_t>& treatment_covariates = {},
    const std::vector<double>& known_treatment_probs = {},
    std::optional<double> truncation = std::nullopt);

// Estimated Pr[S = 1 | X] for every cohort row (all ones when no model).
Eigen::VectorXd participation_probabilities(const CohortDataset& data,
                                            const WeightModel& weights);

// Estimated Pr[A = arm | X, S = 1] for every cohort row.
Eigen::VectorXd treatment_probabilities(const CohortDataset& data,
                                        const WeightModel& weights, int arm);

struct ArmWeights {
  Eigen::VectorXd values;      // w_arm(X_i) for every cohort row
  std::size_t truncated = 0;   // rows raised to the truncation bound
};

ArmWeights arm_weights(const CohortDataset& data, const WeightModel& weights,
                       int arm);

// Per-arm potential-outcome mean estimators. `arm` indexes
// data.treatment_levels.
double estimate_trial_only(const CohortDataset& data, int arm);
double estimate_om(const CohortDataset& data, const OutcomeModels& outcomes,
                   int arm);
double estimate_ipw(const CohortDataset& data, const WeightModel& weights,
                    int arm, bool hajek = false);
double estimate_dr1(const CohortDataset& data, const WeightModel& weights,
                    const OutcomeModels& outcomes, int arm);
double estimate_dr2(const CohortDataset& data, const WeightModel& weights,
                    const std::vector<std::size_t>& outcome_covariates,
                    GlmFamily outcome_family, int arm);

struct PotentialMeanEstimates {
  Estimator estimator;
  std::vector<double> per_arm;  // indexed by treatment level
  std::size_t n_used = 0;       // rows entering the estimate
};

struct EffectReport {
  Estimator estimator;
  Contrast contrast;
  int arm_a = 1;  // contrast is arm_a versus arm_b
  int arm_b = 0;
  double point = 0.0;
  std::optional<double> ci_low;
  std::optional<double> ci_high;
};

// difference, ratio, or odds ratio of two arm means; throws NumericalError
// outside the admissible domain.
double contrast_value(double mu_a, double mu_b, Contrast kind);

struct PositivityReport {
  double min_participation_prob = 1.0;
  double max_participation_prob = 0.0;
  std::vector<double> min_weight_per_arm;  // over that arm's trial rows
  std::size_t truncated_rows = 0;
};

// One analysis configuration: which estimators, contrasts, and nuisance
// specifications to run. Bootstrap replicates rerun the whole thing.
struct AnalysisSpec {
  std::vector<std::size_t> participation_covariates;
  std::vector<std::size_t> outcome_covariates;
  std::vector<std::size_t> treatment_covariates;  // empty = intercept only
  TreatmentProbMode treatment_mode = TreatmentProbMode::estimated;
  std::vector<double> known_treatment_probs;
  GlmFamily outcome_family = GlmFamily::gaussian_identity;
  std::vector<Estimator> estimators = {Estimator::trial_only, Estimator::om,
                                       Estimator::ipw, Estimator::dr1,
                                       Estimator::dr2};
  std::vector<Contrast> contrasts = {Contrast::difference};
  int contrast_arm_a = 1;
  int contrast_arm_b = 0;
  bool hajek_ipw = false;
  std::optional<double> truncation;
};

struct AnalysisResult {
  std::vector<PotentialMeanEstimates> means;  // one per requested estimator
  std::vector<EffectReport> effects;          // estimator x contrast
  PositivityReport diagnostics;
};

AnalysisResult analyze(const CohortDataset& data, const AnalysisSpec& spec);

}  // namespace targetpop

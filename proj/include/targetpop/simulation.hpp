#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "targetpop/dataset.hpp"
#include "targetpop/estimators.hpp"

namespace targetpop {

enum class OutcomeKind { continuous, binary };

const char* outcome_kind_name(OutcomeKind kind);

// One factorial cell. Covariates are X1..X3 ~ N(0,1); selection follows
// expit(theta0 + X * theta_rest); treatment is Bernoulli(0.5) among trial
// rows; the outcome is tau*A + psi*X1*A + (1,X)*zeta + noise for the
// continuous kind and Bernoulli(expit(tau*A + psi*X1*A + (1,X)*zeta)) for
// the binary kind.
struct SimScenario {
  OutcomeKind outcome_kind = OutcomeKind::continuous;
  std::size_t cohort_size = 100000;      // N
  std::size_t target_trial_size = 5000;  // expected n
  double tau = 0.0;
  double psi = 0.0;
  std::vector<double> theta_rest = {1.0, 1.0, 1.0};
  std::vector<double> zeta;              // (intercept, x1, x2, x3)
  double noise_sd = 0.70710678118654752440;  // N(0, 0.5) noise, continuous only
  std::size_t replicates = 200;
  std::uint64_t seed = 20240801;
};

// Scenario with the factorial defaults for zeta filled in by outcome kind.
SimScenario make_scenario(OutcomeKind kind, std::size_t cohort_size,
                          std::size_t target_trial_size, double tau, double psi);

struct CalibrationResult {
  double value = 0.0;
  double residual = 0.0;
};

// Solves E[expit(theta0 + X * theta_rest)] = fraction for X ~ N(0, I).
CalibrationResult calibrate_intercept(const std::vector<double>& theta_rest,
                                      double fraction);
CalibrationResult calibrate_intercept(const std::vector<double>& theta_rest,
                                      std::size_t cohort_size,
                                      std::size_t target_trial_size);

struct BinaryTrueMeans {
  double p1 = 0.0;  // E[Y^1]
  double p0 = 0.0;  // E[Y^0]
};

BinaryTrueMeans binary_true_means(double tau, double psi,
                                  const std::vector<double>& zeta);

// Solves for the conditional tau giving the requested marginal odds ratio
// under the binary outcome model; residual is on the log-OR scale.
CalibrationResult calibrate_tau_binary(double target_marginal_or, double psi,
                                       const std::vector<double>& zeta = {0.0, 1.0,
                                                                          1.0, 1.0});

CohortDataset generate_cohort(const SimScenario& scenario, double theta0,
                              std::size_t replicate_index);

// Population treatment effect implied by the scenario: exactly tau for the
// continuous difference; quadrature over the outcome model for binary
// contrasts.
double true_effect(const SimScenario& scenario, Contrast contrast);

struct EstimatorPerf {
  double bias = 0.0;
  double variance = 0.0;  // population divisor, matching mse
  double mse = 0.0;
};

// trial_only, om, ipw, dr1, dr2 in enum order
constexpr std::array<Estimator, 5> kAllEstimators = {
    Estimator::trial_only, Estimator::om, Estimator::ipw, Estimator::dr1,
    Estimator::dr2};

struct SimSummary {
  Contrast contrast = Contrast::difference;
  double true_effect = 0.0;
  std::array<EstimatorPerf, 5> perf{};
  std::size_t replicates_completed = 0;
  std::size_t replicates_skipped = 0;
};

struct SimOptions {
  unsigned threads = 0;
  double max_skip_fraction = 0.01;
  // The engine's IPW column normalizes by the weight sum: that is the form
  // whose sampling variance matches the reported factorial results. The
  // pure Horvitz-Thompson form (the estimate_ipw default) has a far
  // heavier-tailed variance in these designs; set false to study it.
  bool hajek_ipw = true;
  // Working-model covariate overrides; the factorial default (all of
  // X1..X3, the generative forms) when unset. Used for the deliberate
  // misspecification experiments.
  std::optional<std::vector<std::size_t>> participation_covariates;
  std::optional<std::vector<std::size_t>> outcome_covariates;
};

// Runs the scenario's replicates with working models over X1..X3 (treatment
// probability estimated with the same covariates) and summarizes bias,
// variance, and MSE for the five estimators. One summary per contrast scale:
// the difference for continuous outcomes; odds ratio, difference, and ratio
// for binary outcomes.
std::vector<SimSummary> run_scenario(const SimScenario& scenario,
                                     const SimOptions& options = {});

struct ScenarioRecord {
  std::size_t index = 0;
  SimScenario scenario;
  std::vector<SimSummary> summaries;
  std::string error;  // nonempty if the scenario failed
};

// Runs every scenario in the grid (scenario seeds are honored as given);
// per-scenario failures are recorded and the remaining scenarios still run.
std::vector<ScenarioRecord> run_factorial(const std::vector<SimScenario>& grid,
                                          const SimOptions& options = {});

// Parses a scenario-grid configuration (JSON text): explicit "scenarios"
// plus an optional "factorial" block expanded in tau-major, psi, trial-size
// order per cohort size. Scenario seeds default to values derived from
// "master_seed" and the scenario index.
std::vector<SimScenario> load_scenario_grid(const std::string& json_text,
                                            std::optional<std::uint64_t> seed_override =
                                                std::nullopt,
                                            std::optional<std::size_t> replicates_override =
                                                std::nullopt);

// Summary CSV: one row per (scenario, contrast, metric) with the five
// estimator columns.
std::string summaries_to_csv(const std::vector<ScenarioRecord>& records);

}  // namespace targetpop

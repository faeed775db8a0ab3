#pragma once

#include <vector>

#include "targetpop/dataset.hpp"
#include "targetpop/estimators.hpp"

namespace targetpop {

// Brute-force ground truth for cohorts whose covariates take a handful of
// distinct joint values. Positivity holds by construction: every cell has
// trial rows in every arm.
struct DiscreteCell {
  std::vector<double> pattern;                    // covariate values
  std::size_t count = 0;                          // cohort rows with this pattern
  std::vector<std::vector<double>> arm_outcomes;  // trial outcomes per arm
};

struct DiscreteCohortSpec {
  std::vector<DiscreteCell> cells;
  std::vector<std::string> treatment_levels = {"0", "1"};

  std::size_t trial_count(std::size_t cell) const;
  std::size_t total_count() const;
  void validate() const;  // <= 8 cells, >= 1 trial row per arm per cell
};

// Nonparametric plug-in estimand sum_x P(x) * mean(Y | arm, S=1, x) by
// direct enumeration.
double plugin_estimand(const DiscreteCohortSpec& spec, int arm);

// Materializes the spec as a cohort dataset (cell by cell, trial rows first).
CohortDataset to_cohort(const DiscreteCohortSpec& spec);

// Cell-indicator design columns (one per distinct pattern, no intercept):
// the saturated model over the discrete covariates.
std::vector<std::size_t> saturated_columns(std::size_t n_cells);
CohortDataset with_cell_indicators(const DiscreteCohortSpec& spec);

// Runs OM, IPW, DR1, DR2 with saturated nuisance models on the materialized
// cohort and reports each estimate next to the plug-in estimand.
struct OracleComparison {
  double plugin = 0.0;
  double om = 0.0;
  double ipw = 0.0;
  double dr1 = 0.0;
  double dr2 = 0.0;
  double max_abs_difference() const;
};

OracleComparison compare_with_saturated_estimators(const DiscreteCohortSpec& spec,
                                                   int arm);

// Population effect of the continuous generative model: exactly tau, since
// the effect modifier has mean zero.
double analytic_true_effect_continuous(double tau, double psi);

}  // namespace targetpop

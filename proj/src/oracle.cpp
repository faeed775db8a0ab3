#include "targetpop/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace targetpop {

std::size_t DiscreteCohortSpec::trial_count(std::size_t cell) const {
  const auto& arms = cells.at(cell).arm_outcomes;
  return std::accumulate(arms.begin(), arms.end(), std::size_t{0},
                         [](std::size_t acc, const std::vector<double>& v) {
                           return acc + v.size();
                         });
}

std::size_t DiscreteCohortSpec::total_count() const {
  std::size_t total = 0;
  for (const auto& cell : cells) total += cell.count;
  return total;
}

void DiscreteCohortSpec::validate() const {
  if (cells.empty()) throw InputError("discrete spec: no cells");
  if (cells.size() > 8) throw InputError("discrete spec: more than 8 cells");
  if (treatment_levels.size() < 2)
    throw InputError("discrete spec: need at least 2 treatment levels");
  const std::size_t dim = cells.front().pattern.size();
  for (std::size_t c = 0; c < cells.size(); ++c) {
    const auto& cell = cells[c];
    if (cell.pattern.size() != dim)
      throw InputError("discrete spec: inconsistent pattern dimension");
    if (cell.arm_outcomes.size() != treatment_levels.size())
      throw InputError("discrete spec: cell " + std::to_string(c) +
                       " must list outcomes for every arm");
    for (const auto& outcomes : cell.arm_outcomes) {
      if (outcomes.empty())
        throw InputError("discrete spec: cell " + std::to_string(c) +
                         " has an arm without trial rows");
      for (double y : outcomes)
        if (!std::isfinite(y))
          throw InputError("discrete spec: non-finite outcome");
    }
    if (cell.count < trial_count(c))
      throw InputError("discrete spec: cell " + std::to_string(c) +
                       " has more trial rows than cohort rows");
  }
  for (std::size_t a = 0; a < cells.size(); ++a) {
    for (std::size_t b = a + 1; b < cells.size(); ++b) {
      if (cells[a].pattern == cells[b].pattern)
        throw InputError("discrete spec: duplicate covariate pattern");
    }
  }
}

double plugin_estimand(const DiscreteCohortSpec& spec, int arm) {
  spec.validate();
  if (arm < 0 || static_cast<std::size_t>(arm) >= spec.treatment_levels.size())
    throw InputError("plugin_estimand: arm out of range");
  const double total = static_cast<double>(spec.total_count());
  double acc = 0.0;
  for (const auto& cell : spec.cells) {
    const auto& outcomes = cell.arm_outcomes[static_cast<std::size_t>(arm)];
    const double cell_mean =
        std::accumulate(outcomes.begin(), outcomes.end(), 0.0) /
        static_cast<double>(outcomes.size());
    acc += (static_cast<double>(cell.count) / total) * cell_mean;
  }
  return acc;
}

namespace {

CohortDataset materialize(const DiscreteCohortSpec& spec, bool cell_indicators) {
  spec.validate();
  const std::size_t n = spec.total_count();
  const std::size_t k = spec.cells.size();
  const std::size_t dim =
      cell_indicators ? (k > 0 ? k - 1 : 0) : spec.cells.front().pattern.size();

  CohortDataset data;
  data.treatment_levels = spec.treatment_levels;
  data.covariates = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n),
                                          static_cast<Eigen::Index>(dim));
  data.participation.assign(n, 0);
  data.treatment.assign(n, -1);
  data.outcome.assign(n, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t j = 0; j < dim; ++j)
    data.covariate_names.push_back(
        cell_indicators ? "cell" + std::to_string(j + 1) : "x" + std::to_string(j + 1));

  std::size_t row = 0;
  for (std::size_t c = 0; c < k; ++c) {
    const auto& cell = spec.cells[c];
    const std::size_t start = row;
    for (std::size_t a = 0; a < cell.arm_outcomes.size(); ++a) {
      for (double y : cell.arm_outcomes[a]) {
        data.participation[row] = 1;
        data.treatment[row] = static_cast<int>(a);
        data.outcome[row] = y;
        ++row;
      }
    }
    row = start + cell.count;  // remaining rows stay non-randomized
    for (std::size_t i = start; i < start + cell.count; ++i) {
      if (cell_indicators) {
        if (c >= 1)
          data.covariates(static_cast<Eigen::Index>(i),
                          static_cast<Eigen::Index>(c - 1)) = 1.0;
      } else {
        for (std::size_t j = 0; j < dim; ++j)
          data.covariates(static_cast<Eigen::Index>(i),
                          static_cast<Eigen::Index>(j)) = cell.pattern[j];
      }
    }
  }
  data.validate();
  return data;
}

}  // namespace

CohortDataset to_cohort(const DiscreteCohortSpec& spec) {
  return materialize(spec, false);
}

CohortDataset with_cell_indicators(const DiscreteCohortSpec& spec) {
  return materialize(spec, true);
}

std::vector<std::size_t> saturated_columns(std::size_t n_cells) {
  std::vector<std::size_t> cols(n_cells > 0 ? n_cells - 1 : 0);
  std::iota(cols.begin(), cols.end(), std::size_t{0});
  return cols;
}

double OracleComparison::max_abs_difference() const {
  double worst = 0.0;
  for (double v : {om, ipw, dr1, dr2})
    worst = std::max(worst, std::abs(v - plugin));
  return worst;
}

OracleComparison compare_with_saturated_estimators(const DiscreteCohortSpec& spec,
                                                   int arm) {
  const CohortDataset data = with_cell_indicators(spec);
  const std::vector<std::size_t> cols = saturated_columns(spec.cells.size());
  // Intercept plus k-1 cell dummies spans the saturated model; the gaussian
  // family makes predicted means equal cell means for any outcome values.
  const NuisanceModels nuisance = fit_nuisance_models(
      data, cols, cols, GlmFamily::gaussian_identity,
      TreatmentProbMode::estimated, cols);
  OracleComparison out;
  out.plugin = plugin_estimand(spec, arm);
  out.om = estimate_om(data, nuisance.outcomes, arm);
  out.ipw = estimate_ipw(data, nuisance.weights, arm);
  out.dr1 = estimate_dr1(data, nuisance.weights, nuisance.outcomes, arm);
  out.dr2 = estimate_dr2(data, nuisance.weights, cols,
                         GlmFamily::gaussian_identity, arm);
  return out;
}

double analytic_true_effect_continuous(double tau, double /*psi*/) { return tau; }

}  // namespace targetpop

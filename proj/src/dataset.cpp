#include "targetpop/dataset.hpp"

#include <cmath>
#include <sstream>

namespace targetpop {

std::size_t CohortDataset::n_trial() const {
  std::size_t n = 0;
  for (auto s : participation) n += s ? 1 : 0;
  return n;
}

std::size_t CohortDataset::n_arm(int arm) const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < participation.size(); ++i) {
    if (participation[i] && treatment[i] == arm) ++n;
  }
  return n;
}

void CohortDataset::validate() const {
  const std::size_t n = n_rows();
  if (n == 0) throw InputError("dataset: empty cohort");
  if (static_cast<std::size_t>(covariates.rows()) != n ||
      treatment.size() != n || outcome.size() != n)
    throw InputError("dataset: column lengths disagree");
  if (!covariates.allFinite())
    throw InputError("dataset: non-finite covariate values (complete cases required)");
  if (treatment_levels.size() < 1)
    throw InputError("dataset: no treatment levels");
  if (!covariate_names.empty() &&
      covariate_names.size() != static_cast<std::size_t>(covariates.cols()))
    throw InputError("dataset: covariate_names length does not match columns");

  std::vector<std::size_t> arm_counts(treatment_levels.size(), 0);
  std::size_t trial = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (participation[i]) {
      ++trial;
      if (treatment[i] < 0 ||
          static_cast<std::size_t>(treatment[i]) >= treatment_levels.size())
        throw InputError("dataset: trial row " + std::to_string(i) +
                         " has no valid treatment");
      if (!std::isfinite(outcome[i]))
        throw InputError("dataset: trial row " + std::to_string(i) +
                         " has no finite outcome");
      ++arm_counts[static_cast<std::size_t>(treatment[i])];
    } else {
      if (treatment[i] != -1)
        throw InputError("dataset: non-randomized row " + std::to_string(i) +
                         " carries a treatment");
      if (!std::isnan(outcome[i]))
        throw InputError("dataset: non-randomized row " + std::to_string(i) +
                         " carries an outcome");
    }
  }
  if (trial == 0) throw InputError("dataset: no trial rows");
  for (std::size_t a = 0; a < arm_counts.size(); ++a) {
    if (arm_counts[a] == 0)
      throw InputError("dataset: treatment level '" + treatment_levels[a] +
                       "' has no trial rows");
  }
}

Eigen::MatrixXd design_matrix(const Eigen::MatrixXd& covariates,
                              const std::vector<std::size_t>& columns,
                              bool intercept) {
  const Eigen::Index n = covariates.rows();
  const Eigen::Index extra = intercept ? 1 : 0;
  Eigen::MatrixXd design(n, static_cast<Eigen::Index>(columns.size()) + extra);
  if (intercept) design.col(0).setOnes();
  for (std::size_t j = 0; j < columns.size(); ++j) {
    if (columns[j] >= static_cast<std::size_t>(covariates.cols()))
      throw InputError("design_matrix: covariate column " +
                       std::to_string(columns[j]) + " out of range");
    design.col(static_cast<Eigen::Index>(j) + extra) =
        covariates.col(static_cast<Eigen::Index>(columns[j]));
  }
  return design;
}

}  // namespace targetpop

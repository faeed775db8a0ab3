#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "targetpop/errors.hpp"

namespace targetpop {

// A trial nested in a cohort: covariates for every row, treatment and
// outcome only for randomized rows (participation = 1). Treatment is stored
// as an index into treatment_levels, -1 for non-randomized rows; outcome is
// NaN for non-randomized rows.
struct CohortDataset {
  Eigen::MatrixXd covariates;            // N x p, complete cases only
  std::vector<std::uint8_t> participation;
  std::vector<int> treatment;
  std::vector<double> outcome;
  std::vector<std::string> treatment_levels;
  std::vector<std::string> covariate_names;  // optional; sized p when present

  std::size_t n_rows() const { return participation.size(); }
  std::size_t n_trial() const;
  std::size_t n_arm(int arm) const;  // trial rows assigned to arm

  // Checks the structural invariants and throws InputError on violation:
  // consistent sizes, finite covariates, treatment/outcome present exactly
  // for participating rows, at least one trial row per treatment level.
  void validate() const;
};

// Selects covariate columns and prepends an intercept column of ones.
Eigen::MatrixXd design_matrix(const Eigen::MatrixXd& covariates,
                              const std::vector<std::size_t>& columns,
                              bool intercept = true);

}  // namespace targetpop

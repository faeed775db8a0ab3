#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "targetpop/bootstrap.hpp"
#include "targetpop/dataset.hpp"
#include "targetpop/estimators.hpp"

namespace targetpop {

struct ColumnRoles {
  std::string participation;
  std::string treatment;
  std::string outcome;
  std::vector<std::string> covariates;  // columns loaded into the dataset
};

struct IngestReport {
  std::size_t rows_read = 0;
  std::size_t rows_dropped_incomplete = 0;  // complete-case filter
  std::vector<std::string> warnings;        // e.g. ignored columns
};

// Strict delimited-text reader: header row, '.' decimal separator,
// participation in {0,1}, treatment and outcome empty exactly when
// participation is 0. Rows with missing covariate values are dropped and
// counted. Treatment levels are the sorted distinct labels.
CohortDataset read_cohort_csv(std::istream& in, const ColumnRoles& roles,
                              IngestReport& report);
CohortDataset read_cohort_csv(const std::string& path, const ColumnRoles& roles,
                              IngestReport& report);

// Round-trip writer: doubles at full precision, empty treatment/outcome for
// non-randomized rows.
void write_cohort_csv(std::ostream& out, const CohortDataset& data);
void write_cohort_csv(const std::string& path, const CohortDataset& data);

// Machine-readable report for one analysis (optionally with bootstrap
// intervals and diagnostics).
std::string report_to_json(const CohortDataset& data, const AnalysisResult& analysis,
                           const BootstrapResult* bootstrap,
                           const IngestReport* ingest);

// Aligned text table mirroring the per-estimator rows of a trial report:
// per-arm means and contrasts, with intervals when available.
std::string render_table(const CohortDataset& data, const AnalysisResult& analysis,
                         const BootstrapResult* bootstrap);

}  // namespace targetpop

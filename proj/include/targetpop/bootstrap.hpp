#pragma once

#include <cstdint>
#include <vector>

#include "targetpop/estimators.hpp"

namespace targetpop {

struct BootstrapConfig {
  std::size_t replicates = 1000;
  std::uint64_t seed = 20240801;
  double ci_level = 0.95;
  enum class FailurePolicy { skip_and_count, abort };
  FailurePolicy failure_policy = FailurePolicy::skip_and_count;
  double max_skip_fraction = 0.01;  // interval invalid beyond this
  unsigned threads = 0;             // 0 = hardware concurrency
};

struct IntervalEstimate {
  double lo = 0.0;
  double hi = 0.0;
};

struct BootstrapDiagnostics {
  std::size_t replicates_requested = 0;
  std::size_t replicates_completed = 0;
  std::size_t replicates_skipped = 0;
  double ci_level = 0.95;
  std::uint64_t seed = 0;
};

struct BootstrapResult {
  // Point estimates on the original data; effect reports carry the CIs.
  AnalysisResult analysis;
  // Percentile intervals for the per-arm means, aligned with
  // analysis.means ([estimator][arm]).
  std::vector<std::vector<IntervalEstimate>> mean_intervals;
  BootstrapDiagnostics diagnostics;
};

// Row indices of resample `replicate`; the resampling unit is the whole
// cohort row. Exposed so tests can pin the determinism contract.
std::vector<std::size_t> resample_indices(std::uint64_t seed,
                                          std::size_t replicate, std::size_t n);

CohortDataset resample_dataset(const CohortDataset& data,
                               const std::vector<std::size_t>& indices);

// Order-statistic quantile with linear interpolation on sorted values
// (h = (m-1) q). `values` need not be sorted.
double empirical_quantile(std::vector<double> values, double q);

// Percentile bootstrap over B resamples of the full cohort. Every replicate
// refits all nuisance models. Deterministic for a fixed (data, spec, config),
// independent of the thread count.
BootstrapResult bootstrap_ci(const CohortDataset& data, const AnalysisSpec& spec,
                             const BootstrapConfig& config);

}  // namespace targetpop

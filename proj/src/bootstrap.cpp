#include "targetpop/bootstrap.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "targetpop/parallel.hpp"
#include "targetpop/rng.hpp"

namespace targetpop {

std::vector<std::size_t> resample_indices(std::uint64_t seed,
                                          std::size_t replicate, std::size_t n) {
  RandomStream rng(seed, replicate + 1);
  std::vector<std::size_t> indices(n);
  for (std::size_t i = 0; i < n; ++i) indices[i] = rng.uniform_index(n);
  return indices;
}

CohortDataset resample_dataset(const CohortDataset& data,
                               const std::vector<std::size_t>& indices) {
  CohortDataset out;
  out.treatment_levels = data.treatment_levels;
  out.covariate_names = data.covariate_names;
  const std::size_t n = indices.size();
  out.covariates.resize(static_cast<Eigen::Index>(n), data.covariates.cols());
  out.participation.resize(n);
  out.treatment.resize(n);
  out.outcome.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t src = indices[i];
    out.covariates.row(static_cast<Eigen::Index>(i)) =
        data.covariates.row(static_cast<Eigen::Index>(src));
    out.participation[i] = data.participation[src];
    out.treatment[i] = data.treatment[src];
    out.outcome[i] = data.outcome[src];
  }
  return out;
}

double empirical_quantile(std::vector<double> values, double q) {
  if (values.empty())
    throw InputError("empirical_quantile: no values");
  if (!(q >= 0.0 && q <= 1.0))
    throw InputError("empirical_quantile: q outside [0,1]");
  std::sort(values.begin(), values.end());
  const double h = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= values.size()) return values.back();
  const double frac = h - static_cast<double>(lo);
  return values[lo] + frac * (values[lo + 1] - values[lo]);
}

BootstrapResult bootstrap_ci(const CohortDataset& data, const AnalysisSpec& spec,
                             const BootstrapConfig& config) {
  if (config.replicates < 2)
    throw InputError("bootstrap: need at least 2 replicates");
  if (!(config.ci_level > 0.0 && config.ci_level < 1.0))
    throw InputError("bootstrap: ci_level must lie in (0,1)");

  BootstrapResult result;
  result.analysis = analyze(data, spec);  // must succeed on the original data
  result.diagnostics.replicates_requested = config.replicates;
  result.diagnostics.ci_level = config.ci_level;
  result.diagnostics.seed = config.seed;

  const std::size_t n_means = result.analysis.means.size();
  const std::size_t n_arms = data.treatment_levels.size();
  const std::size_t n_effects = result.analysis.effects.size();
  const std::size_t n_stats = n_means * n_arms + n_effects;

  // replicate r -> flattened statistics (means first, then effects)
  std::vector<std::vector<double>> draws(config.replicates);
  std::vector<std::uint8_t> ok(config.replicates, 0);
  std::vector<std::string> first_error(config.replicates);

  parallel_for(config.replicates, config.threads, [&](std::size_t r) {
    try {
      const CohortDataset resample =
          resample_dataset(data, resample_indices(config.seed, r, data.n_rows()));
      resample.validate();
      const AnalysisResult res = analyze(resample, spec);
      std::vector<double> stats;
      stats.reserve(n_stats);
      for (const auto& m : res.means)
        for (double v : m.per_arm) stats.push_back(v);
      for (const auto& e : res.effects) stats.push_back(e.point);
      draws[r] = std::move(stats);
      ok[r] = 1;
    } catch (const std::exception& e) {
      first_error[r] = e.what();
      ok[r] = 0;
    }
  });

  std::size_t completed = 0;
  for (std::size_t r = 0; r < config.replicates; ++r) completed += ok[r];
  const std::size_t skipped = config.replicates - completed;
  result.diagnostics.replicates_completed = completed;
  result.diagnostics.replicates_skipped = skipped;

  if (skipped > 0 && config.failure_policy == BootstrapConfig::FailurePolicy::abort) {
    for (std::size_t r = 0; r < config.replicates; ++r) {
      if (!ok[r])
        throw NumericalError("bootstrap: replicate " + std::to_string(r) +
                             " failed: " + first_error[r]);
    }
  }
  if (static_cast<double>(skipped) >
      config.max_skip_fraction * static_cast<double>(config.replicates)) {
    std::ostringstream msg;
    msg << "bootstrap: " << skipped << " of " << config.replicates
        << " replicates failed (limit " << config.max_skip_fraction * 100.0
        << "%); intervals would be invalid";
    throw NumericalError(msg.str());
  }

  const double alpha = 1.0 - config.ci_level;
  auto interval_for = [&](std::size_t stat) {
    std::vector<double> values;
    values.reserve(completed);
    for (std::size_t r = 0; r < config.replicates; ++r)
      if (ok[r]) values.push_back(draws[r][stat]);
    IntervalEstimate ci;
    ci.lo = empirical_quantile(values, alpha / 2.0);
    ci.hi = empirical_quantile(std::move(values), 1.0 - alpha / 2.0);
    return ci;
  };

  std::size_t stat = 0;
  result.mean_intervals.resize(n_means);
  for (std::size_t m = 0; m < n_means; ++m) {
    result.mean_intervals[m].resize(n_arms);
    for (std::size_t a = 0; a < n_arms; ++a)
      result.mean_intervals[m][a] = interval_for(stat++);
  }
  for (std::size_t e = 0; e < n_effects; ++e) {
    const IntervalEstimate ci = interval_for(stat++);
    result.analysis.effects[e].ci_low = ci.lo;
    result.analysis.effects[e].ci_high = ci.hi;
  }
  return result;
}

}  // namespace targetpop

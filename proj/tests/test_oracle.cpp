#include <doctest.h>

#include <cmath>

#include "targetpop/oracle.hpp"
#include "targetpop/rng.hpp"

using namespace targetpop;

namespace {

// random spec with interior cells: trial rows per arm and at least one
// non-randomized row per cell
DiscreteCohortSpec random_spec(std::uint64_t seed) {
  RandomStream rng(seed, 5);
  DiscreteCohortSpec spec;
  const std::size_t k = 1 + rng.uniform_index(8);
  for (std::size_t c = 0; c < k; ++c) {
    DiscreteCell cell;
    cell.pattern = {static_cast<double>(c), rng.uniform() < 0.5 ? 0.0 : 1.0};
    cell.arm_outcomes.resize(2);
    std::size_t trial = 0;
    for (std::size_t a = 0; a < 2; ++a) {
      const std::size_t m = 1 + rng.uniform_index(4);
      for (std::size_t i = 0; i < m; ++i)
        cell.arm_outcomes[a].push_back(std::round(rng.normal() * 8.0) / 4.0);
      trial += m;
    }
    cell.count = trial + 1 + rng.uniform_index(10);
    spec.cells.push_back(std::move(cell));
  }
  return spec;
}

}  // namespace

TEST_CASE("plug-in estimand by enumeration") {
  DiscreteCohortSpec one_cell;
  one_cell.cells.push_back({{0.0}, 10, {{1.0, 2.0, 3.0}, {5.0}}});
  CHECK(plugin_estimand(one_cell, 0) == doctest::Approx(2.0));
  CHECK(plugin_estimand(one_cell, 1) == doctest::Approx(5.0));

  DiscreteCohortSpec two_cells;
  two_cells.cells.push_back({{0.0}, 20, {{0.0}, {0.0}}});
  two_cells.cells.push_back({{1.0}, 20, {{1.0}, {1.0}}});
  CHECK(plugin_estimand(two_cells, 0) == doctest::Approx(0.5));

  // counts (50, 30, 20) with arm means (1, 2, 3): 0.5*1 + 0.3*2 + 0.2*3 = 1.7
  DiscreteCohortSpec three_cells;
  three_cells.cells.push_back({{0.0}, 50, {{1.0}, {0.0}}});
  three_cells.cells.push_back({{1.0}, 30, {{2.0}, {0.0}}});
  three_cells.cells.push_back({{2.0}, 20, {{3.0}, {0.0}}});
  CHECK(plugin_estimand(three_cells, 0) == doctest::Approx(1.7).epsilon(1e-12));
}

TEST_CASE("materialized cohorts match the spec counts") {
  const DiscreteCohortSpec spec = random_spec(1);
  const CohortDataset data = to_cohort(spec);
  CHECK(data.n_rows() == spec.total_count());
  std::size_t trial = 0;
  for (std::size_t c = 0; c < spec.cells.size(); ++c) trial += spec.trial_count(c);
  CHECK(data.n_trial() == trial);
}

TEST_CASE("saturated estimators reproduce the plug-in estimand") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const DiscreteCohortSpec spec = random_spec(seed);
    for (int arm : {0, 1}) {
      const OracleComparison cmp = compare_with_saturated_estimators(spec, arm);
      CHECK(cmp.max_abs_difference() <= 1e-8);
    }
  }
}

TEST_CASE("fully randomized discrete cohort: saturated OM equals the plug-in") {
  // every cohort row is a trial row, so standardizing the saturated
  // outcome model over the cohort is the covariate-stratified trial mean
  DiscreteCohortSpec spec;
  spec.cells.push_back({{0.0}, 3, {{1.0, 3.0}, {2.0}}});
  spec.cells.push_back({{1.0}, 4, {{5.0}, {4.0, 6.0, 8.0}}});
  const CohortDataset data = with_cell_indicators(spec);
  const std::vector<std::size_t> cols = saturated_columns(spec.cells.size());
  const NuisanceModels nuisance =
      fit_nuisance_models(data, cols, cols, GlmFamily::gaussian_identity);
  for (int arm : {0, 1}) {
    CHECK(estimate_om(data, nuisance.outcomes, arm) ==
          doctest::Approx(plugin_estimand(spec, arm)).epsilon(1e-10));
  }
}

TEST_CASE("spec validation") {
  DiscreteCohortSpec empty;
  CHECK_THROWS_AS(plugin_estimand(empty, 0), InputError);

  DiscreteCohortSpec missing_arm;
  missing_arm.cells.push_back({{0.0}, 5, {{1.0}, {}}});
  CHECK_THROWS_AS(missing_arm.validate(), InputError);

  DiscreteCohortSpec overfull;
  overfull.cells.push_back({{0.0}, 1, {{1.0}, {2.0}}});  // 2 trial rows, count 1
  CHECK_THROWS_AS(overfull.validate(), InputError);

  DiscreteCohortSpec nine;
  for (int c = 0; c < 9; ++c)
    nine.cells.push_back({{static_cast<double>(c)}, 3, {{1.0}, {1.0}}});
  CHECK_THROWS_AS(nine.validate(), InputError);
}

TEST_CASE("analytic true effect of the continuous generative model") {
  CHECK(analytic_true_effect_continuous(0.0, 2.0) == 0.0);
  CHECK(analytic_true_effect_continuous(3.0, 0.0) == 3.0);

  // Monte Carlo cross-check for (tau, psi) = (1, 1): the unit-level effect is
  // tau + psi * X1 with X1 standard normal.
  RandomStream rng(99, 1);
  const std::size_t draws = 1000000;
  double acc = 0.0;
  for (std::size_t i = 0; i < draws; ++i) acc += 1.0 + 1.0 * rng.normal();
  const double mc = acc / static_cast<double>(draws);
  const double se = 1.0 / std::sqrt(static_cast<double>(draws));
  CHECK(std::abs(mc - analytic_true_effect_continuous(1.0, 1.0)) <= 3.0 * se);
}

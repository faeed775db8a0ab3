#include <doctest.h>

#include <cmath>

#include "targetpop/rng.hpp"
#include "targetpop/simulation.hpp"

using namespace targetpop;

namespace {

double logit(double p) { return std::log(p / (1.0 - p)); }

}  // namespace

TEST_CASE("intercept calibration closed forms") {
  CHECK(calibrate_intercept({0.0, 0.0, 0.0}, 0.5).value ==
        doctest::Approx(0.0).epsilon(1e-8));
  CHECK(calibrate_intercept({0.0, 0.0, 0.0}, 0.1).value ==
        doctest::Approx(logit(0.1)).epsilon(1e-8));
  CHECK_THROWS_AS(calibrate_intercept({1.0, 1.0, 1.0}, 0.0), InputError);
}

TEST_CASE("intercept calibration agrees with a fresh Monte Carlo check") {
  const double theta0 = calibrate_intercept({1.0, 1.0, 1.0}, 0.05).value;
  RandomStream rng(123, 9);
  const std::size_t draws = 1000000;
  double acc = 0.0;
  for (std::size_t i = 0; i < draws; ++i) {
    const double lp = theta0 + rng.normal() + rng.normal() + rng.normal();
    acc += expit(lp);
  }
  const double mc = acc / static_cast<double>(draws);
  CHECK(std::abs(mc - 0.05) <= 0.001);
}

TEST_CASE("binary effect calibration") {
  CHECK(calibrate_tau_binary(1.0, 0.0).value == doctest::Approx(0.0).epsilon(1e-7));

  // marginal OR 0.9 and 0.5 with no effect modification
  CHECK(calibrate_tau_binary(0.9, 0.0).value ==
        doctest::Approx(-0.1602783).epsilon(5e-3));
  CHECK(calibrate_tau_binary(0.5, 0.0).value ==
        doctest::Approx(-1.047368).epsilon(5e-3));

  // zeta = (0,1,1,1) puts the control mean at exactly 1/2 by symmetry,
  // so the OR-0.5 calibration must satisfy E[expit(tau + Z)] = 1/3 with
  // Z ~ N(0, 3); cross-check by direct Monte Carlo.
  const double tau = calibrate_tau_binary(0.5, 0.0).value;
  const BinaryTrueMeans means = binary_true_means(tau, 0.0, {0.0, 1.0, 1.0, 1.0});
  CHECK(means.p0 == doctest::Approx(0.5).epsilon(1e-9));
  RandomStream rng(7, 3);
  const std::size_t draws = 1000000;
  double acc = 0.0;
  const double sd = std::sqrt(3.0);
  for (std::size_t i = 0; i < draws; ++i) acc += expit(tau + sd * rng.normal());
  const double mc = acc / static_cast<double>(draws);
  CHECK(std::abs(mc - 1.0 / 3.0) <= 0.0015);
  CHECK(means.p1 == doctest::Approx(1.0 / 3.0).epsilon(1e-6));

  CHECK_THROWS_AS(calibrate_tau_binary(-0.5, 0.0), InputError);
}

TEST_CASE("generated cohorts hit the target trial size on average") {
  SimScenario s = make_scenario(OutcomeKind::continuous, 2000, 400, 0.0, 0.0);
  s.seed = 31;
  const double theta0 =
      calibrate_intercept(s.theta_rest, s.cohort_size, s.target_trial_size).value;
  const std::size_t reps = 200;
  double total = 0.0;
  for (std::size_t r = 0; r < reps; ++r)
    total += static_cast<double>(generate_cohort(s, theta0, r).n_trial());
  const double mean_n = total / static_cast<double>(reps);
  // per-replicate sd is sqrt(N q (1-q)) at most; 3 standard errors of the mean
  const double q = 0.2;
  const double se =
      std::sqrt(2000.0 * q * (1 - q)) / std::sqrt(static_cast<double>(reps));
  CHECK(std::abs(mean_n - 400.0) <= 3.0 * se);
}

TEST_CASE("null scenario has no trial-arm difference on average") {
  SimScenario s = make_scenario(OutcomeKind::continuous, 3000, 600, 0.0, 0.0);
  s.seed = 77;
  const double theta0 =
      calibrate_intercept(s.theta_rest, s.cohort_size, s.target_trial_size).value;
  double total = 0.0;
  const std::size_t reps = 60;
  for (std::size_t r = 0; r < reps; ++r) {
    const CohortDataset data = generate_cohort(s, theta0, r);
    double sum1 = 0.0, sum0 = 0.0;
    std::size_t n1 = 0, n0 = 0;
    for (std::size_t i = 0; i < data.n_rows(); ++i) {
      if (!data.participation[i]) continue;
      if (data.treatment[i] == 1) {
        sum1 += data.outcome[i];
        ++n1;
      } else {
        sum0 += data.outcome[i];
        ++n0;
      }
    }
    total += sum1 / n1 - sum0 / n0;
  }
  CHECK(std::abs(total / reps) <= 0.05);
}

TEST_CASE("true effects") {
  SimScenario cont = make_scenario(OutcomeKind::continuous, 1000, 100, 2.0, 2.0);
  CHECK(true_effect(cont, Contrast::difference) == 2.0);
  CHECK_THROWS_AS(true_effect(cont, Contrast::odds_ratio), InputError);

  SimScenario null_bin = make_scenario(OutcomeKind::binary, 1000, 100, 0.0, 0.0);
  const BinaryTrueMeans means = binary_true_means(0.0, 0.0, null_bin.zeta);
  CHECK(means.p0 == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(means.p1 == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(true_effect(null_bin, Contrast::odds_ratio) ==
        doctest::Approx(1.0).epsilon(1e-8));

  SimScenario bin = make_scenario(OutcomeKind::binary, 1000, 100,
                                  calibrate_tau_binary(0.5, 0.0).value, 0.0);
  CHECK(true_effect(bin, Contrast::odds_ratio) ==
        doctest::Approx(0.5).epsilon(1e-4));
}

TEST_CASE("single-replicate summaries have zero variance") {
  SimScenario s = make_scenario(OutcomeKind::continuous, 1500, 300, 1.0, 0.0);
  s.replicates = 1;
  s.seed = 5;
  const std::vector<SimSummary> summaries = run_scenario(s);
  REQUIRE(summaries.size() == 1);
  for (const auto& perf : summaries[0].perf) {
    CHECK(perf.variance == 0.0);
    CHECK(perf.mse == doctest::Approx(perf.bias * perf.bias).epsilon(1e-12));
  }
}

TEST_CASE("mse equals squared bias plus variance on the same replicates") {
  SimScenario s = make_scenario(OutcomeKind::continuous, 1500, 300, 1.0, 1.0);
  s.replicates = 25;
  s.seed = 6;
  const std::vector<SimSummary> summaries = run_scenario(s);
  for (const auto& perf : summaries[0].perf) {
    const double lhs = perf.mse;
    const double rhs = perf.bias * perf.bias + perf.variance;
    CHECK(std::abs(lhs - rhs) <= 1e-9 * std::max(1.0, std::abs(lhs)));
  }
}

TEST_CASE("scenario runs are deterministic and thread-count independent") {
  SimScenario s = make_scenario(OutcomeKind::continuous, 1200, 240, 0.5, 1.0);
  s.replicates = 12;
  s.seed = 8;
  SimOptions one;
  one.threads = 1;
  SimOptions four;
  four.threads = 4;
  const auto a = run_scenario(s, one);
  const auto b = run_scenario(s, four);
  for (std::size_t e = 0; e < a[0].perf.size(); ++e) {
    CHECK(a[0].perf[e].bias == b[0].perf[e].bias);
    CHECK(a[0].perf[e].variance == b[0].perf[e].variance);
    CHECK(a[0].perf[e].mse == b[0].perf[e].mse);
  }
}

TEST_CASE("binary scenarios summarize all three contrast scales") {
  SimScenario s = make_scenario(OutcomeKind::binary, 2500, 500,
                                calibrate_tau_binary(0.9, 0.0).value, 0.0);
  s.replicates = 10;
  s.seed = 10;
  const std::vector<SimSummary> summaries = run_scenario(s);
  REQUIRE(summaries.size() == 3);
  CHECK(summaries[0].contrast == Contrast::odds_ratio);
  CHECK(summaries[1].contrast == Contrast::difference);
  CHECK(summaries[2].contrast == Contrast::ratio);
  CHECK(summaries[0].true_effect == doctest::Approx(0.9).epsilon(1e-6));
}

TEST_CASE("excess replicate failures invalidate a scenario summary") {
  // a 6-row target trial loses an arm in most replicates
  SimScenario s = make_scenario(OutcomeKind::continuous, 400, 6, 0.0, 0.0);
  s.replicates = 40;
  s.seed = 55;
  CHECK_THROWS_AS(run_scenario(s), NumericalError);
}

TEST_CASE("factorial runs record scenario failures and keep going") {
  SimScenario bad = make_scenario(OutcomeKind::continuous, 400, 6, 0.0, 0.0);
  bad.replicates = 20;
  bad.seed = 56;
  SimScenario good = make_scenario(OutcomeKind::continuous, 1200, 240, 1.0, 0.0);
  good.replicates = 5;
  good.seed = 57;
  const auto records = run_factorial({bad, good});
  REQUIRE(records.size() == 2);
  CHECK(!records[0].error.empty());
  CHECK(records[1].error.empty());
  CHECK(records[1].summaries.size() == 1);
  // failed scenarios are omitted from the csv, surviving ones kept
  const std::string csv = summaries_to_csv(records);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
}

TEST_CASE("identical grid entries give identical factorial rows") {
  SimScenario s = make_scenario(OutcomeKind::continuous, 1200, 240, 1.0, 1.0);
  s.replicates = 8;
  s.seed = 99;
  const auto records = run_factorial({s, s});
  REQUIRE(records.size() == 2);
  REQUIRE(records[0].error.empty());
  REQUIRE(records[1].error.empty());
  for (std::size_t e = 0; e < records[0].summaries[0].perf.size(); ++e) {
    CHECK(records[0].summaries[0].perf[e].bias ==
          records[1].summaries[0].perf[e].bias);
    CHECK(records[0].summaries[0].perf[e].variance ==
          records[1].summaries[0].perf[e].variance);
  }
}

TEST_CASE("scenario grid configuration parsing") {
  const std::string config = R"({
    "master_seed": 555,
    "replicates": 4,
    "scenarios": [
      {"outcome": "continuous", "cohort_size": 1000, "trial_size": 200,
       "tau": 1.0, "psi": 2.0},
      {"outcome": "binary", "cohort_size": 800, "trial_size": 160,
       "marginal_or": 0.9, "psi": 0.0, "seed": 42}
    ],
    "factorial": {
      "outcome": "continuous",
      "cohort_sizes": [2000],
      "trial_sizes": [100, 200],
      "taus": [0.0, 1.0],
      "psis": [0.0, 1.0, 2.0]
    }
  })";
  const auto grid = load_scenario_grid(config);
  REQUIRE(grid.size() == 2 + 2 * 2 * 3);
  CHECK(grid[0].tau == 1.0);
  CHECK(grid[0].replicates == 4);
  CHECK(grid[0].zeta == std::vector<double>{-3.0, 1.0, 1.0, 1.0});
  CHECK(grid[1].outcome_kind == OutcomeKind::binary);
  CHECK(grid[1].seed == 42);
  CHECK(grid[1].zeta == std::vector<double>{0.0, 1.0, 1.0, 1.0});
  CHECK(grid[1].tau == doctest::Approx(-0.1602783).epsilon(5e-3));
  // expansion order: tau-major, then psi, then trial size
  CHECK(grid[2].tau == 0.0);
  CHECK(grid[2].psi == 0.0);
  CHECK(grid[2].target_trial_size == 100);
  CHECK(grid[3].target_trial_size == 200);
  CHECK(grid[4].psi == 1.0);
  CHECK(grid.back().tau == 1.0);
  CHECK(grid.back().psi == 2.0);

  // distinct derived seeds
  CHECK(grid[2].seed != grid[3].seed);

  CHECK_THROWS_AS(load_scenario_grid("{"), InputError);
  CHECK_THROWS_AS(load_scenario_grid("{}"), InputError);
}

TEST_CASE("summary csv layout") {
  SimScenario s = make_scenario(OutcomeKind::continuous, 1200, 240, 1.0, 0.0);
  s.replicates = 3;
  s.seed = 12;
  const auto records = run_factorial({s});
  const std::string csv = summaries_to_csv(records);
  CHECK(csv.find("scenario,outcome,cohort_size,trial_size,tau,psi,contrast,"
                 "metric,trial,om,ipw,dr1,dr2,true_effect,replicates,skipped") == 0);
  // one scenario, one contrast, three metric rows
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
  CHECK(csv.find("bias") != std::string::npos);
  CHECK(csv.find("variance") != std::string::npos);
  CHECK(csv.find("mse") != std::string::npos);
}

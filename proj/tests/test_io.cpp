#include <doctest.h>

#include <sstream>

#include "targetpop/io.hpp"
#include "targetpop/simulation.hpp"

using namespace targetpop;

namespace {

ColumnRoles default_roles() {
  ColumnRoles roles;
  roles.participation = "participation";
  roles.treatment = "treatment";
  roles.outcome = "outcome";
  roles.covariates = {"x1", "x2", "x3"};
  return roles;
}

}  // namespace

TEST_CASE("a simulated cohort round-trips through csv with bit-identical estimates") {
  SimScenario s = make_scenario(OutcomeKind::continuous, 1500, 300, 1.0, 1.0);
  s.seed = 404;
  const double theta0 =
      calibrate_intercept(s.theta_rest, s.cohort_size, s.target_trial_size).value;
  const CohortDataset data = generate_cohort(s, theta0, 0);

  std::stringstream buffer;
  write_cohort_csv(buffer, data);
  IngestReport report;
  const CohortDataset reread = read_cohort_csv(buffer, default_roles(), report);

  REQUIRE(reread.n_rows() == data.n_rows());
  CHECK(report.rows_dropped_incomplete == 0);
  for (std::size_t i = 0; i < data.n_rows(); ++i) {
    CHECK(reread.participation[i] == data.participation[i]);
    CHECK(reread.treatment[i] == data.treatment[i]);
    if (data.participation[i]) CHECK(reread.outcome[i] == data.outcome[i]);
    for (Eigen::Index j = 0; j < data.covariates.cols(); ++j)
      CHECK(reread.covariates(static_cast<Eigen::Index>(i), j) ==
            data.covariates(static_cast<Eigen::Index>(i), j));
  }

  AnalysisSpec spec;
  spec.participation_covariates = {0, 1, 2};
  spec.outcome_covariates = {0, 1, 2};
  spec.treatment_covariates = {0, 1, 2};
  const AnalysisResult direct = analyze(data, spec);
  const AnalysisResult via_csv = analyze(reread, spec);
  for (std::size_t m = 0; m < direct.means.size(); ++m)
    for (std::size_t a = 0; a < direct.means[m].per_arm.size(); ++a)
      CHECK(via_csv.means[m].per_arm[a] == direct.means[m].per_arm[a]);
}

TEST_CASE("unknown columns warn; missing mandatory columns abort") {
  std::stringstream in(
      "participation,treatment,outcome,x1,x2,x3,extra\n"
      "1,1,0.5,0.1,0.2,0.3,9\n"
      "1,0,0.25,0.0,0.1,0.2,9\n"
      "0,,,-0.3,0.4,0.0,9\n");
  IngestReport report;
  const CohortDataset data = read_cohort_csv(in, default_roles(), report);
  CHECK(data.n_rows() == 3);
  REQUIRE(report.warnings.size() == 1);
  CHECK(report.warnings[0].find("extra") != std::string::npos);

  std::stringstream missing("participation,treatment,x1,x2,x3\n1,1,0,0,0\n");
  IngestReport r2;
  CHECK_THROWS_AS(read_cohort_csv(missing, default_roles(), r2), InputError);
}

TEST_CASE("rows with incomplete covariates are dropped and counted") {
  std::stringstream in(
      "participation,treatment,outcome,x1,x2,x3\n"
      "1,1,0.5,0.1,0.2,0.3\n"
      "1,0,0.25,,0.1,0.2\n"
      "1,0,0.25,0.3,0.1,0.2\n"
      "0,,,NA,0.4,0.0\n"
      "0,,,0.5,0.4,0.0\n");
  IngestReport report;
  const CohortDataset data = read_cohort_csv(in, default_roles(), report);
  CHECK(report.rows_read == 5);
  CHECK(report.rows_dropped_incomplete == 2);
  CHECK(data.n_rows() == 3);
}

TEST_CASE("structural violations abort with the offending line") {
  // randomized row without an outcome
  std::stringstream a(
      "participation,treatment,outcome,x1,x2,x3\n"
      "1,1,,0.1,0.2,0.3\n");
  IngestReport ra;
  CHECK_THROWS_AS(read_cohort_csv(a, default_roles(), ra), InputError);

  // non-randomized row carrying treatment
  std::stringstream b(
      "participation,treatment,outcome,x1,x2,x3\n"
      "1,1,1.0,0.1,0.2,0.3\n"
      "0,1,,0.1,0.2,0.3\n");
  IngestReport rb;
  CHECK_THROWS_AS(read_cohort_csv(b, default_roles(), rb), InputError);

  // participation outside {0,1}
  std::stringstream c(
      "participation,treatment,outcome,x1,x2,x3\n"
      "2,1,1.0,0.1,0.2,0.3\n");
  IngestReport rc;
  CHECK_THROWS_AS(read_cohort_csv(c, default_roles(), rc), InputError);

  // ragged row
  std::stringstream d(
      "participation,treatment,outcome,x1,x2,x3\n"
      "1,1,1.0,0.1,0.2\n");
  IngestReport rd;
  CHECK_THROWS_AS(read_cohort_csv(d, default_roles(), rd), InputError);
}

TEST_CASE("reports serialize the estimates and diagnostics") {
  SimScenario s = make_scenario(OutcomeKind::continuous, 800, 200, 0.5, 0.0);
  s.seed = 17;
  const double theta0 =
      calibrate_intercept(s.theta_rest, s.cohort_size, s.target_trial_size).value;
  const CohortDataset data = generate_cohort(s, theta0, 1);
  AnalysisSpec spec;
  spec.participation_covariates = {0, 1, 2};
  spec.outcome_covariates = {0, 1, 2};
  const AnalysisResult analysis = analyze(data, spec);

  const std::string json = report_to_json(data, analysis, nullptr, nullptr);
  CHECK(json.find("\"estimates\"") != std::string::npos);
  CHECK(json.find("\"ipw\"") != std::string::npos);
  CHECK(json.find("\"min_participation_prob\"") != std::string::npos);

  const std::string table = render_table(data, analysis, nullptr);
  CHECK(table.find("trial_only") != std::string::npos);
  CHECK(table.find("difference[1 vs 0]") != std::string::npos);
}

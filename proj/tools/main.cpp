#include <CLI11.hpp>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "targetpop/bootstrap.hpp"
#include "targetpop/io.hpp"
#include "targetpop/oracle.hpp"
#include "targetpop/simulation.hpp"

namespace tp = targetpop;

namespace {

constexpr std::uint64_t kDefaultSeed = 20240801;

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<double> split_doubles(const std::string& text) {
  std::vector<double> out;
  for (const auto& item : split_list(text)) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw tp::InputError("cannot parse '" + item + "' as a number");
    }
  }
  return out;
}

tp::Estimator parse_estimator(const std::string& name) {
  static const std::map<std::string, tp::Estimator> table = {
      {"trial", tp::Estimator::trial_only}, {"trial_only", tp::Estimator::trial_only},
      {"om", tp::Estimator::om},           {"ipw", tp::Estimator::ipw},
      {"dr1", tp::Estimator::dr1},         {"dr2", tp::Estimator::dr2}};
  const auto it = table.find(name);
  if (it == table.end()) throw tp::InputError("unknown estimator '" + name + "'");
  return it->second;
}

tp::Contrast parse_contrast(const std::string& name) {
  static const std::map<std::string, tp::Contrast> table = {
      {"difference", tp::Contrast::difference},
      {"ratio", tp::Contrast::ratio},
      {"odds_ratio", tp::Contrast::odds_ratio}};
  const auto it = table.find(name);
  if (it == table.end()) throw tp::InputError("unknown contrast '" + name + "'");
  return it->second;
}

std::vector<std::size_t> column_indices(const std::vector<std::string>& names,
                                        const std::vector<std::string>& dataset_columns,
                                        const std::string& what) {
  std::vector<std::size_t> out;
  for (const auto& name : names) {
    const auto it =
        std::find(dataset_columns.begin(), dataset_columns.end(), name);
    if (it == dataset_columns.end())
      throw tp::InputError(what + ": column '" + name + "' was not loaded");
    out.push_back(static_cast<std::size_t>(it - dataset_columns.begin()));
  }
  return out;
}

int arm_index(const tp::CohortDataset& data, const std::string& label) {
  const auto it = std::find(data.treatment_levels.begin(),
                            data.treatment_levels.end(), label);
  if (it == data.treatment_levels.end())
    throw tp::InputError("treatment level '" + label + "' not present in the data");
  return static_cast<int>(it - data.treatment_levels.begin());
}

struct EstimateArgs {
  std::string input;
  std::string output;
  std::string participation = "participation";
  std::string treatment = "treatment";
  std::string outcome = "outcome";
  std::string participation_covariates;
  std::string outcome_covariates;
  std::string treatment_covariates;
  std::string treatment_probs;
  std::string estimators = "trial,om,ipw,dr1,dr2";
  std::string contrasts = "difference";
  std::string arms;
  std::string family = "auto";
  std::size_t bootstrap = 0;
  double ci_level = 0.95;
  std::uint64_t seed = kDefaultSeed;
  double truncate_weights = 0.0;
  bool hajek = false;
  unsigned threads = 0;
};

int run_estimate(const EstimateArgs& args) {
  std::vector<std::string> p_cov = split_list(args.participation_covariates);
  std::vector<std::string> o_cov = args.outcome_covariates.empty()
                                       ? p_cov
                                       : split_list(args.outcome_covariates);
  std::vector<std::string> t_cov = split_list(args.treatment_covariates);
  if (p_cov.empty()) throw tp::InputError("--participation-covariates is required");

  // dataset columns = union of all covariate lists, in first-seen order
  std::vector<std::string> all_cov = p_cov;
  for (const auto& name : o_cov)
    if (std::find(all_cov.begin(), all_cov.end(), name) == all_cov.end())
      all_cov.push_back(name);
  for (const auto& name : t_cov)
    if (std::find(all_cov.begin(), all_cov.end(), name) == all_cov.end())
      all_cov.push_back(name);

  tp::ColumnRoles roles;
  roles.participation = args.participation;
  roles.treatment = args.treatment;
  roles.outcome = args.outcome;
  roles.covariates = all_cov;

  tp::IngestReport ingest;
  const tp::CohortDataset data = tp::read_cohort_csv(args.input, roles, ingest);
  for (const auto& warning : ingest.warnings)
    std::cerr << "warning: " << warning << '\n';
  if (ingest.rows_dropped_incomplete > 0)
    std::cerr << "note: dropped " << ingest.rows_dropped_incomplete
              << " rows with incomplete covariates (complete-case analysis)\n";

  tp::AnalysisSpec spec;
  spec.participation_covariates =
      column_indices(p_cov, data.covariate_names, "participation covariates");
  spec.outcome_covariates =
      column_indices(o_cov, data.covariate_names, "outcome covariates");
  spec.treatment_covariates =
      column_indices(t_cov, data.covariate_names, "treatment covariates");
  spec.estimators.clear();
  for (const auto& name : split_list(args.estimators))
    spec.estimators.push_back(parse_estimator(name));
  if (spec.estimators.empty())
    throw tp::InputError("--estimators: need at least one estimator");
  spec.contrasts.clear();
  for (const auto& name : split_list(args.contrasts))
    spec.contrasts.push_back(parse_contrast(name));
  if (!args.treatment_probs.empty()) {
    spec.treatment_mode = tp::TreatmentProbMode::known;
    spec.known_treatment_probs = split_doubles(args.treatment_probs);
  }
  if (args.truncate_weights > 0.0) spec.truncation = args.truncate_weights;
  spec.hajek_ipw = args.hajek;

  if (!args.arms.empty()) {
    const auto labels = split_list(args.arms);
    if (labels.size() != 2)
      throw tp::InputError("--arms expects two treatment levels, e.g. 1,0");
    spec.contrast_arm_a = arm_index(data, labels[0]);
    spec.contrast_arm_b = arm_index(data, labels[1]);
  } else if (data.treatment_levels.size() >= 2) {
    spec.contrast_arm_a = 1;
    spec.contrast_arm_b = 0;
  } else {
    spec.contrasts.clear();  // single arm: means only
  }

  if (args.family == "gaussian") {
    spec.outcome_family = tp::GlmFamily::gaussian_identity;
  } else if (args.family == "binomial") {
    spec.outcome_family = tp::GlmFamily::binomial_logit;
  } else if (args.family == "auto") {
    bool binary = true;
    for (std::size_t i = 0; i < data.n_rows() && binary; ++i) {
      if (data.participation[i] && data.outcome[i] != 0.0 && data.outcome[i] != 1.0)
        binary = false;
    }
    spec.outcome_family =
        binary ? tp::GlmFamily::binomial_logit : tp::GlmFamily::gaussian_identity;
  } else {
    throw tp::InputError("--family must be auto, gaussian, or binomial");
  }

  std::optional<tp::BootstrapResult> boot;
  tp::AnalysisResult analysis;
  if (args.bootstrap > 0) {
    tp::BootstrapConfig config;
    config.replicates = args.bootstrap;
    config.seed = args.seed;
    config.ci_level = args.ci_level;
    config.threads = args.threads;
    boot = tp::bootstrap_ci(data, spec, config);
    analysis = boot->analysis;
  } else {
    analysis = tp::analyze(data, spec);
  }

  if (!analysis.diagnostics.min_weight_per_arm.empty()) {
    std::cerr << "positivity: participation probability in ["
              << analysis.diagnostics.min_participation_prob << ", "
              << analysis.diagnostics.max_participation_prob << "]";
    for (std::size_t a = 0; a < analysis.diagnostics.min_weight_per_arm.size(); ++a)
      std::cerr << ", min w[" << data.treatment_levels[a] << "] = "
                << analysis.diagnostics.min_weight_per_arm[a];
    if (analysis.diagnostics.truncated_rows > 0)
      std::cerr << ", truncated " << analysis.diagnostics.truncated_rows
                << " weights";
    std::cerr << '\n';
  }

  std::cout << tp::render_table(data, analysis, boot ? &*boot : nullptr);
  if (!args.output.empty()) {
    std::ofstream out(args.output);
    if (!out) throw tp::InputError("cannot open output file '" + args.output + "'");
    out << tp::report_to_json(data, analysis, boot ? &*boot : nullptr, &ingest);
  }
  return 0;
}

struct SimulateArgs {
  std::string config;
  std::string output;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> replicates;
  unsigned threads = 0;
};

int run_simulate(const SimulateArgs& args) {
  std::ifstream in(args.config);
  if (!in) throw tp::InputError("cannot open config file '" + args.config + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::vector<tp::SimScenario> grid =
      tp::load_scenario_grid(buffer.str(), args.seed, args.replicates);

  tp::SimOptions options;
  options.threads = args.threads;
  const std::vector<tp::ScenarioRecord> records = tp::run_factorial(grid, options);

  std::size_t failed = 0;
  for (const auto& record : records) {
    if (!record.error.empty()) {
      ++failed;
      std::cerr << "scenario " << record.index + 1 << " failed: " << record.error
                << '\n';
    }
  }
  const std::string csv = tp::summaries_to_csv(records);
  if (args.output.empty()) {
    std::cout << csv;
  } else {
    std::ofstream out(args.output);
    if (!out) throw tp::InputError("cannot open output file '" + args.output + "'");
    out << csv;
  }
  if (failed == records.size())
    throw tp::NumericalError("all scenarios failed");
  return 0;
}

struct VerifyArgs {
  std::string input;
  std::string participation = "participation";
  std::string treatment = "treatment";
  std::string outcome = "outcome";
  std::string covariates;
  double tolerance = 1e-8;
};

int run_verify(const VerifyArgs& args) {
  tp::ColumnRoles roles;
  roles.participation = args.participation;
  roles.treatment = args.treatment;
  roles.outcome = args.outcome;
  roles.covariates = split_list(args.covariates);
  if (roles.covariates.empty())
    throw tp::InputError("--covariates is required for verify");

  tp::IngestReport ingest;
  const tp::CohortDataset data = tp::read_cohort_csv(args.input, roles, ingest);

  // group rows by exact covariate pattern
  std::map<std::vector<double>, std::size_t> cell_of;
  tp::DiscreteCohortSpec spec;
  spec.treatment_levels = data.treatment_levels;
  for (std::size_t i = 0; i < data.n_rows(); ++i) {
    std::vector<double> pattern(static_cast<std::size_t>(data.covariates.cols()));
    for (Eigen::Index j = 0; j < data.covariates.cols(); ++j)
      pattern[static_cast<std::size_t>(j)] =
          data.covariates(static_cast<Eigen::Index>(i), j);
    auto it = cell_of.find(pattern);
    if (it == cell_of.end()) {
      if (spec.cells.size() == 8)
        throw tp::InputError(
            "verify: more than 8 distinct covariate patterns; the enumeration "
            "oracle is for small discrete datasets");
      tp::DiscreteCell cell;
      cell.pattern = pattern;
      cell.arm_outcomes.resize(data.treatment_levels.size());
      it = cell_of.emplace(pattern, spec.cells.size()).first;
      spec.cells.push_back(std::move(cell));
    }
    tp::DiscreteCell& cell = spec.cells[it->second];
    ++cell.count;
    if (data.participation[i])
      cell.arm_outcomes[static_cast<std::size_t>(data.treatment[i])].push_back(
          data.outcome[i]);
  }

  bool all_ok = true;
  std::cout << "arm  plugin        om            ipw           dr1           dr2"
               "           max|diff|\n";
  for (std::size_t a = 0; a < data.treatment_levels.size(); ++a) {
    const tp::OracleComparison cmp =
        tp::compare_with_saturated_estimators(spec, static_cast<int>(a));
    const double worst = cmp.max_abs_difference();
    const bool ok = worst <= args.tolerance;
    all_ok = all_ok && ok;
    std::cout << data.treatment_levels[a] << "    ";
    std::cout.precision(10);
    std::cout << cmp.plugin << "  " << cmp.om << "  " << cmp.ipw << "  " << cmp.dr1
              << "  " << cmp.dr2 << "  " << worst << (ok ? "  ok" : "  MISMATCH")
              << '\n';
  }
  if (!all_ok)
    throw tp::NumericalError("verify: estimators disagree with the enumeration oracle");
  std::cout << "verify: estimators match the enumeration oracle within "
            << args.tolerance << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Average treatment effects in the target population of all "
      "trial-eligible individuals, from a trial nested in a cohort"};
  app.require_subcommand(1);

  EstimateArgs est;
  CLI::App* cmd_estimate =
      app.add_subcommand("estimate", "Estimate effects from a cohort CSV file");
  cmd_estimate->add_option("--input", est.input, "Input CSV file")->required();
  cmd_estimate->add_option("--output", est.output, "Write a JSON report here");
  cmd_estimate->add_option("--participation", est.participation,
                           "Participation column (0/1)");
  cmd_estimate->add_option("--treatment", est.treatment, "Treatment column");
  cmd_estimate->add_option("--outcome", est.outcome, "Outcome column");
  cmd_estimate
      ->add_option("--participation-covariates", est.participation_covariates,
                   "Comma-separated covariates for the participation model")
      ->required();
  cmd_estimate->add_option("--outcome-covariates", est.outcome_covariates,
                           "Covariates for the outcome models (default: same as "
                           "participation)");
  cmd_estimate->add_option("--treatment-covariates", est.treatment_covariates,
                           "Covariates for the estimated treatment model "
                           "(default: intercept only)");
  cmd_estimate->add_option("--treatment-probs", est.treatment_probs,
                           "Known per-arm assignment probabilities (defined "
                           "randomization); switches off estimation");
  cmd_estimate->add_option("--estimators", est.estimators,
                           "Estimators to run (trial,om,ipw,dr1,dr2)");
  cmd_estimate->add_option("--contrasts", est.contrasts,
                           "Contrasts (difference,ratio,odds_ratio)");
  cmd_estimate->add_option("--arms", est.arms,
                           "Contrast pair a,a' (default: second vs first level)");
  cmd_estimate->add_option("--family", est.family,
                           "Outcome family: auto, gaussian, binomial");
  cmd_estimate->add_option("--bootstrap", est.bootstrap,
                           "Percentile-bootstrap replicates (0 = none)");
  cmd_estimate->add_option("--ci-level", est.ci_level, "Interval level");
  cmd_estimate->add_option("--seed", est.seed, "Bootstrap seed");
  cmd_estimate->add_option("--truncate-weights", est.truncate_weights,
                           "Lower bound applied to the participation-and-"
                           "assignment weights");
  cmd_estimate->add_flag("--hajek", est.hajek,
                         "Normalize IPW by the sum of weights instead of N");
  cmd_estimate->add_option("--threads", est.threads, "Worker threads (0 = auto)");

  SimulateArgs sim;
  CLI::App* cmd_simulate =
      app.add_subcommand("simulate", "Run simulation scenarios from a JSON grid");
  cmd_simulate->add_option("--config", sim.config, "Scenario grid (JSON)")
      ->required();
  cmd_simulate->add_option("--output", sim.output, "Summary CSV (default stdout)");
  std::uint64_t sim_seed = 0;
  std::size_t sim_replicates = 0;
  CLI::Option* seed_opt =
      cmd_simulate->add_option("--seed", sim_seed, "Master seed override");
  CLI::Option* rep_opt = cmd_simulate->add_option("--replicates", sim_replicates,
                                                  "Replicates override");
  cmd_simulate->add_option("--threads", sim.threads, "Worker threads (0 = auto)");

  CLI::App* cmd_calibrate =
      app.add_subcommand("calibrate", "Solve for simulation design constants");
  cmd_calibrate->require_subcommand(1);
  std::string theta_rest = "1,1,1";
  double fraction = 0.0;
  std::size_t cal_N = 0, cal_n = 0;
  CLI::App* cal_intercept = cmd_calibrate->add_subcommand(
      "intercept", "Selection-model intercept for a target trial fraction");
  cal_intercept->add_option("--theta-rest", theta_rest,
                            "Selection coefficients for x1,x2,x3");
  CLI::Option* frac_opt =
      cal_intercept->add_option("--fraction", fraction, "Target n/N");
  cal_intercept->add_option("--cohort-size", cal_N, "N (with --trial-size)");
  cal_intercept->add_option("--trial-size", cal_n, "target n (with --cohort-size)");

  double marginal_or = 0.0, cal_psi = 0.0;
  std::string zeta = "0,1,1,1";
  CLI::App* cal_tau = cmd_calibrate->add_subcommand(
      "tau-binary", "Conditional effect giving a target marginal odds ratio");
  cal_tau->add_option("--marginal-or", marginal_or, "Target marginal odds ratio")
      ->required();
  cal_tau->add_option("--psi", cal_psi, "Effect modification by x1");
  cal_tau->add_option("--zeta", zeta, "Outcome coefficients (intercept,x1,x2,x3)");

  VerifyArgs ver;
  CLI::App* cmd_verify = app.add_subcommand(
      "verify", "Check the estimators against the enumeration oracle on a "
                "small discrete dataset");
  cmd_verify->add_option("--input", ver.input, "Input CSV file")->required();
  cmd_verify->add_option("--participation", ver.participation,
                         "Participation column (0/1)");
  cmd_verify->add_option("--treatment", ver.treatment, "Treatment column");
  cmd_verify->add_option("--outcome", ver.outcome, "Outcome column");
  cmd_verify->add_option("--covariates", ver.covariates,
                         "Comma-separated covariate columns")
      ->required();
  cmd_verify->add_option("--tolerance", ver.tolerance, "Agreement tolerance");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (cmd_estimate->parsed()) return run_estimate(est);
    if (cmd_simulate->parsed()) {
      if (*seed_opt) sim.seed = sim_seed;
      if (*rep_opt) sim.replicates = sim_replicates;
      return run_simulate(sim);
    }
    if (cmd_calibrate->parsed()) {
      if (cal_intercept->parsed()) {
        tp::CalibrationResult result;
        if (*frac_opt) {
          result = tp::calibrate_intercept(split_doubles(theta_rest), fraction);
        } else if (cal_N > 0 && cal_n > 0) {
          result = tp::calibrate_intercept(split_doubles(theta_rest), cal_N, cal_n);
        } else {
          throw tp::InputError(
              "calibrate intercept: need --fraction or --cohort-size with "
              "--trial-size");
        }
        std::cout.precision(10);
        std::cout << "theta0 = " << result.value << "  (residual " << result.residual
                  << ")\n";
      } else {
        const tp::CalibrationResult result =
            tp::calibrate_tau_binary(marginal_or, cal_psi, split_doubles(zeta));
        std::cout.precision(10);
        std::cout << "tau = " << result.value << "  (log-OR residual "
                  << result.residual << ")\n";
      }
      return 0;
    }
    if (cmd_verify->parsed()) return run_verify(ver);
  } catch (const tp::InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const tp::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}

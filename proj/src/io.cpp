#include "targetpop/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace targetpop {

namespace {

using nlohmann::json;

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(field);
      field.clear();
    } else if (ch != '\r') {
      field += ch;
    }
  }
  fields.push_back(field);
  return fields;
}

bool is_missing(const std::string& token) {
  return token.empty() || token == "NA" || token == "na" || token == "NaN" ||
         token == "nan";
}

double parse_double(const std::string& token, std::size_t line_no,
                    const std::string& column) {
  double value = 0.0;
  const char* begin = token.data();
  const char* end = begin + token.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end)
    throw InputError("csv line " + std::to_string(line_no) + ": column '" +
                     column + "' has non-numeric value '" + token + "'");
  return value;
}

std::string format_double(double v) {
  std::ostringstream out;
  out << std::setprecision(17) << v;
  return out.str();
}

}  // namespace

CohortDataset read_cohort_csv(std::istream& in, const ColumnRoles& roles,
                              IngestReport& report) {
  std::string line;
  if (!std::getline(in, line))
    throw InputError("csv: empty input (missing header)");
  const std::vector<std::string> header = split_line(line);

  std::map<std::string, std::size_t> column_of;
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (column_of.count(header[j]))
      throw InputError("csv: duplicate column '" + header[j] + "'");
    column_of[header[j]] = j;
  }
  auto require = [&](const std::string& name) {
    auto it = column_of.find(name);
    if (it == column_of.end())
      throw InputError("csv: missing mandatory column '" + name + "'");
    return it->second;
  };
  const std::size_t s_col = require(roles.participation);
  const std::size_t a_col = require(roles.treatment);
  const std::size_t y_col = require(roles.outcome);
  if (roles.covariates.empty())
    throw InputError("csv: no covariate columns requested");
  std::vector<std::size_t> x_cols;
  for (const auto& name : roles.covariates) x_cols.push_back(require(name));

  std::set<std::size_t> used(x_cols.begin(), x_cols.end());
  used.insert({s_col, a_col, y_col});
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (!used.count(j))
      report.warnings.push_back("ignoring column '" + header[j] + "'");
  }

  struct Row {
    int participation;
    std::string treatment;
    double outcome;
    std::vector<double> covariates;
  };
  std::vector<Row> rows;
  std::set<std::string> labels;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const std::vector<std::string> fields = split_line(line);
    if (fields.size() != header.size())
      throw InputError("csv line " + std::to_string(line_no) + ": expected " +
                       std::to_string(header.size()) + " fields, got " +
                       std::to_string(fields.size()));
    ++report.rows_read;

    Row row;
    bool incomplete = false;
    for (std::size_t j : x_cols) {
      if (is_missing(fields[j])) {
        incomplete = true;
        break;
      }
      row.covariates.push_back(parse_double(fields[j], line_no, header[j]));
    }
    if (incomplete) {
      ++report.rows_dropped_incomplete;
      continue;
    }

    const std::string& s_token = fields[s_col];
    if (s_token == "1") {
      row.participation = 1;
    } else if (s_token == "0") {
      row.participation = 0;
    } else {
      throw InputError("csv line " + std::to_string(line_no) +
                       ": participation must be 0 or 1, got '" + s_token + "'");
    }
    const bool has_a = !is_missing(fields[a_col]);
    const bool has_y = !is_missing(fields[y_col]);
    if (row.participation == 1) {
      if (!has_a || !has_y)
        throw InputError("csv line " + std::to_string(line_no) +
                         ": randomized row lacks treatment or outcome");
      row.treatment = fields[a_col];
      row.outcome = parse_double(fields[y_col], line_no, header[y_col]);
      labels.insert(row.treatment);
    } else {
      if (has_a || has_y)
        throw InputError("csv line " + std::to_string(line_no) +
                         ": non-randomized row carries treatment or outcome");
      row.outcome = std::numeric_limits<double>::quiet_NaN();
    }
    rows.push_back(std::move(row));
  }

  if (rows.empty()) throw InputError("csv: no usable rows");
  if (labels.empty()) throw InputError("csv: no randomized rows");

  CohortDataset data;
  data.treatment_levels.assign(labels.begin(), labels.end());
  data.covariate_names = roles.covariates;
  const std::size_t n = rows.size();
  data.covariates.resize(static_cast<Eigen::Index>(n),
                         static_cast<Eigen::Index>(roles.covariates.size()));
  data.participation.resize(n);
  data.treatment.assign(n, -1);
  data.outcome.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Row& row = rows[i];
    data.participation[i] = static_cast<std::uint8_t>(row.participation);
    data.outcome[i] = row.outcome;
    if (row.participation == 1) {
      const auto it = std::find(data.treatment_levels.begin(),
                                data.treatment_levels.end(), row.treatment);
      data.treatment[i] =
          static_cast<int>(it - data.treatment_levels.begin());
    }
    for (std::size_t j = 0; j < row.covariates.size(); ++j)
      data.covariates(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          row.covariates[j];
  }
  data.validate();
  return data;
}

CohortDataset read_cohort_csv(const std::string& path, const ColumnRoles& roles,
                              IngestReport& report) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open input file '" + path + "'");
  return read_cohort_csv(in, roles, report);
}

void write_cohort_csv(std::ostream& out, const CohortDataset& data) {
  out << "participation,treatment,outcome";
  for (std::size_t j = 0; j < static_cast<std::size_t>(data.covariates.cols()); ++j) {
    out << ','
        << (j < data.covariate_names.size() ? data.covariate_names[j]
                                            : "x" + std::to_string(j + 1));
  }
  out << '\n';
  for (std::size_t i = 0; i < data.n_rows(); ++i) {
    if (data.participation[i]) {
      out << "1," << data.treatment_levels[static_cast<std::size_t>(data.treatment[i])]
          << ',' << format_double(data.outcome[i]);
    } else {
      out << "0,,";
    }
    for (Eigen::Index j = 0; j < data.covariates.cols(); ++j)
      out << ',' << format_double(data.covariates(static_cast<Eigen::Index>(i), j));
    out << '\n';
  }
}

void write_cohort_csv(const std::string& path, const CohortDataset& data) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot open output file '" + path + "'");
  write_cohort_csv(out, data);
}

std::string report_to_json(const CohortDataset& data, const AnalysisResult& analysis,
                           const BootstrapResult* bootstrap,
                           const IngestReport* ingest) {
  json root;
  root["cohort_size"] = data.n_rows();
  root["trial_size"] = data.n_trial();
  root["treatment_levels"] = data.treatment_levels;
  if (ingest != nullptr) {
    root["rows_read"] = ingest->rows_read;
    root["rows_dropped_incomplete"] = ingest->rows_dropped_incomplete;
    root["warnings"] = ingest->warnings;
  }

  // positivity diagnostics exist once nuisance models have been fit
  if (!analysis.diagnostics.min_weight_per_arm.empty()) {
    json diagnostics;
    diagnostics["min_participation_prob"] = analysis.diagnostics.min_participation_prob;
    diagnostics["max_participation_prob"] = analysis.diagnostics.max_participation_prob;
    json min_weights = json::object();
    for (std::size_t a = 0; a < analysis.diagnostics.min_weight_per_arm.size(); ++a)
      min_weights[data.treatment_levels[a]] = analysis.diagnostics.min_weight_per_arm[a];
    diagnostics["min_weight_per_arm"] = min_weights;
    diagnostics["truncated_rows"] = analysis.diagnostics.truncated_rows;
    root["diagnostics"] = diagnostics;
  }

  json estimates = json::array();
  for (std::size_t m = 0; m < analysis.means.size(); ++m) {
    const auto& mean = analysis.means[m];
    json entry;
    entry["estimator"] = estimator_name(mean.estimator);
    entry["n_used"] = mean.n_used;
    json arms = json::object();
    for (std::size_t a = 0; a < mean.per_arm.size(); ++a) {
      json arm;
      arm["mean"] = mean.per_arm[a];
      if (bootstrap != nullptr) {
        arm["ci_low"] = bootstrap->mean_intervals[m][a].lo;
        arm["ci_high"] = bootstrap->mean_intervals[m][a].hi;
      }
      arms[data.treatment_levels[a]] = arm;
    }
    entry["arms"] = arms;
    json contrasts = json::array();
    for (const auto& effect : analysis.effects) {
      if (effect.estimator != mean.estimator) continue;
      json contrast;
      contrast["kind"] = contrast_name(effect.contrast);
      contrast["arms"] = {data.treatment_levels[static_cast<std::size_t>(effect.arm_a)],
                          data.treatment_levels[static_cast<std::size_t>(effect.arm_b)]};
      contrast["point"] = effect.point;
      if (effect.ci_low.has_value()) contrast["ci_low"] = *effect.ci_low;
      if (effect.ci_high.has_value()) contrast["ci_high"] = *effect.ci_high;
      contrasts.push_back(contrast);
    }
    entry["contrasts"] = contrasts;
    estimates.push_back(entry);
  }
  root["estimates"] = estimates;

  if (bootstrap != nullptr) {
    json boot;
    boot["replicates"] = bootstrap->diagnostics.replicates_requested;
    boot["completed"] = bootstrap->diagnostics.replicates_completed;
    boot["skipped"] = bootstrap->diagnostics.replicates_skipped;
    boot["ci_level"] = bootstrap->diagnostics.ci_level;
    boot["seed"] = bootstrap->diagnostics.seed;
    root["bootstrap"] = boot;
  }
  return root.dump(2);
}

std::string render_table(const CohortDataset& data, const AnalysisResult& analysis,
                         const BootstrapResult* bootstrap) {
  if (analysis.means.empty()) return "";
  const std::size_t n_arms = data.treatment_levels.size();

  auto fmt = [](double v) {
    std::ostringstream out;
    out << std::fixed << std::setprecision(4) << v;
    return out.str();
  };
  auto interval = [&](double lo, double hi) {
    return "(" + fmt(lo) + ", " + fmt(hi) + ")";
  };

  std::string ci_label = "95% CI";
  if (bootstrap != nullptr) {
    std::ostringstream label;
    label << bootstrap->diagnostics.ci_level * 100.0 << "% CI";
    ci_label = label.str();
  }

  std::vector<std::vector<std::string>> table;
  std::vector<std::string> head = {"estimator"};
  for (const auto& level : data.treatment_levels) {
    head.push_back("mean[" + level + "]");
    if (bootstrap != nullptr) head.push_back(ci_label);
  }
  for (const auto& effect : analysis.effects) {
    if (effect.estimator != analysis.means.front().estimator) continue;
    head.push_back(std::string(contrast_name(effect.contrast)) + "[" +
                   data.treatment_levels[static_cast<std::size_t>(effect.arm_a)] +
                   " vs " +
                   data.treatment_levels[static_cast<std::size_t>(effect.arm_b)] + "]");
    if (bootstrap != nullptr) head.push_back(ci_label);
  }
  table.push_back(head);

  for (std::size_t m = 0; m < analysis.means.size(); ++m) {
    const auto& mean = analysis.means[m];
    std::vector<std::string> row = {estimator_name(mean.estimator)};
    for (std::size_t a = 0; a < n_arms; ++a) {
      row.push_back(fmt(mean.per_arm[a]));
      if (bootstrap != nullptr)
        row.push_back(interval(bootstrap->mean_intervals[m][a].lo,
                               bootstrap->mean_intervals[m][a].hi));
    }
    for (const auto& effect : analysis.effects) {
      if (effect.estimator != mean.estimator) continue;
      row.push_back(fmt(effect.point));
      if (bootstrap != nullptr) {
        if (effect.ci_low.has_value())
          row.push_back(interval(*effect.ci_low, *effect.ci_high));
        else
          row.push_back("-");
      }
    }
    table.push_back(row);
  }

  std::vector<std::size_t> width(table.front().size(), 0);
  for (const auto& row : table)
    for (std::size_t j = 0; j < row.size(); ++j)
      width[j] = std::max(width[j], row[j].size());

  std::ostringstream out;
  for (const auto& row : table) {
    for (std::size_t j = 0; j < row.size(); ++j) {
      out << std::left << std::setw(static_cast<int>(width[j]) + 2) << row[j];
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace targetpop

#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ltd {

enum class ModelKind {
  kUnconditional,
  kNaiveExtrapolation,
  kPatternMixture,
  kPrincipalStrat,
  kTerminalDecline,
  kRca,
  kJointPah,
};

const char* to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view name);
std::vector<ModelKind> all_model_kinds();

// One estimated quantity. `conditioning` names the population the value
// describes, e.g. "given alive at t=5"; values with different conditioning
// sets are different estimands.
struct Estimate {
  std::string name;
  double value = 0.0;
  std::string unit;
  std::string conditioning;
};

struct TrajectoryPoint {
  std::string group;
  std::string stratum;
  double time = 0.0;
  double value = 0.0;
};

struct EstimandReport {
  ModelKind model_kind = ModelKind::kUnconditional;
  std::string label;  // stratum label for sub-reports
  std::string cohort_fingerprint;
  std::vector<Estimate> estimates;
  std::map<std::string, double> standard_errors;
  std::vector<EstimandReport> strata;
  std::vector<TrajectoryPoint> trajectories;
  std::vector<std::string> notes;

  const Estimate* find(std::string_view name) const;
  double value(std::string_view name) const;  // throws std::out_of_range
  const EstimandReport* stratum(std::string_view label) const;
  void add(std::string name, double value, std::string unit, std::string conditioning);
  std::vector<std::string> conditioning_labels() const;
};

std::string to_json(const EstimandReport& report, int indent = 2);
EstimandReport report_from_json(std::string_view text);
// Accepts a single report or a {"reports": [...]} bundle.
std::vector<EstimandReport> reports_from_json(std::string_view text);
std::string bundle_to_json(const std::vector<EstimandReport>& reports, int indent = 2);

// `group,stratum,time,value`, strata included.
std::string trajectories_csv(const EstimandReport& report);
std::string trajectories_csv(const std::vector<EstimandReport>& reports);

// Side-by-side table of estimates keyed by model kind. Rows are never pooled
// across model kinds.
struct ComparisonRow {
  std::string model_kind;
  std::string stratum;
  std::string estimate;
  double value = 0.0;
  std::optional<double> standard_error;
  std::string unit;
  std::string conditioning;
  std::string source;
};

struct Comparison {
  std::vector<ComparisonRow> rows;
  std::vector<std::string> warnings;
};

Comparison compare_reports(const std::vector<std::pair<std::string, EstimandReport>>& sourced);
std::string to_json(const Comparison& comparison, int indent = 2);
std::string to_csv(const Comparison& comparison);

}  // namespace ltd

#include "ltd/report.hpp"

#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "ltd/cohort_csv.hpp"
#include "ltd/error.hpp"

namespace ltd {

using nlohmann::json;

const char* to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::kUnconditional: return "unconditional";
    case ModelKind::kNaiveExtrapolation: return "naive_extrapolation";
    case ModelKind::kPatternMixture: return "pattern_mixture";
    case ModelKind::kPrincipalStrat: return "principal_strat";
    case ModelKind::kTerminalDecline: return "terminal_decline";
    case ModelKind::kRca: return "rca";
    case ModelKind::kJointPah: return "joint_pah";
  }
  return "?";
}

std::vector<ModelKind> all_model_kinds() {
  return {ModelKind::kUnconditional,  ModelKind::kNaiveExtrapolation, ModelKind::kPatternMixture,
          ModelKind::kPrincipalStrat, ModelKind::kTerminalDecline,    ModelKind::kRca,
          ModelKind::kJointPah};
}

ModelKind parse_model_kind(std::string_view name) {
  for (ModelKind k : all_model_kinds()) {
    if (name == to_string(k)) return k;
  }
  throw DataError("unknown model kind '" + std::string(name) + "'");
}

const Estimate* EstimandReport::find(std::string_view name) const {
  for (const auto& e : estimates) {
    if (e.name == name) return &e;
  }
  return nullptr;
}

double EstimandReport::value(std::string_view name) const {
  const Estimate* e = find(name);
  if (e == nullptr) {
    throw std::out_of_range("report " + std::string(to_string(model_kind)) + " has no estimate '" +
                            std::string(name) + "'");
  }
  return e->value;
}

const EstimandReport* EstimandReport::stratum(std::string_view label) const {
  for (const auto& s : strata) {
    if (s.label == label) return &s;
  }
  return nullptr;
}

void EstimandReport::add(std::string name, double value, std::string unit,
                         std::string conditioning) {
  estimates.push_back(Estimate{std::move(name), value, std::move(unit), std::move(conditioning)});
}

std::vector<std::string> EstimandReport::conditioning_labels() const {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& e : estimates) {
    if (seen.insert(e.conditioning).second) out.push_back(e.conditioning);
  }
  return out;
}

namespace {

json report_json(const EstimandReport& r) {
  json j;
  j["model_kind"] = to_string(r.model_kind);
  if (!r.label.empty()) j["label"] = r.label;
  if (!r.cohort_fingerprint.empty()) j["cohort_fingerprint"] = r.cohort_fingerprint;
  j["conditioning"] = r.conditioning_labels();
  j["estimates"] = json::array();
  for (const auto& e : r.estimates) {
    j["estimates"].push_back(
        {{"name", e.name}, {"value", e.value}, {"unit", e.unit}, {"conditioning", e.conditioning}});
  }
  j["standard_errors"] = json::object();
  for (const auto& [name, se] : r.standard_errors) j["standard_errors"][name] = se;
  j["strata"] = json::array();
  for (const auto& s : r.strata) j["strata"].push_back(report_json(s));
  j["trajectories"] = json::array();
  for (const auto& t : r.trajectories) {
    j["trajectories"].push_back(
        {{"group", t.group}, {"stratum", t.stratum}, {"time", t.time}, {"value", t.value}});
  }
  j["notes"] = r.notes;
  return j;
}

EstimandReport report_from(const json& j) {
  EstimandReport r;
  r.model_kind = parse_model_kind(j.at("model_kind").get<std::string>());
  r.label = j.value("label", "");
  r.cohort_fingerprint = j.value("cohort_fingerprint", "");
  for (const auto& e : j.at("estimates")) {
    r.estimates.push_back(Estimate{e.at("name").get<std::string>(), e.at("value").get<double>(),
                                   e.value("unit", ""), e.value("conditioning", "")});
  }
  if (j.contains("standard_errors")) {
    for (const auto& [name, se] : j.at("standard_errors").items()) {
      r.standard_errors[name] = se.get<double>();
    }
  }
  if (j.contains("strata")) {
    for (const auto& s : j.at("strata")) r.strata.push_back(report_from(s));
  }
  if (j.contains("trajectories")) {
    for (const auto& t : j.at("trajectories")) {
      r.trajectories.push_back(TrajectoryPoint{t.at("group").get<std::string>(),
                                               t.at("stratum").get<std::string>(),
                                               t.at("time").get<double>(), t.at("value").get<double>()});
    }
  }
  if (j.contains("notes")) r.notes = j.at("notes").get<std::vector<std::string>>();
  return r;
}

json parse(std::string_view text) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("invalid report JSON: ") + e.what());
  }
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

void append_trajectories(std::ostream& os, const EstimandReport& r) {
  for (const auto& t : r.trajectories) {
    os << csv_field(t.group) << ',' << csv_field(t.stratum) << ',' << format_number(t.time) << ','
       << format_number(t.value) << '\n';
  }
  for (const auto& s : r.strata) append_trajectories(os, s);
}

void append_rows(Comparison& cmp, const EstimandReport& r, const std::string& stratum,
                 const std::string& kind, const std::string& source) {
  for (const auto& e : r.estimates) {
    ComparisonRow row{kind, stratum, e.name, e.value, std::nullopt, e.unit, e.conditioning, source};
    if (auto it = r.standard_errors.find(e.name); it != r.standard_errors.end()) {
      row.standard_error = it->second;
    }
    cmp.rows.push_back(std::move(row));
  }
  for (const auto& s : r.strata) {
    append_rows(cmp, s, stratum.empty() ? s.label : stratum + "/" + s.label, kind, source);
  }
}

}  // namespace

std::string to_json(const EstimandReport& report, int indent) {
  return report_json(report).dump(indent);
}

EstimandReport report_from_json(std::string_view text) {
  try {
    return report_from(parse(text));
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed report: ") + e.what());
  }
}

std::vector<EstimandReport> reports_from_json(std::string_view text) {
  const json j = parse(text);
  std::vector<EstimandReport> out;
  try {
    if (j.contains("reports")) {
      for (const auto& r : j.at("reports")) out.push_back(report_from(r));
    } else {
      out.push_back(report_from(j));
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed report: ") + e.what());
  }
  return out;
}

std::string bundle_to_json(const std::vector<EstimandReport>& reports, int indent) {
  json j;
  j["reports"] = json::array();
  for (const auto& r : reports) j["reports"].push_back(report_json(r));
  return j.dump(indent);
}

std::string trajectories_csv(const EstimandReport& report) {
  return trajectories_csv(std::vector<EstimandReport>{report});
}

std::string trajectories_csv(const std::vector<EstimandReport>& reports) {
  std::ostringstream os;
  os << "group,stratum,time,value\n";
  for (const auto& r : reports) append_trajectories(os, r);
  return os.str();
}

Comparison compare_reports(const std::vector<std::pair<std::string, EstimandReport>>& sourced) {
  Comparison cmp;
  std::set<std::string> fingerprints;
  for (const auto& [source, r] : sourced) {
    if (!r.cohort_fingerprint.empty()) fingerprints.insert(r.cohort_fingerprint);
    append_rows(cmp, r, "", to_string(r.model_kind), source);
  }
  if (fingerprints.size() > 1) {
    std::string msg = "reports come from different cohorts (fingerprints:";
    for (const auto& f : fingerprints) msg += " " + f;
    cmp.warnings.push_back(msg + ")");
  }
  return cmp;
}

std::string to_json(const Comparison& comparison, int indent) {
  json j;
  j["rows"] = json::array();
  for (const auto& r : comparison.rows) {
    json row = {{"model_kind", r.model_kind}, {"stratum", r.stratum},     {"estimate", r.estimate},
                {"value", r.value},           {"unit", r.unit},           {"conditioning", r.conditioning},
                {"source", r.source}};
    row["standard_error"] = r.standard_error ? json(*r.standard_error) : json(nullptr);
    j["rows"].push_back(std::move(row));
  }
  j["warnings"] = comparison.warnings;
  return j.dump(indent);
}

std::string to_csv(const Comparison& comparison) {
  std::ostringstream os;
  os << "model_kind,stratum,estimate,value,standard_error,unit,conditioning,source\n";
  for (const auto& r : comparison.rows) {
    os << csv_field(r.model_kind) << ',' << csv_field(r.stratum) << ',' << csv_field(r.estimate)
       << ',' << format_number(r.value) << ','
       << (r.standard_error ? format_number(*r.standard_error) : std::string()) << ','
       << csv_field(r.unit) << ',' << csv_field(r.conditioning) << ',' << csv_field(r.source)
       << '\n';
  }
  return os.str();
}

}  // namespace ltd

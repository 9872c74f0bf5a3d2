#include "ltd/design.hpp"

#include <cmath>
#include <unordered_map>

#include "ltd/error.hpp"

namespace ltd {

const char* to_string(Regressor r) {
  switch (r) {
    case Regressor::kIntercept: return "intercept";
    case Regressor::kGroup: return "group";
    case Regressor::kBaselineAge: return "baseline_age";
    case Regressor::kTime: return "time";
    case Regressor::kTimeSq: return "time2";
    case Regressor::kGroupTime: return "group_time";
    case Regressor::kGroupTimeSq: return "group_time2";
  }
  return "?";
}

std::vector<Regressor> all_regressors() {
  return {Regressor::kIntercept, Regressor::kGroup,     Regressor::kBaselineAge,
          Regressor::kTime,      Regressor::kTimeSq,    Regressor::kGroupTime,
          Regressor::kGroupTimeSq};
}

Regressor parse_regressor(std::string_view name) {
  for (Regressor r : all_regressors()) {
    if (name == to_string(r)) return r;
  }
  throw DataError("unknown regressor '" + std::string(name) + "'");
}

std::vector<Regressor> parse_regressors(std::string_view list) {
  std::vector<Regressor> out;
  std::size_t start = 0;
  while (start <= list.size()) {
    auto pos = list.find(',', start);
    auto item = list.substr(start, pos == std::string_view::npos ? list.size() - start : pos - start);
    if (!item.empty()) out.push_back(parse_regressor(item));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  if (out.empty()) throw DataError("empty regressor list");
  return out;
}

double regressor_value(Regressor r, int group, double baseline_age, double time) {
  const double g = static_cast<double>(group);
  switch (r) {
    case Regressor::kIntercept: return 1.0;
    case Regressor::kGroup: return g;
    case Regressor::kBaselineAge: return baseline_age;
    case Regressor::kTime: return time;
    case Regressor::kTimeSq: return time * time;
    case Regressor::kGroupTime: return g * time;
    case Regressor::kGroupTimeSq: return g * time * time;
  }
  return 0.0;
}

DesignMatrix::DesignMatrix(Eigen::MatrixXd x, std::vector<std::string> names,
                           std::vector<SubjectId> row_clusters)
    : x_(std::move(x)), names_(std::move(names)) {
  if (x_.cols() < 1) {
    throw NumericalError(NumericalError::Kind::kDimension, "design has no columns");
  }
  if (static_cast<Eigen::Index>(names_.size()) != x_.cols()) {
    throw NumericalError(NumericalError::Kind::kDimension, "design column names do not match");
  }
  if (static_cast<Eigen::Index>(row_clusters.size()) != x_.rows()) {
    throw NumericalError(NumericalError::Kind::kDimension, "one cluster id per row required");
  }
  if (!x_.allFinite()) throw DataError("design matrix has non-finite entries");
  std::unordered_map<SubjectId, std::size_t> index;
  cluster_.reserve(row_clusters.size());
  for (auto& id : row_clusters) {
    auto [it, fresh] = index.try_emplace(id, labels_.size());
    if (fresh) labels_.push_back(std::move(id));
    cluster_.push_back(it->second);
  }
}

Eigen::Index DesignMatrix::column(std::string_view name) const {
  for (std::size_t k = 0; k < names_.size(); ++k) {
    if (names_[k] == name) return static_cast<Eigen::Index>(k);
  }
  return -1;
}

DesignMatrix build_design(const std::vector<DesignRow>& rows,
                          const std::vector<Regressor>& regressors) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()),
                    static_cast<Eigen::Index>(regressors.size()));
  std::vector<SubjectId> clusters;
  clusters.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    for (std::size_t k = 0; k < regressors.size(); ++k) {
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
          regressor_value(regressors[k], r.group, r.baseline_age, r.time);
    }
    clusters.push_back(r.subject_id);
  }
  std::vector<std::string> names;
  for (Regressor r : regressors) names.emplace_back(to_string(r));
  return DesignMatrix(std::move(x), std::move(names), std::move(clusters));
}

}  // namespace ltd

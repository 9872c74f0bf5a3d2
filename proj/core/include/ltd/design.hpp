#pragma once

#include <Eigen/Dense>
#include <string>
#include <string_view>
#include <vector>

#include "ltd/cohort.hpp"

namespace ltd {

enum class Regressor { kIntercept, kGroup, kBaselineAge, kTime, kTimeSq, kGroupTime, kGroupTimeSq };

const char* to_string(Regressor r);
Regressor parse_regressor(std::string_view name);
// Comma-separated list, e.g. "intercept,time".
std::vector<Regressor> parse_regressors(std::string_view list);
std::vector<Regressor> all_regressors();

// Time enters untransformed: squares are centered at 0.
double regressor_value(Regressor r, int group, double baseline_age, double time);

// Dense design with one cluster label per row. Clusters are numbered in order of
// first appearance.
class DesignMatrix {
 public:
  DesignMatrix(Eigen::MatrixXd x, std::vector<std::string> names,
               std::vector<SubjectId> row_clusters);

  const Eigen::MatrixXd& x() const { return x_; }
  const std::vector<std::string>& names() const { return names_; }
  Eigen::Index rows() const { return x_.rows(); }
  Eigen::Index cols() const { return x_.cols(); }

  const std::vector<std::size_t>& cluster() const { return cluster_; }
  const std::vector<SubjectId>& cluster_labels() const { return labels_; }
  std::size_t n_clusters() const { return labels_.size(); }

  Eigen::Index column(std::string_view name) const;  // -1 when absent

 private:
  Eigen::MatrixXd x_;
  std::vector<std::string> names_;
  std::vector<std::size_t> cluster_;
  std::vector<SubjectId> labels_;
};

struct DesignRow {
  SubjectId subject_id;
  int group = 0;
  double baseline_age = 0.0;
  double time = 0.0;
};

DesignMatrix build_design(const std::vector<DesignRow>& rows,
                          const std::vector<Regressor>& regressors);

}  // namespace ltd

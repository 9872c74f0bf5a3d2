#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "ltd/cohort.hpp"

namespace ltd {

struct MvnModel {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
  std::vector<double> timepoints;   // column labels when built from a cohort grid
  std::vector<double> loglik_trace;  // observed-data log-likelihood after each M-step
  int iterations = 0;
  bool converged = false;
  bool ridge_applied = false;
};

// EM for a multivariate normal with entries missing (NaN). ML covariance
// (denominator n). Stops when the log-likelihood gains less than `tol`. Rows
// with no observed entry are dropped.
MvnModel em_mvn(const Eigen::MatrixXd& data, int max_iter = 1000, double tol = 1e-10);

double mvn_observed_loglik(const Eigen::MatrixXd& data, const Eigen::VectorXd& mean,
                           const Eigen::MatrixXd& covariance);

// Distribution of the NaN entries of `row` given its observed entries.
struct ConditionalNormal {
  std::vector<Eigen::Index> missing;
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
};
ConditionalNormal conditional_normal(const Eigen::VectorXd& mean, const Eigen::MatrixXd& covariance,
                                     const Eigen::VectorXd& row);

struct ImputeOptions {
  bool noise = false;
  std::uint64_t seed = 0;
  int max_iter = 1000;
  double tol = 1e-10;
};

struct CellReport {
  std::string label;  // "<stratum>|group=<g>"
  std::size_t n_subjects = 0;
  std::size_t n_missing = 0;
  std::size_t n_imputed = 0;
  std::size_t n_clamped = 0;
  std::size_t n_skipped = 0;
  bool fitted = false;
  bool ridge_applied = false;
  int em_iterations = 0;
  std::string reason;  // why entries were skipped
};

struct ImputationResult {
  Cohort cohort;
  std::vector<CellReport> cells;
};

// Fills missing values cell by cell (death stratum x group) from an EM-fitted
// normal model over the cell's time grid plus baseline age. Only existing
// observation rows are filled; nothing is added after death.
ImputationResult impute_single(const Cohort& cohort, const std::vector<double>& boundaries,
                               const ImputeOptions& options = {});

std::string to_json(const std::vector<CellReport>& cells, int indent = 2);

}  // namespace ltd

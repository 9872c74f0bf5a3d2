#pragma once

#include <Eigen/Dense>
#include <optional>

#include "ltd/design.hpp"

namespace ltd {

struct LinearFit {
  Eigen::VectorXd beta;
  double sigma2 = 0.0;  // RSS / (n - p); 0 when n == p
  Eigen::MatrixXd cov_model;
  std::optional<Eigen::MatrixXd> cov_robust;
  std::size_t n_obs = 0;
  std::size_t n_clusters = 0;
  std::vector<std::string> names;
};

// (Weighted) least squares through a column-pivoted QR. A rank-deficient
// design throws NumericalError naming the aliased columns.
LinearFit ols(const DesignMatrix& x, const Eigen::VectorXd& y,
              const std::optional<Eigen::VectorXd>& weights = std::nullopt);

// Cluster-robust covariance (X'X)^-1 [sum_c X_c' r_c r_c' X_c] (X'X)^-1 with
// clusters taken from the design.
Eigen::MatrixXd sandwich_covariance(const DesignMatrix& x, const Eigen::VectorXd& y,
                                    const Eigen::VectorXd& beta);

// Throws NumericalError when the columns of `x` are linearly dependent.
void require_full_rank(const Eigen::MatrixXd& x, const std::vector<std::string>& names);

}  // namespace ltd

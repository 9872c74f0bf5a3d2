#pragma once

#include <Eigen/Dense>

#include "ltd/design.hpp"

namespace ltd {

struct LogisticOptions {
  double tol = 1e-10;          // max absolute coefficient change
  int max_iter = 100;
  double separation_norm = 1e3;
};

struct LogisticFit {
  Eigen::VectorXd beta;  // log-odds scale
  Eigen::MatrixXd cov;   // inverse observed information
  double loglik = 0.0;
  bool converged = false;
  int iterations = 0;
  std::vector<double> loglik_trace;  // starts at beta = 0
  std::vector<std::string> names;
};

double inverse_logit(double eta);

// Bernoulli log-likelihood with logit link, maximized by IRLS with step
// halving. Separation is reported as NumericalError::Kind::kSeparation.
LogisticFit logistic_fit(const DesignMatrix& x, const Eigen::VectorXd& d,
                         const LogisticOptions& options = {});

double logistic_loglik(const Eigen::MatrixXd& x, const Eigen::VectorXd& d,
                       const Eigen::VectorXd& beta);

Eigen::VectorXd predict_probability(const LogisticFit& fit, const Eigen::MatrixXd& x);

}  // namespace ltd

#pragma once

#include <Eigen/Dense>
#include <map>
#include <vector>

#include "ltd/design.hpp"

namespace ltd {

// Random-effect design: two columns per row, conventionally {1, time}.
using RandomDesign = Eigen::Matrix<double, Eigen::Dynamic, 2>;

struct LmmOptions {
  double deviance_tol = 1e-8;
  double simplex_tol = 1e-9;
  int max_evaluations = 20000;
  int max_restarts = 30;
  // Box on the log-Cholesky parameters; relative scales beyond exp(+-bound) are
  // treated as the boundary of the parameter space.
  double theta_bound = 10.0;
};

struct LmmFit {
  Eigen::VectorXd beta;
  Eigen::Matrix2d G = Eigen::Matrix2d::Zero();  // cov of (random intercept, random slope)
  double sigma2 = 0.0;
  double loglik = 0.0;
  bool converged = false;
  // Variance parameters on (or beyond) the edge of the box, or a response with
  // no residual variation at all.
  bool boundary = false;
  int iterations = 0;
  Eigen::Vector3d theta = Eigen::Vector3d::Zero();
  Eigen::MatrixXd cov_beta;  // sigma2 (X' H^-1 X)^-1
  std::vector<std::string> names;
  std::map<SubjectId, Eigen::Vector2d> blups;
};

// Gaussian marginal likelihood with beta and sigma2 profiled out. The relative
// covariance G / sigma2 = L L' with
//   L = [[exp(theta0), 0], [theta1, exp(theta2)]].
class LmmProfile {
 public:
  LmmProfile(const DesignMatrix& x, const Eigen::VectorXd& y, const RandomDesign& z);

  // -2 log-likelihood at the profiled optimum for this theta.
  double deviance(const Eigen::Vector3d& theta) const;

  struct Solution {
    Eigen::VectorXd beta;
    double sigma2 = 0.0;
    double deviance = 0.0;
    Eigen::MatrixXd xthx;  // X' H^-1 X
    std::vector<Eigen::Vector2d> blups;
  };
  Solution solve(const Eigen::Vector3d& theta, bool with_blups = false) const;

  std::size_t n_obs() const { return n_; }
  std::size_t n_clusters() const { return ztz_.size(); }

 private:
  std::size_t n_ = 0;
  Eigen::Index p_ = 0;
  Eigen::MatrixXd xtx_;
  Eigen::VectorXd xty_;
  double yty_ = 0.0;
  std::vector<Eigen::Matrix2d> ztz_;
  std::vector<Eigen::Matrix<double, 2, Eigen::Dynamic>> ztx_;
  std::vector<Eigen::Vector2d> zty_;
};

Eigen::Matrix2d relative_factor(const Eigen::Vector3d& theta);

// Maximum likelihood (not REML) fit of y = X beta + Z b_c + e with
// b_c ~ N(0, G), e ~ N(0, sigma2 I), clusters from the design.
LmmFit lmm_fit(const DesignMatrix& x, const Eigen::VectorXd& y, const RandomDesign& z,
               const LmmOptions& options = {});

// Population mean X beta, plus Z b_c for the row's cluster when include_blups.
Eigen::VectorXd lmm_predict(const LmmFit& fit, const DesignMatrix& x_new, const RandomDesign& z_new,
                            bool include_blups);

}  // namespace ltd

#include "ltd/logistic.hpp"

#include <cmath>

#include "ltd/error.hpp"
#include "ltd/linear.hpp"

namespace ltd {

double inverse_logit(double eta) {
  if (eta >= 0.0) return 1.0 / (1.0 + std::exp(-eta));
  const double e = std::exp(eta);
  return e / (1.0 + e);
}

namespace {

// log(1 + exp(eta)) without overflow.
double log1p_exp(double eta) {
  return eta > 0.0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta));
}

}  // namespace

double logistic_loglik(const Eigen::MatrixXd& x, const Eigen::VectorXd& d,
                       const Eigen::VectorXd& beta) {
  const Eigen::VectorXd eta = x * beta;
  double ll = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) ll += d(i) * eta(i) - log1p_exp(eta(i));
  return ll;
}

LogisticFit logistic_fit(const DesignMatrix& x, const Eigen::VectorXd& d,
                         const LogisticOptions& options) {
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  if (d.size() != n) {
    throw NumericalError(NumericalError::Kind::kDimension, "outcome length does not match design");
  }
  bool has0 = false;
  bool has1 = false;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (d(i) == 0.0) {
      has0 = true;
    } else if (d(i) == 1.0) {
      has1 = true;
    } else {
      throw DataError("binary outcome must be 0 or 1");
    }
  }
  if (!has0 || !has1) {
    throw NumericalError(NumericalError::Kind::kSeparation,
                         "binary outcome is constant; log-odds are not finite");
  }
  require_full_rank(x.x(), x.names());

  const Eigen::MatrixXd& X = x.x();
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  double ll = logistic_loglik(X, d, beta);
  LogisticFit fit;
  fit.names = x.names();
  fit.loglik_trace.push_back(ll);

  for (int iter = 1; iter <= options.max_iter; ++iter) {
    fit.iterations = iter;
    Eigen::VectorXd prob(n);
    Eigen::VectorXd w(n);
    const Eigen::VectorXd eta = X * beta;
    for (Eigen::Index i = 0; i < n; ++i) {
      prob(i) = inverse_logit(eta(i));
      w(i) = prob(i) * (1.0 - prob(i));
    }
    const Eigen::VectorXd score = X.transpose() * (d - prob);
    const Eigen::MatrixXd info = X.transpose() * w.asDiagonal() * X;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
        ldlt.vectorD().minCoeff() <= 1e-14 * std::max(1.0, ldlt.vectorD().maxCoeff())) {
      throw NumericalError(NumericalError::Kind::kSeparation,
                           "information matrix is singular; outcome may be separated");
    }
    Eigen::VectorXd step = ldlt.solve(score);

    // Step halving keeps the log-likelihood non-decreasing.
    Eigen::VectorXd next = beta + step;
    double next_ll = logistic_loglik(X, d, next);
    int halvings = 0;
    while (next_ll < ll && halvings < 40) {
      step *= 0.5;
      next = beta + step;
      next_ll = logistic_loglik(X, d, next);
      ++halvings;
    }
    if (next_ll < ll) break;

    const double change = step.cwiseAbs().maxCoeff();
    beta = next;
    ll = next_ll;
    fit.loglik_trace.push_back(ll);
    if (beta.norm() > options.separation_norm) {
      throw NumericalError(NumericalError::Kind::kSeparation,
                           "coefficients diverge; outcome is separated by the covariates");
    }
    if (change < options.tol) {
      fit.converged = true;
      break;
    }
  }

  if (!fit.converged) {
    const Eigen::VectorXd eta = X * beta;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double pr = inverse_logit(eta(i));
      if (pr < 1e-10 || pr > 1.0 - 1e-10) {
        throw NumericalError(NumericalError::Kind::kSeparation,
                             "fitted probabilities reach 0 or 1; outcome is separated");
      }
    }
  }

  Eigen::VectorXd w(n);
  const Eigen::VectorXd eta = X * beta;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double pr = inverse_logit(eta(i));
    w(i) = pr * (1.0 - pr);
  }
  const Eigen::MatrixXd info = X.transpose() * w.asDiagonal() * X;
  fit.cov = info.ldlt().solve(Eigen::MatrixXd::Identity(p, p));
  fit.cov = 0.5 * (fit.cov + fit.cov.transpose());
  fit.beta = beta;
  fit.loglik = ll;
  return fit;
}

Eigen::VectorXd predict_probability(const LogisticFit& fit, const Eigen::MatrixXd& x) {
  Eigen::VectorXd eta = x * fit.beta;
  return eta.unaryExpr([](double e) { return inverse_logit(e); });
}

}  // namespace ltd

#include "ltd/lmm.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include <cmath>
#include <limits>
#include <memory>
#include <numbers>

#include "ltd/error.hpp"
#include "ltd/linear.hpp"

namespace ltd {

Eigen::Matrix2d relative_factor(const Eigen::Vector3d& theta) {
  Eigen::Matrix2d l;
  l << std::exp(theta(0)), 0.0, theta(1), std::exp(theta(2));
  return l;
}

LmmProfile::LmmProfile(const DesignMatrix& x, const Eigen::VectorXd& y, const RandomDesign& z)
    : n_(static_cast<std::size_t>(x.rows())), p_(x.cols()) {
  const auto k = x.n_clusters();
  ztz_.assign(k, Eigen::Matrix2d::Zero());
  ztx_.assign(k, Eigen::Matrix<double, 2, Eigen::Dynamic>::Zero(2, p_));
  zty_.assign(k, Eigen::Vector2d::Zero());
  const Eigen::MatrixXd& X = x.x();
  xtx_ = X.transpose() * X;
  xty_ = X.transpose() * y;
  yty_ = y.squaredNorm();
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const auto c = x.cluster()[static_cast<std::size_t>(i)];
    const Eigen::Vector2d zi = z.row(i).transpose();
    ztz_[c] += zi * zi.transpose();
    ztx_[c] += zi * X.row(i);
    zty_[c] += zi * y(i);
  }
}

LmmProfile::Solution LmmProfile::solve(const Eigen::Vector3d& theta, bool with_blups) const {
  const Eigen::Matrix2d l = relative_factor(theta);
  Eigen::MatrixXd xthx = xtx_;
  Eigen::VectorXd xthy = xty_;
  double ythy = yty_;
  double logdet = 0.0;

  std::vector<Eigen::Matrix2d> a_inv;
  if (with_blups) a_inv.reserve(ztz_.size());
  for (std::size_t c = 0; c < ztz_.size(); ++c) {
    const Eigen::Matrix2d a = l.transpose() * ztz_[c] * l + Eigen::Matrix2d::Identity();
    Eigen::LLT<Eigen::Matrix2d> llt(a);
    const Eigen::Matrix2d& lf = llt.matrixLLT();
    logdet += 2.0 * (std::log(lf(0, 0)) + std::log(lf(1, 1)));
    const Eigen::Matrix<double, 2, Eigen::Dynamic> ux = l.transpose() * ztx_[c];
    const Eigen::Vector2d uy = l.transpose() * zty_[c];
    const Eigen::Matrix<double, 2, Eigen::Dynamic> ax = llt.solve(ux);
    const Eigen::Vector2d ay = llt.solve(uy);
    xthx.noalias() -= ux.transpose() * ax;
    xthy.noalias() -= ux.transpose() * ay;
    ythy -= uy.dot(ay);
    if (with_blups) a_inv.push_back(llt.solve(Eigen::Matrix2d::Identity()));
  }

  Solution s;
  xthx = 0.5 * (xthx + xthx.transpose());
  Eigen::LDLT<Eigen::MatrixXd> ldlt(xthx);
  s.beta = ldlt.solve(xthy);
  double rss = ythy - s.beta.dot(xthy);
  const double floor = std::numeric_limits<double>::min() * static_cast<double>(n_);
  if (!(rss > floor)) rss = floor;
  const double n = static_cast<double>(n_);
  s.sigma2 = rss / n;
  s.deviance = n * (std::log(2.0 * std::numbers::pi * s.sigma2) + 1.0) + logdet;
  s.xthx = std::move(xthx);
  if (with_blups) {
    s.blups.reserve(ztz_.size());
    for (std::size_t c = 0; c < ztz_.size(); ++c) {
      const Eigen::Vector2d zr = zty_[c] - ztx_[c] * s.beta;
      s.blups.emplace_back(l * a_inv[c] * l.transpose() * zr);
    }
  }
  return s;
}

double LmmProfile::deviance(const Eigen::Vector3d& theta) const { return solve(theta).deviance; }

namespace {

struct Objective {
  const LmmProfile* profile;
  double bound;
  int evaluations = 0;

  Eigen::Vector3d clamp(const Eigen::Vector3d& t) const {
    const double off = std::exp(bound);
    return Eigen::Vector3d(std::clamp(t(0), -bound, bound), std::clamp(t(1), -off, off),
                           std::clamp(t(2), -bound, bound));
  }

  double operator()(const Eigen::Vector3d& t) {
    ++evaluations;
    const Eigen::Vector3d c = clamp(t);
    const double dev = profile->deviance(c);
    if (!std::isfinite(dev)) return std::numeric_limits<double>::max();
    return dev + (t - c).squaredNorm();
  }
};

double gsl_trampoline(const gsl_vector* v, void* params) {
  auto* obj = static_cast<Objective*>(params);
  return (*obj)(Eigen::Vector3d(gsl_vector_get(v, 0), gsl_vector_get(v, 1), gsl_vector_get(v, 2)));
}

struct GslVectorDeleter {
  void operator()(gsl_vector* v) const { gsl_vector_free(v); }
};
struct GslMinimizerDeleter {
  void operator()(gsl_multimin_fminimizer* m) const { gsl_multimin_fminimizer_free(m); }
};

// One Nelder-Mead run from `start`; returns the best point and value.
std::pair<Eigen::Vector3d, double> simplex_run(Objective& obj, const Eigen::Vector3d& start,
                                               double step, const LmmOptions& options) {
  gsl_multimin_function fn;
  fn.n = 3;
  fn.f = &gsl_trampoline;
  fn.params = &obj;

  std::unique_ptr<gsl_vector, GslVectorDeleter> x0(gsl_vector_alloc(3));
  std::unique_ptr<gsl_vector, GslVectorDeleter> ss(gsl_vector_alloc(3));
  for (std::size_t k = 0; k < 3; ++k) {
    gsl_vector_set(x0.get(), k, start(static_cast<Eigen::Index>(k)));
    gsl_vector_set(ss.get(), k, step);
  }
  std::unique_ptr<gsl_multimin_fminimizer, GslMinimizerDeleter> m(
      gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, 3));
  gsl_multimin_fminimizer_set(m.get(), &fn, x0.get(), ss.get());

  while (obj.evaluations < options.max_evaluations) {
    if (gsl_multimin_fminimizer_iterate(m.get()) != GSL_SUCCESS) break;
    if (gsl_multimin_fminimizer_size(m.get()) < options.simplex_tol) break;
  }
  const gsl_vector* best = gsl_multimin_fminimizer_x(m.get());
  return {Eigen::Vector3d(gsl_vector_get(best, 0), gsl_vector_get(best, 1), gsl_vector_get(best, 2)),
          gsl_multimin_fminimizer_minimum(m.get())};
}

}  // namespace

LmmFit lmm_fit(const DesignMatrix& x, const Eigen::VectorXd& y, const RandomDesign& z,
               const LmmOptions& options) {
  if (y.size() != x.rows() || z.rows() != x.rows()) {
    throw NumericalError(NumericalError::Kind::kDimension,
                         "response or random-effect design does not match fixed design");
  }
  if (x.n_clusters() < 2) throw DataError("mixed model needs at least 2 clusters");
  const LinearFit start = ols(x, y);  // rank check

  LmmFit fit;
  fit.names = x.names();
  const Eigen::Index p = x.cols();
  const double rss_ols = (y - x.x() * start.beta).squaredNorm();
  if (rss_ols <= 1e-20 * std::max(1.0, y.squaredNorm())) {
    // The fixed effects reproduce y exactly: G = 0, sigma2 = 0, unbounded likelihood.
    fit.beta = start.beta;
    fit.sigma2 = 0.0;
    fit.loglik = std::numeric_limits<double>::infinity();
    fit.boundary = true;
    fit.converged = false;
    fit.cov_beta = Eigen::MatrixXd::Zero(p, p);
    fit.theta = Eigen::Vector3d::Constant(-options.theta_bound);
    fit.theta(1) = 0.0;
    for (const auto& id : x.cluster_labels()) fit.blups.emplace(id, Eigen::Vector2d::Zero());
    return fit;
  }

  gsl_set_error_handler_off();
  LmmProfile profile(x, y, z);
  Objective obj{&profile, options.theta_bound};
  Eigen::Vector3d best(0.0, 0.0, -1.0);
  double best_value = obj(best);
  double step = 1.0;
  for (int restart = 0; restart < options.max_restarts; ++restart) {
    auto [point, value] = simplex_run(obj, best, step, options);
    const double gain = best_value - value;
    if (value < best_value) {
      best = point;
      best_value = value;
    }
    step = 0.25;
    if (restart > 0 && gain < options.deviance_tol) {
      fit.converged = true;
      break;
    }
    if (obj.evaluations >= options.max_evaluations) break;
  }

  const Eigen::Vector3d theta = obj.clamp(best);
  const auto sol = profile.solve(theta, true);
  const Eigen::Matrix2d l = relative_factor(theta);
  fit.theta = theta;
  fit.beta = sol.beta;
  fit.sigma2 = sol.sigma2;
  fit.G = sol.sigma2 * l * l.transpose();
  fit.loglik = -0.5 * sol.deviance;
  fit.iterations = obj.evaluations;
  fit.cov_beta = sol.sigma2 * sol.xthx.ldlt().solve(Eigen::MatrixXd::Identity(p, p));
  fit.cov_beta = 0.5 * (fit.cov_beta + fit.cov_beta.transpose());
  const double edge = options.theta_bound - 1e-6;
  fit.boundary = std::abs(theta(0)) >= edge || std::abs(theta(2)) >= edge;
  for (std::size_t c = 0; c < x.n_clusters(); ++c) {
    fit.blups.emplace(x.cluster_labels()[c], sol.blups[c]);
  }
  return fit;
}

Eigen::VectorXd lmm_predict(const LmmFit& fit, const DesignMatrix& x_new, const RandomDesign& z_new,
                            bool include_blups) {
  if (!fit.converged && !fit.boundary) {
    throw NumericalError(NumericalError::Kind::kNonConvergence,
                         "cannot predict from a mixed model that did not converge");
  }
  if (x_new.cols() != fit.beta.size() || x_new.names() != fit.names) {
    throw NumericalError(NumericalError::Kind::kDimension, "prediction design columns do not match fit");
  }
  Eigen::VectorXd out = x_new.x() * fit.beta;
  if (!include_blups) return out;
  if (z_new.rows() != x_new.rows()) {
    throw NumericalError(NumericalError::Kind::kDimension, "random-effect design does not match");
  }
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    const auto& id = x_new.cluster_labels()[x_new.cluster()[static_cast<std::size_t>(i)]];
    auto it = fit.blups.find(id);
    if (it == fit.blups.end()) throw DataError("no random effects for cluster '" + id + "'");
    out(i) += z_new.row(i).dot(it->second);
  }
  return out;
}

}  // namespace ltd

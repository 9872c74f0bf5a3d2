#include "ltd/linear.hpp"

#include <cmath>
#include <sstream>

#include "ltd/error.hpp"

namespace ltd {

namespace {

constexpr double kRankTol = 1e-10;

Eigen::ColPivHouseholderQR<Eigen::MatrixXd> checked_qr(const Eigen::MatrixXd& x,
                                                       const std::vector<std::string>& names) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  qr.setThreshold(kRankTol);
  const auto rank = qr.rank();
  if (rank < x.cols()) {
    std::ostringstream os;
    os << "singular design: rank " << rank << " of " << x.cols() << "; aliased columns:";
    const auto& perm = qr.colsPermutation().indices();
    for (Eigen::Index k = rank; k < x.cols(); ++k) os << ' ' << names[static_cast<std::size_t>(perm(k))];
    throw NumericalError(NumericalError::Kind::kSingular, os.str());
  }
  return qr;
}

}  // namespace

void require_full_rank(const Eigen::MatrixXd& x, const std::vector<std::string>& names) {
  if (x.rows() < x.cols()) {
    throw NumericalError(NumericalError::Kind::kSingular,
                         "singular design: fewer rows than columns");
  }
  checked_qr(x, names);
}

LinearFit ols(const DesignMatrix& x, const Eigen::VectorXd& y,
              const std::optional<Eigen::VectorXd>& weights) {
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  if (y.size() != n) {
    throw NumericalError(NumericalError::Kind::kDimension, "response length does not match design");
  }
  if (weights && weights->size() != n) {
    throw NumericalError(NumericalError::Kind::kDimension, "weight length does not match design");
  }
  if (weights && ((weights->array() < 0.0).any() || !weights->allFinite())) {
    throw DataError("weights must be finite and nonnegative");
  }
  if (n < p) {
    throw NumericalError(NumericalError::Kind::kSingular,
                         "singular design: fewer rows than columns");
  }

  Eigen::VectorXd sw = weights ? Eigen::VectorXd(weights->cwiseSqrt()) : Eigen::VectorXd::Ones(n).eval();
  Eigen::MatrixXd xw = sw.asDiagonal() * x.x();
  Eigen::VectorXd yw = sw.cwiseProduct(y);
  auto qr = checked_qr(xw, x.names());

  LinearFit fit;
  fit.beta = qr.solve(yw);
  const double rss = (yw - xw * fit.beta).squaredNorm();
  fit.sigma2 = n > p ? rss / static_cast<double>(n - p) : 0.0;

  // (X'WX)^-1 = P R^-1 R^-T P'
  Eigen::MatrixXd r = qr.matrixR().topLeftCorner(p, p).triangularView<Eigen::Upper>();
  Eigen::MatrixXd rinv = r.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(p, p));
  Eigen::MatrixXd inv = qr.colsPermutation() * (rinv * rinv.transpose()) *
                        qr.colsPermutation().transpose();
  fit.cov_model = fit.sigma2 * inv;
  fit.n_obs = static_cast<std::size_t>(n);
  fit.n_clusters = x.n_clusters();
  fit.names = x.names();
  return fit;
}

Eigen::MatrixXd sandwich_covariance(const DesignMatrix& x, const Eigen::VectorXd& y,
                                    const Eigen::VectorXd& beta) {
  if (beta.size() != x.cols()) {
    throw NumericalError(NumericalError::Kind::kDimension, "coefficient length does not match design");
  }
  if (y.size() != x.rows()) {
    throw NumericalError(NumericalError::Kind::kDimension, "response length does not match design");
  }
  const Eigen::Index p = x.cols();
  Eigen::MatrixXd xtx = x.x().transpose() * x.x();
  Eigen::LDLT<Eigen::MatrixXd> ldlt(xtx);
  require_full_rank(x.x(), x.names());

  const Eigen::VectorXd resid = y - x.x() * beta;
  Eigen::MatrixXd scores = Eigen::MatrixXd::Zero(p, static_cast<Eigen::Index>(x.n_clusters()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    scores.col(static_cast<Eigen::Index>(x.cluster()[static_cast<std::size_t>(i)])) +=
        x.x().row(i).transpose() * resid(i);
  }
  const Eigen::MatrixXd meat = scores * scores.transpose();
  const Eigen::MatrixXd bread = ldlt.solve(Eigen::MatrixXd::Identity(p, p));
  Eigen::MatrixXd cov = bread * meat * bread;
  return 0.5 * (cov + cov.transpose());
}

}  // namespace ltd

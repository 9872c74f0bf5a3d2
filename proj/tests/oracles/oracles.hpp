#pragma once

// Reference computations written independently of the library: dense
// normal equations, explicit per-pair sums and brute-force grids.

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <vector>

namespace oracle {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Gauss-Jordan inverse with partial pivoting.
inline MatrixXd gj_inverse(MatrixXd a) {
  const Eigen::Index n = a.rows();
  MatrixXd inv = MatrixXd::Identity(n, n);
  for (Eigen::Index c = 0; c < n; ++c) {
    Eigen::Index piv = c;
    for (Eigen::Index r = c + 1; r < n; ++r) {
      if (std::abs(a(r, c)) > std::abs(a(piv, c))) piv = r;
    }
    a.row(c).swap(a.row(piv));
    inv.row(c).swap(inv.row(piv));
    const double d = a(c, c);
    a.row(c) /= d;
    inv.row(c) /= d;
    for (Eigen::Index r = 0; r < n; ++r) {
      if (r == c) continue;
      const double f = a(r, c);
      a.row(r) -= f * a.row(c);
      inv.row(r) -= f * inv.row(c);
    }
  }
  return inv;
}

inline double log_det_spd(const MatrixXd& a) {
  Eigen::LLT<MatrixXd> llt(a);
  return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

// beta = (X'WX)^-1 X'Wy
inline VectorXd normal_equations(const MatrixXd& x, const VectorXd& y,
                                 const VectorXd* w = nullptr) {
  MatrixXd xtwx = MatrixXd::Zero(x.cols(), x.cols());
  VectorXd xtwy = VectorXd::Zero(x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double wi = w ? (*w)(i) : 1.0;
    for (Eigen::Index a = 0; a < x.cols(); ++a) {
      xtwy(a) += wi * x(i, a) * y(i);
      for (Eigen::Index b = 0; b < x.cols(); ++b) xtwx(a, b) += wi * x(i, a) * x(i, b);
    }
  }
  return gj_inverse(xtwx) * xtwy;
}

// Cluster sandwich as a double sum over pairs of rows sharing a cluster.
inline MatrixXd cluster_sandwich(const MatrixXd& x, const VectorXd& y, const VectorXd& beta,
                                 const std::vector<int>& cluster) {
  const VectorXd e = y - x * beta;
  const Eigen::Index p = x.cols();
  MatrixXd meat = MatrixXd::Zero(p, p);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.rows(); ++j) {
      if (cluster[i] != cluster[j]) continue;
      meat += e(i) * e(j) * x.row(i).transpose() * x.row(j);
    }
  }
  const MatrixXd bread = gj_inverse(x.transpose() * x);
  return bread * meat * bread;
}

// White's heteroskedasticity-consistent covariance.
inline MatrixXd hc0(const MatrixXd& x, const VectorXd& y, const VectorXd& beta) {
  std::vector<int> c(static_cast<std::size_t>(x.rows()));
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = static_cast<int>(i);
  return cluster_sandwich(x, y, beta, c);
}

inline double logistic_loglik(const MatrixXd& x, const VectorXd& d, const VectorXd& beta) {
  double ll = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double eta = x.row(i).dot(beta);
    const double p = 1.0 / (1.0 + std::exp(-eta));
    ll += d(i) > 0.5 ? std::log(p) : std::log1p(-p);
  }
  return ll;
}

// Coarse-to-fine grid maximization: every level scans a full tensor grid
// around the incumbent and then shrinks the half width.
inline VectorXd grid_maximize(const std::function<double(const VectorXd&)>& f, VectorXd center,
                              double half_width, int points, int levels, double shrink) {
  const Eigen::Index k = center.size();
  double h = half_width;
  double best_val = f(center);
  for (int level = 0; level < levels; ++level) {
    VectorXd best = center;
    std::vector<int> idx(static_cast<std::size_t>(k), 0);
    while (true) {
      VectorXd p(k);
      for (Eigen::Index a = 0; a < k; ++a) {
        p(a) = center(a) - h + 2.0 * h * idx[static_cast<std::size_t>(a)] / (points - 1);
      }
      const double v = f(p);
      if (v > best_val) {
        best_val = v;
        best = p;
      }
      Eigen::Index a = 0;
      while (a < k && ++idx[static_cast<std::size_t>(a)] == points) {
        idx[static_cast<std::size_t>(a)] = 0;
        ++a;
      }
      if (a == k) break;
    }
    center = best;
    h *= shrink;
  }
  return center;
}

// Cyclic one-coordinate grid refinement, for higher dimensions.
inline VectorXd coordinate_maximize(const std::function<double(const VectorXd&)>& f, VectorXd x,
                                    double step, int sweeps, int points = 41,
                                    double shrink = 0.6) {
  double best = f(x);
  for (int s = 0; s < sweeps; ++s) {
    for (Eigen::Index a = 0; a < x.size(); ++a) {
      const double c = x(a);
      for (int j = 0; j < points; ++j) {
        VectorXd p = x;
        p(a) = c - step + 2.0 * step * j / (points - 1);
        const double v = f(p);
        if (v > best) {
          best = v;
          x = p;
        }
      }
    }
    step *= shrink;
  }
  return x;
}

// ML profiled deviance of a random intercept and slope model, built from the
// full n x n marginal covariance.
struct DenseLmm {
  MatrixXd x;
  VectorXd y;
  MatrixXd z;  // n x 2
  std::vector<int> cluster;

  MatrixXd h(const Eigen::Vector3d& theta) const {
    Eigen::Matrix2d l;
    l << std::exp(theta(0)), 0.0, theta(1), std::exp(theta(2));
    const Eigen::Matrix2d g = l * l.transpose();
    const Eigen::Index n = x.rows();
    MatrixXd v = MatrixXd::Identity(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        if (cluster[i] == cluster[j]) v(i, j) += z.row(i) * g * z.row(j).transpose();
      }
    }
    return v;
  }

  double deviance(const Eigen::Vector3d& theta) const {
    const double n = static_cast<double>(x.rows());
    const MatrixXd v = h(theta);
    const MatrixXd vinv = gj_inverse(v);
    const VectorXd beta = gj_inverse(x.transpose() * vinv * x) * (x.transpose() * vinv * y);
    const VectorXd r = y - x * beta;
    const double sigma2 = r.dot(vinv * r) / n;
    return n * std::log(2.0 * std::numbers::pi * sigma2) + log_det_spd(v) + n;
  }
};

inline double mvn_loglik(const MatrixXd& data, const VectorXd& mu, const MatrixXd& sigma) {
  double ll = 0.0;
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    std::vector<Eigen::Index> o;
    for (Eigen::Index j = 0; j < data.cols(); ++j) {
      if (!std::isnan(data(i, j))) o.push_back(j);
    }
    const auto k = static_cast<Eigen::Index>(o.size());
    if (k == 0) continue;
    MatrixXd s(k, k);
    VectorXd r(k);
    for (Eigen::Index a = 0; a < k; ++a) {
      r(a) = data(i, o[a]) - mu(o[a]);
      for (Eigen::Index b = 0; b < k; ++b) s(a, b) = sigma(o[a], o[b]);
    }
    ll += -0.5 * (static_cast<double>(k) * std::log(2.0 * std::numbers::pi) + log_det_spd(s) +
                  r.dot(gj_inverse(s) * r));
  }
  return ll;
}

// Maximum of the bivariate observed-data likelihood over (mu1, mu2, l11, l21, l22)
// with Sigma = L L'.
inline double bivariate_max_loglik(const MatrixXd& data, const VectorXd& start_mu,
                                   const MatrixXd& start_sigma) {
  auto unpack = [](const VectorXd& p, VectorXd& mu, MatrixXd& s) {
    mu = p.head(2);
    Eigen::Matrix2d l;
    l << p(2), 0.0, p(3), p(4);
    s = l * l.transpose();
  };
  auto f = [&](const VectorXd& p) {
    if (p(2) <= 0.0 || p(4) <= 0.0) return -std::numeric_limits<double>::infinity();
    VectorXd mu;
    MatrixXd s;
    unpack(p, mu, s);
    return mvn_loglik(data, mu, s);
  };
  const Eigen::Matrix2d l0 = start_sigma.llt().matrixL();
  VectorXd p(5);
  p << start_mu(0), start_mu(1), l0(0, 0), l0(1, 0), l0(1, 1);
  p = coordinate_maximize(f, p, 1.0, 60);
  return f(p);
}

// E[y1 | y2] for a bivariate normal.
inline double conditional_mean(const Eigen::Vector2d& mu, const Eigen::Matrix2d& s, double y2) {
  return mu(0) + s(0, 1) / s(1, 1) * (y2 - mu(1));
}

struct Line {
  double intercept;
  double slope;
};

inline Line ols_line(const std::vector<double>& t, const std::vector<double>& y) {
  const double n = static_cast<double>(t.size());
  double st = 0, sy = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    st += t[i];
    sy += y[i];
  }
  const double tb = st / n, yb = sy / n;
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    sxy += (t[i] - tb) * (y[i] - yb);
    sxx += (t[i] - tb) * (t[i] - tb);
  }
  return {yb - sxy / sxx * tb, sxy / sxx};
}

}  // namespace oracle

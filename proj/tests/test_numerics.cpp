#include <cmath>
#include <random>

#include "doctest.h"
#include "fixtures.hpp"
#include "ltd/error.hpp"
#include "ltd/linear.hpp"
#include "ltd/lmm.hpp"
#include "ltd/logistic.hpp"
#include "oracles/oracles.hpp"

using namespace ltd;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

std::vector<SubjectId> singleton_clusters(Eigen::Index n) {
  std::vector<SubjectId> c;
  for (Eigen::Index i = 0; i < n; ++i) c.push_back("r" + std::to_string(i));
  return c;
}

DesignMatrix plain(const MatrixXd& x, std::vector<SubjectId> clusters = {}) {
  std::vector<std::string> names;
  for (Eigen::Index j = 0; j < x.cols(); ++j) names.push_back("x" + std::to_string(j));
  if (clusters.empty()) clusters = singleton_clusters(x.rows());
  return DesignMatrix(x, names, clusters);
}

MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = n(rng);
  }
  return m;
}

struct Pooled {
  DesignMatrix x;
  VectorXd y;
  RandomDesign z;
};

Pooled pooled(const Cohort& c) {
  std::vector<DesignRow> rows;
  std::vector<double> y;
  for (const auto& o : c.observations()) {
    if (o.missing()) continue;
    const Subject* s = c.find(o.subject_id);
    rows.push_back(DesignRow{o.subject_id, s->group, s->baseline_age, o.time});
    y.push_back(*o.value);
  }
  DesignMatrix x = build_design(rows, {Regressor::kIntercept, Regressor::kTime});
  RandomDesign z(static_cast<Eigen::Index>(rows.size()), 2);
  for (std::size_t i = 0; i < rows.size(); ++i) z.row(static_cast<Eigen::Index>(i)) << 1.0, rows[i].time;
  return {x, Eigen::Map<VectorXd>(y.data(), static_cast<Eigen::Index>(y.size())), z};
}

oracle::DenseLmm dense(const Pooled& p) {
  oracle::DenseLmm d;
  d.x = p.x.x();
  d.y = p.y;
  d.z = p.z;
  for (auto c : p.x.cluster()) d.cluster.push_back(static_cast<int>(c));
  return d;
}

double rel_diff(const MatrixXd& a, const MatrixXd& b) {
  const double scale = std::max(1.0, b.cwiseAbs().maxCoeff());
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

}  // namespace

TEST_CASE("ols on the pooled hypothetical cohort") {
  const Pooled p = pooled(ltd::testing::four_subjects());
  const LinearFit f = ols(p.x, p.y);
  CHECK(f.beta(0) == doctest::Approx(76.0 + 1.0 / 6.0).epsilon(1e-12));
  CHECK(f.beta(1) == doctest::Approx(11.0 / 12.0).epsilon(1e-12));
  CHECK(f.n_obs == 18);
  CHECK(f.n_clusters == 4);
}

TEST_CASE("ols reproduces a regressor column exactly") {
  const MatrixXd x = random_matrix(8, 3, 11);
  const VectorXd y = x.col(1);
  const LinearFit f = ols(plain(x), y);
  CHECK(f.beta(1) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(f.beta(0)) < 1e-12);
  CHECK(std::abs(f.beta(2)) < 1e-12);
  CHECK(f.sigma2 < 1e-24);
}

TEST_CASE("ols matches the normal equations") {
  for (unsigned seed : {1u, 2u, 3u}) {
    const MatrixXd x = random_matrix(10, 3, seed);
    const VectorXd y = random_matrix(10, 1, seed + 100);
    const LinearFit f = ols(plain(x), y);
    const VectorXd ref = oracle::normal_equations(x, y);
    CHECK(rel_diff(f.beta, ref) < 1e-10);
    const VectorXd r = y - x * f.beta;
    CHECK((x.transpose() * r).cwiseAbs().maxCoeff() < 1e-8 * std::max(1.0, y.norm()));
    const double s2 = r.squaredNorm() / 7.0;
    CHECK(f.sigma2 == doctest::Approx(s2).epsilon(1e-10));
    CHECK(rel_diff(f.cov_model, s2 * oracle::gj_inverse(x.transpose() * x)) < 1e-10);
    CHECK(rel_diff(f.cov_model, f.cov_model.transpose()) < 1e-14);
  }
}

TEST_CASE("weighted ols matches weighted normal equations") {
  const MatrixXd x = random_matrix(12, 3, 5);
  const VectorXd y = random_matrix(12, 1, 6);
  VectorXd w(12);
  for (int i = 0; i < 12; ++i) w(i) = 0.5 + 0.25 * i;
  const LinearFit f = ols(plain(x), y, w);
  CHECK(rel_diff(f.beta, oracle::normal_equations(x, y, &w)) < 1e-10);
}

TEST_CASE("ols errors") {
  MatrixXd x = random_matrix(6, 3, 9);
  x.col(2) = 2.0 * x.col(0) - x.col(1);
  try {
    ols(plain(x), VectorXd::Ones(6));
    FAIL("expected singular design");
  } catch (const NumericalError& e) {
    CHECK(e.kind() == NumericalError::Kind::kSingular);
    CHECK(std::string(e.what()).find("x") != std::string::npos);
  }
  CHECK_THROWS_AS(ols(plain(random_matrix(6, 2, 1)), VectorXd::Ones(5)), NumericalError);
  VectorXd neg = VectorXd::Ones(6);
  neg(0) = -1.0;
  CHECK_THROWS_AS(ols(plain(random_matrix(6, 2, 1)), VectorXd::Ones(6), neg), DataError);
}

TEST_CASE("sandwich covariance") {
  SUBCASE("zero residuals") {
    const MatrixXd x = random_matrix(9, 2, 4);
    const VectorXd beta = VectorXd::LinSpaced(2, 1.0, 2.0);
    const MatrixXd s = sandwich_covariance(plain(x), x * beta, beta);
    CHECK(s.cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("singleton clusters equal HC0") {
    const MatrixXd x = random_matrix(15, 3, 8);
    const VectorXd y = random_matrix(15, 1, 9);
    const VectorXd beta = ols(plain(x), y).beta;
    CHECK(rel_diff(sandwich_covariance(plain(x), y, beta), oracle::hc0(x, y, beta)) < 1e-10);
  }
  SUBCASE("three clusters") {
    const MatrixXd x = random_matrix(9, 2, 21);
    const VectorXd y = random_matrix(9, 1, 22);
    const std::vector<SubjectId> labels{"a", "a", "b", "c", "b", "a", "c", "c", "b"};
    std::vector<int> ids{0, 0, 1, 2, 1, 0, 2, 2, 1};
    const VectorXd beta = ols(plain(x, labels), y).beta;
    const MatrixXd s = sandwich_covariance(plain(x, labels), y, beta);
    CHECK(rel_diff(s, oracle::cluster_sandwich(x, y, beta, ids)) < 1e-10);
    CHECK(rel_diff(s, s.transpose()) < 1e-14);
  }
}

TEST_CASE("logistic intercept only") {
  const MatrixXd one = MatrixXd::Ones(4, 1);
  VectorXd d(4);
  d << 1, 1, 0, 0;
  CHECK(std::abs(logistic_fit(plain(one), d).beta(0)) < 1e-12);
  d << 1, 1, 1, 0;
  const LogisticFit f = logistic_fit(plain(one), d);
  CHECK(f.beta(0) == doctest::Approx(std::log(3.0)).epsilon(1e-12));
  CHECK(f.converged);
}

TEST_CASE("logistic matches a likelihood grid") {
  MatrixXd x(6, 2);
  x << 1, 1, 1, 2, 1, 3, 1, 4, 1, 5, 1, 6;
  VectorXd d(6);
  d << 0, 0, 1, 0, 1, 1;
  const LogisticFit f = logistic_fit(plain(x), d);
  auto ll = [&](const VectorXd& b) { return oracle::logistic_loglik(x, d, b); };
  const VectorXd ref = oracle::grid_maximize(ll, VectorXd::Zero(2), 8.0, 41, 12, 0.2);
  CHECK(std::abs(f.beta(0) - ref(0)) < 1e-4);
  CHECK(std::abs(f.beta(1) - ref(1)) < 1e-4);
  CHECK(f.loglik == doctest::Approx(ll(f.beta)).epsilon(1e-12));

  VectorXd p(6);
  for (int i = 0; i < 6; ++i) p(i) = inverse_logit(x.row(i).dot(f.beta));
  CHECK((x.transpose() * (d - p)).cwiseAbs().maxCoeff() < 1e-8);
  for (std::size_t k = 1; k < f.loglik_trace.size(); ++k) {
    CHECK(f.loglik_trace[k] >= f.loglik_trace[k - 1] - 1e-12);
  }
  CHECK(rel_diff(f.cov, f.cov.transpose()) < 1e-12);
  CHECK(Eigen::SelfAdjointEigenSolver<MatrixXd>(f.cov).eigenvalues().minCoeff() > -1e-8);
}

TEST_CASE("logistic separation") {
  MatrixXd x(6, 2);
  x << 1, 1, 1, 2, 1, 3, 1, 4, 1, 5, 1, 6;
  VectorXd d(6);
  d << 0, 0, 0, 1, 1, 1;
  try {
    logistic_fit(plain(x), d);
    FAIL("expected separation");
  } catch (const NumericalError& e) {
    CHECK(e.kind() == NumericalError::Kind::kSeparation);
  }
  CHECK_THROWS_AS(logistic_fit(plain(x), VectorXd::Ones(6)), NumericalError);
}

TEST_CASE("lmm profiled deviance equals the dense formula") {
  const Pooled p = pooled(ltd::testing::four_subjects_perturbed());
  const LmmProfile prof(p.x, p.y, p.z);
  const oracle::DenseLmm d = dense(p);
  for (const Eigen::Vector3d th : {Eigen::Vector3d(0, 0, 0), Eigen::Vector3d(1.5, -0.7, 0.3),
                                   Eigen::Vector3d(-2, 3, -1)}) {
    CHECK(prof.deviance(th) == doctest::Approx(d.deviance(th)).epsilon(1e-9));
  }
}

TEST_CASE("lmm fit matches a profiled-likelihood grid") {
  const Pooled p = pooled(ltd::testing::four_subjects_perturbed());
  const LmmFit f = lmm_fit(p.x, p.y, p.z);
  REQUIRE(f.converged);
  CHECK_FALSE(f.boundary);
  const oracle::DenseLmm d = dense(p);
  auto neg = [&](const VectorXd& th) { return -d.deviance(th); };
  const VectorXd best = oracle::grid_maximize(neg, Eigen::Vector3d::Zero(), 6.0, 21, 16, 0.35);
  CHECK(std::abs(f.loglik - (-0.5 * d.deviance(best))) < 1e-4);

  const LmmProfile prof(p.x, p.y, p.z);
  for (int k = 0; k < 3; ++k) {
    Eigen::Vector3d up = f.theta, dn = f.theta;
    up(k) += 1e-5;
    dn(k) -= 1e-5;
    CHECK(std::abs((prof.deviance(up) - prof.deviance(dn)) / 2e-5) < 1e-3);
  }
  std::mt19937 rng(5);
  std::normal_distribution<double> n(0.0, 0.05);
  for (int k = 0; k < 32; ++k) {
    Eigen::Vector3d th = f.theta;
    for (int j = 0; j < 3; ++j) th(j) += n(rng);
    CHECK(f.loglik >= -0.5 * prof.deviance(th) - 1e-9);
  }
  CHECK(Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(f.G).eigenvalues().minCoeff() > -1e-8);
  CHECK(f.sigma2 > 0.0);
}

TEST_CASE("lmm with a balanced design gives the ols coefficients") {
  std::mt19937 rng(3);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<DesignRow> rows;
  std::vector<double> y;
  for (int s = 0; s < 30; ++s) {
    for (int t = 0; t < 5; ++t) {
      rows.push_back(DesignRow{"s" + std::to_string(s), 0, 70.0, static_cast<double>(t)});
      y.push_back(10.0 - 0.5 * t + n(rng));
    }
  }
  const DesignMatrix x = build_design(rows, {Regressor::kIntercept, Regressor::kTime});
  RandomDesign z(x.rows(), 2);
  for (Eigen::Index i = 0; i < x.rows(); ++i) z.row(i) << 1.0, rows[static_cast<std::size_t>(i)].time;
  const VectorXd yv = Eigen::Map<VectorXd>(y.data(), x.rows());
  const LmmFit f = lmm_fit(x, yv, z);
  CHECK((f.converged || f.boundary));
  CHECK(rel_diff(f.beta, ols(x, yv).beta) < 1e-6);
}

TEST_CASE("lmm on noiseless subject lines interpolates them") {
  std::vector<DesignRow> rows;
  std::vector<double> y;
  const double a[] = {80, 85, 92, 70, 88};
  const double b[] = {-1, 0.5, -2, -0.2, -1.3};
  for (int s = 0; s < 5; ++s) {
    for (int t = 0; t < 4; ++t) {
      rows.push_back(DesignRow{"s" + std::to_string(s), 0, 70.0, static_cast<double>(t)});
      y.push_back(a[s] + b[s] * t);
    }
  }
  const DesignMatrix x = build_design(rows, {Regressor::kIntercept, Regressor::kTime});
  RandomDesign z(x.rows(), 2);
  for (Eigen::Index i = 0; i < x.rows(); ++i) z.row(i) << 1.0, rows[static_cast<std::size_t>(i)].time;
  const VectorXd yv = Eigen::Map<VectorXd>(y.data(), x.rows());
  const LmmFit f = lmm_fit(x, yv, z);
  const VectorXd pred = lmm_predict(f, x, z, true);
  CHECK((pred - yv).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("lmm with a constant response is a boundary fit") {
  std::vector<DesignRow> rows;
  for (int s = 0; s < 3; ++s) {
    for (int t = 0; t < 3; ++t) rows.push_back(DesignRow{"s" + std::to_string(s), 0, 70.0, double(t)});
  }
  const DesignMatrix x = build_design(rows, {Regressor::kIntercept, Regressor::kTime});
  RandomDesign z(x.rows(), 2);
  for (Eigen::Index i = 0; i < x.rows(); ++i) z.row(i) << 1.0, rows[static_cast<std::size_t>(i)].time;
  const LmmFit f = lmm_fit(x, VectorXd::Constant(x.rows(), 42.0), z);
  CHECK(f.boundary);
  CHECK(f.sigma2 == 0.0);
  CHECK(f.G.cwiseAbs().maxCoeff() == 0.0);
  CHECK(f.beta(0) == doctest::Approx(42.0));
  CHECK(std::abs(f.beta(1)) < 1e-9);
}

TEST_CASE("lmm_predict") {
  LmmFit f;
  f.beta = Eigen::Vector2d(1.0, 2.0);
  f.names = {"intercept", "time"};
  f.converged = true;
  MatrixXd xn(1, 2);
  xn << 1.0, 3.0;
  const DesignMatrix x(xn, f.names, {"new"});
  RandomDesign z(1, 2);
  z << 1.0, 3.0;
  CHECK(lmm_predict(f, x, z, false)(0) == 7.0);
  CHECK_THROWS_AS(lmm_predict(f, x, z, true), DataError);
}

TEST_CASE("blups shrink subject lines toward the population line") {
  std::mt19937 rng(17);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<DesignRow> rows;
  std::vector<double> y;
  std::map<SubjectId, std::pair<std::vector<double>, std::vector<double>>> per;
  for (int s = 0; s < 40; ++s) {
    const double b0 = 4.0 * n(rng);
    const double b1 = 0.8 * n(rng);
    const std::string id = "s" + std::to_string(s);
    for (int t = 0; t < 5; ++t) {
      const double v = 50.0 + b0 + (-1.0 + b1) * t + 2.0 * n(rng);
      rows.push_back(DesignRow{id, 0, 70.0, double(t)});
      y.push_back(v);
      per[id].first.push_back(t);
      per[id].second.push_back(v);
    }
  }
  const DesignMatrix x = build_design(rows, {Regressor::kIntercept, Regressor::kTime});
  RandomDesign z(x.rows(), 2);
  for (Eigen::Index i = 0; i < x.rows(); ++i) z.row(i) << 1.0, rows[static_cast<std::size_t>(i)].time;
  const LmmFit f = lmm_fit(x, Eigen::Map<VectorXd>(y.data(), x.rows()), z);
  REQUIRE(f.converged);
  REQUIRE(f.sigma2 > 0.0);
  Eigen::Matrix2d ztz = Eigen::Matrix2d::Zero();
  for (int t = 0; t < 5; ++t) {
    const Eigen::Vector2d zt(1.0, t);
    ztz += zt * zt.transpose();
  }
  const Eigen::Matrix2d shrink = (ztz + f.sigma2 * f.G.inverse()).inverse() * ztz;
  const Eigen::Vector2cd ev = shrink.eigenvalues();
  for (int k = 0; k < 2; ++k) {
    CHECK(ev(k).real() > 0.0);
    CHECK(ev(k).real() < 1.0);
  }
  for (const auto& [id, series] : per) {
    const oracle::Line own = oracle::ols_line(series.first, series.second);
    const Eigen::Vector2d dev(own.intercept - f.beta(0), own.slope - f.beta(1));
    const Eigen::Vector2d expected = shrink * dev;
    CHECK((f.blups.at(id) - expected).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("fits are deterministic") {
  const Pooled p = pooled(ltd::testing::four_subjects_perturbed());
  const LmmFit a = lmm_fit(p.x, p.y, p.z);
  const LmmFit b = lmm_fit(p.x, p.y, p.z);
  CHECK(a.loglik == b.loglik);
  CHECK(a.beta == b.beta);
  CHECK(a.G == b.G);
}

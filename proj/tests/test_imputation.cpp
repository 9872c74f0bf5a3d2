#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "doctest.h"
#include "fixtures.hpp"
#include "ltd/cohort_csv.hpp"
#include "ltd/error.hpp"
#include "ltd/imputation.hpp"
#include "ltd/simulator.hpp"
#include "oracles/oracles.hpp"

using namespace ltd;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using ltd::testing::add_line;
using ltd::testing::make_subject;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string serialize(const Cohort& c) {
  std::ostringstream s;
  write_subjects(s, c.subjects());
  write_observations(s, c.observations());
  return s.str();
}

}  // namespace

TEST_CASE("em on complete data is the sample moment estimate") {
  MatrixXd d(5, 3);
  d << 1, 2, 3, 2, 1, 0, 4, 4, 1, 0, 3, 2, 5, 0, 2;
  const MvnModel m = em_mvn(d);
  const VectorXd mean = d.colwise().mean();
  const MatrixXd centered = d.rowwise() - mean.transpose();
  const MatrixXd cov = centered.transpose() * centered / 5.0;
  CHECK((m.mean - mean).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((m.covariance - cov).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(m.iterations == 1);
  CHECK(m.converged);
}

TEST_CASE("em with one missing entry reaches the likelihood maximum") {
  MatrixXd d(6, 2);
  d << 1.0, 2.1, 2.0, 3.4, 3.0, 3.2, 4.0, 5.9, 2.5, kNaN, 3.5, 4.1;
  const MvnModel m = em_mvn(d);
  const double ll = mvn_observed_loglik(d, m.mean, m.covariance);
  CHECK(ll == doctest::Approx(oracle::mvn_loglik(d, m.mean, m.covariance)).epsilon(1e-12));
  CHECK(m.loglik_trace.back() == doctest::Approx(ll).epsilon(1e-12));
  VectorXd mu0(2);
  mu0 << 2.0, 3.0;
  const MatrixXd s0 = MatrixXd::Identity(2, 2);
  const double grid = oracle::bivariate_max_loglik(d, mu0, s0);
  CHECK(std::abs(ll - grid) < 1e-3);
  CHECK(ll >= grid - 1e-6);
}

TEST_CASE("em likelihood trace is monotone and the covariance is psd") {
  std::mt19937 rng(4);
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  MatrixXd d(60, 4);
  for (int i = 0; i < 60; ++i) {
    const double b = n(rng);
    for (int j = 0; j < 4; ++j) d(i, j) = 10.0 + b * (1.0 + 0.3 * j) + 0.5 * n(rng);
    for (int j = 1; j < 4; ++j) {
      if (u(rng) < 0.25) d(i, j) = kNaN;
    }
  }
  const MvnModel m = em_mvn(d);
  CHECK(m.converged);
  CHECK(m.iterations > 1);
  for (std::size_t k = 1; k < m.loglik_trace.size(); ++k) {
    CHECK(m.loglik_trace[k] >= m.loglik_trace[k - 1] - 1e-10);
  }
  CHECK((m.covariance - m.covariance.transpose()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(Eigen::SelfAdjointEigenSolver<MatrixXd>(m.covariance).eigenvalues().minCoeff() >= -1e-8);
}

TEST_CASE("em univariate with missing entries") {
  MatrixXd d(5, 1);
  d << 1.0, kNaN, 4.0, 7.0, kNaN;
  CHECK(em_mvn(d).mean(0) == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("em preconditions") {
  MatrixXd d(3, 2);
  d << 1, kNaN, 2, kNaN, 3, 1;
  CHECK_THROWS_AS(em_mvn(d), DataError);
}

TEST_CASE("em flags a ridge on collinear columns") {
  MatrixXd d(4, 2);
  d << 1, 2, 2, 4, 3, 6, 4, 8;
  const MvnModel m = em_mvn(d);
  CHECK(m.ridge_applied);
}

TEST_CASE("conditional normal closed form") {
  Eigen::Vector2d mu(50.0, 60.0);
  Eigen::Matrix2d s;
  s << 9.0, 4.0, 4.0, 16.0;
  VectorXd row(2);
  row << kNaN, 68.0;
  const ConditionalNormal c = conditional_normal(mu, s, row);
  REQUIRE(c.missing.size() == 1);
  CHECK(c.mean(0) == doctest::Approx(oracle::conditional_mean(mu, s, 68.0)).epsilon(1e-14));
  CHECK(c.covariance(0, 0) == doctest::Approx(9.0 - 16.0 / 16.0).epsilon(1e-14));
}

TEST_CASE("imputation leaves a complete cohort untouched") {
  auto cfg = ltd::testing::small_config(120, 6);
  cfg.nonresponse_prob = 0.0;
  const Cohort c = simulate(cfg).cohort;
  const ImputationResult r = impute_single(c, {0.0, 3.0});
  CHECK(serialize(r.cohort) == serialize(c));
  for (const auto& cell : r.cells) CHECK(cell.n_imputed == 0);
}

TEST_CASE("single missing value gets the closed-form conditional mean") {
  std::vector<Subject> s;
  std::vector<Observation> o;
  const double a[] = {80, 85, 90, 70, 75, 88};
  const double b[] = {78, 86, 87, 66, 77, 85};
  MatrixXd d(6, 2);
  for (int k = 0; k < 6; ++k) {
    const std::string id = "s" + std::to_string(k);
    s.push_back(make_subject(id, 70, 0));
    add_line(o, id, {a[k], b[k]});
    d(k, 0) = a[k];
    d(k, 1) = b[k];
  }
  o[0].value.reset();
  d(0, 0) = kNaN;
  const Cohort c(s, o, ResponseBounds{0, 100});
  const ImputationResult r = impute_single(c, {});
  const MvnModel m = em_mvn(d);
  const double expected = oracle::conditional_mean(m.mean, m.covariance, 78.0);
  REQUIRE(r.cohort.observations()[0].value.has_value());
  CHECK(*r.cohort.observations()[0].value == doctest::Approx(expected).epsilon(1e-9));
  for (std::size_t i = 1; i < o.size(); ++i) CHECK(r.cohort.observations()[i].value == o[i].value);
}

TEST_CASE("imputation invariants on a simulated cohort") {
  auto cfg = ltd::testing::small_config(500, 10);
  cfg.nonresponse_prob = 0.2;
  cfg.intercept_mean = {96.0, 95.0};
  const Cohort c = simulate(cfg).cohort;
  ImputeOptions opt;
  opt.noise = true;
  opt.seed = 99;
  const ImputationResult r = impute_single(c, {0.0, 2.0, 4.0}, opt);
  REQUIRE(r.cohort.observations().size() == c.observations().size());
  std::size_t imputed = 0;
  for (std::size_t i = 0; i < c.observations().size(); ++i) {
    const auto& before = c.observations()[i];
    const auto& after = r.cohort.observations()[i];
    CHECK(after.subject_id == before.subject_id);
    CHECK(after.time == before.time);
    if (!before.missing()) {
      CHECK(after.value == before.value);
    } else if (!after.missing()) {
      ++imputed;
      CHECK(*after.value >= 0.0);
      CHECK(*after.value <= 100.0);
    }
  }
  CHECK(imputed > 0);
  CHECK(validate(r.cohort).empty());
  std::size_t clamped = 0;
  for (const auto& cell : r.cells) clamped += cell.n_clamped;
  CHECK(clamped > 0);

  const ImputationResult again = impute_single(c, {0.0, 2.0, 4.0}, opt);
  CHECK(serialize(again.cohort) == serialize(r.cohort));
  opt.seed = 100;
  CHECK(serialize(impute_single(c, {0.0, 2.0, 4.0}, opt).cohort) != serialize(r.cohort));

  const std::string json = to_json(r.cells);
  CHECK(json.find("n_imputed") != std::string::npos);
  CHECK(json.find("survivor|group=0") != std::string::npos);
}

TEST_CASE("sparse cells are reported and left alone") {
  std::vector<Subject> s{make_subject("a", 70, 0), make_subject("b", 70, 1)};
  std::vector<Observation> o;
  add_line(o, "a", {80, 81, 82});
  add_line(o, "b", {70, 71, 72});
  o[1].value.reset();
  const ImputationResult r = impute_single(Cohort(s, o), {});
  CHECK(r.cohort.observations()[1].missing());
  std::size_t skipped = 0;
  for (const auto& cell : r.cells) {
    skipped += cell.n_skipped;
    if (cell.n_skipped > 0) CHECK_FALSE(cell.reason.empty());
  }
  CHECK(skipped == 1);
}

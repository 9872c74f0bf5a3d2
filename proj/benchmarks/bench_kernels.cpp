#include <benchmark/benchmark.h>

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "ltd/design.hpp"
#include "ltd/estimators.hpp"
#include "ltd/imputation.hpp"
#include "ltd/linear.hpp"
#include "ltd/lmm.hpp"
#include "ltd/simulator.hpp"

using namespace ltd;

namespace {

struct Panel {
  DesignMatrix x;
  Eigen::VectorXd y;
  RandomDesign z;
};

Panel panel(std::size_t subjects) {
  SimConfig cfg;
  cfg.n_subjects = subjects;
  cfg.seed = 3;
  cfg.hazard_response_coef = -0.1;
  cfg.hazard_intercept = 4.0;
  const Cohort c = simulate(cfg).cohort;
  std::vector<DesignRow> rows;
  std::vector<double> y;
  for (const auto& o : c.observations()) {
    if (o.missing()) continue;
    const Subject* s = c.find(o.subject_id);
    rows.push_back(DesignRow{o.subject_id, s->group, s->baseline_age, o.time});
    y.push_back(*o.value);
  }
  DesignMatrix x = build_design(rows, {Regressor::kIntercept, Regressor::kGroup, Regressor::kTime,
                                       Regressor::kGroupTime});
  RandomDesign z(static_cast<Eigen::Index>(rows.size()), 2);
  for (std::size_t i = 0; i < rows.size(); ++i) z.row(static_cast<Eigen::Index>(i)) << 1.0, rows[i].time;
  return {std::move(x), Eigen::Map<Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size())), z};
}

void BM_Ols(benchmark::State& state) {
  const Panel p = panel(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(ols(p.x, p.y).beta);
  state.counters["rows"] = static_cast<double>(p.x.rows());
}
BENCHMARK(BM_Ols)->Arg(500)->Arg(5000);

void BM_Sandwich(benchmark::State& state) {
  const Panel p = panel(static_cast<std::size_t>(state.range(0)));
  const Eigen::VectorXd beta = ols(p.x, p.y).beta;
  for (auto _ : state) benchmark::DoNotOptimize(sandwich_covariance(p.x, p.y, beta));
}
BENCHMARK(BM_Sandwich)->Arg(500)->Arg(5000);

void BM_LmmFit(benchmark::State& state) {
  const Panel p = panel(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(lmm_fit(p.x, p.y, p.z).loglik);
}
BENCHMARK(BM_LmmFit)->Arg(500)->Arg(5000)->Unit(benchmark::kMillisecond);

void BM_EmMvn(benchmark::State& state) {
  const auto n = state.range(0);
  std::mt19937 rng(8);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::MatrixXd d(n, 8);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double b = g(rng);
    for (Eigen::Index j = 0; j < 8; ++j) {
      d(i, j) = 80.0 + 5.0 * b - 1.5 * static_cast<double>(j) + g(rng);
      if (j > 0 && u(rng) < 0.2) d(i, j) = std::nan("");
    }
  }
  for (auto _ : state) benchmark::DoNotOptimize(em_mvn(d).mean);
}
BENCHMARK(BM_EmMvn)->Arg(200)->Arg(2000)->Unit(benchmark::kMillisecond);

void BM_Simulate(benchmark::State& state) {
  SimConfig cfg;
  cfg.n_subjects = static_cast<std::size_t>(state.range(0));
  cfg.emit_counterfactuals = true;
  for (auto _ : state) benchmark::DoNotOptimize(simulate(cfg).cohort.size());
}
BENCHMARK(BM_Simulate)->Arg(5000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

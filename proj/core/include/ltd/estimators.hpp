#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ltd/cohort.hpp"
#include "ltd/design.hpp"
#include "ltd/lmm.hpp"
#include "ltd/report.hpp"

namespace ltd {

enum class RandomEffects { kNone, kInterceptSlope };
enum class TimeScale { kFromBaseline, kFromDeath };

struct ModelSpec {
  std::vector<Regressor> fixed = all_regressors();
  RandomEffects random_effects = RandomEffects::kInterceptSlope;
  TimeScale time_scale = TimeScale::kFromBaseline;
};

struct FitOptions {
  // Times (from baseline, or from death for terminal decline) at which fitted
  // means are reported.
  std::vector<double> horizons;
  double reference_age = 70.0;
  // "Value at time t" means an observation with |time - t| <= matching_window.
  double matching_window = 0.0;
  // Grid for fitted trajectories; empty means the integer grid spanning the data.
  std::vector<double> trajectory_times;
  LmmOptions lmm;
};

// Each subject's own OLS line carries decedents forward to the horizon; values
// are not clamped to the response bounds.
EstimandReport naive_extrapolation_summary(const Cohort& cohort, double horizon,
                                           double matching_window = 0.0);

EstimandReport unconditional_fit(const Cohort& cohort, const ModelSpec& spec,
                                 const FitOptions& options);

EstimandReport pattern_mixture_fit(const Cohort& cohort, const std::vector<double>& boundaries,
                                   const ModelSpec& spec, const FitOptions& options);

// Decedents only, on the years-from-death scale. With random_effects = kNone the
// fit is pooled OLS.
EstimandReport terminal_decline_fit(const Cohort& cohort, const ModelSpec& spec,
                                    const FitOptions& options);

// Regression conditioning on being alive: independence estimating equations
// with cluster-robust (sandwich) standard errors.
EstimandReport rca_fit(const Cohort& cohort, const ModelSpec& spec, const FitOptions& options);

struct PrincipalStratOptions {
  double horizon = 9.0;
  std::vector<std::string> confounders{"baseline_age"};
  double response_time = 4.0;
  double matching_window = 0.0;
};

// Survivor-stratum contrast under explainable nonrandom survival and
// pseudo-randomization of the group.
EstimandReport principal_strat_estimate(const Cohort& cohort, const PrincipalStratOptions& options);

// sum w_i y_i / sum w_i; throws DataError when the weights sum to zero.
double weighted_mean(std::span<const double> values, std::span<const double> weights);

struct PahSeries {
  std::string label;  // "all" or "group=<g>"
  std::size_t denominator = 0;
  std::vector<double> times;
  std::vector<double> pah;
  std::vector<double> alive_fraction;
  std::vector<std::size_t> healthy;
  std::vector<std::size_t> alive;
  std::vector<std::size_t> missing;  // alive at t with no value at t
  double years_healthy_life = 0.0;   // trapezoid area over [times.front, times.back]
  double decline_rate = 0.0;         // (PAH(first) - PAH(last)) / span
};

struct PahCurve {
  double threshold = 0.0;
  std::vector<PahSeries> series;
};

struct PahOptions {
  double threshold = 80.0;
  std::vector<double> times;
  bool by_group = false;
  double matching_window = 0.0;
};

PahCurve joint_pah(const Cohort& cohort, const PahOptions& options);
EstimandReport pah_report(const PahCurve& curve, const Cohort& cohort);

// Per-subject OLS slope of value on time over observed values; nullopt with
// fewer than two distinct times.
struct SubjectLine {
  double intercept = 0.0;
  double slope = 0.0;
};
std::optional<SubjectLine> subject_line(const Cohort& cohort, const SubjectId& id);

// Estimate names use this rendering of times, e.g. "t=5", "t=-2", "t=0.5".
std::string time_key(double t);

}  // namespace ltd

#include "ltd/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "ltd/cohort_csv.hpp"
#include "ltd/error.hpp"
#include "ltd/linear.hpp"

namespace ltd {

std::string time_key(double t) { return "t=" + format_number(t == 0.0 ? 0.0 : t); }

std::optional<SubjectLine> subject_line(const Cohort& cohort, const SubjectId& id) {
  std::vector<double> ts;
  std::vector<double> vs;
  for (std::size_t i : cohort.observation_indices(id)) {
    const auto& o = cohort.observations()[i];
    if (!o.value) continue;
    ts.push_back(o.time);
    vs.push_back(*o.value);
  }
  if (ts.size() < 2) return std::nullopt;
  double tbar = 0.0;
  double vbar = 0.0;
  for (std::size_t k = 0; k < ts.size(); ++k) {
    tbar += ts[k];
    vbar += vs[k];
  }
  tbar /= static_cast<double>(ts.size());
  vbar /= static_cast<double>(ts.size());
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t k = 0; k < ts.size(); ++k) {
    sxx += (ts[k] - tbar) * (ts[k] - tbar);
    sxy += (ts[k] - tbar) * (vs[k] - vbar);
  }
  if (sxx <= 0.0) return std::nullopt;
  const double slope = sxy / sxx;
  return SubjectLine{vbar - slope * tbar, slope};
}

namespace {

constexpr const char* kPoints = "points";
constexpr const char* kPointsPerYear = "points/year";

struct Rows {
  std::vector<DesignRow> design;
  std::vector<double> y;
};

Rows rows_from_baseline(const Cohort& cohort, const std::set<SubjectId>* members = nullptr) {
  Rows rows;
  for (const auto& o : cohort.observations()) {
    if (!o.value) continue;
    if (members != nullptr && members->count(o.subject_id) == 0) continue;
    const Subject* s = cohort.find(o.subject_id);
    if (s == nullptr) throw DataError("observation for unknown subject '" + o.subject_id + "'");
    rows.design.push_back(DesignRow{o.subject_id, s->group, s->baseline_age, o.time});
    rows.y.push_back(*o.value);
  }
  return rows;
}

Rows rows_from_death(const Cohort& cohort) {
  Rows rows;
  for (const auto& o : years_from_death_view(cohort)) {
    if (!o.value) continue;
    const Subject* s = cohort.find(o.subject_id);
    rows.design.push_back(DesignRow{o.subject_id, s->group, s->baseline_age, o.time_from_death});
    rows.y.push_back(*o.value);
  }
  return rows;
}

Eigen::VectorXd as_vector(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

RandomDesign random_design(const std::vector<DesignRow>& rows) {
  RandomDesign z(static_cast<Eigen::Index>(rows.size()), 2);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    z(static_cast<Eigen::Index>(i), 0) = 1.0;
    z(static_cast<Eigen::Index>(i), 1) = rows[i].time;
  }
  return z;
}

std::size_t count_clusters(const std::vector<DesignRow>& rows) {
  std::set<SubjectId> ids;
  for (const auto& r : rows) ids.insert(r.subject_id);
  return ids.size();
}

// Coefficients and the covariance used for standard errors of linear
// combinations of them.
struct ModelFit {
  Eigen::VectorXd beta;
  Eigen::MatrixXd cov;
  std::vector<std::string> names;
  bool mixed = false;
};

ModelFit fit_mixed(const Rows& rows, const std::vector<Regressor>& fixed, const LmmOptions& options,
                   EstimandReport& report) {
  const DesignMatrix x = build_design(rows.design, fixed);
  const LmmFit fit = lmm_fit(x, as_vector(rows.y), random_design(rows.design), options);
  if (!fit.converged && !fit.boundary) {
    throw NumericalError(NumericalError::Kind::kNonConvergence,
                         "mixed model did not converge after " + std::to_string(fit.iterations) +
                             " likelihood evaluations");
  }
  if (fit.boundary) {
    report.notes.push_back(
        "variance components on the boundary of the parameter space (degenerate random effects "
        "or residual variance)");
  }
  report.add("var.intercept", fit.G(0, 0), "points^2", "random-effect covariance");
  report.add("cov.intercept_slope", fit.G(0, 1), "points^2/year", "random-effect covariance");
  report.add("var.slope", fit.G(1, 1), "points^2/year^2", "random-effect covariance");
  report.add("var.residual", fit.sigma2, "points^2", "residual variance");
  report.add("loglik", fit.loglik, "log-likelihood", "maximum likelihood");
  return ModelFit{fit.beta, fit.cov_beta, fit.names, true};
}

ModelFit fit_pooled(const Rows& rows, const std::vector<Regressor>& fixed, bool robust) {
  const DesignMatrix x = build_design(rows.design, fixed);
  const Eigen::VectorXd y = as_vector(rows.y);
  const LinearFit fit = ols(x, y);
  Eigen::MatrixXd cov = robust ? sandwich_covariance(x, y, fit.beta) : fit.cov_model;
  return ModelFit{fit.beta, cov, fit.names, false};
}

void add_coefficients(EstimandReport& report, const ModelFit& fit, const std::string& conditioning,
                      const std::string& slope_unit) {
  for (std::size_t k = 0; k < fit.names.size(); ++k) {
    const auto& name = fit.names[k];
    const bool timeish = name.find("time") != std::string::npos;
    const std::string key = "coef." + name;
    const auto idx = static_cast<Eigen::Index>(k);
    report.add(key, fit.beta(idx), timeish ? slope_unit : std::string(kPoints), conditioning);
    report.standard_errors[key] = std::sqrt(std::max(0.0, fit.cov(idx, idx)));
  }
}

Eigen::VectorXd reference_row(const std::vector<Regressor>& fixed, int group, double age, double t) {
  Eigen::VectorXd x(static_cast<Eigen::Index>(fixed.size()));
  for (std::size_t k = 0; k < fixed.size(); ++k) {
    x(static_cast<Eigen::Index>(k)) = regressor_value(fixed[k], group, age, t);
  }
  return x;
}

std::vector<int> groups_in(const std::vector<DesignRow>& rows) {
  std::set<int> g;
  for (const auto& r : rows) g.insert(r.group);
  return {g.begin(), g.end()};
}

std::vector<double> trajectory_grid(const std::vector<DesignRow>& rows, const FitOptions& options) {
  if (!options.trajectory_times.empty()) return options.trajectory_times;
  double lo = rows.front().time;
  double hi = rows.front().time;
  for (const auto& r : rows) {
    lo = std::min(lo, r.time);
    hi = std::max(hi, r.time);
  }
  std::vector<double> grid;
  for (double t = std::ceil(lo); t <= std::floor(hi); t += 1.0) grid.push_back(t);
  return grid;
}

std::string group_key(int g) { return "group=" + std::to_string(g); }

// Fitted means (with standard errors) at the horizons and along the grid for
// each group present, at the reference baseline age.
void add_fitted_means(EstimandReport& report, const ModelFit& fit, const std::vector<Regressor>& fixed,
                      const Rows& rows, const FitOptions& options, const std::string& stratum,
                      const std::string& conditioning_prefix, double horizon_limit) {
  const auto groups = groups_in(rows.design);
  for (double h : options.horizons) {
    if (h > horizon_limit) {
      report.notes.push_back("no fitted mean at " + time_key(h) + ": beyond the data in this fit");
      continue;
    }
    for (int g : groups) {
      const Eigen::VectorXd x0 = reference_row(fixed, g, options.reference_age, h);
      const std::string key = "fit.mean_at_" + time_key(h) + "." + group_key(g);
      report.add(key, x0.dot(fit.beta), kPoints,
                 conditioning_prefix + time_key(h) + ", " + group_key(g) +
                     ", baseline_age=" + format_number(options.reference_age));
      report.standard_errors[key] = std::sqrt(std::max(0.0, x0.dot(fit.cov * x0)));
    }
  }
  for (double t : trajectory_grid(rows.design, options)) {
    for (int g : groups) {
      const Eigen::VectorXd x0 = reference_row(fixed, g, options.reference_age, t);
      report.trajectories.push_back(TrajectoryPoint{std::to_string(g), stratum, t, x0.dot(fit.beta)});
    }
  }
}

double max_time(const Rows& rows) {
  double hi = -std::numeric_limits<double>::infinity();
  for (const auto& r : rows.design) hi = std::max(hi, r.time);
  return hi;
}

}  // namespace

EstimandReport naive_extrapolation_summary(const Cohort& cohort, double horizon,
                                           double matching_window) {
  EstimandReport report;
  report.model_kind = ModelKind::kNaiveExtrapolation;
  report.cohort_fingerprint = cohort_fingerprint(cohort);
  if (cohort.subjects().empty()) throw DataError("cohort has no subjects");

  double sum_at = 0.0;
  double sum_slope = 0.0;
  std::size_t extrapolated = 0;
  const auto n = static_cast<double>(cohort.size());
  std::vector<double> grid;
  for (double t = 0.0; t <= horizon; t += 1.0) grid.push_back(t);
  std::vector<double> grid_sum(grid.size(), 0.0);

  for (const auto& s : cohort.subjects()) {
    const auto line = subject_line(cohort, s.id);
    if (!line) {
      throw DataError("subject '" + s.id + "' has fewer than two observed values; no slope");
    }
    auto completed = [&](double t) {
      if (auto v = value_near(cohort, s.id, t, matching_window)) return *v;
      return line->intercept + line->slope * t;
    };
    if (!value_near(cohort, s.id, horizon, matching_window)) ++extrapolated;
    sum_at += completed(horizon);
    sum_slope += line->slope;
    for (std::size_t k = 0; k < grid.size(); ++k) grid_sum[k] += completed(grid[k]);
  }
  const std::string cond = "immortal cohort: unobserved values extended along each subject's line";
  report.add("summary.mean_at_" + time_key(horizon), sum_at / n, kPoints, cond);
  report.add("summary.mean_slope", sum_slope / n, kPointsPerYear, cond);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    report.trajectories.push_back(TrajectoryPoint{"all", "", grid[k], grid_sum[k] / n});
  }
  report.notes.push_back(std::to_string(extrapolated) + " of " + std::to_string(cohort.size()) +
                         " subjects extrapolated to " + time_key(horizon) +
                         "; values are not clamped to the response range");
  return report;
}

EstimandReport unconditional_fit(const Cohort& cohort, const ModelSpec& spec,
                                 const FitOptions& options) {
  if (spec.time_scale != TimeScale::kFromBaseline) {
    throw DataError("unconditional model uses time from baseline");
  }
  if (spec.random_effects != RandomEffects::kInterceptSlope) {
    throw DataError("unconditional model needs a random intercept and slope");
  }
  EstimandReport report;
  report.model_kind = ModelKind::kUnconditional;
  report.cohort_fingerprint = cohort_fingerprint(cohort);
  const Rows rows = rows_from_baseline(cohort);
  if (rows.y.empty()) throw DataError("no observed values");
  const ModelFit fit = fit_mixed(rows, spec.fixed, options.lmm, report);
  add_coefficients(report, fit, "immortal cohort (mixed model, deaths treated as missing at random)",
                   kPointsPerYear);
  add_fitted_means(report, fit, spec.fixed, rows, options, "",
                   "immortal cohort: mean at ", std::numeric_limits<double>::infinity());
  return report;
}

EstimandReport pattern_mixture_fit(const Cohort& cohort, const std::vector<double>& boundaries,
                                   const ModelSpec& spec, const FitOptions& options) {
  if (spec.time_scale != TimeScale::kFromBaseline) {
    throw DataError("pattern-mixture strata use time from baseline");
  }
  EstimandReport report;
  report.model_kind = ModelKind::kPatternMixture;
  report.cohort_fingerprint = cohort_fingerprint(cohort);
  const auto assignment = assign_strata(cohort, boundaries);

  for (const auto& stratum : strata_for(boundaries)) {
    std::set<SubjectId> members;
    for (const auto& [id, st] : assignment) {
      if (st == stratum) members.insert(id);
    }
    if (members.empty()) {
      report.notes.push_back("stratum " + stratum.label + " is empty; skipped");
      continue;
    }
    EstimandReport sub;
    sub.model_kind = ModelKind::kPatternMixture;
    sub.label = stratum.label;
    const std::string cond = "stratum " + stratum.label;
    sub.add("n_subjects", static_cast<double>(members.size()), "count", cond);

    for (double h : options.horizons) {
      double sum = 0.0;
      std::size_t k = 0;
      for (const auto& id : members) {
        if (auto v = value_near(cohort, id, h, options.matching_window)) {
          sum += *v;
          ++k;
        }
      }
      if (k == 0) {
        sub.notes.push_back("no member observed at " + time_key(h));
        continue;
      }
      sub.add("summary.mean_at_" + time_key(h), sum / static_cast<double>(k), kPoints,
              cond + ", members observed at " + time_key(h));
    }
    double slope_sum = 0.0;
    std::size_t n_lines = 0;
    for (const auto& id : members) {
      if (auto line = subject_line(cohort, id)) {
        slope_sum += line->slope;
        ++n_lines;
      }
    }
    if (n_lines > 0) {
      sub.add("summary.mean_slope", slope_sum / static_cast<double>(n_lines), kPointsPerYear,
              cond + ", mean of individual slopes");
    }

    const Rows rows = rows_from_baseline(cohort, &members);
    if (!rows.y.empty()) {
      try {
        ModelFit fit;
        const bool mixed = spec.random_effects == RandomEffects::kInterceptSlope &&
                           count_clusters(rows.design) >= 2;
        if (mixed) {
          fit = fit_mixed(rows, spec.fixed, options.lmm, sub);
        } else {
          if (spec.random_effects == RandomEffects::kInterceptSlope) {
            sub.notes.push_back("fewer than 2 subjects; pooled OLS fit within stratum");
          }
          fit = fit_pooled(rows, spec.fixed, false);
        }
        add_coefficients(sub, fit, cond + " (fit)", kPointsPerYear);
        add_fitted_means(sub, fit, spec.fixed, rows, options, stratum.label, cond + ": mean at ",
                         max_time(rows));
      } catch (const NumericalError& e) {
        sub.notes.push_back(std::string("fit skipped: ") + e.what());
      }
    }
    report.strata.push_back(std::move(sub));
  }
  return report;
}

EstimandReport terminal_decline_fit(const Cohort& cohort, const ModelSpec& spec,
                                    const FitOptions& options) {
  if (spec.time_scale != TimeScale::kFromDeath) {
    throw DataError("terminal decline uses time from death");
  }
  EstimandReport report;
  report.model_kind = ModelKind::kTerminalDecline;
  report.cohort_fingerprint = cohort_fingerprint(cohort);
  const Rows rows = rows_from_death(cohort);
  if (count_clusters(rows.design) < 2) {
    throw DataError("terminal decline needs at least 2 decedents with observed values");
  }
  std::size_t excluded = 0;
  for (const auto& s : cohort.subjects()) {
    if (!s.death_observed) ++excluded;
  }
  report.notes.push_back(std::to_string(excluded) +
                         " subjects without an observed death excluded (time of death unknown)");

  const std::string cond = "decedents, time measured from death";
  ModelFit fit;
  if (spec.random_effects == RandomEffects::kInterceptSlope) {
    fit = fit_mixed(rows, spec.fixed, options.lmm, report);
  } else {
    fit = fit_pooled(rows, spec.fixed, true);
    report.notes.push_back("pooled OLS; standard errors are cluster-robust");
  }
  add_coefficients(report, fit, cond, "points/year before death");
  add_fitted_means(report, fit, spec.fixed, rows, options, "", cond + ": mean at ", 0.0);
  return report;
}

EstimandReport rca_fit(const Cohort& cohort, const ModelSpec& spec, const FitOptions& options) {
  if (spec.time_scale != TimeScale::kFromBaseline) {
    throw DataError("regression conditioning on being alive uses time from baseline");
  }
  if (spec.random_effects != RandomEffects::kNone) {
    throw DataError("regression conditioning on being alive has no random effects");
  }
  EstimandReport report;
  report.model_kind = ModelKind::kRca;
  report.cohort_fingerprint = cohort_fingerprint(cohort);
  const Rows rows = rows_from_baseline(cohort);
  if (rows.y.empty()) throw DataError("no observed values");
  const DesignMatrix x = build_design(rows.design, spec.fixed);
  const Eigen::VectorXd y = as_vector(rows.y);
  const LinearFit lin = ols(x, y);
  ModelFit fit{lin.beta, sandwich_covariance(x, y, lin.beta), lin.names, false};

  add_coefficients(report, fit, "survivors: given alive at each measurement time", kPointsPerYear);
  for (std::size_t k = 0; k < lin.names.size(); ++k) {
    const auto idx = static_cast<Eigen::Index>(k);
    report.add("model_se.coef." + lin.names[k], std::sqrt(std::max(0.0, lin.cov_model(idx, idx))),
               "standard error", "independence working model (not robust)");
  }
  add_fitted_means(report, fit, spec.fixed, rows, options, "", "survivors: given alive at ",
                   std::numeric_limits<double>::infinity());
  report.notes.push_back("standard errors are cluster-robust (sandwich), clustered by subject");
  return report;
}

}  // namespace ltd

#include <cmath>
#include <numeric>

#include "ltd/cohort_csv.hpp"
#include "ltd/error.hpp"
#include "ltd/estimators.hpp"
#include "ltd/logistic.hpp"

namespace ltd {

double weighted_mean(std::span<const double> values, std::span<const double> weights) {
  if (values.size() != weights.size()) throw DataError("values and weights differ in length");
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    num += weights[i] * values[i];
    den += weights[i];
  }
  if (!(den > 0.0)) throw DataError("weights sum to zero");
  return num / den;
}

namespace {

enum class Status { kAlive, kDead, kUnknown };

Status status_at(const Cohort& cohort, const Subject& s, double horizon) {
  if (s.death_observed && s.survival_time) {
    return *s.survival_time <= horizon ? Status::kDead : Status::kAlive;
  }
  // No observed death: alive through the last visit on record.
  double last = -1.0;
  for (std::size_t i : cohort.observation_indices(s.id)) {
    last = std::max(last, cohort.observations()[i].time);
  }
  return last >= horizon ? Status::kAlive : Status::kUnknown;
}

struct Arm {
  std::vector<const Subject*> determinate;
  std::vector<double> alive;
};

// Survival probability model for one arm: P(alive at horizon | X, group = z).
struct SurvivalModel {
  std::optional<LogisticFit> fit;
  double constant = 0.0;  // used when the arm's outcome does not vary

  double operator()(const Eigen::VectorXd& x) const {
    return fit ? inverse_logit(x.dot(fit->beta)) : constant;
  }
};

Eigen::VectorXd confounder_row(const Subject& s, const std::vector<std::string>& names) {
  Eigen::VectorXd x(static_cast<Eigen::Index>(names.size() + 1));
  x(0) = 1.0;
  for (std::size_t k = 0; k < names.size(); ++k) {
    auto v = s.covariate(names[k]);
    if (!v) throw DataError("subject '" + s.id + "' has no covariate '" + names[k] + "'");
    x(static_cast<Eigen::Index>(k + 1)) = *v;
  }
  return x;
}

}  // namespace

EstimandReport principal_strat_estimate(const Cohort& cohort, const PrincipalStratOptions& options) {
  EstimandReport report;
  report.model_kind = ModelKind::kPrincipalStrat;
  report.cohort_fingerprint = cohort_fingerprint(cohort);

  std::vector<std::string> names{"intercept"};
  for (const auto& c : options.confounders) {
    if (c == "group") throw DataError("the group cannot be its own confounder");
    names.push_back(c);
  }

  Arm arms[2];
  std::size_t indeterminate = 0;
  for (const auto& s : cohort.subjects()) {
    if (s.group != 0 && s.group != 1) throw DataError("subject '" + s.id + "' has group outside {0,1}");
    const Status st = status_at(cohort, s, options.horizon);
    if (st == Status::kUnknown) {
      ++indeterminate;
      continue;
    }
    arms[s.group].determinate.push_back(&s);
    arms[s.group].alive.push_back(st == Status::kAlive ? 1.0 : 0.0);
  }

  const std::string hkey = time_key(options.horizon);
  SurvivalModel models[2];
  for (int z = 0; z < 2; ++z) {
    const Arm& arm = arms[z];
    if (arm.determinate.empty()) {
      throw DataError("arm group=" + std::to_string(z) + " has no subjects with known vital status");
    }
    const double rate = std::accumulate(arm.alive.begin(), arm.alive.end(), 0.0) /
                        static_cast<double>(arm.alive.size());
    if (rate == 0.0 || rate == 1.0) {
      models[z].constant = rate;
      report.notes.push_back("arm group=" + std::to_string(z) + ": survival to " + hkey +
                             " does not vary; survival probability fixed at " + format_number(rate));
      continue;
    }
    Eigen::MatrixXd x(static_cast<Eigen::Index>(arm.determinate.size()),
                      static_cast<Eigen::Index>(names.size()));
    std::vector<SubjectId> ids;
    for (std::size_t i = 0; i < arm.determinate.size(); ++i) {
      x.row(static_cast<Eigen::Index>(i)) = confounder_row(*arm.determinate[i], options.confounders);
      ids.push_back(arm.determinate[i]->id);
    }
    const DesignMatrix design(std::move(x), names, std::move(ids));
    const Eigen::VectorXd d = Eigen::Map<const Eigen::VectorXd>(
        arm.alive.data(), static_cast<Eigen::Index>(arm.alive.size()));
    models[z].fit = logistic_fit(design, d);
    for (std::size_t k = 0; k < names.size(); ++k) {
      const auto idx = static_cast<Eigen::Index>(k);
      const std::string key = "survival_coef.group=" + std::to_string(z) + "." + names[k];
      report.add(key, models[z].fit->beta(idx), "log-odds",
                 "P(alive at " + hkey + " | confounders, group=" + std::to_string(z) + ")");
      report.standard_errors[key] = std::sqrt(std::max(0.0, models[z].fit->cov(idx, idx)));
    }
  }

  const std::string cond = "always-survivors: alive at " + hkey + " under either group";
  const std::string rkey = time_key(options.response_time);
  double means[2] = {0.0, 0.0};
  double ses[2] = {0.0, 0.0};
  for (int z = 0; z < 2; ++z) {
    std::vector<double> values;
    std::vector<double> weights;
    for (std::size_t i = 0; i < arms[z].determinate.size(); ++i) {
      if (arms[z].alive[i] == 0.0) continue;
      const Subject& s = *arms[z].determinate[i];
      auto v = value_near(cohort, s.id, options.response_time, options.matching_window);
      if (!v) continue;
      values.push_back(*v);
      weights.push_back(models[1 - z](confounder_row(s, options.confounders)));
    }
    if (values.empty()) {
      throw DataError("arm group=" + std::to_string(z) + " has no survivors observed at " + rkey);
    }
    means[z] = weighted_mean(values, weights);
    double wsum = 0.0;
    double var = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      wsum += weights[i];
      var += weights[i] * weights[i] * (values[i] - means[z]) * (values[i] - means[z]);
    }
    ses[z] = std::sqrt(var) / wsum;
    const double plain = std::accumulate(values.begin(), values.end(), 0.0) /
                         static_cast<double>(values.size());
    const std::string arm = "arm=" + std::to_string(z);
    report.add("mean_at_" + rkey + "." + arm, means[z], "points", cond + ", group=" + std::to_string(z));
    report.standard_errors["mean_at_" + rkey + "." + arm] = ses[z];
    report.add("survivor_mean_at_" + rkey + "." + arm, plain, "points",
               "observed survivors to " + hkey + " in group=" + std::to_string(z) + " (unweighted)");
    report.add("n_eligible." + arm, static_cast<double>(values.size()), "count",
               "survivors to " + hkey + " observed at " + rkey);
  }
  report.add("contrast_at_" + rkey, means[1] - means[0], "points", cond + ", group 1 minus group 0");
  report.standard_errors["contrast_at_" + rkey] = std::sqrt(ses[0] * ses[0] + ses[1] * ses[1]);
  report.add("n_indeterminate", static_cast<double>(indeterminate), "count",
             "excluded: vital status at " + hkey + " unknown");
  report.notes.push_back(
      "standard errors treat the survival weights as known (no allowance for their estimation)");
  return report;
}

}  // namespace ltd

#include "ltd/cohort_csv.hpp"
#include "ltd/error.hpp"
#include "ltd/estimators.hpp"

namespace ltd {

namespace {

PahSeries pah_series(const Cohort& cohort, const std::vector<const Subject*>& members,
                     std::string label, const PahOptions& options) {
  PahSeries s;
  s.label = std::move(label);
  s.denominator = members.size();
  const auto den = static_cast<double>(members.size());
  for (double t : options.times) {
    std::size_t alive = 0;
    std::size_t healthy = 0;
    std::size_t missing = 0;
    for (const Subject* m : members) {
      if (!m->alive_at(t)) continue;
      ++alive;
      auto v = value_near(cohort, m->id, t, options.matching_window);
      if (!v) {
        ++missing;
      } else if (*v >= options.threshold) {
        ++healthy;
      }
    }
    s.times.push_back(t);
    s.healthy.push_back(healthy);
    s.alive.push_back(alive);
    s.missing.push_back(missing);
    s.pah.push_back(static_cast<double>(healthy) / den);
    s.alive_fraction.push_back(static_cast<double>(alive) / den);
  }
  for (std::size_t k = 1; k < s.times.size(); ++k) {
    s.years_healthy_life += 0.5 * (s.pah[k] + s.pah[k - 1]) * (s.times[k] - s.times[k - 1]);
  }
  if (s.times.size() > 1) {
    s.decline_rate = (s.pah.front() - s.pah.back()) / (s.times.back() - s.times.front());
  }
  return s;
}

}  // namespace

PahCurve joint_pah(const Cohort& cohort, const PahOptions& options) {
  if (options.times.empty()) throw DataError("PAH needs at least one time");
  for (std::size_t k = 1; k < options.times.size(); ++k) {
    if (!(options.times[k] > options.times[k - 1])) {
      throw DataError("PAH times must be strictly increasing");
    }
  }
  if (cohort.subjects().empty()) throw DataError("cohort has no subjects");
  PahCurve curve;
  curve.threshold = options.threshold;
  std::vector<const Subject*> everyone;
  for (const auto& s : cohort.subjects()) everyone.push_back(&s);
  curve.series.push_back(pah_series(cohort, everyone, "all", options));
  if (options.by_group) {
    for (int g = 0; g < 2; ++g) {
      std::vector<const Subject*> members;
      for (const Subject* s : everyone) {
        if (s->group == g) members.push_back(s);
      }
      if (members.empty()) continue;
      curve.series.push_back(pah_series(cohort, members, "group=" + std::to_string(g), options));
    }
  }
  return curve;
}

EstimandReport pah_report(const PahCurve& curve, const Cohort& cohort) {
  EstimandReport report;
  report.model_kind = ModelKind::kJointPah;
  report.cohort_fingerprint = cohort_fingerprint(cohort);
  const std::string healthy = "value >= " + format_number(curve.threshold);
  for (const auto& s : curve.series) {
    const std::string prefix = s.label == "all" ? "" : s.label + ".";
    const std::string cond = "entire baseline cohort" + (s.label == "all" ? "" : " in " + s.label) +
                             " (deaths count as not healthy)";
    for (std::size_t k = 0; k < s.times.size(); ++k) {
      const std::string tk = time_key(s.times[k]);
      report.add("pah." + prefix + tk, s.pah[k], "proportion", cond + ", alive and " + healthy);
      report.add("alive." + prefix + tk, s.alive_fraction[k], "proportion", cond + ", alive");
      report.add("missing." + prefix + tk, static_cast<double>(s.missing[k]), "count",
                 "alive at " + tk + " with no value (excluded from the numerator)");
      report.trajectories.push_back(TrajectoryPoint{s.label, "", s.times[k], s.pah[k]});
    }
    report.add("years_healthy_life" + (s.label == "all" ? std::string() : "." + s.label),
               s.years_healthy_life, "years", cond + ", area under the PAH curve");
    report.add("decline_rate" + (s.label == "all" ? std::string() : "." + s.label), s.decline_rate,
               "proportion/year", cond + ", linear change from first to last time");
  }
  return report;
}

}  // namespace ltd

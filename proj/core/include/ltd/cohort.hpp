#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace ltd {

using SubjectId = std::string;

struct Subject {
  SubjectId id;
  double baseline_age = 0.0;
  int group = 0;
  // Years from baseline to death; set only when death_observed.
  std::optional<double> survival_time;
  bool death_observed = false;
  std::vector<std::pair<std::string, double>> extra_covariates;

  std::optional<double> covariate(std::string_view name) const;
  // Alive at time t means no observed death at or before t.
  bool alive_at(double t) const {
    return !death_observed || !survival_time || *survival_time > t;
  }
};

struct Observation {
  SubjectId subject_id;
  double time = 0.0;
  std::optional<double> value;  // absent when missing due to nonresponse

  bool missing() const { return !value.has_value(); }
};

struct ResponseBounds {
  double lo = 0.0;
  double hi = 0.0;

  bool contains(double v) const { return v >= lo && v <= hi; }
  double clamp(double v) const { return v < lo ? lo : (v > hi ? hi : v); }
};

// Immutable collection of subjects and their timed responses. Construction
// does not enforce the invariants; use validate() to list violations.
class Cohort {
 public:
  Cohort() = default;
  Cohort(std::vector<Subject> subjects, std::vector<Observation> observations,
         std::optional<ResponseBounds> bounds = std::nullopt);

  const std::vector<Subject>& subjects() const { return subjects_; }
  const std::vector<Observation>& observations() const { return observations_; }
  const std::optional<ResponseBounds>& response_bounds() const { return bounds_; }

  const Subject* find(const SubjectId& id) const;
  // Indices into observations() for one subject, in storage order.
  std::span<const std::size_t> observation_indices(const SubjectId& id) const;

  std::size_t size() const { return subjects_.size(); }

 private:
  std::vector<Subject> subjects_;
  std::vector<Observation> observations_;
  std::optional<ResponseBounds> bounds_;
  std::unordered_map<SubjectId, std::size_t> subject_index_;
  std::unordered_map<SubjectId, std::vector<std::size_t>> obs_index_;
};

enum class Rule {
  kDuplicateSubject,
  kInvalidGroup,
  kNonFiniteValue,
  kNonPositiveSurvival,
  kDeathFlagMismatch,
  kUnknownSubject,
  kNegativeTime,
  kNonIncreasingTimes,
  kPostDeathObservation,
  kOutOfBounds,
};

const char* to_string(Rule rule);

struct Violation {
  Rule rule;
  SubjectId subject_id;
  std::optional<std::size_t> observation;  // index into observations()
  std::string message;
};

std::vector<Violation> validate(const Cohort& cohort);

std::set<SubjectId> survivors_at(const Cohort& cohort, double t);

struct DeathStratum {
  std::string label;
  bool survivor = false;
  double lo = 0.0;  // [lo, hi) on survival time; unused for the survivor stratum
  double hi = 0.0;

  bool operator==(const DeathStratum&) const = default;
};

// Decedents fall into half-open bins [b_k, b_k+1). A bin [0, b_0) is added when
// the first boundary is positive and [b_last, inf) closes the axis. Subjects
// without an observed death go to the survivor stratum.
std::map<SubjectId, DeathStratum> assign_strata(const Cohort& cohort,
                                                std::span<const double> boundaries);
std::vector<DeathStratum> strata_for(std::span<const double> boundaries);

struct DeathAlignedObservation {
  SubjectId subject_id;
  double time_from_death = 0.0;  // strictly negative
  double survival_time = 0.0;
  std::optional<double> value;
};

std::vector<DeathAlignedObservation> years_from_death_view(const Cohort& cohort);

// Value observed within `window` of t, or nothing. Nearest time wins.
std::optional<double> value_near(const Cohort& cohort, const SubjectId& id, double t,
                                 double window = 0.0);

}  // namespace ltd

#include "ltd/cohort.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace ltd {

std::optional<double> Subject::covariate(std::string_view name) const {
  if (name == "baseline_age") return baseline_age;
  if (name == "group") return static_cast<double>(group);
  for (const auto& [key, value] : extra_covariates) {
    if (key == name) return value;
  }
  return std::nullopt;
}

Cohort::Cohort(std::vector<Subject> subjects, std::vector<Observation> observations,
               std::optional<ResponseBounds> bounds)
    : subjects_(std::move(subjects)),
      observations_(std::move(observations)),
      bounds_(bounds) {
  for (std::size_t i = 0; i < subjects_.size(); ++i) {
    subject_index_.emplace(subjects_[i].id, i);  // first occurrence wins
  }
  for (std::size_t i = 0; i < observations_.size(); ++i) {
    obs_index_[observations_[i].subject_id].push_back(i);
  }
}

const Subject* Cohort::find(const SubjectId& id) const {
  auto it = subject_index_.find(id);
  return it == subject_index_.end() ? nullptr : &subjects_[it->second];
}

std::span<const std::size_t> Cohort::observation_indices(const SubjectId& id) const {
  auto it = obs_index_.find(id);
  if (it == obs_index_.end()) return {};
  return it->second;
}

const char* to_string(Rule rule) {
  switch (rule) {
    case Rule::kDuplicateSubject: return "duplicate_subject";
    case Rule::kInvalidGroup: return "invalid_group";
    case Rule::kNonFiniteValue: return "non_finite_value";
    case Rule::kNonPositiveSurvival: return "non_positive_survival_time";
    case Rule::kDeathFlagMismatch: return "death_flag_mismatch";
    case Rule::kUnknownSubject: return "unknown_subject";
    case Rule::kNegativeTime: return "negative_time";
    case Rule::kNonIncreasingTimes: return "non_increasing_times";
    case Rule::kPostDeathObservation: return "post_death_observation";
    case Rule::kOutOfBounds: return "out_of_bounds";
  }
  return "unknown";
}

namespace {

std::string describe(const Observation& obs) {
  std::ostringstream os;
  os << "subject " << obs.subject_id << " at time " << obs.time;
  return os.str();
}

}  // namespace

std::vector<Violation> validate(const Cohort& cohort) {
  std::vector<Violation> out;
  auto add = [&out](Rule rule, const SubjectId& id, std::optional<std::size_t> obs,
                    std::string msg) {
    out.push_back(Violation{rule, id, obs, std::move(msg)});
  };

  std::set<SubjectId> seen;
  for (const auto& s : cohort.subjects()) {
    if (!seen.insert(s.id).second) {
      add(Rule::kDuplicateSubject, s.id, std::nullopt, "subject id appears more than once");
    }
    if (s.group != 0 && s.group != 1) {
      add(Rule::kInvalidGroup, s.id, std::nullopt, "group must be 0 or 1");
    }
    if (!std::isfinite(s.baseline_age)) {
      add(Rule::kNonFiniteValue, s.id, std::nullopt, "baseline_age is not finite");
    }
    for (const auto& [name, v] : s.extra_covariates) {
      if (!std::isfinite(v)) {
        add(Rule::kNonFiniteValue, s.id, std::nullopt, "covariate " + name + " is not finite");
      }
    }
    if (s.death_observed && !s.survival_time) {
      add(Rule::kDeathFlagMismatch, s.id, std::nullopt,
          "death observed but survival_time is missing");
    }
    if (!s.death_observed && s.survival_time) {
      add(Rule::kDeathFlagMismatch, s.id, std::nullopt,
          "survival_time present without an observed death");
    }
    if (s.survival_time && !(std::isfinite(*s.survival_time) && *s.survival_time > 0.0)) {
      add(Rule::kNonPositiveSurvival, s.id, std::nullopt, "survival_time must be positive");
    }
  }

  const auto& obs = cohort.observations();
  const auto& bounds = cohort.response_bounds();
  std::unordered_map<SubjectId, double> last_time;
  for (std::size_t i = 0; i < obs.size(); ++i) {
    const auto& o = obs[i];
    const Subject* s = cohort.find(o.subject_id);
    if (s == nullptr) {
      add(Rule::kUnknownSubject, o.subject_id, i, describe(o) + ": no such subject");
      continue;
    }
    if (!std::isfinite(o.time)) {
      add(Rule::kNonFiniteValue, o.subject_id, i, describe(o) + ": time is not finite");
      continue;
    }
    if (o.time < 0.0) {
      add(Rule::kNegativeTime, o.subject_id, i, describe(o) + ": negative time");
    }
    auto [it, fresh] = last_time.try_emplace(o.subject_id, o.time);
    if (!fresh) {
      if (o.time <= it->second) {
        add(Rule::kNonIncreasingTimes, o.subject_id, i,
            describe(o) + ": times must be unique and increasing");
      }
      it->second = std::max(it->second, o.time);
    }
    if (s->death_observed && s->survival_time && o.time >= *s->survival_time) {
      add(Rule::kPostDeathObservation, o.subject_id, i,
          describe(o) + ": observation at or after death");
    }
    if (o.value) {
      if (!std::isfinite(*o.value)) {
        add(Rule::kNonFiniteValue, o.subject_id, i, describe(o) + ": value is not finite");
      } else if (bounds && !bounds->contains(*o.value)) {
        add(Rule::kOutOfBounds, o.subject_id, i, describe(o) + ": value outside response bounds");
      }
    }
  }
  return out;
}

std::set<SubjectId> survivors_at(const Cohort& cohort, double t) {
  std::set<SubjectId> out;
  for (const auto& s : cohort.subjects()) {
    if (s.alive_at(t)) out.insert(s.id);
  }
  return out;
}

namespace {

std::vector<double> bin_edges(std::span<const double> boundaries) {
  for (std::size_t k = 1; k < boundaries.size(); ++k) {
    if (!(boundaries[k] > boundaries[k - 1])) {
      throw std::invalid_argument("stratum boundaries must be strictly increasing");
    }
  }
  std::vector<double> edges(boundaries.begin(), boundaries.end());
  if (edges.empty() || edges.front() > 0.0) edges.insert(edges.begin(), 0.0);
  edges.push_back(std::numeric_limits<double>::infinity());
  return edges;
}

std::string bin_label(double lo, double hi) {
  std::ostringstream os;
  os << "death[" << lo << ",";
  if (std::isinf(hi)) {
    os << "inf";
  } else {
    os << hi;
  }
  os << ")";
  return os.str();
}

}  // namespace

std::vector<DeathStratum> strata_for(std::span<const double> boundaries) {
  auto edges = bin_edges(boundaries);
  std::vector<DeathStratum> out;
  for (std::size_t k = 0; k + 1 < edges.size(); ++k) {
    out.push_back(DeathStratum{bin_label(edges[k], edges[k + 1]), false, edges[k], edges[k + 1]});
  }
  out.push_back(DeathStratum{"survivor", true, 0.0, 0.0});
  return out;
}

std::map<SubjectId, DeathStratum> assign_strata(const Cohort& cohort,
                                                std::span<const double> boundaries) {
  const auto strata = strata_for(boundaries);
  const DeathStratum& survivor = strata.back();
  std::map<SubjectId, DeathStratum> out;
  for (const auto& s : cohort.subjects()) {
    if (!s.death_observed || !s.survival_time) {
      out.emplace(s.id, survivor);
      continue;
    }
    const double st = *s.survival_time;
    const DeathStratum* hit = &strata.front();  // survival times below the first edge
    for (std::size_t k = 0; k + 1 < strata.size(); ++k) {
      if (st >= strata[k].lo && st < strata[k].hi) {
        hit = &strata[k];
        break;
      }
    }
    out.emplace(s.id, *hit);
  }
  return out;
}

std::vector<DeathAlignedObservation> years_from_death_view(const Cohort& cohort) {
  std::vector<DeathAlignedObservation> out;
  for (const auto& o : cohort.observations()) {
    const Subject* s = cohort.find(o.subject_id);
    if (s == nullptr || !s->death_observed || !s->survival_time) continue;
    if (o.time >= *s->survival_time) continue;  // invalid cohort; validate() reports it
    out.push_back(DeathAlignedObservation{o.subject_id, o.time - *s->survival_time,
                                          *s->survival_time, o.value});
  }
  return out;
}

std::optional<double> value_near(const Cohort& cohort, const SubjectId& id, double t,
                                 double window) {
  std::optional<double> best;
  double best_gap = std::numeric_limits<double>::infinity();
  for (std::size_t i : cohort.observation_indices(id)) {
    const auto& o = cohort.observations()[i];
    if (!o.value) continue;
    const double gap = std::abs(o.time - t);
    if (gap <= window && gap < best_gap) {
      best = o.value;
      best_gap = gap;
    }
  }
  return best;
}

}  // namespace ltd

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "ltd/cohort.hpp"
#include "ltd/simulator.hpp"

namespace ltd::testing {

inline Subject make_subject(std::string id, double age, int group,
                            std::optional<double> survival = std::nullopt) {
  Subject s;
  s.id = std::move(id);
  s.baseline_age = age;
  s.group = group;
  s.survival_time = survival;
  s.death_observed = survival.has_value();
  return s;
}

inline void add_line(std::vector<Observation>& obs, const std::string& id,
                     const std::vector<double>& values) {
  for (std::size_t t = 0; t < values.size(); ++t) {
    obs.push_back(Observation{id, static_cast<double>(t), values[t]});
  }
}

// The four-subject hypothetical cohort.
inline Cohort four_subjects() {
  std::vector<Subject> s{make_subject("A", 70, 0), make_subject("B", 70, 0),
                         make_subject("C", 70, 0, 3.0), make_subject("D", 70, 0, 3.0)};
  std::vector<Observation> o;
  add_line(o, "A", {90, 90, 90, 90, 90, 90});
  add_line(o, "B", {84, 82, 80, 78, 76, 74});
  add_line(o, "C", {84, 80, 76});
  add_line(o, "D", {65, 50, 35});
  return Cohort(std::move(s), std::move(o), ResponseBounds{0, 100});
}

// Same cohort with a fixed off-line wiggle so the likelihood has an interior optimum.
inline Cohort four_subjects_perturbed() {
  const Cohort base = four_subjects();
  std::vector<Observation> o = base.observations();
  for (std::size_t k = 0; k < o.size(); ++k) {
    *o[k].value += 1.5 * std::sin(1.3 * static_cast<double>(k) + 0.4);
  }
  return Cohort(base.subjects(), std::move(o), base.response_bounds());
}

inline SimConfig small_config(std::size_t n = 300, std::uint64_t seed = 7) {
  SimConfig c;
  c.n_subjects = n;
  c.seed = seed;
  c.horizon = 6;
  c.slope_mean = {-1.0, -1.5};
  c.hazard_intercept = 6.0;
  c.hazard_response_coef = -0.12;
  c.nonresponse_prob = 0.1;
  return c;
}

}  // namespace ltd::testing

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ltd/cohort.hpp"

namespace ltd {

enum class DeathDraws {
  kShared,       // one uniform per subject-year serves both arms
  kIndependent,  // each arm draws its own death uniforms
};

// Per-arm parameters are indexed by group (0, 1).
struct SimConfig {
  std::size_t n_subjects = 1000;
  std::uint64_t seed = 1;
  int horizon = 9;  // visits at t = 0, 1, ..., horizon
  double baseline_age_min = 70.0;
  double baseline_age_max = 75.0;
  double age_reference = 70.0;
  double p_group = 0.5;
  std::array<double, 2> intercept_mean{88.0, 88.0};
  std::array<double, 2> intercept_sd{5.0, 5.0};
  std::array<double, 2> slope_mean{-0.5, -0.5};
  std::array<double, 2> slope_sd{0.5, 0.5};
  std::array<double, 2> quadratic_coef{0.0, 0.0};
  // Shift of the intercept per year of baseline age above age_reference.
  double intercept_age_coef = 0.0;
  double residual_sd = 2.0;
  // P(death in (t, t+1)) = logistic(hazard_intercept + hazard_response_coef * latent(t)
  //   + hazard_age_coef * (age - age_reference) + hazard_group_coef * group)
  double hazard_intercept = -4.0;
  double hazard_response_coef = 0.0;
  double hazard_age_coef = 0.0;
  double hazard_group_coef = 0.0;
  double nonresponse_prob = 0.0;
  std::optional<ResponseBounds> response_bounds = ResponseBounds{0.0, 100.0};
  bool emit_counterfactuals = false;
  DeathDraws death_draws = DeathDraws::kShared;
};

void validate_config(const SimConfig& config);  // throws DataError
SimConfig sim_config_from_json(std::string_view text);
std::string to_json(const SimConfig& config, int indent = 2);

struct PotentialOutcomes {
  SubjectId subject_id;
  int realized_group = 0;
  double baseline_age = 0.0;
  std::array<std::optional<double>, 2> survival_time;  // absent: alive through the horizon
  std::array<std::vector<double>, 2> latent;           // noise-free trajectory at t = 0..horizon
};

struct PotentialOutcomeFrame {
  int horizon = 0;
  std::vector<PotentialOutcomes> subjects;
};

// D(z) = 1 iff S(z) <= horizon.
bool dies_by(const PotentialOutcomes& po, int arm, double horizon);

struct SimResult {
  Cohort cohort;
  std::optional<PotentialOutcomeFrame> frame;
};

// Deaths are placed mid-interval (t + 0.5); counterfactual arms share the
// subject-level draws and differ only in group-specific parameters.
SimResult simulate(const SimConfig& config);

struct TrueEstimands {
  std::size_t n_always_survivors = 0;
  std::array<double, 2> always_survivor_mean{};  // E[Y(z) | D(0)=0, D(1)=0]
  std::array<double, 2> always_survivor_se{};    // Monte Carlo standard error
  double contrast = 0.0;
  std::array<double, 2> survivor_mean{};     // E[Y(z) | D(z)=0, realized group z]
  std::array<double, 2> population_mean{};   // E[Y(z)] over everyone
};

// Brute-force enumeration of the always-survivor stratum from the frame.
TrueEstimands true_estimands(const PotentialOutcomeFrame& frame, double horizon, int response_time);

// `subject_id,arm,survival_time,d_horizon,y_t0,...,y_tH`
void write_counterfactuals(std::ostream& out, const PotentialOutcomeFrame& frame);

}  // namespace ltd

#include "ltd/simulator.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <random>

#include "json.hpp"
#include "ltd/cohort_csv.hpp"
#include "ltd/error.hpp"
#include "ltd/logistic.hpp"

namespace ltd {

using nlohmann::json;

void validate_config(const SimConfig& c) {
  auto fail = [](const std::string& m) { throw DataError("invalid simulation config: " + m); };
  if (c.n_subjects == 0) fail("n_subjects must be positive");
  if (c.horizon < 1) fail("horizon must be at least 1");
  if (!(c.baseline_age_min <= c.baseline_age_max)) fail("baseline age range is empty");
  if (!(c.p_group >= 0.0 && c.p_group <= 1.0)) fail("p_group must be in [0,1]");
  if (!(c.nonresponse_prob >= 0.0 && c.nonresponse_prob <= 1.0)) {
    fail("nonresponse_prob must be in [0,1]");
  }
  for (int z = 0; z < 2; ++z) {
    if (!(c.intercept_sd[z] >= 0.0) || !(c.slope_sd[z] >= 0.0)) fail("standard deviations must be >= 0");
  }
  if (!(c.residual_sd >= 0.0)) fail("residual_sd must be >= 0");
  if (c.response_bounds && !(c.response_bounds->lo <= c.response_bounds->hi)) {
    fail("response bounds are empty");
  }
  if (std::isnan(c.hazard_intercept) || std::isnan(c.hazard_response_coef) ||
      std::isnan(c.hazard_age_coef) || std::isnan(c.hazard_group_coef)) {
    fail("hazard coefficients must not be NaN");
  }
}

namespace {

double number(const json& v, const std::string& key) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "inf") return std::numeric_limits<double>::infinity();
  }
  throw DataError("invalid simulation config: " + key + " must be a number");
}

std::array<double, 2> per_arm(const json& v, const std::string& key) {
  if (v.is_array()) {
    if (v.size() != 2) throw DataError("invalid simulation config: " + key + " needs 2 entries");
    return {number(v[0], key), number(v[1], key)};
  }
  const double x = number(v, key);
  return {x, x};
}

json json_number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

}  // namespace

SimConfig sim_config_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("invalid simulation config JSON: ") + e.what());
  }
  if (!j.is_object()) throw DataError("simulation config must be a JSON object");
  SimConfig c;
  for (const auto& [key, v] : j.items()) {
    if (key == "n_subjects") {
      c.n_subjects = static_cast<std::size_t>(number(v, key));
    } else if (key == "seed") {
      if (!v.is_number_unsigned() && !v.is_number_integer()) {
        throw DataError("invalid simulation config: seed must be an integer");
      }
      c.seed = v.get<std::uint64_t>();
    } else if (key == "horizon") {
      c.horizon = static_cast<int>(number(v, key));
    } else if (key == "baseline_age_range") {
      const auto r = per_arm(v, key);
      c.baseline_age_min = r[0];
      c.baseline_age_max = r[1];
    } else if (key == "age_reference") {
      c.age_reference = number(v, key);
    } else if (key == "p_group") {
      c.p_group = number(v, key);
    } else if (key == "intercept_mean") {
      c.intercept_mean = per_arm(v, key);
    } else if (key == "intercept_sd") {
      c.intercept_sd = per_arm(v, key);
    } else if (key == "slope_mean") {
      c.slope_mean = per_arm(v, key);
    } else if (key == "slope_sd") {
      c.slope_sd = per_arm(v, key);
    } else if (key == "quadratic_coef") {
      c.quadratic_coef = per_arm(v, key);
    } else if (key == "intercept_age_coef") {
      c.intercept_age_coef = number(v, key);
    } else if (key == "residual_sd") {
      c.residual_sd = number(v, key);
    } else if (key == "hazard_intercept") {
      c.hazard_intercept = number(v, key);
    } else if (key == "hazard_response_coef") {
      c.hazard_response_coef = number(v, key);
    } else if (key == "hazard_age_coef") {
      c.hazard_age_coef = number(v, key);
    } else if (key == "hazard_group_coef") {
      c.hazard_group_coef = number(v, key);
    } else if (key == "nonresponse_prob") {
      c.nonresponse_prob = number(v, key);
    } else if (key == "response_bounds") {
      if (v.is_null()) {
        c.response_bounds.reset();
      } else {
        const auto r = per_arm(v, key);
        c.response_bounds = ResponseBounds{r[0], r[1]};
      }
    } else if (key == "emit_counterfactuals") {
      c.emit_counterfactuals = v.get<bool>();
    } else if (key == "death_draws") {
      const auto s = v.get<std::string>();
      if (s == "shared") {
        c.death_draws = DeathDraws::kShared;
      } else if (s == "independent") {
        c.death_draws = DeathDraws::kIndependent;
      } else {
        throw DataError("invalid simulation config: death_draws must be shared or independent");
      }
    } else {
      throw DataError("invalid simulation config: unknown key '" + key + "'");
    }
  }
  validate_config(c);
  return c;
}

std::string to_json(const SimConfig& c, int indent) {
  json j;
  j["n_subjects"] = c.n_subjects;
  j["seed"] = c.seed;
  j["horizon"] = c.horizon;
  j["baseline_age_range"] = {c.baseline_age_min, c.baseline_age_max};
  j["age_reference"] = c.age_reference;
  j["p_group"] = c.p_group;
  j["intercept_mean"] = c.intercept_mean;
  j["intercept_sd"] = c.intercept_sd;
  j["slope_mean"] = c.slope_mean;
  j["slope_sd"] = c.slope_sd;
  j["quadratic_coef"] = c.quadratic_coef;
  j["intercept_age_coef"] = c.intercept_age_coef;
  j["residual_sd"] = c.residual_sd;
  j["hazard_intercept"] = json_number(c.hazard_intercept);
  j["hazard_response_coef"] = json_number(c.hazard_response_coef);
  j["hazard_age_coef"] = json_number(c.hazard_age_coef);
  j["hazard_group_coef"] = json_number(c.hazard_group_coef);
  j["nonresponse_prob"] = c.nonresponse_prob;
  j["response_bounds"] =
      c.response_bounds ? json{c.response_bounds->lo, c.response_bounds->hi} : json(nullptr);
  j["emit_counterfactuals"] = c.emit_counterfactuals;
  j["death_draws"] = c.death_draws == DeathDraws::kShared ? "shared" : "independent";
  return j.dump(indent);
}

bool dies_by(const PotentialOutcomes& po, int arm, double horizon) {
  const auto& s = po.survival_time[static_cast<std::size_t>(arm)];
  return s.has_value() && *s <= horizon;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Subject-level draws shared by both counterfactual arms.
struct Draws {
  double age = 0.0;
  int group = 0;
  double z_intercept = 0.0;
  double z_slope = 0.0;
  std::vector<double> noise;
  std::array<std::vector<double>, 2> death;  // identical rows when shared
  std::vector<double> nonresponse;
};

Draws draw_subject(const SimConfig& c, std::size_t i) {
  std::mt19937_64 rng(splitmix64(c.seed ^ splitmix64(static_cast<std::uint64_t>(i))));
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto h = static_cast<std::size_t>(c.horizon);
  Draws d;
  d.age = c.baseline_age_min + (c.baseline_age_max - c.baseline_age_min) * unif(rng);
  d.group = unif(rng) < c.p_group ? 1 : 0;
  d.z_intercept = normal(rng);
  d.z_slope = normal(rng);
  d.noise.resize(h + 1);
  for (auto& e : d.noise) e = normal(rng);
  d.death[0].resize(h);
  for (auto& u : d.death[0]) u = unif(rng);
  d.nonresponse.resize(h + 1);
  for (auto& u : d.nonresponse) u = unif(rng);
  d.death[1].resize(h);
  for (auto& u : d.death[1]) u = unif(rng);
  if (c.death_draws == DeathDraws::kShared) d.death[1] = d.death[0];
  return d;
}

std::vector<double> latent_path(const SimConfig& c, const Draws& d, int z) {
  const double intercept = c.intercept_mean[z] + c.intercept_age_coef * (d.age - c.age_reference) +
                           c.intercept_sd[z] * d.z_intercept;
  const double slope = c.slope_mean[z] + c.slope_sd[z] * d.z_slope;
  std::vector<double> y(static_cast<std::size_t>(c.horizon) + 1);
  for (std::size_t t = 0; t < y.size(); ++t) {
    const double tt = static_cast<double>(t);
    y[t] = intercept + slope * tt + c.quadratic_coef[z] * tt * tt;
  }
  return y;
}

std::optional<double> survival(const SimConfig& c, const Draws& d, int z,
                               const std::vector<double>& latent) {
  const auto& u = d.death[static_cast<std::size_t>(z)];
  for (std::size_t t = 0; t < u.size(); ++t) {
    const double eta = c.hazard_intercept + c.hazard_response_coef * latent[t] +
                       c.hazard_age_coef * (d.age - c.age_reference) + c.hazard_group_coef * z;
    if (u[t] < inverse_logit(eta)) return static_cast<double>(t) + 0.5;
  }
  return std::nullopt;
}

std::string subject_label(std::size_t i, std::size_t n) {
  std::string num = std::to_string(i + 1);
  const std::size_t width = std::to_string(n).size();
  return "S" + std::string(width - num.size(), '0') + num;
}

}  // namespace

SimResult simulate(const SimConfig& config) {
  validate_config(config);
  std::vector<Subject> subjects;
  std::vector<Observation> observations;
  subjects.reserve(config.n_subjects);
  PotentialOutcomeFrame frame;
  frame.horizon = config.horizon;

  for (std::size_t i = 0; i < config.n_subjects; ++i) {
    const Draws d = draw_subject(config, i);
    const std::string id = subject_label(i, config.n_subjects);
    const int z = d.group;
    PotentialOutcomes po;
    po.subject_id = id;
    po.realized_group = z;
    po.baseline_age = d.age;
    for (int arm = 0; arm < 2; ++arm) {
      po.latent[arm] = latent_path(config, d, arm);
      po.survival_time[arm] = survival(config, d, arm, po.latent[arm]);
    }

    Subject s;
    s.id = id;
    s.baseline_age = d.age;
    s.group = z;
    s.survival_time = po.survival_time[z];
    s.death_observed = s.survival_time.has_value();
    subjects.push_back(std::move(s));

    const auto& latent = po.latent[z];
    for (int t = 0; t <= config.horizon; ++t) {
      const double tt = static_cast<double>(t);
      if (po.survival_time[z] && tt >= *po.survival_time[z]) break;
      Observation o;
      o.subject_id = id;
      o.time = tt;
      const auto k = static_cast<std::size_t>(t);
      if (!(d.nonresponse[k] < config.nonresponse_prob)) {
        double v = latent[k] + config.residual_sd * d.noise[k];
        if (config.response_bounds) v = config.response_bounds->clamp(v);
        o.value = v;
      }
      observations.push_back(std::move(o));
    }
    if (config.emit_counterfactuals) frame.subjects.push_back(std::move(po));
  }

  SimResult result{Cohort(std::move(subjects), std::move(observations), config.response_bounds),
                   std::nullopt};
  if (config.emit_counterfactuals) result.frame = std::move(frame);
  return result;
}

TrueEstimands true_estimands(const PotentialOutcomeFrame& frame, double horizon, int response_time) {
  if (response_time < 0 || response_time > frame.horizon) {
    throw DataError("response time outside the simulated grid");
  }
  const auto rt = static_cast<std::size_t>(response_time);
  TrueEstimands out;
  std::array<double, 2> sum{};
  std::array<double, 2> sq{};
  std::array<double, 2> surv_sum{};
  std::array<std::size_t, 2> surv_n{};
  std::array<double, 2> pop_sum{};
  for (const auto& po : frame.subjects) {
    for (int z = 0; z < 2; ++z) pop_sum[z] += po.latent[z][rt];
    const int g = po.realized_group;
    if (!dies_by(po, g, horizon)) {
      surv_sum[g] += po.latent[g][rt];
      ++surv_n[g];
    }
    if (dies_by(po, 0, horizon) || dies_by(po, 1, horizon)) continue;
    ++out.n_always_survivors;
    for (int z = 0; z < 2; ++z) {
      sum[z] += po.latent[z][rt];
      sq[z] += po.latent[z][rt] * po.latent[z][rt];
    }
  }
  if (out.n_always_survivors == 0) throw DataError("always-survivor stratum is empty");
  const auto n = static_cast<double>(out.n_always_survivors);
  for (int z = 0; z < 2; ++z) {
    out.always_survivor_mean[z] = sum[z] / n;
    const double var = n > 1 ? (sq[z] - n * out.always_survivor_mean[z] * out.always_survivor_mean[z]) /
                                   (n - 1)
                             : 0.0;
    out.always_survivor_se[z] = std::sqrt(std::max(0.0, var) / n);
    out.survivor_mean[z] = surv_n[z] > 0 ? surv_sum[z] / static_cast<double>(surv_n[z])
                                         : std::numeric_limits<double>::quiet_NaN();
    out.population_mean[z] = pop_sum[z] / static_cast<double>(frame.subjects.size());
  }
  out.contrast = out.always_survivor_mean[1] - out.always_survivor_mean[0];
  return out;
}

void write_counterfactuals(std::ostream& out, const PotentialOutcomeFrame& frame) {
  out << "subject_id,arm,survival_time,d_horizon";
  for (int t = 0; t <= frame.horizon; ++t) out << ",y_t" << t;
  out << '\n';
  for (const auto& po : frame.subjects) {
    for (int z = 0; z < 2; ++z) {
      out << po.subject_id << ',' << z << ',';
      if (po.survival_time[z]) out << format_number(*po.survival_time[z]);
      out << ',' << (dies_by(po, z, frame.horizon) ? 1 : 0);
      for (double y : po.latent[z]) out << ',' << format_number(y);
      out << '\n';
    }
  }
}

}  // namespace ltd

#include "cli.hpp"

#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "ltd/cohort.hpp"
#include "ltd/cohort_csv.hpp"
#include "ltd/error.hpp"
#include "ltd/estimators.hpp"
#include "ltd/imputation.hpp"
#include "ltd/report.hpp"
#include "ltd/simulator.hpp"

namespace ltd::cli {
namespace {

struct Options {
  std::string subjects;
  std::string obs;
  std::string out;
  std::string out_prefix;
  std::string config;
  std::string trajectories;
  std::string csv;
  std::string model;
  std::string regressors = "intercept,time";
  std::string random_effects;
  std::optional<double> horizon;
  std::vector<double> boundaries;
  double threshold = 80.0;
  std::vector<double> times;
  double response_time = 4.0;
  double matching_window = 0.0;
  double reference_age = 70.0;
  std::string confounders = "baseline_age";
  std::optional<std::uint64_t> seed;
  bool noise = false;
  bool by_group = false;
  std::optional<double> response_min;
  std::optional<double> response_max;
  std::vector<std::string> inputs;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << text;
  if (!out) throw DataError("error writing " + path);
}

std::vector<std::string> split(const std::string& list) {
  std::vector<std::string> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::optional<ResponseBounds> bounds(const Options& o) {
  if (!o.response_min && !o.response_max) return std::nullopt;
  if (!o.response_min || !o.response_max) {
    throw DataError("--response-min and --response-max must be given together");
  }
  if (*o.response_min > *o.response_max) throw DataError("response bounds are empty");
  return ResponseBounds{*o.response_min, *o.response_max};
}

Cohort load(const Options& o) { return load_cohort(o.subjects, o.obs, bounds(o)); }

Cohort load_valid(const Options& o) {
  Cohort cohort = load(o);
  const auto violations = validate(cohort);
  if (!violations.empty()) {
    throw DataError("cohort has " + std::to_string(violations.size()) +
                    " violations; first: " + violations.front().message);
  }
  return cohort;
}

RandomEffects random_effects_for(const Options& o, ModelKind kind) {
  if (o.random_effects.empty()) {
    return kind == ModelKind::kRca ? RandomEffects::kNone : RandomEffects::kInterceptSlope;
  }
  if (o.random_effects == "none") return RandomEffects::kNone;
  if (o.random_effects == "intercept_slope") return RandomEffects::kInterceptSlope;
  throw DataError("--random-effects must be none or intercept_slope");
}

EstimandReport fit_one(const Cohort& cohort, ModelKind kind, const Options& o) {
  ModelSpec spec;
  spec.fixed = parse_regressors(o.regressors);
  spec.random_effects = random_effects_for(o, kind);
  FitOptions fit;
  fit.horizons = {o.horizon.value_or(5.0)};
  fit.reference_age = o.reference_age;
  fit.matching_window = o.matching_window;
  fit.trajectory_times = o.times;

  switch (kind) {
    case ModelKind::kUnconditional:
      return unconditional_fit(cohort, spec, fit);
    case ModelKind::kNaiveExtrapolation:
      return naive_extrapolation_summary(cohort, o.horizon.value_or(5.0), o.matching_window);
    case ModelKind::kPatternMixture:
      return pattern_mixture_fit(cohort, o.boundaries, spec, fit);
    case ModelKind::kTerminalDecline:
      spec.time_scale = TimeScale::kFromDeath;
      if (o.horizon) {
        fit.horizons = {*o.horizon};
      } else {
        fit.horizons.clear();
      }
      return terminal_decline_fit(cohort, spec, fit);
    case ModelKind::kRca:
      return rca_fit(cohort, spec, fit);
    case ModelKind::kPrincipalStrat: {
      PrincipalStratOptions ps;
      ps.horizon = o.horizon.value_or(9.0);
      ps.confounders = split(o.confounders);
      ps.response_time = o.response_time;
      ps.matching_window = o.matching_window;
      return principal_strat_estimate(cohort, ps);
    }
    case ModelKind::kJointPah: {
      PahOptions pah;
      pah.threshold = o.threshold;
      pah.times = o.times;
      if (pah.times.empty()) {
        const int h = static_cast<int>(o.horizon.value_or(5.0));
        for (int t = 0; t <= h; ++t) pah.times.push_back(t);
      }
      pah.by_group = o.by_group;
      pah.matching_window = o.matching_window;
      return pah_report(joint_pah(cohort, pah), cohort);
    }
  }
  throw DataError("unknown model");
}

int cmd_simulate(const Options& o, std::ostream& out) {
  SimConfig config = o.config.empty() ? SimConfig{} : sim_config_from_json(read_file(o.config));
  if (o.seed) config.seed = *o.seed;
  const SimResult result = simulate(config);
  save_cohort(result.cohort, o.out_prefix + "_subjects.csv", o.out_prefix + "_observations.csv");
  if (result.frame) {
    std::ostringstream cf;
    write_counterfactuals(cf, *result.frame);
    write_file(o.out_prefix + "_counterfactuals.csv", cf.str());
  }
  std::size_t deaths = 0;
  for (const auto& s : result.cohort.subjects()) deaths += s.death_observed ? 1 : 0;
  out << "simulated " << result.cohort.size() << " subjects, " << deaths << " deaths, "
      << result.cohort.observations().size() << " visits -> " << o.out_prefix << "_*.csv\n";
  return 0;
}

int cmd_validate(const Options& o, std::ostream& out, std::ostream& err) {
  const Cohort cohort = load(o);
  const auto violations = validate(cohort);
  for (const auto& v : violations) {
    err << to_string(v.rule) << ": " << v.subject_id << ": " << v.message << '\n';
  }
  out << cohort.size() << " subjects, " << cohort.observations().size() << " observations, "
      << violations.size() << " violations\n";
  return violations.empty() ? 0 : 1;
}

int cmd_impute(const Options& o, std::ostream& out) {
  const Cohort cohort = load_valid(o);
  ImputeOptions io;
  io.noise = o.noise;
  io.seed = o.seed.value_or(0);
  const ImputationResult result = impute_single(cohort, o.boundaries, io);
  save_cohort(result.cohort, o.out_prefix + "_subjects.csv", o.out_prefix + "_observations.csv");
  const std::string report = o.out.empty() ? o.out_prefix + "_imputation.json" : o.out;
  write_file(report, to_json(result.cells) + "\n");
  std::size_t imputed = 0;
  std::size_t clamped = 0;
  std::size_t skipped = 0;
  for (const auto& c : result.cells) {
    imputed += c.n_imputed;
    clamped += c.n_clamped;
    skipped += c.n_skipped;
  }
  out << "imputed " << imputed << " values (" << clamped << " clamped, " << skipped
      << " skipped) in " << result.cells.size() << " cells -> " << o.out_prefix << "_*.csv\n";
  return 0;
}

int cmd_fit(const Options& o, std::ostream& out, std::ostream& err) {
  const Cohort cohort = load_valid(o);
  std::vector<ModelKind> kinds;
  if (o.model == "all") {
    kinds = all_model_kinds();
  } else {
    try {
      kinds = {parse_model_kind(o.model)};
    } catch (const std::exception& e) {
      throw DataError(e.what());
    }
  }
  std::vector<EstimandReport> reports;
  for (ModelKind kind : kinds) {
    if (kinds.size() == 1) {
      reports.push_back(fit_one(cohort, kind, o));
      continue;
    }
    try {
      reports.push_back(fit_one(cohort, kind, o));
    } catch (const DataError& e) {
      err << "warning: skipped " << to_string(kind) << ": " << e.what() << '\n';
    }
  }
  if (reports.empty()) throw DataError("no model could be fitted");

  if (reports.size() == 1) {
    write_file(o.out, to_json(reports.front()) + "\n");
    if (!o.trajectories.empty()) write_file(o.trajectories, trajectories_csv(reports.front()));
  } else {
    write_file(o.out, bundle_to_json(reports) + "\n");
    if (!o.trajectories.empty()) write_file(o.trajectories, trajectories_csv(reports));
  }
  std::size_t n = 0;
  for (const auto& r : reports) n += r.estimates.size();
  out << "fit " << o.model << ": " << reports.size() << (reports.size() == 1 ? " report, " : " reports, ")
      << n << " estimates -> " << o.out << '\n';
  return 0;
}

int cmd_pah(Options o, std::ostream& out) {
  const Cohort cohort = load_valid(o);
  const EstimandReport r = fit_one(cohort, ModelKind::kJointPah, o);
  write_file(o.out, to_json(r) + "\n");
  if (!o.trajectories.empty()) write_file(o.trajectories, trajectories_csv(r));
  out << "pah threshold " << format_number(o.threshold) << ": years of healthy life "
      << format_number(r.value("years_healthy_life")) << " -> " << o.out << '\n';
  return 0;
}

int cmd_report(const Options& o, std::ostream& out, std::ostream& err) {
  std::vector<std::pair<std::string, EstimandReport>> sourced;
  for (const auto& path : o.inputs) {
    for (auto& r : reports_from_json(read_file(path))) sourced.emplace_back(path, std::move(r));
  }
  const Comparison cmp = compare_reports(sourced);
  for (const auto& w : cmp.warnings) err << "warning: " << w << '\n';
  if (!o.out.empty()) write_file(o.out, to_json(cmp) + "\n");
  if (!o.csv.empty()) write_file(o.csv, to_csv(cmp));
  if (o.out.empty() && o.csv.empty()) out << to_csv(cmp);
  out << "compared " << sourced.size() << " reports, " << cmp.rows.size() << " rows, "
      << cmp.warnings.size() << " warnings\n";
  return 0;
}

void add_cohort_inputs(CLI::App* sub, Options& o) {
  sub->add_option("--subjects", o.subjects, "subjects CSV")->required()->check(CLI::ExistingFile);
  sub->add_option("--obs", o.obs, "observations CSV")->required()->check(CLI::ExistingFile);
  sub->add_option("--response-min", o.response_min, "lower response bound");
  sub->add_option("--response-max", o.response_max, "upper response bound");
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Longitudinal outcomes truncated by death", "ltd"};
  app.require_subcommand(1);
  app.allow_windows_style_options(false);

  auto* simulate_cmd = app.add_subcommand("simulate", "simulate a cohort");
  simulate_cmd->add_option("--config", o.config, "SimConfig JSON")->check(CLI::ExistingFile);
  simulate_cmd->add_option("--out-prefix", o.out_prefix, "output prefix")->required();
  simulate_cmd->add_option("--seed", o.seed, "override the config seed");

  auto* validate_cmd = app.add_subcommand("validate", "check cohort invariants");
  add_cohort_inputs(validate_cmd, o);

  auto* impute_cmd = app.add_subcommand("impute", "single imputation of nonresponse");
  add_cohort_inputs(impute_cmd, o);
  impute_cmd->add_option("--out-prefix", o.out_prefix, "output prefix")->required();
  impute_cmd->add_option("--out", o.out, "imputation report JSON");
  impute_cmd->add_option("--boundaries", o.boundaries, "death-time strata")->delimiter(',');
  impute_cmd->add_flag("--noise", o.noise, "add conditional-normal draws");
  impute_cmd->add_option("--seed", o.seed, "noise seed");

  auto* fit_cmd = app.add_subcommand("fit", "fit one model or all");
  add_cohort_inputs(fit_cmd, o);
  fit_cmd->add_option("--model", o.model, "model kind or 'all'")->required();
  fit_cmd->add_option("--out", o.out, "report JSON")->required();
  fit_cmd->add_option("--trajectories", o.trajectories, "fitted trajectories CSV");
  fit_cmd->add_option("--regressors", o.regressors, "comma-separated fixed effects");
  fit_cmd->add_option("--random-effects", o.random_effects, "none or intercept_slope");
  fit_cmd->add_option("--horizon", o.horizon, "evaluation time");
  fit_cmd->add_option("--boundaries", o.boundaries, "death-time strata")->delimiter(',');
  fit_cmd->add_option("--threshold", o.threshold, "healthy threshold");
  fit_cmd->add_option("--times", o.times, "time grid")->delimiter(',');
  fit_cmd->add_option("--response-time", o.response_time, "principal-stratum response time");
  fit_cmd->add_option("--matching-window", o.matching_window, "visit matching window");
  fit_cmd->add_option("--reference-age", o.reference_age, "reference baseline age");
  fit_cmd->add_option("--confounders", o.confounders, "survival-model covariates");
  fit_cmd->add_flag("--by-group", o.by_group, "PAH per group");

  auto* pah_cmd = app.add_subcommand("pah", "probability of being alive and healthy");
  add_cohort_inputs(pah_cmd, o);
  pah_cmd->add_option("--out", o.out, "report JSON")->required();
  pah_cmd->add_option("--trajectories", o.trajectories, "curve CSV");
  pah_cmd->add_option("--threshold", o.threshold, "healthy threshold");
  pah_cmd->add_option("--times", o.times, "time grid")->delimiter(',');
  pah_cmd->add_option("--horizon", o.horizon, "last time of the default grid");
  pah_cmd->add_option("--matching-window", o.matching_window, "visit matching window");
  pah_cmd->add_flag("--by-group", o.by_group, "curve per group");

  auto* report_cmd = app.add_subcommand("report", "compare reports side by side");
  report_cmd->add_option("--inputs", o.inputs, "report JSON files")->required()->check(CLI::ExistingFile);
  report_cmd->add_option("--out", o.out, "comparison JSON");
  report_cmd->add_option("--csv", o.csv, "comparison CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (simulate_cmd->parsed()) return cmd_simulate(o, out);
    if (validate_cmd->parsed()) return cmd_validate(o, out, err);
    if (impute_cmd->parsed()) return cmd_impute(o, out);
    if (fit_cmd->parsed()) return cmd_fit(o, out, err);
    if (pah_cmd->parsed()) return cmd_pah(o, out);
    if (report_cmd->parsed()) return cmd_report(o, out, err);
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return 2;
  } catch (const DataError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::out_of_range& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv{"ltd"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace ltd::cli

#include "ltd/imputation.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <set>

#include "json.hpp"
#include "ltd/error.hpp"

namespace ltd {

namespace {

constexpr double kRidge = 1e-8;

std::vector<Eigen::Index> indices_where(const Eigen::VectorXd& row, bool observed) {
  std::vector<Eigen::Index> out;
  for (Eigen::Index j = 0; j < row.size(); ++j) {
    if (std::isnan(row(j)) != observed) out.push_back(j);
  }
  return out;
}

Eigen::VectorXd take(const Eigen::VectorXd& v, const std::vector<Eigen::Index>& idx) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) out(static_cast<Eigen::Index>(k)) = v(idx[k]);
  return out;
}

Eigen::MatrixXd take(const Eigen::MatrixXd& m, const std::vector<Eigen::Index>& rows,
                     const std::vector<Eigen::Index>& cols) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t a = 0; a < rows.size(); ++a) {
    for (std::size_t b = 0; b < cols.size(); ++b) {
      out(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = m(rows[a], cols[b]);
    }
  }
  return out;
}

bool positive_definite(const Eigen::MatrixXd& m) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  return llt.info() == Eigen::Success;
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace

double mvn_observed_loglik(const Eigen::MatrixXd& data, const Eigen::VectorXd& mean,
                           const Eigen::MatrixXd& covariance) {
  double ll = 0.0;
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    const Eigen::VectorXd row = data.row(i).transpose();
    const auto o = indices_where(row, true);
    if (o.empty()) continue;
    const Eigen::MatrixXd s = take(covariance, o, o);
    Eigen::LLT<Eigen::MatrixXd> llt(s);
    if (llt.info() != Eigen::Success) return -std::numeric_limits<double>::infinity();
    const Eigen::VectorXd r = take(row, o) - take(mean, o);
    const Eigen::VectorXd u = llt.matrixL().solve(r);
    double logdet = 0.0;
    for (Eigen::Index k = 0; k < s.rows(); ++k) logdet += 2.0 * std::log(llt.matrixL()(k, k));
    ll += -0.5 * (static_cast<double>(o.size()) * std::log(2.0 * std::numbers::pi) + logdet +
                  u.squaredNorm());
  }
  return ll;
}

ConditionalNormal conditional_normal(const Eigen::VectorXd& mean, const Eigen::MatrixXd& covariance,
                                     const Eigen::VectorXd& row) {
  ConditionalNormal c;
  const auto o = indices_where(row, true);
  c.missing = indices_where(row, false);
  if (c.missing.empty()) return c;
  const Eigen::MatrixXd smm = take(covariance, c.missing, c.missing);
  if (o.empty()) {
    c.mean = take(mean, c.missing);
    c.covariance = smm;
    return c;
  }
  const Eigen::MatrixXd soo = take(covariance, o, o);
  const Eigen::MatrixXd smo = take(covariance, c.missing, o);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(soo);
  const Eigen::VectorXd r = take(row, o) - take(mean, o);
  c.mean = take(mean, c.missing) + smo * ldlt.solve(r);
  c.covariance = smm - smo * ldlt.solve(smo.transpose());
  c.covariance = 0.5 * (c.covariance + c.covariance.transpose());
  return c;
}

MvnModel em_mvn(const Eigen::MatrixXd& data, int max_iter, double tol) {
  const Eigen::Index n = data.rows();
  const Eigen::Index p = data.cols();
  if (n == 0 || p == 0) throw DataError("EM needs a non-empty data matrix");
  bool any_missing = false;
  std::vector<Eigen::Index> observed_rows;
  for (Eigen::Index i = 0; i < n; ++i) {
    bool row_observed = false;
    for (Eigen::Index j = 0; j < p; ++j) {
      if (std::isnan(data(i, j))) {
        any_missing = true;
      } else {
        row_observed = true;
      }
    }
    if (row_observed) observed_rows.push_back(i);
  }
  // Rows with nothing observed carry no likelihood information.
  if (static_cast<Eigen::Index>(observed_rows.size()) < n) {
    if (observed_rows.empty()) throw DataError("EM needs at least one observed entry");
    return em_mvn(data(observed_rows, Eigen::all), max_iter, tol);
  }

  MvnModel model;
  model.mean = Eigen::VectorXd::Zero(p);
  model.covariance = Eigen::MatrixXd::Zero(p, p);
  for (Eigen::Index j = 0; j < p; ++j) {
    double sum = 0.0;
    double sq = 0.0;
    int k = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (std::isnan(data(i, j))) continue;
      sum += data(i, j);
      ++k;
    }
    if (k < 2) {
      throw DataError("column " + std::to_string(j) + " has fewer than 2 observed entries");
    }
    const double m = sum / k;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!std::isnan(data(i, j))) sq += (data(i, j) - m) * (data(i, j) - m);
    }
    model.mean(j) = m;
    model.covariance(j, j) = sq / k;
  }

  auto regularize = [&model, p]() {
    if (!positive_definite(model.covariance)) {
      model.covariance += kRidge * Eigen::MatrixXd::Identity(p, p);
      model.ridge_applied = true;
    }
  };
  regularize();

  for (int iter = 1; iter <= max_iter; ++iter) {
    Eigen::VectorXd t1 = Eigen::VectorXd::Zero(p);
    Eigen::MatrixXd t2 = Eigen::MatrixXd::Zero(p, p);
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::VectorXd filled = data.row(i).transpose();
      const ConditionalNormal c = conditional_normal(model.mean, model.covariance, filled);
      for (std::size_t k = 0; k < c.missing.size(); ++k) {
        filled(c.missing[k]) = c.mean(static_cast<Eigen::Index>(k));
      }
      t1 += filled;
      t2 += filled * filled.transpose();
      for (std::size_t a = 0; a < c.missing.size(); ++a) {
        for (std::size_t b = 0; b < c.missing.size(); ++b) {
          t2(c.missing[a], c.missing[b]) +=
              c.covariance(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
        }
      }
    }
    const double nn = static_cast<double>(n);
    model.mean = t1 / nn;
    model.covariance = t2 / nn - model.mean * model.mean.transpose();
    model.covariance = 0.5 * (model.covariance + model.covariance.transpose());
    regularize();
    model.iterations = iter;
    model.loglik_trace.push_back(mvn_observed_loglik(data, model.mean, model.covariance));
    if (!any_missing) {
      model.converged = true;
      break;
    }
    const auto& tr = model.loglik_trace;
    if (tr.size() >= 2 && tr[tr.size() - 1] - tr[tr.size() - 2] < tol) {
      model.converged = true;
      break;
    }
  }
  return model;
}

namespace {

struct CellRow {
  const Subject* subject;
  std::vector<std::size_t> obs;  // indices into cohort observations
};

// Symmetric square root of a PSD matrix; negative eigenvalues clipped to 0.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  const Eigen::VectorXd d = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * d.asDiagonal();
}

}  // namespace

ImputationResult impute_single(const Cohort& cohort, const std::vector<double>& boundaries,
                               const ImputeOptions& options) {
  std::vector<Observation> out = cohort.observations();
  const auto assignment = assign_strata(cohort, boundaries);
  const auto& bounds = cohort.response_bounds();
  ImputationResult result;

  for (const auto& stratum : strata_for(boundaries)) {
    for (int g = 0; g < 2; ++g) {
      CellReport cell;
      cell.label = stratum.label + "|group=" + std::to_string(g);
      std::vector<CellRow> rows;
      for (const auto& s : cohort.subjects()) {
        auto it = assignment.find(s.id);
        if (s.group != g || it == assignment.end() || !(it->second == stratum)) continue;
        const auto idx = cohort.observation_indices(s.id);
        rows.push_back(CellRow{&s, std::vector<std::size_t>(idx.begin(), idx.end())});
      }
      if (rows.empty()) continue;
      cell.n_subjects = rows.size();
      for (const auto& r : rows) {
        for (std::size_t i : r.obs) cell.n_missing += cohort.observations()[i].missing() ? 1 : 0;
      }
      if (cell.n_missing == 0) {
        result.cells.push_back(std::move(cell));
        continue;
      }

      // Time grid: columns with at least two observed values.
      std::map<double, std::size_t> observed_at;
      for (const auto& r : rows) {
        for (std::size_t i : r.obs) {
          const auto& o = cohort.observations()[i];
          observed_at[o.time] += o.missing() ? 0 : 1;
        }
      }
      std::vector<double> grid;
      for (const auto& [t, k] : observed_at) {
        if (k >= 2) grid.push_back(t);
      }
      double age_mean = 0.0;
      for (const auto& r : rows) age_mean += r.subject->baseline_age;
      age_mean /= static_cast<double>(rows.size());
      bool use_age = false;
      for (const auto& r : rows) use_age = use_age || r.subject->baseline_age != age_mean;

      if (grid.empty() || rows.size() < 2) {
        cell.n_skipped = cell.n_missing;
        cell.reason = "too few observed values to fit the cell model";
        result.cells.push_back(std::move(cell));
        continue;
      }

      const auto p = static_cast<Eigen::Index>(grid.size() + (use_age ? 1 : 0));
      std::map<double, Eigen::Index> column;
      for (std::size_t k = 0; k < grid.size(); ++k) column[grid[k]] = static_cast<Eigen::Index>(k);
      Eigen::MatrixXd data = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(rows.size()), p,
                                                       std::numeric_limits<double>::quiet_NaN());
      for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t i : rows[r].obs) {
          const auto& o = cohort.observations()[i];
          auto it = column.find(o.time);
          if (it != column.end() && o.value) data(static_cast<Eigen::Index>(r), it->second) = *o.value;
        }
        if (use_age) data(static_cast<Eigen::Index>(r), p - 1) = rows[r].subject->baseline_age;
      }

      // Rows with nothing observed do not enter the fit; they get the marginal mean.
      std::vector<Eigen::Index> fit_rows;
      for (Eigen::Index r = 0; r < data.rows(); ++r) {
        if (!data.row(r).array().isNaN().all()) fit_rows.push_back(r);
      }
      Eigen::MatrixXd fit_data(static_cast<Eigen::Index>(fit_rows.size()), p);
      for (std::size_t k = 0; k < fit_rows.size(); ++k) {
        fit_data.row(static_cast<Eigen::Index>(k)) = data.row(fit_rows[k]);
      }
      MvnModel model;
      try {
        model = em_mvn(fit_data, options.max_iter, options.tol);
      } catch (const DataError& e) {
        cell.n_skipped = cell.n_missing;
        cell.reason = e.what();
        result.cells.push_back(std::move(cell));
        continue;
      }
      model.timepoints = grid;
      cell.fitted = true;
      cell.ridge_applied = model.ridge_applied;
      cell.em_iterations = model.iterations;

      std::mt19937_64 rng(options.seed ^ fnv1a(cell.label));
      std::normal_distribution<double> normal(0.0, 1.0);
      for (std::size_t r = 0; r < rows.size(); ++r) {
        const Eigen::VectorXd row = data.row(static_cast<Eigen::Index>(r)).transpose();
        const ConditionalNormal c = conditional_normal(model.mean, model.covariance, row);
        Eigen::VectorXd draw = c.mean;
        if (options.noise && !c.missing.empty()) {
          Eigen::VectorXd z(draw.size());
          for (Eigen::Index k = 0; k < z.size(); ++k) z(k) = normal(rng);
          draw += psd_sqrt(c.covariance) * z;
        }
        std::map<Eigen::Index, double> by_column;
        for (std::size_t k = 0; k < c.missing.size(); ++k) {
          by_column[c.missing[k]] = draw(static_cast<Eigen::Index>(k));
        }
        for (std::size_t i : rows[r].obs) {
          auto& o = out[i];
          if (o.value) continue;
          auto col = column.find(o.time);
          if (col == column.end()) {
            ++cell.n_skipped;
            cell.reason = "time has fewer than 2 observed values in the cell";
            continue;
          }
          double v = by_column.at(col->second);
          if (bounds && !bounds->contains(v)) {
            v = bounds->clamp(v);
            ++cell.n_clamped;
          }
          o.value = v;
          ++cell.n_imputed;
        }
      }
      result.cells.push_back(std::move(cell));
    }
  }
  result.cohort = Cohort(cohort.subjects(), std::move(out), cohort.response_bounds());
  return result;
}

std::string to_json(const std::vector<CellReport>& cells, int indent) {
  nlohmann::json j;
  j["cells"] = nlohmann::json::array();
  std::size_t imputed = 0;
  std::size_t clamped = 0;
  std::size_t skipped = 0;
  for (const auto& c : cells) {
    j["cells"].push_back({{"label", c.label},
                          {"n_subjects", c.n_subjects},
                          {"n_missing", c.n_missing},
                          {"n_imputed", c.n_imputed},
                          {"n_clamped", c.n_clamped},
                          {"n_skipped", c.n_skipped},
                          {"fitted", c.fitted},
                          {"ridge_applied", c.ridge_applied},
                          {"em_iterations", c.em_iterations},
                          {"reason", c.reason}});
    imputed += c.n_imputed;
    clamped += c.n_clamped;
    skipped += c.n_skipped;
  }
  j["totals"] = {{"imputed", imputed}, {"clamped", clamped}, {"skipped", skipped}};
  return j.dump(indent);
}

}  // namespace ltd

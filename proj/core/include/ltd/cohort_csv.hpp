#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "ltd/cohort.hpp"
#include "ltd/error.hpp"

namespace ltd {

// Malformed CSV content; `line` is 1-based and counts the header.
class CsvError : public DataError {
 public:
  CsvError(const std::string& source, std::size_t line, const std::string& what);
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

inline constexpr const char* kSubjectsHeader =
    "subject_id,baseline_age,group,survival_time,death_observed";
inline constexpr const char* kObservationsHeader = "subject_id,time,value";

// Shortest decimal form that round-trips to the same double.
std::string format_number(double v);

// Columns after the five fixed subject columns are read as named covariates.
std::vector<Subject> read_subjects(std::istream& in, const std::string& source = "subjects");
std::vector<Observation> read_observations(std::istream& in,
                                           const std::string& source = "observations");

void write_subjects(std::ostream& out, const std::vector<Subject>& subjects);
void write_observations(std::ostream& out, const std::vector<Observation>& observations);

Cohort load_cohort(const std::filesystem::path& subjects, const std::filesystem::path& observations,
                   std::optional<ResponseBounds> bounds = std::nullopt);
void save_cohort(const Cohort& cohort, const std::filesystem::path& subjects,
                 const std::filesystem::path& observations);

// FNV-1a over the canonical CSV serialization.
std::string cohort_fingerprint(const Cohort& cohort);

}  // namespace ltd

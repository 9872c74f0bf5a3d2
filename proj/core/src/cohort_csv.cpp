#include "ltd/cohort_csv.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string_view>

namespace ltd {

CsvError::CsvError(const std::string& source, std::size_t line, const std::string& what)
    : DataError(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

double parse_number(std::string_view field, const std::string& source, std::size_t line,
                    std::string_view column) {
  field = trim(field);
  double v = 0.0;
  auto res = std::from_chars(field.data(), field.data() + field.size(), v);
  if (field.empty() || res.ec != std::errc() || res.ptr != field.data() + field.size() ||
      !std::isfinite(v)) {
    throw CsvError(source, line,
                   "column " + std::string(column) + ": not a number: '" + std::string(field) + "'");
  }
  return v;
}

// Reads lines, strips a UTF-8 BOM, skips blank lines; returns (line number, text).
std::vector<std::pair<std::size_t, std::string>> read_lines(std::istream& in) {
  std::vector<std::pair<std::size_t, std::string>> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (n == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    out.emplace_back(n, std::move(line));
  }
  return out;
}

}  // namespace

std::vector<Subject> read_subjects(std::istream& in, const std::string& source) {
  auto lines = read_lines(in);
  if (lines.empty()) throw CsvError(source, 1, "missing header");
  auto header = split(lines.front().second);
  static const std::vector<std::string_view> fixed = split(kSubjectsHeader);
  if (header.size() < fixed.size()) {
    throw CsvError(source, lines.front().first,
                   std::string("header must start with ") + kSubjectsHeader);
  }
  for (std::size_t k = 0; k < fixed.size(); ++k) {
    if (trim(header[k]) != fixed[k]) {
      throw CsvError(source, lines.front().first,
                     std::string("header must start with ") + kSubjectsHeader);
    }
  }
  std::vector<std::string> extra_names;
  for (std::size_t k = fixed.size(); k < header.size(); ++k) {
    extra_names.emplace_back(trim(header[k]));
  }

  std::vector<Subject> out;
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto& [ln, text] = lines[r];
    auto f = split(text);
    if (f.size() != header.size()) {
      throw CsvError(source, ln,
                     "expected " + std::to_string(header.size()) + " fields, got " +
                         std::to_string(f.size()));
    }
    Subject s;
    s.id = std::string(trim(f[0]));
    if (s.id.empty()) throw CsvError(source, ln, "empty subject_id");
    s.baseline_age = parse_number(f[1], source, ln, "baseline_age");
    const double g = parse_number(f[2], source, ln, "group");
    if (g != 0.0 && g != 1.0) throw CsvError(source, ln, "group must be 0 or 1");
    s.group = static_cast<int>(g);
    if (!trim(f[3]).empty()) s.survival_time = parse_number(f[3], source, ln, "survival_time");
    const auto flag = trim(f[4]);
    if (flag == "1") {
      s.death_observed = true;
    } else if (flag == "0") {
      s.death_observed = false;
    } else {
      throw CsvError(source, ln, "death_observed must be 0 or 1");
    }
    for (std::size_t k = 0; k < extra_names.size(); ++k) {
      s.extra_covariates.emplace_back(extra_names[k],
                                      parse_number(f[5 + k], source, ln, extra_names[k]));
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<Observation> read_observations(std::istream& in, const std::string& source) {
  auto lines = read_lines(in);
  if (lines.empty()) throw CsvError(source, 1, "missing header");
  auto header = split(lines.front().second);
  auto expected = split(kObservationsHeader);
  bool ok = header.size() == expected.size();
  for (std::size_t k = 0; ok && k < header.size(); ++k) ok = trim(header[k]) == expected[k];
  if (!ok) {
    throw CsvError(source, lines.front().first,
                   std::string("header must be exactly ") + kObservationsHeader);
  }
  std::vector<Observation> out;
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto& [ln, text] = lines[r];
    auto f = split(text);
    if (f.size() != 3) {
      throw CsvError(source, ln, "expected 3 fields, got " + std::to_string(f.size()));
    }
    Observation o;
    o.subject_id = std::string(trim(f[0]));
    if (o.subject_id.empty()) throw CsvError(source, ln, "empty subject_id");
    o.time = parse_number(f[1], source, ln, "time");
    if (!trim(f[2]).empty()) o.value = parse_number(f[2], source, ln, "value");
    out.push_back(std::move(o));
  }
  return out;
}

void write_subjects(std::ostream& out, const std::vector<Subject>& subjects) {
  std::vector<std::string> extra;
  if (!subjects.empty()) {
    for (const auto& [name, v] : subjects.front().extra_covariates) extra.push_back(name);
  }
  out << kSubjectsHeader;
  for (const auto& name : extra) out << ',' << name;
  out << '\n';
  for (const auto& s : subjects) {
    out << s.id << ',' << format_number(s.baseline_age) << ',' << s.group << ',';
    if (s.survival_time) out << format_number(*s.survival_time);
    out << ',' << (s.death_observed ? 1 : 0);
    for (const auto& name : extra) {
      auto v = s.covariate(name);
      out << ',';
      if (v) out << format_number(*v);
    }
    out << '\n';
  }
}

void write_observations(std::ostream& out, const std::vector<Observation>& observations) {
  out << kObservationsHeader << '\n';
  for (const auto& o : observations) {
    out << o.subject_id << ',' << format_number(o.time) << ',';
    if (o.value) out << format_number(*o.value);
    out << '\n';
  }
}

Cohort load_cohort(const std::filesystem::path& subjects, const std::filesystem::path& observations,
                   std::optional<ResponseBounds> bounds) {
  std::ifstream sin(subjects);
  if (!sin) throw DataError("cannot open " + subjects.string());
  std::ifstream oin(observations);
  if (!oin) throw DataError("cannot open " + observations.string());
  return Cohort(read_subjects(sin, subjects.string()), read_observations(oin, observations.string()),
                bounds);
}

void save_cohort(const Cohort& cohort, const std::filesystem::path& subjects,
                 const std::filesystem::path& observations) {
  std::ofstream sout(subjects, std::ios::binary);
  if (!sout) throw DataError("cannot write " + subjects.string());
  write_subjects(sout, cohort.subjects());
  std::ofstream oout(observations, std::ios::binary);
  if (!oout) throw DataError("cannot write " + observations.string());
  write_observations(oout, cohort.observations());
}

std::string cohort_fingerprint(const Cohort& cohort) {
  std::ostringstream os;
  write_subjects(os, cohort.subjects());
  write_observations(os, cohort.observations());
  const std::string bytes = os.str();
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace ltd

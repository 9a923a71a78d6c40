#include "doseresp/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "doseresp/model.hpp"
#include "doseresp/rng.hpp"

namespace doseresp {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

template <typename T>
T parse_field(std::string_view field, const char* name, int line) {
  field = trim(field);
  T value{};
  const auto* first = field.data();
  const auto* last = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (field.empty() || ec != std::errc{} || ptr != last) {
    throw DataError(DataError::Kind::parse, line,
                    "line " + std::to_string(line) + ": malformed " + name +
                        " '" + std::string(field) + "'");
  }
  return value;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string format_fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

}  // namespace

DataError::DataError(Kind kind, int line, const std::string& what)
    : std::runtime_error(what), kind_(kind), line_(line) {}

void validate_record(const TrialRecord& r, int line) {
  const std::string where = line > 0 ? "line " + std::to_string(line) + ": " : "";
  if (!std::isfinite(r.dosage) || r.dosage <= 0.0)
    throw DataError(DataError::Kind::validation, line, where + "dosage must be positive");
  if (r.total < 1)
    throw DataError(DataError::Kind::validation, line, where + "total must be at least 1");
  if (r.improved < 0)
    throw DataError(DataError::Kind::validation, line, where + "improved must be non-negative");
  if (r.improved > r.total)
    throw DataError(DataError::Kind::validation, line,
                    where + "improved (" + std::to_string(r.improved) +
                        ") exceeds total (" + std::to_string(r.total) + ")");
}

Dataset::Dataset(std::vector<TrialRecord> records) : records_(std::move(records)) {
  if (records_.empty())
    throw DataError(DataError::Kind::empty, 0, "dataset has no records");
  for (std::size_t i = 0; i < records_.size(); ++i) validate_record(records_[i], 0);
}

Dataset parse_trials(std::string_view csv_text) {
  std::vector<TrialRecord> records;
  int line_no = 0;
  bool header_seen = false;
  std::size_t pos = 0;
  while (pos <= csv_text.size()) {
    const std::size_t end = std::min(csv_text.find('\n', pos), csv_text.size());
    std::string_view line = trim(csv_text.substr(pos, end - pos));
    pos = end + 1;
    ++line_no;
    if (line.empty()) {
      if (end == csv_text.size()) break;
      continue;
    }
    if (!header_seen) {
      if (line.size() >= 3 && line.substr(0, 3) == "\xEF\xBB\xBF") line.remove_prefix(3);
      if (line != "dosage,total,improved")
        throw DataError(DataError::Kind::parse, line_no,
                        "line " + std::to_string(line_no) +
                            ": expected header 'dosage,total,improved'");
      header_seen = true;
      continue;
    }
    const auto c1 = line.find(',');
    const auto c2 = c1 == std::string_view::npos ? c1 : line.find(',', c1 + 1);
    if (c2 == std::string_view::npos || line.find(',', c2 + 1) != std::string_view::npos)
      throw DataError(DataError::Kind::parse, line_no,
                      "line " + std::to_string(line_no) + ": expected 3 fields");
    TrialRecord r;
    r.dosage = parse_field<double>(line.substr(0, c1), "dosage", line_no);
    r.total = parse_field<int>(line.substr(c1 + 1, c2 - c1 - 1), "total", line_no);
    r.improved = parse_field<int>(line.substr(c2 + 1), "improved", line_no);
    validate_record(r, line_no);
    records.push_back(r);
    if (end == csv_text.size()) break;
  }
  if (!header_seen)
    throw DataError(DataError::Kind::parse, 1, "line 1: missing header 'dosage,total,improved'");
  if (records.empty())
    throw DataError(DataError::Kind::empty, line_no, "dataset has no records");
  return Dataset(std::move(records));
}

Dataset load_trials(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_trials(buf.str());
}

std::string serialize_trials(const Dataset& ds) {
  std::string out = "dosage,total,improved\n";
  for (const auto& r : ds.records()) {
    out += format_double(r.dosage);
    out += ',';
    out += std::to_string(r.total);
    out += ',';
    out += std::to_string(r.improved);
    out += '\n';
  }
  return out;
}

double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw std::invalid_argument("quantile of empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

ColumnSummary summarize_column(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  ColumnSummary c;
  c.min = values.front();
  c.max = values.back();
  c.q1 = quantile_sorted(values, 0.25);
  c.median = quantile_sorted(values, 0.5);
  c.q3 = quantile_sorted(values, 0.75);
  c.mean = std::accumulate(values.begin(), values.end(), 0.0) /
           static_cast<double>(values.size());
  return c;
}

SummaryStats summarize(const Dataset& ds) {
  std::vector<double> d, t, n;
  for (const auto& r : ds.records()) {
    d.push_back(r.dosage);
    t.push_back(r.total);
    n.push_back(r.improved);
  }
  return {summarize_column(std::move(d)), summarize_column(std::move(t)),
          summarize_column(std::move(n))};
}

std::string summary_csv(const SummaryStats& s) {
  struct Row {
    const char* label;
    double ColumnSummary::*field;
  };
  static constexpr Row rows[] = {
      {"Min.", &ColumnSummary::min},    {"1st Qu.", &ColumnSummary::q1},
      {"Median", &ColumnSummary::median}, {"Mean", &ColumnSummary::mean},
      {"3rd Qu.", &ColumnSummary::q3},  {"Max.", &ColumnSummary::max}};
  std::string out = "statistic,dosage,total,improved\n";
  for (const auto& row : rows) {
    out += row.label;
    out += ',' + format_fixed(s.dosage.*row.field, 3);
    out += ',' + format_fixed(s.total.*row.field, 2);
    out += ',' + format_fixed(s.improved.*row.field, 3);
    out += '\n';
  }
  return out;
}

std::vector<std::pair<double, double>> survival_ratios(const Dataset& ds) {
  std::vector<std::pair<double, double>> out;
  out.reserve(ds.size());
  for (const auto& r : ds.records())
    out.emplace_back(r.dosage, static_cast<double>(r.improved) / r.total);
  std::stable_sort(out.begin(), out.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  return out;
}

namespace {

Dataset synthesize_impl(int records, std::uint64_t seed, auto&& linear_predictor) {
  if (records < 1) throw std::invalid_argument("synthesize: records must be >= 1");
  Rng rng(seed);
  std::vector<TrialRecord> out;
  out.reserve(static_cast<std::size_t>(records));
  for (int i = 0; i < records; ++i) {
    TrialRecord r;
    r.dosage = rng.uniform(kSynthDoseMin, kSynthDoseMax);
    r.total = rng.uniform_int(kSynthTotalMin, kSynthTotalMax);
    const double p = inverse_logit(linear_predictor(rng, r.dosage));
    r.improved = rng.binomial(r.total, p);
    out.push_back(r);
  }
  return Dataset(std::move(out));
}

}  // namespace

Dataset synthesize(int records, double alpha, double beta, std::uint64_t seed) {
  return synthesize_impl(records, seed,
                         [&](Rng&, double d) { return alpha + beta * d; });
}

Dataset synthesize_hierarchical(int records, double mu_alpha, double mu_beta,
                                double sigma_alpha, double sigma_beta,
                                std::uint64_t seed) {
  if (sigma_alpha < 0 || sigma_beta < 0)
    throw std::invalid_argument("synthesize_hierarchical: negative scale");
  return synthesize_impl(records, seed, [&](Rng& rng, double d) {
    const double a = mu_alpha + sigma_alpha * rng.normal();
    const double b = mu_beta + sigma_beta * rng.normal();
    return a + b * d;
  });
}

}  // namespace doseresp

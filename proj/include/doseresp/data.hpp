#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace doseresp {

/// One dosage experiment: `total` subjects received `dosage`, of which
/// `improved` responded.
struct TrialRecord {
  double dosage = 0.0;
  int total = 0;
  int improved = 0;

  bool operator==(const TrialRecord&) const = default;
};

/// Error raised while reading or validating trial data. `line` is the 1-based
/// line of the offending input (0 when not tied to a line).
class DataError : public std::runtime_error {
 public:
  enum class Kind { parse, validation, empty };

  DataError(Kind kind, int line, const std::string& what);

  Kind kind() const noexcept { return kind_; }
  int line() const noexcept { return line_; }

 private:
  Kind kind_;
  int line_;
};

/// Validated, ordered collection of trial records (at least one).
class Dataset {
 public:
  explicit Dataset(std::vector<TrialRecord> records);

  const std::vector<TrialRecord>& records() const noexcept { return records_; }
  std::size_t size() const noexcept { return records_.size(); }
  const TrialRecord& operator[](std::size_t i) const { return records_[i]; }

  bool operator==(const Dataset&) const = default;

 private:
  std::vector<TrialRecord> records_;
};

/// Checks the per-record invariants; throws DataError(validation) naming
/// `line` on failure.
void validate_record(const TrialRecord& r, int line);

Dataset parse_trials(std::string_view csv_text);
Dataset load_trials(const std::filesystem::path& path);
/// Inverse of parse_trials. Dosages are written in shortest round-trip form.
std::string serialize_trials(const Dataset& ds);

struct ColumnSummary {
  double min = 0, q1 = 0, median = 0, mean = 0, q3 = 0, max = 0;
};

struct SummaryStats {
  ColumnSummary dosage;
  ColumnSummary total;
  ColumnSummary improved;
};

/// Type-7 quantile (linear interpolation between order statistics) of
/// already sorted values.
double quantile_sorted(std::span<const double> sorted, double q);
ColumnSummary summarize_column(std::vector<double> values);

SummaryStats summarize(const Dataset& ds);
/// Summary in the row/column layout of a descriptive statistics table:
/// one row per statistic, one column per variable.
std::string summary_csv(const SummaryStats& s);

/// (dosage, improved/total) pairs sorted by dosage; equal dosages keep their
/// input order.
std::vector<std::pair<double, double>> survival_ratios(const Dataset& ds);

inline constexpr double kSynthDoseMin = 0.730;
inline constexpr double kSynthDoseMax = 1.890;
inline constexpr int kSynthTotalMin = 10;
inline constexpr int kSynthTotalMax = 52;

/// Random dataset from the pooled logistic model: dosages uniform on
/// [0.730, 1.890], totals uniform on {10..52},
/// improved ~ Binomial(total, inverse_logit(alpha + beta * dosage)).
Dataset synthesize(int records, double alpha, double beta, std::uint64_t seed);

/// Same design, but each record gets its own intercept and slope drawn from
/// Normal(mu_alpha, sigma_alpha) and Normal(mu_beta, sigma_beta).
Dataset synthesize_hierarchical(int records, double mu_alpha, double mu_beta,
                                double sigma_alpha, double sigma_beta,
                                std::uint64_t seed);

}  // namespace doseresp

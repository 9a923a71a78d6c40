#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "doseresp/sampler.hpp"

namespace doseresp {

using ChainSet = std::vector<std::vector<double>>;

/// Split potential scale reduction. Every chain is cut in half (an odd middle
/// draw is dropped) and the classic statistic is computed over the halves.
/// Returns nullopt when every draw is identical (degenerate), +inf when
/// halves are constant but differ. Needs at least one chain of >= 4 draws.
std::optional<double> split_rhat(const ChainSet& chains);

/// Multi-chain effective sample size with Geyer's initial positive sequence
/// (monotone variant) truncation. Chains are cut to the shortest length.
/// Returns nullopt for zero variance. Needs >= 8 draws per chain.
std::optional<double> effective_sample_size(const ChainSet& chains);

struct ParameterSummary {
  std::string name;
  double mean = 0, sd = 0, q25 = 0, median = 0, q75 = 0;
  std::optional<double> split_rhat;
  std::optional<double> ess;

  /// sd / sqrt(ess); +inf without a usable ESS.
  double mcse() const;
};

struct PosteriorSummary {
  std::vector<ParameterSummary> parameters;
  std::size_t divergence_count = 0;
  std::size_t total_draws = 0;

  const ParameterSummary& at(const std::string& name) const;
  double divergent_fraction() const;
  /// Smallest ESS over parameters (degenerate parameters skipped).
  double min_ess() const;
  double max_rhat() const;
};

PosteriorSummary summarize_run(const SampleRun& run);
PosteriorSummary summarize_chains(const std::vector<std::string>& names,
                                  const std::vector<ChainSet>& per_parameter,
                                  std::size_t divergence_count);

inline constexpr double kRhatThreshold = 1.01;
inline constexpr double kMaxDivergentFraction = 0.01;

struct ConvergenceReport {
  bool converged = true;
  /// Parameters with split-Rhat above the threshold.
  std::vector<std::string> failing;
  bool too_many_divergences = false;
};

ConvergenceReport check_convergence(const PosteriorSummary& s,
                                    double rhat_threshold = kRhatThreshold,
                                    double max_divergent_fraction = kMaxDivergentFraction);

/// Silverman's rule of thumb: 0.9 * min(sd, IQR / 1.34) * n^(-1/5).
double silverman_bandwidth(std::span<const double> draws);

/// Gaussian kernel density estimate on `points` evenly spaced abscissae over
/// [min - 3h, max + 3h]. Constant input yields a narrow triangular spike of
/// unit area at the constant.
std::vector<std::pair<double, double>> density_series(std::span<const double> draws, int points,
                                                      std::optional<double> bandwidth = {});

}  // namespace doseresp

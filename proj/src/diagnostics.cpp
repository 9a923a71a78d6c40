#include "doseresp/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "doseresp/data.hpp"

namespace doseresp {

namespace {

double mean_of(std::span<const double> x) {
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

// Sample variance (n - 1 denominator).
double variance_of(std::span<const double> x) {
  if (x.size() < 2) return 0.0;
  const double m = mean_of(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size() - 1);
}

}  // namespace

std::optional<double> split_rhat(const ChainSet& chains) {
  if (chains.empty()) throw std::invalid_argument("split_rhat: no chains");
  std::size_t len = chains.front().size();
  for (const auto& c : chains) len = std::min(len, c.size());
  if (len < 4) throw std::invalid_argument("split_rhat: need at least 4 draws per chain");
  const std::size_t half = len / 2;

  std::vector<double> means, vars;
  for (const auto& c : chains) {
    std::span<const double> all(c.data(), len);
    for (auto part : {all.first(half), all.last(half)}) {
      means.push_back(mean_of(part));
      vars.push_back(variance_of(part));
    }
  }
  const double n = static_cast<double>(half);
  const double w = mean_of(vars);
  const double b = n * variance_of(means);
  if (w <= 0.0) {
    if (b <= 0.0) return std::nullopt;
    return std::numeric_limits<double>::infinity();
  }
  const double var_plus = w * (n - 1.0) / n + b / n;
  return std::sqrt(var_plus / w);
}

std::optional<double> effective_sample_size(const ChainSet& chains) {
  if (chains.empty()) throw std::invalid_argument("effective_sample_size: no chains");
  std::size_t n = chains.front().size();
  for (const auto& c : chains) n = std::min(n, c.size());
  if (n < 8) throw std::invalid_argument("effective_sample_size: need at least 8 draws per chain");
  const std::size_t m = chains.size();
  const double nd = static_cast<double>(n);

  std::vector<double> chain_mean(m), chain_var(m);
  for (std::size_t k = 0; k < m; ++k) {
    std::span<const double> c(chains[k].data(), n);
    chain_mean[k] = mean_of(c);
    chain_var[k] = variance_of(c);
  }
  const double w = mean_of(chain_var);
  double var_plus = w * (nd - 1.0) / nd;
  if (m > 1) var_plus += variance_of(chain_mean);
  if (!(var_plus > 0.0)) return std::nullopt;

  // Mean over chains of the biased autocovariance at lag t.
  auto mean_acov = [&](std::size_t t) {
    double total = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
      const auto& c = chains[k];
      const double mu = chain_mean[k];
      double s = 0.0;
      for (std::size_t i = 0; i + t < n; ++i) s += (c[i] - mu) * (c[i + t] - mu);
      total += s / nd;
    }
    return total / static_cast<double>(m);
  };
  auto rho = [&](std::size_t t) { return 1.0 - (w - mean_acov(t)) / var_plus; };

  std::vector<double> rho_hat(n, 0.0);
  rho_hat[0] = 1.0;
  double rho_even = 1.0;
  double rho_odd = rho(1);
  rho_hat[1] = rho_odd;
  std::size_t s = 1;
  while (s + 4 < n && rho_even + rho_odd > 0.0) {
    rho_even = rho(s + 1);
    rho_odd = rho(s + 2);
    if (rho_even + rho_odd >= 0.0) {
      rho_hat[s + 1] = rho_even;
      rho_hat[s + 2] = rho_odd;
    }
    s += 2;
  }
  const std::size_t max_s = s;
  if (rho_even > 0.0 && max_s + 1 < n) rho_hat[max_s + 1] = rho_even;

  // Initial monotone sequence: pair sums must not increase.
  for (std::size_t t = 1; t + 3 <= max_s; t += 2) {
    if (rho_hat[t + 1] + rho_hat[t + 2] > rho_hat[t - 1] + rho_hat[t]) {
      rho_hat[t + 1] = 0.5 * (rho_hat[t - 1] + rho_hat[t]);
      rho_hat[t + 2] = rho_hat[t + 1];
    }
  }

  const double total = static_cast<double>(m) * nd;
  double tau = -1.0;
  for (std::size_t t = 0; t <= max_s && t < n; ++t) tau += 2.0 * rho_hat[t];
  if (max_s + 1 < n) tau += rho_hat[max_s + 1];
  // Antithetic chains can push tau below 1; cap the resulting ESS at
  // total * log10(total).
  tau = std::max(tau, 1.0 / std::log10(total));
  return total / tau;
}

// ---------------------------------------------------------------------------

double ParameterSummary::mcse() const {
  if (!ess || !(*ess > 0.0)) return std::numeric_limits<double>::infinity();
  return sd / std::sqrt(*ess);
}

const ParameterSummary& PosteriorSummary::at(const std::string& name) const {
  for (const auto& p : parameters)
    if (p.name == name) return p;
  throw std::out_of_range("no parameter named " + name);
}

double PosteriorSummary::divergent_fraction() const {
  return total_draws == 0 ? 0.0
                          : static_cast<double>(divergence_count) / static_cast<double>(total_draws);
}

double PosteriorSummary::min_ess() const {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& p : parameters)
    if (p.ess) best = std::min(best, *p.ess);
  return best;
}

double PosteriorSummary::max_rhat() const {
  double worst = 0.0;
  for (const auto& p : parameters)
    if (p.split_rhat) worst = std::max(worst, *p.split_rhat);
  return worst;
}

PosteriorSummary summarize_chains(const std::vector<std::string>& names,
                                  const std::vector<ChainSet>& per_parameter,
                                  std::size_t divergence_count) {
  PosteriorSummary out;
  out.divergence_count = divergence_count;
  for (std::size_t k = 0; k < names.size(); ++k) {
    const ChainSet& chains = per_parameter[k];
    std::vector<double> pooled;
    std::size_t min_len = std::numeric_limits<std::size_t>::max();
    for (const auto& c : chains) {
      pooled.insert(pooled.end(), c.begin(), c.end());
      min_len = std::min(min_len, c.size());
    }
    if (pooled.empty()) throw std::invalid_argument("summarize: no draws");
    if (k == 0) out.total_draws = pooled.size();

    ParameterSummary p;
    p.name = names[k];
    p.mean = mean_of(pooled);
    p.sd = std::sqrt(variance_of(pooled));
    std::sort(pooled.begin(), pooled.end());
    p.q25 = quantile_sorted(pooled, 0.25);
    p.median = quantile_sorted(pooled, 0.5);
    p.q75 = quantile_sorted(pooled, 0.75);
    if (min_len >= 4) p.split_rhat = split_rhat(chains);
    if (min_len >= 8) p.ess = effective_sample_size(chains);
    out.parameters.push_back(std::move(p));
  }
  return out;
}

PosteriorSummary summarize_run(const SampleRun& run) {
  std::vector<ChainSet> per_parameter;
  per_parameter.reserve(run.parameter_names.size());
  for (std::size_t k = 0; k < run.parameter_names.size(); ++k)
    per_parameter.push_back(run.parameter_chains(k));
  return summarize_chains(run.parameter_names, per_parameter, run.divergence_count());
}

ConvergenceReport check_convergence(const PosteriorSummary& s, double rhat_threshold,
                                    double max_divergent_fraction) {
  ConvergenceReport r;
  for (const auto& p : s.parameters) {
    if (p.split_rhat && !(*p.split_rhat <= rhat_threshold)) r.failing.push_back(p.name);
  }
  r.too_many_divergences = s.divergent_fraction() > max_divergent_fraction;
  r.converged = r.failing.empty() && !r.too_many_divergences;
  return r;
}

// ---------------------------------------------------------------------------

double silverman_bandwidth(std::span<const double> draws) {
  std::vector<double> sorted(draws.begin(), draws.end());
  std::sort(sorted.begin(), sorted.end());
  const double sd = std::sqrt(variance_of(sorted));
  const double iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
  double spread = sd;
  if (iqr > 0.0) spread = std::min(sd, iqr / 1.34);
  return 0.9 * spread * std::pow(static_cast<double>(sorted.size()), -0.2);
}

std::vector<std::pair<double, double>> density_series(std::span<const double> draws, int points,
                                                      std::optional<double> bandwidth) {
  if (draws.size() < 10) throw std::invalid_argument("density_series: need at least 10 draws");
  if (points < 2) throw std::invalid_argument("density_series: need at least 2 points");
  const auto [lo_it, hi_it] = std::minmax_element(draws.begin(), draws.end());
  const double lo = *lo_it, hi = *hi_it;
  if (lo == hi) {
    const double half_width = 1e-6 * std::max(1.0, std::abs(lo));
    return {{lo - half_width, 0.0}, {lo, 1.0 / half_width}, {lo + half_width, 0.0}};
  }
  const double h = bandwidth.value_or(silverman_bandwidth(draws));
  if (!(h > 0.0)) throw std::invalid_argument("density_series: bandwidth must be positive");

  const double a = lo - 3.0 * h, b = hi + 3.0 * h;
  const double norm = 1.0 / (static_cast<double>(draws.size()) * h * std::sqrt(2.0 * std::numbers::pi));
  std::vector<std::pair<double, double>> out;
  out.reserve(static_cast<std::size_t>(points));
  for (int k = 0; k < points; ++k) {
    const double x = a + (b - a) * k / (points - 1);
    double s = 0.0;
    for (double v : draws) {
      const double z = (x - v) / h;
      s += std::exp(-0.5 * z * z);
    }
    out.emplace_back(x, s * norm);
  }
  return out;
}

}  // namespace doseresp

#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "doseresp/data.hpp"

namespace doseresp {

// ---------------------------------------------------------------------------
// Scalar kernels

/// 1 / (1 + exp(-x)), branching on the sign of x so neither tail overflows.
double inverse_logit(double x);
/// log(1 + exp(x)) without overflow for large x or loss of precision for
/// very negative x.
double log1p_exp(double x);
double log_binomial_coefficient(int total, int k);

/// log[C(N,n) p^n (1-p)^(N-n)] with p = inverse_logit(eta).
double binomial_logit_log_pmf(int n, int total, double eta);

// ---------------------------------------------------------------------------
// Priors

enum class PriorFamily { normal, logistic, uniform, flat, half_normal };

class PriorError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A prior family with two parameters: location/scale for normal, logistic
/// and half_normal (location is ignored for half_normal, which is centred at
/// zero); lower/upper bound for uniform; unused for flat.
struct PriorSpec {
  PriorFamily family = PriorFamily::flat;
  double p1 = 0.0;
  double p2 = 1.0;

  static PriorSpec normal(double mu, double sigma) { return {PriorFamily::normal, mu, sigma}; }
  static PriorSpec logistic(double mu, double s) { return {PriorFamily::logistic, mu, s}; }
  static PriorSpec uniform(double lo, double hi) { return {PriorFamily::uniform, lo, hi}; }
  static PriorSpec flat() { return {PriorFamily::flat, 0.0, 0.0}; }
  static PriorSpec half_normal(double sigma) { return {PriorFamily::half_normal, 0.0, sigma}; }

  /// Parses `normal(0,20)`, `Logistic (0, 10)`, `uniform(-100,100)`,
  /// `half_normal(0,2)`, `flat`. `uniform(-inf,inf)` is read as flat.
  /// Beta and Weibull are rejected: their support does not cover a
  /// regression coefficient.
  static PriorSpec parse(std::string_view text);

  void validate() const;
  std::string to_string() const;

  bool operator==(const PriorSpec&) const = default;
};

struct LogPdf {
  double value;
  double derivative;
};

/// Log-density and its derivative with respect to the constrained value.
/// Flat returns (0, 0); out-of-support values give -inf.
LogPdf prior_log_pdf(const PriorSpec& spec, double value);

/// Map from the real line onto the support of a prior: identity for
/// unbounded families, exp for half_normal, scaled inverse-logit for uniform.
struct ScalarTransform {
  enum class Kind { identity, positive, interval };
  Kind kind = Kind::identity;
  double lower = 0.0;
  double upper = 0.0;

  static ScalarTransform for_prior(const PriorSpec& spec);

  double constrain(double u) const;
  double unconstrain(double x) const;
  /// d constrain / du
  double jacobian(double u) const;
  /// log |d constrain / du| and its derivative in u.
  LogPdf log_jacobian(double u) const;
};

// ---------------------------------------------------------------------------
// Densities

/// Unnormalized log posterior on the unconstrained scale with analytic
/// gradient. Implementations are immutable and safe to call from several
/// threads at once.
class ModelDensity {
 public:
  virtual ~ModelDensity() = default;

  virtual std::size_t dim() const = 0;
  /// Writes the gradient into `gradient` (length dim()) and returns the
  /// log density, including transform log-Jacobians.
  virtual double log_density_gradient(std::span<const double> position,
                                      std::span<double> gradient) const = 0;
  virtual std::vector<double> constrain(std::span<const double> position) const = 0;
  virtual std::vector<std::string> parameter_names() const = 0;

  double log_density(std::span<const double> position) const;
  std::vector<double> gradient(std::span<const double> position) const;
};

struct LogPosterior {
  double value;
  std::vector<double> gradient;
};

/// Checked entry point: throws std::invalid_argument on a wrong-length or
/// non-finite position.
LogPosterior log_posterior_with_gradient(const ModelDensity& model,
                                         std::span<const double> position);

/// Pooled binomial-logit regression: n_i ~ Binomial(N_i, inverse_logit(alpha + beta d_i)).
class SimpleLrModel final : public ModelDensity {
 public:
  SimpleLrModel(Dataset data, PriorSpec prior_alpha, PriorSpec prior_beta,
                bool include_binomial_coefficient = true);

  std::size_t dim() const override { return 2; }
  double log_density_gradient(std::span<const double> position,
                              std::span<double> gradient) const override;
  std::vector<double> constrain(std::span<const double> position) const override;
  std::vector<std::string> parameter_names() const override { return {"alpha", "beta"}; }

  std::vector<double> unconstrain(double alpha, double beta) const;
  /// Log posterior (prior plus likelihood) at constrained (alpha, beta),
  /// with no Jacobian terms; -inf outside the prior support.
  double log_posterior_constrained(double alpha, double beta) const;
  double log_likelihood(double alpha, double beta) const;

  const Dataset& data() const noexcept { return data_; }
  const PriorSpec& prior_alpha() const noexcept { return prior_alpha_; }
  const PriorSpec& prior_beta() const noexcept { return prior_beta_; }

 private:
  Dataset data_;
  PriorSpec prior_alpha_, prior_beta_;
  ScalarTransform tf_alpha_, tf_beta_;
  std::vector<double> log_binom_;
};

enum class Parameterization { centered, ncp };

struct HierPriors {
  PriorSpec mu_alpha = PriorSpec::normal(0, 20);
  PriorSpec mu_beta = PriorSpec::normal(0, 20);
  PriorSpec sigma_alpha = PriorSpec::half_normal(2);
  PriorSpec sigma_beta = PriorSpec::half_normal(2);
};

/// Hierarchical regression with one (alpha_i, beta_i) pair per record,
/// alpha_i ~ Normal(mu_alpha, sigma_alpha), beta_i ~ Normal(mu_beta, sigma_beta).
///
/// Unconstrained layout (E = record count):
///   [0, E)       alpha_i, or a_raw_i under the non-centered form
///   [E, 2E)      beta_i,  or b_raw_i
///   2E, 2E+1     mu_alpha, mu_beta
///   2E+2, 2E+3   sigma_alpha, sigma_beta on their transformed scale
///
/// Under the non-centered form alpha_i = mu_alpha + sigma_alpha * a_raw_i with
/// a_raw_i ~ Normal(0, 1). Both forms constrain to the same named values.
class HierLrModel final : public ModelDensity {
 public:
  HierLrModel(Dataset data, Parameterization parameterization, HierPriors priors = {});

  std::size_t dim() const override { return 2 * data_.size() + 4; }
  double log_density_gradient(std::span<const double> position,
                              std::span<double> gradient) const override;
  std::vector<double> constrain(std::span<const double> position) const override;
  std::vector<std::string> parameter_names() const override;

  Parameterization parameterization() const noexcept { return param_; }
  const Dataset& data() const noexcept { return data_; }
  const HierPriors& priors() const noexcept { return priors_; }

  /// Unconstrained position for the given constrained values
  /// (alpha_i, beta_i, mu_alpha, mu_beta, sigma_alpha, sigma_beta).
  std::vector<double> unconstrain(std::span<const double> alpha, std::span<const double> beta,
                                  double mu_alpha, double mu_beta, double sigma_alpha,
                                  double sigma_beta) const;

 private:
  Dataset data_;
  Parameterization param_;
  HierPriors priors_;
  ScalarTransform tf_mu_a_, tf_mu_b_, tf_sigma_a_, tf_sigma_b_;
  std::vector<double> log_binom_;
};

/// Single success probability with a Beta(a, b) prior and n successes out
/// of N, sampled on the logit scale. The exact posterior is Beta(a+n, b+N-n).
class ProportionModel final : public ModelDensity {
 public:
  ProportionModel(int improved, int total, double prior_a = 1.0, double prior_b = 1.0);

  std::size_t dim() const override { return 1; }
  double log_density_gradient(std::span<const double> position,
                              std::span<double> gradient) const override;
  std::vector<double> constrain(std::span<const double> position) const override;
  std::vector<std::string> parameter_names() const override { return {"p"}; }

  /// Posterior log density of p on [0, 1] (normalized).
  double log_posterior_constrained(double p) const;

  int improved() const noexcept { return n_; }
  int total() const noexcept { return total_; }
  double prior_a() const noexcept { return a_; }
  double prior_b() const noexcept { return b_; }

 private:
  int n_, total_;
  double a_, b_;
};

/// Independent standard normal in `dim` dimensions.
class StandardNormalModel final : public ModelDensity {
 public:
  explicit StandardNormalModel(std::size_t dim);

  std::size_t dim() const override { return dim_; }
  double log_density_gradient(std::span<const double> position,
                              std::span<double> gradient) const override;
  std::vector<double> constrain(std::span<const double> position) const override;
  std::vector<std::string> parameter_names() const override;

 private:
  std::size_t dim_;
};

}  // namespace doseresp

#pragma once

namespace doseresp {

/// Beta distribution shapes (a, b), both strictly positive.
struct BetaParams {
  double a = 1.0;
  double b = 1.0;

  BetaParams() = default;
  BetaParams(double a_, double b_);

  bool operator==(const BetaParams&) const = default;
};

/// Conjugate update of a Beta prior by n successes in N binomial trials:
/// Beta(a + n, b + N - n). Throws std::invalid_argument unless 0 <= n <= N.
BetaParams beta_binomial_posterior(const BetaParams& prior, int n, int total);

struct BetaMoments {
  double mean;
  double sd;
};

BetaMoments beta_moments(const BetaParams& p);

double beta_log_pdf(const BetaParams& p, double x);

/// Regularized incomplete beta function I_x(a, b), by adaptive Simpson
/// integration of the density. Endpoint singularities (a < 1 or b < 1) are
/// removed with the substitution t = u^(1/a) before integrating.
double beta_cdf(const BetaParams& p, double x);

/// Inverse of beta_cdf by bisection on [0, 1] to 1e-10. Requires 0 < q < 1.
double beta_quantile(const BetaParams& p, double q);

}  // namespace doseresp

#include "doseresp/conjugate.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>

namespace doseresp {

BetaParams::BetaParams(double a_, double b_) : a(a_), b(b_) {
  if (!(a > 0.0) || !(b > 0.0) || !std::isfinite(a) || !std::isfinite(b))
    throw std::invalid_argument("Beta shapes must be positive and finite");
}

BetaParams beta_binomial_posterior(const BetaParams& prior, int n, int total) {
  if (n < 0 || total < 0 || n > total)
    throw std::invalid_argument("beta_binomial_posterior: need 0 <= n <= N");
  return {prior.a + n, prior.b + (total - n)};
}

BetaMoments beta_moments(const BetaParams& p) {
  const double s = p.a + p.b;
  return {p.a / s, std::sqrt(p.a * p.b / (s * s * (s + 1.0)))};
}

namespace {

double log_beta_function(double a, double b) {
  return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

double simpson(double fa, double fm, double fb, double h) { return h / 6.0 * (fa + 4.0 * fm + fb); }

double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double fa,
                        double fm, double fb, double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = simpson(fa, flm, fm, m - a);
  const double right = simpson(fm, frm, fb, b - m);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return adaptive_simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         adaptive_simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

double integrate(const std::function<double(double)>& f, double a, double b, double tol) {
  if (b <= a) return 0.0;
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  return adaptive_simpson(f, a, b, fa, fm, fb, simpson(fa, fm, fb, b - a), tol, 40);
}

// Integral of t^(a-1) (1-t)^(b-1) over [0, x] for x <= 1/2, normalized by
// B(a, b). For a < 1 the substitution t = u^(1/a) turns the integrand into
// (1 - u^(1/a))^(b-1) / a on [0, x^a], which is smooth because 1 - t >= 1/2.
double lower_tail(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  const double log_norm = log_beta_function(a, b);
  if (a >= 1.0) {
    auto integrand = [&](double t) {
      if (t <= 0.0) return a == 1.0 ? std::exp(-log_norm) : 0.0;
      return std::exp((a - 1.0) * std::log(t) + (b - 1.0) * std::log1p(-t) - log_norm);
    };
    return integrate(integrand, 0.0, x, 1e-13);
  }
  auto integrand = [&](double u) {
    const double t = std::pow(u, 1.0 / a);
    return std::exp((b - 1.0) * std::log1p(-t) - log_norm) / a;
  };
  return integrate(integrand, 0.0, std::pow(x, a), 1e-13);
}

}  // namespace

double beta_log_pdf(const BetaParams& p, double x) {
  if (x < 0.0 || x > 1.0) return -std::numeric_limits<double>::infinity();
  return (p.a - 1.0) * std::log(x) + (p.b - 1.0) * std::log1p(-x) - log_beta_function(p.a, p.b);
}

double beta_cdf(const BetaParams& p, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  if (x <= 0.5) return std::min(1.0, lower_tail(p.a, p.b, x));
  // I_x(a, b) = 1 - I_{1-x}(b, a)
  return std::max(0.0, 1.0 - lower_tail(p.b, p.a, 1.0 - x));
}

double beta_quantile(const BetaParams& p, double q) {
  if (!(q > 0.0 && q < 1.0)) throw std::invalid_argument("beta_quantile: need 0 < q < 1");
  double lo = 0.0, hi = 1.0;
  while (hi - lo > 1e-10) {
    const double mid = 0.5 * (lo + hi);
    if (beta_cdf(p, mid) < q)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace doseresp

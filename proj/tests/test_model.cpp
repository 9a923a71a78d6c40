#include <doctest.h>

#include <cmath>

#include "doseresp/model.hpp"
#include "doseresp/rng.hpp"
#include "oracles.hpp"

using namespace doseresp;

namespace {

// Componentwise |analytic - fd| <= tol * max(1, |fd|).
void check_gradient(const ModelDensity& model, Rng& rng, int positions, double box = 5.0) {
  for (int k = 0; k < positions; ++k) {
    std::vector<double> q(model.dim());
    for (auto& v : q) v = rng.uniform(-box, box);
    const auto analytic = model.gradient(q);
    const auto fd = oracle::finite_difference_gradient(model, q, 1e-5);
    for (std::size_t i = 0; i < q.size(); ++i) {
      INFO("component " << i << " at position " << k);
      CHECK(oracle::relative_error(analytic[i], fd[i]) < 1e-5);
    }
  }
}

Dataset small_data() { return synthesize(12, -14.03, 9.39, 42); }

}  // namespace

TEST_CASE("inverse_logit") {
  CHECK(inverse_logit(0.0) == 0.5);
  CHECK(inverse_logit(-14.03 + 9.39 * 1.30) == doctest::Approx(0.1390742860).epsilon(1e-9));
  CHECK(inverse_logit(1000.0) == 1.0);
  CHECK(inverse_logit(-1000.0) == 0.0);
  CHECK(std::isfinite(inverse_logit(-1000.0)));
  for (double x = -30.0; x <= 30.0; x += 0.37)
    CHECK(std::abs(inverse_logit(x) + inverse_logit(-x) - 1.0) <= 1e-15);
}

TEST_CASE("binomial_logit_log_pmf") {
  CHECK(binomial_logit_log_pmf(0, 5, 0.0) == doctest::Approx(5 * std::log(0.5)).epsilon(1e-14));
  CHECK(binomial_logit_log_pmf(7, 7, 800.0) == doctest::Approx(0.0));
  const double eta = -14.03 + 9.39 * 1.30;
  const double direct = oracle::direct_binomial_log_pmf(4, 20, inverse_logit(eta));
  CHECK(binomial_logit_log_pmf(4, 20, eta) == doctest::Approx(direct).epsilon(1e-12));
  CHECK(binomial_logit_log_pmf(4, 20, -1.823) == doctest::Approx(-1.8012386159).epsilon(1e-9));
}

TEST_CASE("binomial_logit_log_pmf normalizes") {
  for (int total = 0; total <= 30; ++total) {
    for (double eta : {-4.0, -0.5, 0.0, 1.3, 6.0}) {
      double s = 0.0;
      for (int n = 0; n <= total; ++n) s += std::exp(binomial_logit_log_pmf(n, total, eta));
      CHECK(std::abs(s - 1.0) < 1e-10);
    }
  }
}

TEST_CASE("prior_log_pdf") {
  const auto n = prior_log_pdf(PriorSpec::normal(0, 1), 0.0);
  CHECK(n.value == doctest::Approx(-0.9189385332).epsilon(1e-10));
  CHECK(n.derivative == 0.0);
  const auto f = prior_log_pdf(PriorSpec::flat(), 123.0);
  CHECK(f.value == 0.0);
  CHECK(f.derivative == 0.0);

  // Logistic density written out directly: exp(-z) / (s (1 + exp(-z))^2).
  const double z = 0.5;
  const double direct = std::log(std::exp(-z) / (10.0 * std::pow(1.0 + std::exp(-z), 2)));
  const auto l = prior_log_pdf(PriorSpec::logistic(0, 10), 5.0);
  CHECK(l.value == doctest::Approx(direct).epsilon(1e-12));
  CHECK(l.value == doctest::Approx(-3.7507390614).epsilon(1e-9));

  const auto u = prior_log_pdf(PriorSpec::uniform(-100, 100), 3.0);
  CHECK(u.value == doctest::Approx(-std::log(200.0)));
  CHECK(std::isinf(prior_log_pdf(PriorSpec::uniform(-1, 1), 2.0).value));
  CHECK(prior_log_pdf(PriorSpec::half_normal(2), 0.0).value ==
        doctest::Approx(std::log(2.0) - 0.9189385332 - std::log(2.0)));
}

TEST_CASE("prior derivatives match finite differences") {
  for (const auto& spec : {PriorSpec::normal(1, 3), PriorSpec::logistic(-2, 0.7),
                           PriorSpec::half_normal(2)}) {
    for (double x : {0.3, 1.7, 4.2}) {
      const double h = 1e-6;
      const double fd = (prior_log_pdf(spec, x + h).value - prior_log_pdf(spec, x - h).value) / (2 * h);
      CHECK(prior_log_pdf(spec, x).derivative == doctest::Approx(fd).epsilon(1e-7));
    }
  }
}

TEST_CASE("PriorSpec::parse") {
  CHECK(PriorSpec::parse("normal(0,20)") == PriorSpec::normal(0, 20));
  CHECK(PriorSpec::parse("Normal (0, 20)") == PriorSpec::normal(0, 20));
  CHECK(PriorSpec::parse("Logistic (10, 10)") == PriorSpec::logistic(10, 10));
  CHECK(PriorSpec::parse("uniform(-100,100)") == PriorSpec::uniform(-100, 100));
  CHECK(PriorSpec::parse("Uniform (-inf, inf)").family == PriorFamily::flat);
  CHECK(PriorSpec::parse("flat").family == PriorFamily::flat);
  CHECK(PriorSpec::parse("half_normal(0,2)") == PriorSpec::half_normal(2));
  CHECK(PriorSpec::parse("normal(0,20)").to_string() == "normal(0,20)");
  CHECK_THROWS_AS(PriorSpec::parse("beta(0.5,0.5)"), PriorError);
  CHECK_THROWS_AS(PriorSpec::parse("Weibull (1, 1)"), PriorError);
  CHECK_THROWS_AS(PriorSpec::parse("normal(0,-1)"), PriorError);
  CHECK_THROWS_AS(PriorSpec::parse("uniform(3,1)"), PriorError);
  CHECK_THROWS_AS(PriorSpec::parse("cauchy(0,1)"), PriorError);
  CHECK_THROWS_AS(PriorSpec::parse("normal(0)"), PriorError);
}

TEST_CASE("constrain transforms") {
  const auto pos = ScalarTransform::for_prior(PriorSpec::half_normal(2));
  CHECK(pos.constrain(0.0) == 1.0);
  const auto iv = ScalarTransform::for_prior(PriorSpec::uniform(-100, 100));
  CHECK(iv.constrain(0.0) == doctest::Approx(0.0));
  CHECK(iv.unconstrain(iv.constrain(1.7)) == doctest::Approx(1.7));

  const Dataset ds = small_data();
  HierLrModel ncp(ds, Parameterization::ncp);
  const std::size_t e = ds.size();
  std::vector<double> q(ncp.dim(), 0.0);
  q[0] = 2.0;                          // a_raw_1
  q[2 * e] = -14.0;                    // mu_a
  q[2 * e + 2] = std::log(0.5);        // sigma_a
  const auto c = ncp.constrain(q);
  CHECK(c[0] == doctest::Approx(-13.0));
  CHECK(c[1] == doctest::Approx(-14.0));
  CHECK(c[2 * e + 2] == doctest::Approx(0.5));
}

TEST_CASE("SimpleLrModel with flat priors is the binomial log likelihood") {
  const Dataset ds = small_data();
  SimpleLrModel m(ds, PriorSpec::flat(), PriorSpec::flat());
  for (auto [a, b] : {std::pair{-14.0, 9.0}, std::pair{0.3, -1.2}}) {
    double expected = 0.0;
    for (const auto& r : ds.records())
      expected += binomial_logit_log_pmf(r.improved, r.total, a + b * r.dosage);
    const std::vector<double> q{a, b};
    CHECK(m.log_density(q) == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("binomial coefficient only shifts the log density") {
  const Dataset ds = small_data();
  SimpleLrModel with(ds, PriorSpec::flat(), PriorSpec::flat(), true);
  SimpleLrModel without(ds, PriorSpec::flat(), PriorSpec::flat(), false);
  Rng rng(3);
  for (int k = 0; k < 20; ++k) {
    const std::vector<double> p1{rng.uniform(-20, 0), rng.uniform(0, 15)};
    const std::vector<double> p2{rng.uniform(-20, 0), rng.uniform(0, 15)};
    const double d_with = with.log_density(p1) - with.log_density(p2);
    const double d_without = without.log_density(p1) - without.log_density(p2);
    CHECK(d_with == doctest::Approx(d_without).epsilon(1e-9));
  }
}

TEST_CASE("analytic gradients match central finite differences") {
  const Dataset ds = small_data();
  Rng rng(2718);
  SUBCASE("simple model, every prior family") {
    for (const auto& prior :
         {PriorSpec::flat(), PriorSpec::normal(0, 20), PriorSpec::logistic(0, 10),
          PriorSpec::uniform(-100, 100), PriorSpec::half_normal(5)}) {
      INFO(prior.to_string());
      check_gradient(SimpleLrModel(ds, prior, prior), rng, 100);
    }
  }
  SUBCASE("hierarchical centered") {
    check_gradient(HierLrModel(ds, Parameterization::centered), rng, 100, 2.0);
  }
  SUBCASE("hierarchical non-centered") {
    check_gradient(HierLrModel(ds, Parameterization::ncp), rng, 100);
  }
  SUBCASE("proportion model") { check_gradient(ProportionModel(4, 20), rng, 100); }
}

TEST_CASE("log_posterior_with_gradient checks its input") {
  SimpleLrModel m(small_data(), PriorSpec::flat(), PriorSpec::flat());
  const std::vector<double> bad{0.0, NAN};
  CHECK_THROWS_AS(log_posterior_with_gradient(m, bad), std::invalid_argument);
  const std::vector<double> short_pos{0.0};
  CHECK_THROWS_AS(log_posterior_with_gradient(m, short_pos), std::invalid_argument);
  const std::vector<double> ok{-14.0, 9.0};
  const auto lp = log_posterior_with_gradient(m, ok);
  CHECK(lp.gradient.size() == 2);
  CHECK(std::isfinite(lp.value));
}

TEST_CASE("centered and non-centered forms define the same constrained posterior") {
  const Dataset ds = small_data();
  const std::size_t e = ds.size();
  HierLrModel centered(ds, Parameterization::centered);
  HierLrModel ncp(ds, Parameterization::ncp);
  Rng rng(99);
  for (int k = 0; k < 20; ++k) {
    const double mu_a = rng.uniform(-16, -12), mu_b = rng.uniform(7, 11);
    const double sa = std::exp(rng.uniform(-3, 1)), sb = std::exp(rng.uniform(-3, 1));
    std::vector<double> alpha(e), beta(e);
    for (std::size_t i = 0; i < e; ++i) {
      alpha[i] = mu_a + sa * rng.normal();
      beta[i] = mu_b + sb * rng.normal();
    }
    const auto qc = centered.unconstrain(alpha, beta, mu_a, mu_b, sa, sb);
    const auto qn = ncp.unconstrain(alpha, beta, mu_a, mu_b, sa, sb);
    const auto cc = centered.constrain(qc);
    const auto cn = ncp.constrain(qn);
    for (std::size_t i = 0; i < cc.size(); ++i) CHECK(cc[i] == doctest::Approx(cn[i]));
    // The non-centered density carries the extra Jacobian sigma_a^E sigma_b^E.
    const double jac = static_cast<double>(e) * (std::log(sa) + std::log(sb));
    CHECK(ncp.log_density(qn) - centered.log_density(qc) == doctest::Approx(jac).epsilon(1e-9));
  }
}

TEST_CASE("non-centered zero raw values put every record at the hyper-means") {
  const Dataset ds = small_data();
  const std::size_t e = ds.size();
  HierLrModel ncp(ds, Parameterization::ncp);
  std::vector<double> q(ncp.dim(), 0.0);
  q[2 * e] = -14.03;
  q[2 * e + 1] = 9.39;
  q[2 * e + 2] = 0.4;
  const auto c = ncp.constrain(q);
  for (std::size_t i = 0; i < e; ++i) {
    CHECK(c[i] == doctest::Approx(-14.03));
    CHECK(c[e + i] == doctest::Approx(9.39));
  }
  CHECK(ncp.dim() == 2 * e + 4);
  CHECK(ncp.parameter_names().size() == 2 * e + 4);
  CHECK(ncp.parameter_names()[2 * e] == "mu_a");
}

TEST_CASE("hierarchical scale priors must have positive support") {
  HierPriors p;
  p.sigma_alpha = PriorSpec::normal(0, 2);
  CHECK_THROWS_AS(HierLrModel(small_data(), Parameterization::ncp, p), PriorError);
}

TEST_CASE("ProportionModel posterior is the conjugate Beta density") {
  ProportionModel m(4, 20, 1, 1);
  // exp(log density) on the logit scale divided by the Jacobian p(1-p) is
  // proportional to Beta(5, 17); compare ratios at two points.
  auto density_p = [&](double p) {
    const std::vector<double> q{std::log(p / (1 - p))};
    return m.log_density(q) - std::log(p * (1 - p));
  };
  const double r1 = density_p(0.2) - density_p(0.35);
  const double r2 = m.log_posterior_constrained(0.2) - m.log_posterior_constrained(0.35);
  CHECK(r1 == doctest::Approx(r2).epsilon(1e-12));
}

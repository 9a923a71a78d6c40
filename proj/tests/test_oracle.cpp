#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "doseresp/oracle.hpp"

using namespace doseresp;

TEST_CASE("quadrature_1d on closed-form densities") {
  const auto beta = quadrature_1d(
      [](double x) { return 4 * std::log(x) + 6 * std::log1p(-x); }, 0.0, 1.0, 2000);
  CHECK(beta.log_normalizer == doctest::Approx(-7.74500280352).epsilon(1e-10));
  CHECK(beta.mean == doctest::Approx(5.0 / 12.0).epsilon(1e-10));
  CHECK(beta.sd == doctest::Approx(0.136735442357).epsilon(1e-9));

  const auto normal = quadrature_1d([](double x) { return -0.5 * x * x; }, -12.0, 12.0, 400);
  CHECK(normal.log_normalizer == doctest::Approx(0.5 * std::log(2 * std::numbers::pi)).epsilon(1e-12));
  CHECK(std::abs(normal.mean) < 1e-12);
  CHECK(normal.sd == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("Simpson's rule converges at fourth order") {
  // Half-normal integral on [0, 2]; the third derivative differs at the
  // endpoints so the h^4 error term does not cancel.
  const double exact = std::sqrt(std::numbers::pi / 2.0) * std::erf(2.0 / std::sqrt(2.0));
  auto err = [&](int n) {
    const auto r = quadrature_1d([](double x) { return -0.5 * x * x; }, 0.0, 2.0, n);
    return std::abs(std::exp(r.log_normalizer) - exact);
  };
  const double factor = err(64) / err(128);
  INFO("factor " << factor);
  CHECK(factor >= 12.0);
  CHECK(factor <= 20.0);
}

TEST_CASE("quadrature_1d input checks") {
  auto f = [](double x) { return -x * x; };
  CHECK_THROWS_AS(quadrature_1d(f, 0, 1, 10), std::invalid_argument);
  CHECK_THROWS_AS(quadrature_1d(f, 1, 0, 100), std::invalid_argument);
  CHECK_THROWS_AS(quadrature_1d([](double) { return NAN; }, 0, 1, 100), OracleError);
  CHECK_THROWS_AS(quadrature_1d([](double) { return -INFINITY; }, 0, 1, 100), OracleError);
}

TEST_CASE("flat density on the grid") {
  const GridBounds b{-1, 1, 0, 4};
  const auto g = grid_posterior([](double, double) { return 0.0; }, b, 16, 3);
  CHECK(g.cells.size() == 256);
  CHECK(g.generations == 3);
  CHECK(std::abs(g.total_mass() - 1.0) < 1e-12);
  const auto m = grid_moments(g);
  CHECK(m[0].mean == doctest::Approx(0.0).scale(1.0));
  CHECK(m[1].mean == doctest::Approx(2.0));
  CHECK(m[0].median == doctest::Approx(0.0).scale(1.0));
  CHECK(m[1].q25 == doctest::Approx(1.0));
  CHECK(m[1].q75 == doctest::Approx(3.0));
}

TEST_CASE("Gaussian density on the refined grid") {
  const double ma = 1.0, mb = -2.0, sa = 0.5, sb = 1.0, rho = 0.6;
  auto f = [=](double a, double b) {
    const double za = (a - ma) / sa, zb = (b - mb) / sb;
    return -0.5 * (za * za - 2 * rho * za * zb + zb * zb) / (1 - rho * rho);
  };
  const GridBounds bounds{-4, 6, -12, 8};
  const auto g = grid_posterior(f, bounds, 64, 8);
  CHECK(std::abs(g.total_mass() - 1.0) < 1e-12);
  for (std::size_t k = 1; k < g.max_mass_history.size(); ++k)
    CHECK(g.max_mass_history[k] <= g.max_mass_history[k - 1]);

  const auto m = grid_moments(g);
  CHECK(std::abs(m[0].mean - ma) < 1e-3);
  CHECK(std::abs(m[1].mean - mb) < 1e-3);
  CHECK(std::abs(m[0].sd - sa) < 1e-2);
  CHECK(std::abs(m[1].sd - sb) < 1e-2);
  CHECK(std::abs(m[0].median - ma) < 0.02);
  CHECK(std::abs(m[0].q25 - (ma - 0.6745 * sa)) < 0.02);
  CHECK(std::abs(m[1].q75 - (mb + 0.6745 * sb)) < 0.02);
}

TEST_CASE("refinement splits cells holding half the mass") {
  auto f = [](double a, double b) { return -0.5 * (a * a + b * b); };
  const auto g0 = grid_posterior(f, {-6, 6, -6, 6}, 16, 0);
  const auto g1 = grid_posterior(f, {-6, 6, -6, 6}, 16, 1);
  CHECK(g0.cells.size() == 256);
  CHECK(g1.cells.size() > g0.cells.size());
  CHECK((g1.cells.size() - g0.cells.size()) % 3 == 0);
  for (const auto& c : g1.cells) CHECK(c.mass >= 0.0);
}

namespace {

// Brute-force midpoint moments on a fine uniform grid around the ridge.
std::array<double, 4> brute_force_moments(const SimpleLrModel& model) {
  const int n = 1200;
  const double a0 = -22, a1 = -6, b0 = 4, b1 = 15;
  std::vector<double> lp(static_cast<std::size_t>(n) * n);
  double mx = -INFINITY;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double a = a0 + (i + 0.5) * (a1 - a0) / n, b = b0 + (j + 0.5) * (b1 - b0) / n;
      lp[i * n + j] = model.log_posterior_constrained(a, b);
      mx = std::max(mx, lp[i * n + j]);
    }
  long double z = 0, sa = 0, sb = 0, saa = 0, sbb = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double a = a0 + (i + 0.5) * (a1 - a0) / n, b = b0 + (j + 0.5) * (b1 - b0) / n;
      const double w = std::exp(lp[i * n + j] - mx);
      z += w, sa += w * a, sb += w * b, saa += w * a * a, sbb += w * b * b;
    }
  const double ma = sa / z, mb = sb / z;
  return {ma, std::sqrt(double(saa / z) - ma * ma), mb, std::sqrt(double(sbb / z) - mb * mb)};
}

}  // namespace

TEST_CASE("refined grid on a synthetic regression posterior") {
  const Dataset ds = synthesize(71, -14.03, 9.39, 1);
  SimpleLrModel model(ds, PriorSpec::normal(0, 20), PriorSpec::normal(0, 20));
  const GridBounds bounds;
  const auto a = grid_moments(
      grid_posterior(model, bounds, kDefaultGridResolution, kDefaultGridRefinements - 1));
  const auto b = grid_moments(
      grid_posterior(model, bounds, kDefaultGridResolution, kDefaultGridRefinements));
  for (int axis = 0; axis < 2; ++axis) {
    CHECK(std::abs(a[axis].mean - b[axis].mean) / std::abs(b[axis].mean) < 0.01);
    CHECK(std::abs(a[axis].sd - b[axis].sd) / b[axis].sd < 0.01);
  }
  const auto truth = brute_force_moments(model);
  CHECK(std::abs(b[0].mean - truth[0]) < 1e-3);
  CHECK(std::abs(b[0].sd - truth[1]) / truth[1] < 0.01);
  CHECK(std::abs(b[1].mean - truth[2]) < 1e-3);
  CHECK(std::abs(b[1].sd - truth[3]) / truth[3] < 0.01);
}

TEST_CASE("bounds that miss the posterior are reported") {
  const Dataset ds = synthesize(71, -14.03, 9.39, 1);
  SimpleLrModel model(ds, PriorSpec::normal(0, 20), PriorSpec::normal(0, 20));
  CHECK_THROWS_AS(grid_posterior(model, {100, 200, 100, 200}, 32, 2), OracleError);
  CHECK_THROWS_AS(grid_posterior(model, {-15, -13, 0, 20}, 256, 2), OracleError);
  CHECK_THROWS_AS(grid_posterior(model, {1, -1, 0, 1}, 32, 2), std::invalid_argument);
}

TEST_CASE("grid_csv") {
  const auto g = grid_posterior([](double, double) { return 0.0; }, {0, 1, 0, 1}, 8, 0);
  const auto csv = grid_csv(g);
  CHECK(csv.rfind("alpha_lo,alpha_hi,beta_lo,beta_hi,mass\n0,0.125,0,0.125,0.015625\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 65);
}

#include "doseresp/oracle.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <limits>
#include <numeric>

namespace doseresp {

namespace {

// Neumaier compensated sum.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0, comp_ = 0.0;
};

std::string format_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

constexpr double kEdgeDensityRatio = 1e-4;

}  // namespace

QuadratureResult quadrature_1d(const std::function<double(double)>& log_density, double lower,
                               double upper, int points) {
  if (points < 64) throw std::invalid_argument("quadrature_1d: need at least 64 points");
  if (!(upper > lower) || !std::isfinite(lower) || !std::isfinite(upper))
    throw std::invalid_argument("quadrature_1d: need finite lower < upper");
  if (points % 2 == 1) ++points;
  const double h = (upper - lower) / points;

  std::vector<double> x(points + 1), lf(points + 1), w(points + 1);
  double max_lf = -std::numeric_limits<double>::infinity();
  for (int k = 0; k <= points; ++k) {
    x[k] = k == points ? upper : lower + k * h;
    lf[k] = log_density(x[k]);
    if (std::isnan(lf[k]) || lf[k] == std::numeric_limits<double>::infinity())
      throw OracleError("quadrature_1d: non-finite density at x = " + format_g(x[k]));
    max_lf = std::max(max_lf, lf[k]);
    w[k] = (k == 0 || k == points) ? 1.0 : (k % 2 == 1 ? 4.0 : 2.0);
  }
  if (!std::isfinite(max_lf)) throw OracleError("quadrature_1d: density is zero on the interval");

  CompensatedSum z, m1;
  for (int k = 0; k <= points; ++k) {
    const double f = w[k] * std::exp(lf[k] - max_lf);
    z.add(f);
    m1.add(f * x[k]);
  }
  const double mean = m1.value() / z.value();
  CompensatedSum m2;
  for (int k = 0; k <= points; ++k) {
    const double d = x[k] - mean;
    m2.add(w[k] * std::exp(lf[k] - max_lf) * d * d);
  }
  QuadratureResult r;
  r.log_normalizer = max_lf + std::log(z.value() * h / 3.0);
  r.mean = mean;
  r.sd = std::sqrt(std::max(0.0, m2.value() / z.value()));
  return r;
}

// ---------------------------------------------------------------------------

double GridPosterior::total_mass() const {
  CompensatedSum s;
  for (const auto& c : cells) s.add(c.mass);
  return s.value();
}

namespace {

struct WorkCell {
  double alpha_lo, alpha_hi, beta_lo, beta_hi;
  double log_mass;  // unnormalized
};

WorkCell make_cell(const LogDensity2d& f, double a0, double a1, double b0, double b1) {
  const double lf = f(0.5 * (a0 + a1), 0.5 * (b0 + b1));
  if (std::isnan(lf)) throw OracleError("grid_posterior: NaN log density");
  return {a0, a1, b0, b1, lf + std::log((a1 - a0) * (b1 - b0))};
}

// Normalized masses via log-sum-exp, then rescaled by their compensated sum
// so they add to one to rounding.
std::vector<double> normalize(const std::vector<WorkCell>& cells) {
  double max_lm = -std::numeric_limits<double>::infinity();
  for (const auto& c : cells) max_lm = std::max(max_lm, c.log_mass);
  std::vector<double> mass(cells.size());
  CompensatedSum s;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    mass[i] = std::exp(cells[i].log_mass - max_lm);
    s.add(mass[i]);
  }
  const double total = s.value();
  for (auto& m : mass) m /= total;
  return mass;
}

}  // namespace

GridPosterior grid_posterior(const LogDensity2d& log_density, const GridBounds& bounds,
                             int initial_resolution, int refinements) {
  if (initial_resolution < 8) throw std::invalid_argument("grid_posterior: initial_resolution must be >= 8");
  if (refinements < 0) throw std::invalid_argument("grid_posterior: refinements must be >= 0");
  if (!(bounds.alpha_hi > bounds.alpha_lo) || !(bounds.beta_hi > bounds.beta_lo) ||
      !std::isfinite(bounds.alpha_lo) || !std::isfinite(bounds.alpha_hi) ||
      !std::isfinite(bounds.beta_lo) || !std::isfinite(bounds.beta_hi))
    throw std::invalid_argument("grid_posterior: bounds must be finite and non-empty");

  const int n = initial_resolution;
  const double da = (bounds.alpha_hi - bounds.alpha_lo) / n;
  const double db = (bounds.beta_hi - bounds.beta_lo) / n;
  auto edge = [](double lo, double hi, double step, int i, int count) {
    return i == count ? hi : lo + i * step;
  };

  std::vector<WorkCell> cells;
  cells.reserve(static_cast<std::size_t>(n) * n);
  double max_log_density = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double a0 = edge(bounds.alpha_lo, bounds.alpha_hi, da, i, n);
      const double a1 = edge(bounds.alpha_lo, bounds.alpha_hi, da, i + 1, n);
      const double b0 = edge(bounds.beta_lo, bounds.beta_hi, db, j, n);
      const double b1 = edge(bounds.beta_lo, bounds.beta_hi, db, j + 1, n);
      cells.push_back(make_cell(log_density, a0, a1, b0, b1));
      max_log_density = std::max(max_log_density,
                                 cells.back().log_mass - std::log((a1 - a0) * (b1 - b0)));
    }
  }
  // exp() of anything below this underflows: every cell is numerically zero.
  if (!(max_log_density > std::log(DBL_MIN)))
    throw OracleError("posterior density is numerically zero on every grid cell; widen the "
                      "bounds so they contain the posterior");

  GridPosterior out;
  out.bounds = bounds;
  std::vector<double> mass = normalize(cells);
  out.max_mass_history.push_back(*std::max_element(mass.begin(), mass.end()));

  for (int g = 0; g < refinements; ++g) {
    const auto [mn, mx] = std::minmax_element(mass.begin(), mass.end());
    if (*mx - *mn <= 1e-12 * *mx) {
      out.max_mass_history.push_back(*mx);
      ++out.generations;
      continue;
    }
    std::vector<std::size_t> order(cells.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return mass[a] > mass[b]; });
    std::vector<bool> split(cells.size(), false);
    CompensatedSum acc;
    for (std::size_t idx : order) {
      if (acc.value() >= 0.5) break;
      split[idx] = true;
      acc.add(mass[idx]);
    }
    std::vector<WorkCell> next;
    next.reserve(cells.size() + 3 * order.size());
    for (std::size_t i = 0; i < cells.size(); ++i) {
      const auto& c = cells[i];
      if (!split[i]) {
        next.push_back(c);
        continue;
      }
      const double am = 0.5 * (c.alpha_lo + c.alpha_hi);
      const double bm = 0.5 * (c.beta_lo + c.beta_hi);
      next.push_back(make_cell(log_density, c.alpha_lo, am, c.beta_lo, bm));
      next.push_back(make_cell(log_density, c.alpha_lo, am, bm, c.beta_hi));
      next.push_back(make_cell(log_density, am, c.alpha_hi, c.beta_lo, bm));
      next.push_back(make_cell(log_density, am, c.alpha_hi, bm, c.beta_hi));
    }
    cells = std::move(next);
    mass = normalize(cells);
    out.max_mass_history.push_back(*std::max_element(mass.begin(), mass.end()));
    ++out.generations;
  }

  out.cells.reserve(cells.size());
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto& c = cells[i];
    out.cells.push_back({c.alpha_lo, c.alpha_hi, c.beta_lo, c.beta_hi, mass[i]});
  }
  return out;
}

GridPosterior grid_posterior(const SimpleLrModel& model, const GridBounds& bounds,
                             int initial_resolution, int refinements) {
  GridPosterior g = grid_posterior(
      [&model](double a, double b) { return model.log_posterior_constrained(a, b); }, bounds,
      initial_resolution, refinements);
  // Density (mass per unit area) on cells touching the box, relative to the peak.
  double peak = 0.0, edge = 0.0;
  for (const auto& c : g.cells) {
    const double density = c.mass / ((c.alpha_hi - c.alpha_lo) * (c.beta_hi - c.beta_lo));
    peak = std::max(peak, density);
    if (c.alpha_lo == bounds.alpha_lo || c.alpha_hi == bounds.alpha_hi ||
        c.beta_lo == bounds.beta_lo || c.beta_hi == bounds.beta_hi)
      edge = std::max(edge, density);
  }
  if (edge > kEdgeDensityRatio * peak)
    throw OracleError("posterior density at the edge of the grid bounds is " +
                      format_g(edge / peak) + " of its peak; widen the bounds");
  return g;
}

// ---------------------------------------------------------------------------

namespace {

// Quantiles of the marginal whose density is a sum of uniform pieces.
std::array<double, 3> marginal_quantiles(std::vector<std::pair<double, double>> events,
                                         const std::array<double, 3>& levels) {
  // events: (coordinate, change in density)
  std::sort(events.begin(), events.end());
  std::array<double, 3> out{};
  std::size_t next_level = 0;
  double cdf = 0.0, rate = 0.0;
  for (std::size_t i = 0; i < events.size() && next_level < levels.size(); ++i) {
    if (i > 0) {
      const double x0 = events[i - 1].first, x1 = events[i].first;
      const double seg = std::max(0.0, rate) * (x1 - x0);
      while (next_level < levels.size() && cdf + seg >= levels[next_level] && seg > 0.0) {
        out[next_level] = x0 + (levels[next_level] - cdf) / seg * (x1 - x0);
        ++next_level;
      }
      cdf += seg;
    }
    rate += events[i].second;
  }
  for (; next_level < levels.size(); ++next_level) out[next_level] = events.back().first;
  return out;
}

}  // namespace

std::array<MarginalSummary, 2> grid_moments(const GridPosterior& grid) {
  std::array<MarginalSummary, 2> out{};
  if (grid.cells.empty()) throw std::invalid_argument("grid_moments: empty grid");
  CompensatedSum total;
  for (const auto& c : grid.cells) total.add(c.mass);
  for (int axis = 0; axis < 2; ++axis) {
    auto lo = [axis](const GridCell& c) { return axis == 0 ? c.alpha_lo : c.beta_lo; };
    auto hi = [axis](const GridCell& c) { return axis == 0 ? c.alpha_hi : c.beta_hi; };
    CompensatedSum m1;
    for (const auto& c : grid.cells) m1.add(c.mass * 0.5 * (lo(c) + hi(c)));
    const double mean = m1.value() / total.value();
    // Mass is spread uniformly over each cell, so each cell adds its own
    // width^2 / 12 to the variance.
    CompensatedSum m2;
    for (const auto& c : grid.cells) {
      const double d = 0.5 * (lo(c) + hi(c)) - mean;
      const double w = hi(c) - lo(c);
      m2.add(c.mass * (d * d + w * w / 12.0));
    }
    std::vector<std::pair<double, double>> events;
    events.reserve(2 * grid.cells.size());
    for (const auto& c : grid.cells) {
      const double rate = c.mass / total.value() / (hi(c) - lo(c));
      events.emplace_back(lo(c), rate);
      events.emplace_back(hi(c), -rate);
    }
    const auto q = marginal_quantiles(std::move(events), {0.25, 0.5, 0.75});
    out[axis] = {mean, std::sqrt(std::max(0.0, m2.value() / total.value())), q[0], q[1], q[2]};
  }
  return out;
}

std::string grid_csv(const GridPosterior& grid) {
  std::string out = "alpha_lo,alpha_hi,beta_lo,beta_hi,mass\n";
  for (const auto& c : grid.cells) {
    out += format_g(c.alpha_lo) + ',' + format_g(c.alpha_hi) + ',' + format_g(c.beta_lo) + ',' +
           format_g(c.beta_hi) + ',' + format_g(c.mass) + '\n';
  }
  return out;
}

}  // namespace doseresp

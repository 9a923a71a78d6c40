#pragma once

#include <array>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "doseresp/model.hpp"

namespace doseresp {

class OracleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct QuadratureResult {
  double log_normalizer = 0.0;
  double mean = 0.0;
  double sd = 0.0;
};

/// Composite Simpson's rule for an unnormalized log density on
/// [lower, upper] with `points` subintervals (rounded up to even, at least
/// 64). Throws OracleError if the density is NaN or +inf at a node, or zero
/// everywhere.
QuadratureResult quadrature_1d(const std::function<double(double)>& log_density, double lower,
                               double upper, int points);

struct GridBounds {
  double alpha_lo = -40.0, alpha_hi = 10.0;
  double beta_lo = -5.0, beta_hi = 30.0;
};

struct GridCell {
  double alpha_lo, alpha_hi, beta_lo, beta_hi;
  double mass;
};

/// Normalized piecewise-constant posterior over a tiling of the bounding box.
struct GridPosterior {
  GridBounds bounds;
  std::vector<GridCell> cells;
  int generations = 0;
  /// Largest cell mass after the initial grid and after each generation.
  std::vector<double> max_mass_history;

  double total_mass() const;
};

using LogDensity2d = std::function<double(double alpha, double beta)>;

/// The regression posterior is a thin ridge (|corr(alpha, beta)| near 1), so
/// the initial grid has to resolve it before refinement can help.
inline constexpr int kDefaultGridResolution = 512;
inline constexpr int kDefaultGridRefinements = 6;

/// High-density-region refinement. Starts from a uniform
/// initial_resolution x initial_resolution grid; each generation splits the
/// highest-mass cells that together hold half of the mass into four
/// children. Cell mass is the midpoint rule on the unnormalized density,
/// normalized with log-sum-exp. A generation on a grid whose cells all carry
/// equal mass is a no-op: there is no high-density region to focus on.
GridPosterior grid_posterior(const LogDensity2d& log_density, const GridBounds& bounds,
                             int initial_resolution, int refinements);

/// As above for the pooled regression posterior. Additionally rejects
/// bounds where the density on cells touching the box edge exceeds 1e-4 of
/// the peak density, since the posterior is then truncated.
GridPosterior grid_posterior(const SimpleLrModel& model, const GridBounds& bounds,
                             int initial_resolution, int refinements);

struct MarginalSummary {
  double mean = 0, sd = 0, q25 = 0, median = 0, q75 = 0;
};

/// Moments and quantiles of the marginals obtained by spreading each
/// cell's mass uniformly over its interval.
/// Index 0 is alpha, 1 is beta.
std::array<MarginalSummary, 2> grid_moments(const GridPosterior& grid);

/// `alpha_lo,alpha_hi,beta_lo,beta_hi,mass` rows.
std::string grid_csv(const GridPosterior& grid);

}  // namespace doseresp

#pragma once

#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "doseresp/data.hpp"

namespace doseresp {

class HillError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Hill dose-response curve E(d) = r_max / (1 + (d50 / d)^c_h), together with
/// the doses giving 10% and 90% of the maximal response.
struct HillFit {
  double r_max = 1.0;
  double d50 = 1.0;
  double c_h = 1.0;
  double d10 = 0.0;
  double d90 = 0.0;
};

/// log(81) / log(d90 / d10). Throws HillError if d90 == d10 or either is not
/// positive.
double hill_coefficient(double d10, double d90);

/// Throws HillError for d <= 0.
double hill_response(double d, const HillFit& fit);

/// HillFit with d10/d90 recomputed from (r_max, d50, c_h).
HillFit hill_from_parameters(double r_max, double d50, double c_h);

/// Weighted pool-adjacent-violators fit of a nondecreasing step function.
std::vector<double> isotonic_regression(const std::vector<double>& values,
                                        const std::vector<double>& weights);

struct HillFitOptions {
  /// Weight squared residuals by the record's subject count.
  bool weighted = true;
  int sweeps = 100;
};

struct HillFitTrace {
  /// Loss before refinement, then after each coordinate-descent sweep.
  std::vector<double> loss;
};

/// Two stages: level crossings of the isotonic-smoothed survival ratios at
/// 10/50/90% of the maximum give an initial curve, then coordinate descent
/// with golden-section line searches refines (r_max, d50, c_h) on the
/// (weighted) squared residual. Needs at least 4 records with varying
/// ratios; throws HillError naming a level the data never crosses.
HillFit fit_hill(const Dataset& ds, const HillFitOptions& options = {},
                 HillFitTrace* trace = nullptr);

/// sum_i w_i (n_i/N_i - curve(d_i))^2 with w_i = N_i (weighted) or 1.
double weighted_residual(const Dataset& ds, const std::function<double(double)>& curve,
                         bool weighted = true);

/// (d, E(d)) on `points` evenly spaced doses over [lo, hi].
std::vector<std::pair<double, double>> hill_curve(const HillFit& fit, double lo, double hi,
                                                  int points = 200);

}  // namespace doseresp

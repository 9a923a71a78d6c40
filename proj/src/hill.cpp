#include "doseresp/hill.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <tuple>

namespace doseresp {

double hill_coefficient(double d10, double d90) {
  if (!(d10 > 0.0) || !(d90 > 0.0)) throw HillError("hill_coefficient: doses must be positive");
  if (d10 == d90) throw HillError("hill_coefficient: d10 equals d90");
  return std::log(81.0) / std::log(d90 / d10);
}

double hill_response(double d, const HillFit& fit) {
  if (!(d > 0.0)) throw HillError("hill_response: dose must be positive");
  return fit.r_max / (1.0 + std::pow(fit.d50 / d, fit.c_h));
}

HillFit hill_from_parameters(double r_max, double d50, double c_h) {
  HillFit f;
  f.r_max = r_max;
  f.d50 = d50;
  f.c_h = c_h;
  // E(d) = L r_max  <=>  d = d50 (1/L - 1)^(-1/c_h)
  f.d10 = d50 * std::pow(9.0, -1.0 / c_h);
  f.d90 = d50 * std::pow(9.0, 1.0 / c_h);
  return f;
}

std::vector<double> isotonic_regression(const std::vector<double>& values,
                                        const std::vector<double>& weights) {
  struct Block {
    double value, weight;
    std::size_t count;
  };
  std::vector<Block> blocks;
  for (std::size_t i = 0; i < values.size(); ++i) {
    blocks.push_back({values[i], weights[i], 1});
    while (blocks.size() > 1 && blocks[blocks.size() - 2].value > blocks.back().value) {
      Block b = blocks.back();
      blocks.pop_back();
      Block& a = blocks.back();
      const double w = a.weight + b.weight;
      a.value = (a.value * a.weight + b.value * b.weight) / w;
      a.weight = w;
      a.count += b.count;
    }
  }
  std::vector<double> out;
  out.reserve(values.size());
  for (const auto& b : blocks) out.insert(out.end(), b.count, b.value);
  return out;
}

double weighted_residual(const Dataset& ds, const std::function<double(double)>& curve,
                         bool weighted) {
  double s = 0.0;
  for (const auto& r : ds.records()) {
    const double e = static_cast<double>(r.improved) / r.total - curve(r.dosage);
    s += (weighted ? r.total : 1.0) * e * e;
  }
  return s;
}

namespace {

// Golden-section minimisation of f on [lo, hi].
template <typename F>
double golden_section(F&& f, double lo, double hi, int iterations = 60) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = hi - inv_phi * (hi - lo);
  double d = lo + inv_phi * (hi - lo);
  double fc = f(c), fd = f(d);
  for (int i = 0; i < iterations; ++i) {
    if (fc < fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - inv_phi * (hi - lo);
      fc = f(c);
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + inv_phi * (hi - lo);
      fd = f(d);
    }
  }
  return fc < fd ? c : d;
}

constexpr double kMaxHillCoefficient = 1000.0;

}  // namespace

HillFit fit_hill(const Dataset& ds, const HillFitOptions& options, HillFitTrace* trace) {
  if (ds.size() < 4) throw HillError("fit_hill: need at least 4 records");

  // Sort by dose and pool equal doses; the result does not depend on record order.
  std::vector<TrialRecord> recs = ds.records();
  std::sort(recs.begin(), recs.end(), [](const TrialRecord& a, const TrialRecord& b) {
    return std::tie(a.dosage, a.total, a.improved) < std::tie(b.dosage, b.total, b.improved);
  });
  const Dataset sorted(recs);
  std::vector<double> dose, ratio, weight;
  for (std::size_t i = 0; i < recs.size();) {
    double n = 0, total = 0;
    std::size_t j = i;
    for (; j < recs.size() && recs[j].dosage == recs[i].dosage; ++j) {
      n += recs[j].improved;
      total += recs[j].total;
    }
    dose.push_back(recs[i].dosage);
    ratio.push_back(n / total);
    weight.push_back(options.weighted ? total : static_cast<double>(j - i));
    i = j;
  }
  if (std::all_of(ratio.begin(), ratio.end(), [&](double r) { return r == ratio.front(); }))
    throw HillError("fit_hill: survival ratios are all equal");

  const std::vector<double> smooth = isotonic_regression(ratio, weight);
  const double r_max = smooth.back();

  auto crossing = [&](double fraction, const char* label) {
    const double level = fraction * r_max;
    if (smooth.front() >= level)
      throw HillError(std::string("fit_hill: the ") + label +
                      " response level is not bracketed by the data");
    for (std::size_t k = 1; k < smooth.size(); ++k) {
      if (smooth[k] >= level) {
        const double t = (level - smooth[k - 1]) / (smooth[k] - smooth[k - 1]);
        return dose[k - 1] + t * (dose[k] - dose[k - 1]);
      }
    }
    throw HillError(std::string("fit_hill: the ") + label +
                    " response level is not bracketed by the data");
  };

  HillFit fit;
  fit.r_max = r_max;
  fit.d10 = crossing(0.1, "10%");
  fit.d50 = crossing(0.5, "50%");
  fit.d90 = crossing(0.9, "90%");
  fit.c_h = std::min(hill_coefficient(fit.d10, fit.d90), kMaxHillCoefficient);

  auto loss = [&](double r, double d50, double c) {
    return weighted_residual(sorted, [&](double d) { return r / (1.0 + std::pow(d50 / d, c)); },
                             options.weighted);
  };

  double r = fit.r_max, d50 = fit.d50, c = fit.c_h;
  double best = loss(r, d50, c);
  if (trace) trace->loss = {best};
  for (int sweep = 0; sweep < options.sweeps; ++sweep) {
    auto try_coordinate = [&](double& x, double lo, double hi, auto&& eval) {
      const double cand = golden_section(eval, lo, hi);
      const double v = eval(cand);
      if (v < best) {
        best = v;
        x = cand;
      }
    };
    try_coordinate(r, 0.5 * r, std::min(1.0, 2.0 * r), [&](double v) { return loss(v, d50, c); });
    try_coordinate(d50, d50 / 1.5, d50 * 1.5, [&](double v) { return loss(r, v, c); });
    try_coordinate(c, 0.5 * c, std::min(kMaxHillCoefficient, 2.0 * c),
                   [&](double v) { return loss(r, d50, v); });
    if (trace) trace->loss.push_back(best);
  }
  return hill_from_parameters(r, d50, c);
}

std::vector<std::pair<double, double>> hill_curve(const HillFit& fit, double lo, double hi,
                                                  int points) {
  if (points < 2 || !(lo > 0.0) || !(hi > lo))
    throw std::invalid_argument("hill_curve: need points >= 2 and 0 < lo < hi");
  std::vector<std::pair<double, double>> out;
  out.reserve(static_cast<std::size_t>(points));
  for (int k = 0; k < points; ++k) {
    const double d = lo + (hi - lo) * k / (points - 1);
    out.emplace_back(d, hill_response(d, fit));
  }
  return out;
}

}  // namespace doseresp

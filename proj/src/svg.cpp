#include "doseresp/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

namespace doseresp {

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  if (std::abs(v) < 1e-12) v = 0.0;
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

constexpr int kMarginLeft = 70, kMarginRight = 20, kMarginTop = 40, kMarginBottom = 55;

}  // namespace

std::vector<double> nice_ticks(double lo, double hi, int target) {
  if (!(hi > lo)) return {lo};
  const double raw = (hi - lo) / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    step = m * mag;
    if (step >= raw) break;
  }
  std::vector<double> ticks;
  for (double t = std::ceil(lo / step) * step; t <= hi + 1e-9 * step; t += step) ticks.push_back(t);
  return ticks;
}

SvgPlot::SvgPlot(std::string title, std::string x_label, std::string y_label, int width,
                 int height)
    : title_(std::move(title)),
      x_label_(std::move(x_label)),
      y_label_(std::move(y_label)),
      width_(width),
      height_(height) {}

void SvgPlot::add_line(Points points, std::string color, std::string label) {
  series_.push_back({std::move(points), std::move(color), std::move(label), false});
}

void SvgPlot::add_markers(Points points, std::string color, std::string label) {
  series_.push_back({std::move(points), std::move(color), std::move(label), true});
}

void SvgPlot::include_y(double lo, double hi) {
  extra_y_.push_back(lo);
  extra_y_.push_back(hi);
}

SvgPlot::Range SvgPlot::data_range() const {
  Range r{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(),
          std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (const auto& s : series_) {
    for (const auto& [x, y] : s.points) {
      if (!std::isfinite(x) || !std::isfinite(y)) continue;
      r.x_min = std::min(r.x_min, x);
      r.x_max = std::max(r.x_max, x);
      r.y_min = std::min(r.y_min, y);
      r.y_max = std::max(r.y_max, y);
    }
  }
  for (double y : extra_y_) {
    r.y_min = std::min(r.y_min, y);
    r.y_max = std::max(r.y_max, y);
  }
  if (!std::isfinite(r.x_min)) r = {0.0, 1.0, 0.0, 1.0};
  auto pad = [](double& lo, double& hi) {
    if (hi == lo) {
      const double d = std::max(1.0, std::abs(lo)) * 0.5;
      lo -= d;
      hi += d;
    } else {
      const double d = 0.04 * (hi - lo);
      lo -= d;
      hi += d;
    }
  };
  pad(r.x_min, r.x_max);
  pad(r.y_min, r.y_max);
  return r;
}

std::string SvgPlot::render() const {
  const Range r = data_range();
  const double pw = width_ - kMarginLeft - kMarginRight;
  const double ph = height_ - kMarginTop - kMarginBottom;
  auto px = [&](double x) { return kMarginLeft + (x - r.x_min) / (r.x_max - r.x_min) * pw; };
  auto py = [&](double y) { return kMarginTop + (r.y_max - y) / (r.y_max - r.y_min) * ph; };

  std::string s;
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width_) +
       "\" height=\"" + std::to_string(height_) + "\" viewBox=\"0 0 " + std::to_string(width_) +
       " " + std::to_string(height_) + "\">\n";
  s += "<rect x=\"0\" y=\"0\" width=\"" + std::to_string(width_) + "\" height=\"" +
       std::to_string(height_) + "\" fill=\"white\"/>\n";
  s += "<text x=\"" + num(width_ / 2.0) +
       "\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">" +
       escape(title_) + "</text>\n";
  s += "<rect x=\"" + num(kMarginLeft) + "\" y=\"" + num(kMarginTop) + "\" width=\"" + num(pw) +
       "\" height=\"" + num(ph) + "\" fill=\"none\" stroke=\"black\"/>\n";

  s += "<g font-family=\"sans-serif\" font-size=\"11\" stroke=\"none\" fill=\"black\">\n";
  for (double t : nice_ticks(r.x_min, r.x_max)) {
    s += "<line x1=\"" + num(px(t)) + "\" y1=\"" + num(kMarginTop + ph) + "\" x2=\"" + num(px(t)) +
         "\" y2=\"" + num(kMarginTop + ph + 5) + "\" stroke=\"black\"/>";
    s += "<text x=\"" + num(px(t)) + "\" y=\"" + num(kMarginTop + ph + 18) +
         "\" text-anchor=\"middle\">" + tick_label(t) + "</text>\n";
  }
  for (double t : nice_ticks(r.y_min, r.y_max)) {
    s += "<line x1=\"" + num(kMarginLeft - 5) + "\" y1=\"" + num(py(t)) + "\" x2=\"" +
         num(kMarginLeft) + "\" y2=\"" + num(py(t)) + "\" stroke=\"black\"/>";
    s += "<text x=\"" + num(kMarginLeft - 8) + "\" y=\"" + num(py(t) + 4) +
         "\" text-anchor=\"end\">" + tick_label(t) + "</text>\n";
  }
  s += "<text x=\"" + num(kMarginLeft + pw / 2) + "\" y=\"" + num(height_ - 12.0) +
       "\" text-anchor=\"middle\" font-size=\"13\">" + escape(x_label_) + "</text>\n";
  s += "<text x=\"16\" y=\"" + num(kMarginTop + ph / 2) +
       "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 16 " +
       num(kMarginTop + ph / 2) + ")\">" + escape(y_label_) + "</text>\n";
  s += "</g>\n";

  for (const auto& series : series_) {
    if (series.markers) {
      s += "<g fill=\"" + series.color + "\" fill-opacity=\"0.7\">\n";
      for (const auto& [x, y] : series.points) {
        if (!std::isfinite(x) || !std::isfinite(y)) continue;
        s += "<circle cx=\"" + num(px(x)) + "\" cy=\"" + num(py(y)) + "\" r=\"3\"/>\n";
      }
      s += "</g>\n";
    } else {
      s += "<polyline fill=\"none\" stroke=\"" + series.color +
           "\" stroke-width=\"1.5\" points=\"";
      bool first = true;
      for (const auto& [x, y] : series.points) {
        if (!std::isfinite(x) || !std::isfinite(y)) continue;
        if (!first) s += ' ';
        s += num(px(x)) + "," + num(py(y));
        first = false;
      }
      s += "\"/>\n";
    }
  }

  int legend_row = 0;
  for (const auto& series : series_) {
    if (series.label.empty()) continue;
    const double y = kMarginTop + 12 + 16 * legend_row++;
    const double x = kMarginLeft + pw - 170;
    s += "<rect x=\"" + num(x) + "\" y=\"" + num(y - 8) + "\" width=\"12\" height=\"8\" fill=\"" +
         series.color + "\"/>";
    s += "<text x=\"" + num(x + 18) + "\" y=\"" + num(y) +
         "\" font-family=\"sans-serif\" font-size=\"11\">" + escape(series.label) + "</text>\n";
  }
  s += "</svg>\n";
  return s;
}

}  // namespace doseresp

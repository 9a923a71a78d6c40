#pragma once

#include <string>
#include <utility>
#include <vector>

namespace doseresp {

using Points = std::vector<std::pair<double, double>>;

/// Minimal deterministic 2-D plot written as standalone SVG. Axis ranges
/// are fitted to the data of every series so nothing is clipped.
class SvgPlot {
 public:
  SvgPlot(std::string title, std::string x_label, std::string y_label, int width = 640,
          int height = 420);

  void add_line(Points points, std::string color, std::string label = {});
  /// One <circle> element per point.
  void add_markers(Points points, std::string color, std::string label = {});
  /// Forces the y range to include [lo, hi].
  void include_y(double lo, double hi);

  std::string render() const;

  struct Range {
    double x_min, x_max, y_min, y_max;
  };
  /// Data range mapped onto the plotting area.
  Range data_range() const;

 private:
  struct Series {
    Points points;
    std::string color;
    std::string label;
    bool markers;
  };

  std::string title_, x_label_, y_label_;
  int width_, height_;
  std::vector<Series> series_;
  std::vector<double> extra_y_;
};

/// Tick positions at 1/2/5 x 10^k spacing covering [lo, hi].
std::vector<double> nice_ticks(double lo, double hi, int target = 6);

}  // namespace doseresp

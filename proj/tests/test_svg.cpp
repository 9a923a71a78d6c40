#include <doctest.h>

#include <cmath>
#include <string>

#include "doseresp/svg.hpp"

using namespace doseresp;

namespace {

std::size_t count(const std::string& s, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = s.find(needle); pos != std::string::npos; pos = s.find(needle, pos + 1)) ++n;
  return n;
}

}  // namespace

TEST_CASE("markers emit one circle per finite point") {
  SvgPlot plot("Survival ratio", "dosage", "n/N");
  plot.add_markers({{1.0, 0.1}, {1.2, 0.4}, {1.5, 0.9}}, "#1f77b4", "records");
  plot.add_line({{1.0, 0.0}, {2.0, 1.0}}, "#d62728", "fit");
  const auto svg = plot.render();
  CHECK(count(svg, "<circle") == 3);
  CHECK(count(svg, "<polyline") == 1);
  CHECK(svg.rfind("<svg xmlns=\"http://www.w3.org/2000/svg\"", 0) == 0);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(svg.find(">records<") != std::string::npos);
}

TEST_CASE("non-finite points are skipped") {
  SvgPlot plot("t", "x", "y");
  plot.add_markers({{1.0, 0.1}, {2.0, NAN}, {INFINITY, 0.3}}, "black");
  CHECK(count(plot.render(), "<circle") == 1);
}

TEST_CASE("labels are escaped") {
  SvgPlot plot("a < b & c", "x", "y");
  const auto svg = plot.render();
  CHECK(svg.find("a &lt; b &amp; c") != std::string::npos);
}

TEST_CASE("data_range pads and honours include_y") {
  SvgPlot plot("t", "x", "y");
  plot.add_line({{0.0, 0.2}, {10.0, 0.8}}, "black");
  auto r = plot.data_range();
  CHECK(r.x_min == doctest::Approx(-0.4));
  CHECK(r.x_max == doctest::Approx(10.4));
  plot.include_y(0.0, 1.0);
  r = plot.data_range();
  CHECK(r.y_min == doctest::Approx(-0.04));
  CHECK(r.y_max == doctest::Approx(1.04));

  SvgPlot empty("t", "x", "y");
  CHECK_NOTHROW(empty.render());
}

TEST_CASE("nice_ticks") {
  const auto t = nice_ticks(0.0, 1.0);
  REQUIRE(!t.empty());
  CHECK(t.front() == doctest::Approx(0.0));
  CHECK(t.back() == doctest::Approx(1.0));
  CHECK(nice_ticks(-14.7, -13.2).size() >= 3);
  CHECK(nice_ticks(2.0, 2.0).size() == 1);
}

TEST_CASE("render is deterministic") {
  auto make = [] {
    SvgPlot p("t", "x", "y");
    p.add_line({{0.1, 0.2}, {0.3, 0.5}}, "red", "a");
    return p.render();
  };
  CHECK(make() == make());
}

#pragma once

#include <string>
#include <vector>

namespace dqjl {

struct ChartSeries {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
  std::string color;  // any SVG color; empty picks from a fixed palette
};

struct LineChart {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<ChartSeries> series;
  int width = 720;
  int height = 420;
};

/// SVG 1.1 document with axes, ticks, one polyline per series and a legend.
/// Non-finite points are skipped.
std::string render_svg(const LineChart& chart);

/// Trailing moving average over a window (shorter at the start).
std::vector<double> moving_average(const std::vector<double>& values, std::size_t window);

}  // namespace dqjl

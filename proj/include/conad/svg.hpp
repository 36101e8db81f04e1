#pragma once

#include <span>
#include <string>
#include <vector>

#include "conad/tensor.hpp"

// Minimal SVG writers for heatmaps, scatter plots and line charts. Output is a
// pure function of the inputs, so files diff cleanly between runs.
namespace conad::svg {

struct Bounds {
  double x_min = -1, x_max = 1, y_min = -1, y_max = 1;
};

struct PointSeries {
  std::string label;
  std::string color;
  Tensor points;  // (n, 2)
  double radius = 2.0;
};

struct LineSeries {
  std::string label;
  std::string color;
  std::vector<double> x;
  std::vector<double> y;
};

// Grayscale grid; darker is larger. `values` is row-major side x side.
// Values are scaled by their own min/max unless lo < hi is given.
std::string heatmap(std::span<const double> values, std::size_t side, const std::string& title,
                    double lo = 0.0, double hi = 0.0, double cell = 12.0);

// Several heatmaps side by side, each with its own caption.
std::string heatmap_row(const std::vector<std::vector<double>>& maps, std::size_t side,
                        const std::vector<std::string>& captions, double cell = 8.0);

std::string scatter(const std::vector<PointSeries>& series, const Bounds& bounds, const std::string& title,
                    double size = 360.0);

std::string line_chart(const std::vector<LineSeries>& series, const std::string& title, const std::string& x_label,
                       const std::string& y_label, double width = 420.0, double height = 280.0);

// Bounds of all points, padded by `pad` of the span on every side.
Bounds fit_bounds(const std::vector<PointSeries>& series, double pad = 0.05);

void write_file(const std::string& path, const std::string& content);

}  // namespace conad::svg

#include "conad/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "conad/errors.hpp"

namespace conad::svg {

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string open(double w, double h) {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(w) + "\" height=\"" + num(h) +
         "\" viewBox=\"0 0 " + num(w) + " " + num(h) + "\" font-family=\"sans-serif\" font-size=\"11\">\n" +
         "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

std::string text(double x, double y, const std::string& s, const char* anchor = "start") {
  return "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" text-anchor=\"" + anchor + "\">" + escape(s) +
         "</text>\n";
}

std::string gray(double t) {
  const int g = static_cast<int>(std::lround(255.0 * (1.0 - std::clamp(t, 0.0, 1.0))));
  char buf[16];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", g, g, g);
  return buf;
}

std::string cells(std::span<const double> values, std::size_t side, double x0, double y0, double cell, double lo,
                  double hi) {
  if (!(lo < hi)) {
    lo = std::numeric_limits<double>::infinity();
    hi = -lo;
    for (double v : values) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  const double range = hi > lo ? hi - lo : 1.0;
  std::string out;
  for (std::size_t r = 0; r < side; ++r) {
    for (std::size_t c = 0; c < side; ++c) {
      out += "<rect x=\"" + num(x0 + static_cast<double>(c) * cell) + "\" y=\"" +
             num(y0 + static_cast<double>(r) * cell) + "\" width=\"" + num(cell) + "\" height=\"" + num(cell) +
             "\" fill=\"" + gray((values[r * side + c] - lo) / range) + "\"/>\n";
    }
  }
  return out;
}

}  // namespace

std::string heatmap(std::span<const double> values, std::size_t side, const std::string& title, double lo,
                    double hi, double cell) {
  if (values.size() != side * side) throw ShapeError("heatmap: value count does not match side");
  const double w = static_cast<double>(side) * cell + 20.0;
  const double h = static_cast<double>(side) * cell + 40.0;
  return open(w, h) + text(10, 18, title) + cells(values, side, 10, 28, cell, lo, hi) + "</svg>\n";
}

std::string heatmap_row(const std::vector<std::vector<double>>& maps, std::size_t side,
                        const std::vector<std::string>& captions, double cell) {
  const double tile = static_cast<double>(side) * cell;
  const double w = static_cast<double>(maps.size()) * (tile + 10.0) + 10.0;
  std::string out = open(w, tile + 40.0);
  for (std::size_t i = 0; i < maps.size(); ++i) {
    if (maps[i].size() != side * side) throw ShapeError("heatmap_row: value count does not match side");
    const double x0 = 10.0 + static_cast<double>(i) * (tile + 10.0);
    if (i < captions.size()) out += text(x0, 18, captions[i]);
    out += cells(maps[i], side, x0, 28, cell, 0.0, 0.0);
  }
  return out + "</svg>\n";
}

Bounds fit_bounds(const std::vector<PointSeries>& series, double pad) {
  Bounds b{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(),
           std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.points.rows(); ++i) {
      b.x_min = std::min(b.x_min, s.points.at(i, 0));
      b.x_max = std::max(b.x_max, s.points.at(i, 0));
      b.y_min = std::min(b.y_min, s.points.at(i, 1));
      b.y_max = std::max(b.y_max, s.points.at(i, 1));
    }
  }
  if (!(b.x_min < b.x_max)) b.x_min -= 1, b.x_max += 1;
  if (!(b.y_min < b.y_max)) b.y_min -= 1, b.y_max += 1;
  const double px = (b.x_max - b.x_min) * pad, py = (b.y_max - b.y_min) * pad;
  return {b.x_min - px, b.x_max + px, b.y_min - py, b.y_max + py};
}

std::string scatter(const std::vector<PointSeries>& series, const Bounds& bounds, const std::string& title,
                    double size) {
  const double margin = 30.0;
  std::string out = open(size + 2 * margin, size + 2 * margin + 16.0 * static_cast<double>(series.size()));
  out += text(margin, 18, title);
  out += "<rect x=\"" + num(margin) + "\" y=\"" + num(margin) + "\" width=\"" + num(size) + "\" height=\"" +
         num(size) + "\" fill=\"none\" stroke=\"#888\"/>\n";
  auto px = [&](double x) { return margin + (x - bounds.x_min) / (bounds.x_max - bounds.x_min) * size; };
  auto py = [&](double y) { return margin + (bounds.y_max - y) / (bounds.y_max - bounds.y_min) * size; };
  for (const auto& s : series) {
    out += "<g fill=\"" + s.color + "\" fill-opacity=\"0.6\">\n";
    for (std::size_t i = 0; i < s.points.rows(); ++i) {
      const double x = s.points.at(i, 0), y = s.points.at(i, 1);
      if (x < bounds.x_min || x > bounds.x_max || y < bounds.y_min || y > bounds.y_max) continue;
      out += "<circle cx=\"" + num(px(x)) + "\" cy=\"" + num(py(y)) + "\" r=\"" + num(s.radius) + "\"/>\n";
    }
    out += "</g>\n";
  }
  for (std::size_t i = 0; i < series.size(); ++i) {
    const double y = size + 2 * margin + 16.0 * static_cast<double>(i);
    out += "<circle cx=\"" + num(margin + 5) + "\" cy=\"" + num(y - 4) + "\" r=\"4\" fill=\"" + series[i].color +
           "\"/>\n";
    out += text(margin + 14, y, series[i].label);
  }
  return out + "</svg>\n";
}

std::string line_chart(const std::vector<LineSeries>& series, const std::string& title, const std::string& x_label,
                       const std::string& y_label, double width, double height) {
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series) {
    for (double v : s.x) x0 = std::min(x0, v), x1 = std::max(x1, v);
    for (double v : s.y) y0 = std::min(y0, v), y1 = std::max(y1, v);
  }
  if (!(x0 < x1)) x0 -= 1, x1 += 1;
  if (!(y0 < y1)) y0 -= 1, y1 += 1;
  const double ml = 60, mr = 20, mt = 30, mb = 50;
  const double pw = width - ml - mr, ph = height - mt - mb;
  auto px = [&](double x) { return ml + (x - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return mt + (y1 - y) / (y1 - y0) * ph; };
  std::string out = open(width, height + 16.0 * static_cast<double>(series.size()));
  out += text(ml, 18, title);
  out += "<rect x=\"" + num(ml) + "\" y=\"" + num(mt) + "\" width=\"" + num(pw) + "\" height=\"" + num(ph) +
         "\" fill=\"none\" stroke=\"#888\"/>\n";
  out += text(ml, mt + ph + 14, num(x0)) + text(ml + pw, mt + ph + 14, num(x1), "end");
  out += text(ml - 4, mt + ph, num(y0), "end") + text(ml - 4, mt + 10, num(y1), "end");
  out += text(ml + pw / 2, mt + ph + 30, x_label, "middle");
  out += text(12, mt + ph / 2, y_label);
  for (const auto& s : series) {
    std::string pts;
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      pts += num(px(s.x[i])) + "," + num(py(s.y[i])) + " ";
    }
    out += "<polyline fill=\"none\" stroke=\"" + s.color + "\" stroke-width=\"1.5\" points=\"" + pts + "\"/>\n";
  }
  for (std::size_t i = 0; i < series.size(); ++i) {
    const double y = height + 16.0 * static_cast<double>(i);
    out += "<rect x=\"" + num(ml) + "\" y=\"" + num(y - 8) + "\" width=\"10\" height=\"3\" fill=\"" +
           series[i].color + "\"/>\n";
    out += text(ml + 14, y, series[i].label);
  }
  return out + "</svg>\n";
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot write '" + path + "'");
  os << content;
  if (!os) throw DataError("failed writing '" + path + "'");
}

}  // namespace conad::svg

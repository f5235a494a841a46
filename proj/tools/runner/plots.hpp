#pragma once

// Static figures: SVG line plots, the isotropic-fit panel, PGM heatmaps.
// Coordinates are printed at fixed precision so figures are byte-stable.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "divlab/divlab.hpp"

namespace divlab::cli {

struct Series {
  std::string label;
  std::vector<double> xs;
  std::vector<double> ys;
};

namespace detail {

inline constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"};

inline std::string svg_open(int w, int h) {
  return fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\" "
      "font-family=\"sans-serif\" font-size=\"12\">\n<rect width=\"{0}\" height=\"{1}\" fill=\"white\"/>\n",
      w, h);
}

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}

}  // namespace detail

/// Line plot of one or more series. Non-finite points (and nonpositive x on
/// a log axis) are skipped.
inline std::string line_plot(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                             const std::vector<Series>& series, bool log_x = false) {
  const int w = 640;
  const int h = 420;
  const double left = 70;
  const double right = 170;
  const double top = 40;
  const double bottom = 50;
  const auto tx = [log_x](double x) { return log_x ? std::log10(x) : x; };
  const auto usable = [&](double x, double y) { return std::isfinite(y) && std::isfinite(x) && (!log_x || x > 0.0); };

  double x0 = std::numeric_limits<double>::infinity();
  double x1 = -x0;
  double y0 = x0;
  double y1 = -x0;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.xs.size(); ++i) {
      if (!usable(s.xs[i], s.ys[i])) continue;
      x0 = std::min(x0, tx(s.xs[i]));
      x1 = std::max(x1, tx(s.xs[i]));
      y0 = std::min(y0, s.ys[i]);
      y1 = std::max(y1, s.ys[i]);
    }
  }
  if (!std::isfinite(x0)) {
    x0 = 0.0;
    x1 = 1.0;
    y0 = 0.0;
    y1 = 1.0;
  }
  if (x1 == x0) x1 = x0 + 1.0;
  if (y1 == y0) y1 = y0 + 1.0;
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad;
  y1 += pad;
  const double pw = w - left - right;
  const double ph = h - top - bottom;
  const auto px = [&](double x) { return left + (tx(x) - x0) / (x1 - x0) * pw; };
  const auto py = [&](double y) { return top + (y1 - y) / (y1 - y0) * ph; };

  std::string svg = detail::svg_open(w, h);
  svg += fmt::format("<text x=\"{:.1f}\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n", left + pw / 2,
                     detail::escape(title));
  svg += fmt::format("<rect x=\"{:.1f}\" y=\"{:.1f}\" width=\"{:.1f}\" height=\"{:.1f}\" fill=\"none\" stroke=\"black\"/>\n",
                     left, top, pw, ph);
  for (int k = 0; k <= 4; ++k) {
    const double fx = x0 + (x1 - x0) * k / 4.0;
    const double fy = y0 + (y1 - y0) * k / 4.0;
    const double gx = left + pw * k / 4.0;
    const double gy = top + ph - ph * k / 4.0;
    svg += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"middle\">{}</text>\n", gx, top + ph + 18,
                       fmt::format("{:.3g}", log_x ? std::pow(10.0, fx) : fx));
    svg += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"end\">{:.3g}</text>\n", left - 6, gy + 4, fy);
  }
  svg += fmt::format("<text x=\"{:.1f}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", left + pw / 2, h - 10,
                     detail::escape(xlabel));
  svg += fmt::format("<text x=\"16\" y=\"{:.1f}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {:.1f})\">{}</text>\n",
                     top + ph / 2, top + ph / 2, detail::escape(ylabel));

  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = detail::kPalette[s % std::size(detail::kPalette)];
    std::string points;
    for (std::size_t i = 0; i < series[s].xs.size(); ++i) {
      if (!usable(series[s].xs[i], series[s].ys[i])) continue;
      points += fmt::format("{:.2f},{:.2f} ", px(series[s].xs[i]), py(series[s].ys[i]));
    }
    if (!points.empty()) points.pop_back();
    svg += fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" points=\"{}\"/>\n", color, points);
    const double ly = top + 10 + 18.0 * static_cast<double>(s);
    svg += fmt::format("<line x1=\"{0:.1f}\" y1=\"{1:.1f}\" x2=\"{2:.1f}\" y2=\"{1:.1f}\" stroke=\"{3}\" stroke-width=\"2\"/>\n",
                       w - right + 10, ly, w - right + 30, color);
    svg += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\">{}</text>\n", w - right + 36, ly + 4,
                       detail::escape(series[s].label));
  }
  svg += "</svg>\n";
  return svg;
}

/// Heatmap of P on its grid with P's 1- and 2-sd ellipses (dashed) and the
/// fitted isotropic Q's 1- and 2-sd circles (solid).
inline std::string fit_panel(const GridDensity& p_grid, const Gaussian2D& p, const IsotropicGaussian& q,
                             const std::string& title) {
  const int size = 400;
  const double margin = 30;
  const double plot = size - 2 * margin;
  const GridSpec& spec = p_grid.spec();
  const std::size_t n = spec.resolution;
  const std::size_t cells = std::min<std::size_t>(64, n);
  const std::size_t stride = n / cells;

  std::vector<double> block(cells * cells, 0.0);
  double peak = 0.0;
  for (std::size_t bj = 0; bj < cells; ++bj) {
    for (std::size_t bi = 0; bi < cells; ++bi) {
      double acc = 0.0;
      for (std::size_t j = bj * stride; j < (bj + 1) * stride; ++j) {
        for (std::size_t i = bi * stride; i < (bi + 1) * stride; ++i) acc += p_grid.at(i, j);
      }
      block[bj * cells + bi] = acc;
      peak = std::max(peak, acc);
    }
  }

  const auto sx = [&](double x) { return margin + (x - spec.x_min) / (spec.x_max - spec.x_min) * plot; };
  const auto sy = [&](double y) { return margin + (spec.y_max - y) / (spec.y_max - spec.y_min) * plot; };
  const double unit_x = plot / (spec.x_max - spec.x_min);
  const double unit_y = plot / (spec.y_max - spec.y_min);

  std::string svg = detail::svg_open(size, size);
  svg += fmt::format("<text x=\"{}\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n", size / 2,
                     detail::escape(title));
  const double cw = plot / static_cast<double>(cells);
  for (std::size_t bj = 0; bj < cells; ++bj) {
    for (std::size_t bi = 0; bi < cells; ++bi) {
      const int shade = 255 - static_cast<int>(std::lround(200.0 * block[bj * cells + bi] / peak));
      if (shade >= 255) continue;
      svg += fmt::format("<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" fill=\"rgb({},{},255)\"/>\n",
                         margin + cw * static_cast<double>(bi), margin + plot - cw * static_cast<double>(bj + 1), cw + 0.05,
                         cw + 0.05, shade, shade);
    }
  }
  svg += fmt::format("<rect x=\"{0}\" y=\"{0}\" width=\"{1}\" height=\"{1}\" fill=\"none\" stroke=\"black\"/>\n",
                     margin, plot);

  const Sym2& c = p.covariance();
  const auto ev = c.eigenvalues();
  const double angle = 0.5 * std::atan2(2.0 * c.xy, c.xx - c.yy) * 180.0 / std::numbers::pi;
  for (double k : {1.0, 2.0}) {
    // SVG y points down, so the rotation flips sign.
    svg += fmt::format(
        "<ellipse cx=\"{:.2f}\" cy=\"{:.2f}\" rx=\"{:.2f}\" ry=\"{:.2f}\" transform=\"rotate({:.3f} {:.2f} {:.2f})\" "
        "fill=\"none\" stroke=\"#333333\" stroke-dasharray=\"4 3\"/>\n",
        sx(p.mean()[0]), sy(p.mean()[1]), k * std::sqrt(ev[0]) * unit_x, k * std::sqrt(ev[1]) * unit_y, -angle,
        sx(p.mean()[0]), sy(p.mean()[1]));
    svg += fmt::format(
        "<ellipse cx=\"{:.2f}\" cy=\"{:.2f}\" rx=\"{:.2f}\" ry=\"{:.2f}\" fill=\"none\" stroke=\"#d62728\" "
        "stroke-width=\"1.5\"/>\n",
        sx(q.mean()[0]), sy(q.mean()[1]), k * std::sqrt(q.variance()) * unit_x, k * std::sqrt(q.variance()) * unit_y);
  }
  svg += "</svg>\n";
  return svg;
}

/// Binary PGM (P5) of a grid density, max value mapped to white, y up.
inline std::string heatmap_pgm(const GridDensity& g) {
  const std::size_t n = g.resolution();
  double peak = 0.0;
  for (double v : g.values()) peak = std::max(peak, v);
  std::string out = fmt::format("P5\n{} {}\n255\n", n, n);
  out.reserve(out.size() + n * n);
  for (std::size_t row = 0; row < n; ++row) {
    const std::size_t j = n - 1 - row;
    for (std::size_t i = 0; i < n; ++i) {
      out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * g.at(i, j) / peak))));
    }
  }
  return out;
}

}  // namespace divlab::cli

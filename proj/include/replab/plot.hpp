#pragma once

#include <string>
#include <vector>

#include "replab/image.hpp"

namespace replab {

// One curve: x/y samples plus an optional symmetric band half-width per
// sample (empty = no band).
struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> band;
};

// Curve chart when `series` is non-empty, bar chart when `bar_labels` is.
struct PlotSpec {
  std::string title;
  std::string xlabel;
  std::string ylabel;
  int width = 640;
  int height = 400;
  std::vector<PlotSeries> series;
  std::vector<std::string> bar_labels;
  std::vector<double> bar_values;
  std::vector<double> bar_err;
};

Image8 render_plot_png(const PlotSpec& spec);
std::string render_plot_svg(const PlotSpec& spec);
// writes base.png and base.svg; both encoders are pure functions of the spec
void write_plot(const PlotSpec& spec, const std::string& base);

// Raster primitives (5x7 bitmap font, Bresenham lines).
void draw_text(Image8& img, int x, int y, const std::string& s, Rgb color,
               int scale = 1);
void draw_line(Image8& img, int x0, int y0, int x1, int y1, Rgb color);
int text_width(const std::string& s, int scale = 1);

// Round tick positions covering [lo, hi] with a 1/2/5 x 10^k step.
std::vector<double> nice_ticks(double lo, double hi, int target = 5);

}  // namespace replab

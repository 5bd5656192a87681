#include "replab/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "replab/common.hpp"

namespace replab {

namespace {

// Classic 5x7 column font, ASCII 0x20..0x7e; bit 0 of each byte is the top
// row of that column.
const uint8_t kFont[95][5] = {
    {0x00, 0x00, 0x00, 0x00, 0x00}, {0x00, 0x00, 0x5f, 0x00, 0x00},
    {0x00, 0x07, 0x00, 0x07, 0x00}, {0x14, 0x7f, 0x14, 0x7f, 0x14},
    {0x24, 0x2a, 0x7f, 0x2a, 0x12}, {0x23, 0x13, 0x08, 0x64, 0x62},
    {0x36, 0x49, 0x55, 0x22, 0x50}, {0x00, 0x05, 0x03, 0x00, 0x00},
    {0x00, 0x1c, 0x22, 0x41, 0x00}, {0x00, 0x41, 0x22, 0x1c, 0x00},
    {0x08, 0x2a, 0x1c, 0x2a, 0x08}, {0x08, 0x08, 0x3e, 0x08, 0x08},
    {0x00, 0x50, 0x30, 0x00, 0x00}, {0x08, 0x08, 0x08, 0x08, 0x08},
    {0x00, 0x60, 0x60, 0x00, 0x00}, {0x20, 0x10, 0x08, 0x04, 0x02},
    {0x3e, 0x51, 0x49, 0x45, 0x3e}, {0x00, 0x42, 0x7f, 0x40, 0x00},
    {0x42, 0x61, 0x51, 0x49, 0x46}, {0x21, 0x41, 0x45, 0x4b, 0x31},
    {0x18, 0x14, 0x12, 0x7f, 0x10}, {0x27, 0x45, 0x45, 0x45, 0x39},
    {0x3c, 0x4a, 0x49, 0x49, 0x30}, {0x01, 0x71, 0x09, 0x05, 0x03},
    {0x36, 0x49, 0x49, 0x49, 0x36}, {0x06, 0x49, 0x49, 0x29, 0x1e},
    {0x00, 0x36, 0x36, 0x00, 0x00}, {0x00, 0x56, 0x36, 0x00, 0x00},
    {0x00, 0x08, 0x14, 0x22, 0x41}, {0x14, 0x14, 0x14, 0x14, 0x14},
    {0x41, 0x22, 0x14, 0x08, 0x00}, {0x02, 0x01, 0x51, 0x09, 0x06},
    {0x32, 0x49, 0x79, 0x41, 0x3e}, {0x7e, 0x11, 0x11, 0x11, 0x7e},
    {0x7f, 0x49, 0x49, 0x49, 0x36}, {0x3e, 0x41, 0x41, 0x41, 0x22},
    {0x7f, 0x41, 0x41, 0x22, 0x1c}, {0x7f, 0x49, 0x49, 0x49, 0x41},
    {0x7f, 0x09, 0x09, 0x01, 0x01}, {0x3e, 0x41, 0x41, 0x51, 0x32},
    {0x7f, 0x08, 0x08, 0x08, 0x7f}, {0x00, 0x41, 0x7f, 0x41, 0x00},
    {0x20, 0x40, 0x41, 0x3f, 0x01}, {0x7f, 0x08, 0x14, 0x22, 0x41},
    {0x7f, 0x40, 0x40, 0x40, 0x40}, {0x7f, 0x02, 0x04, 0x02, 0x7f},
    {0x7f, 0x04, 0x08, 0x10, 0x7f}, {0x3e, 0x41, 0x41, 0x41, 0x3e},
    {0x7f, 0x09, 0x09, 0x09, 0x06}, {0x3e, 0x41, 0x51, 0x21, 0x5e},
    {0x7f, 0x09, 0x19, 0x29, 0x46}, {0x46, 0x49, 0x49, 0x49, 0x31},
    {0x01, 0x01, 0x7f, 0x01, 0x01}, {0x3f, 0x40, 0x40, 0x40, 0x3f},
    {0x1f, 0x20, 0x40, 0x20, 0x1f}, {0x7f, 0x20, 0x18, 0x20, 0x7f},
    {0x63, 0x14, 0x08, 0x14, 0x63}, {0x03, 0x04, 0x78, 0x04, 0x03},
    {0x61, 0x51, 0x49, 0x45, 0x43}, {0x00, 0x00, 0x7f, 0x41, 0x41},
    {0x02, 0x04, 0x08, 0x10, 0x20}, {0x41, 0x41, 0x7f, 0x00, 0x00},
    {0x04, 0x02, 0x01, 0x02, 0x04}, {0x40, 0x40, 0x40, 0x40, 0x40},
    {0x00, 0x01, 0x02, 0x04, 0x00}, {0x20, 0x54, 0x54, 0x54, 0x78},
    {0x7f, 0x48, 0x44, 0x44, 0x38}, {0x38, 0x44, 0x44, 0x44, 0x20},
    {0x38, 0x44, 0x44, 0x48, 0x7f}, {0x38, 0x54, 0x54, 0x54, 0x18},
    {0x08, 0x7e, 0x09, 0x01, 0x02}, {0x08, 0x14, 0x54, 0x54, 0x3c},
    {0x7f, 0x08, 0x04, 0x04, 0x78}, {0x00, 0x44, 0x7d, 0x40, 0x00},
    {0x20, 0x40, 0x44, 0x3d, 0x00}, {0x00, 0x7f, 0x10, 0x28, 0x44},
    {0x00, 0x41, 0x7f, 0x40, 0x00}, {0x7c, 0x04, 0x18, 0x04, 0x78},
    {0x7c, 0x08, 0x04, 0x04, 0x78}, {0x38, 0x44, 0x44, 0x44, 0x38},
    {0x7c, 0x14, 0x14, 0x14, 0x08}, {0x08, 0x14, 0x14, 0x18, 0x7c},
    {0x7c, 0x08, 0x04, 0x04, 0x08}, {0x48, 0x54, 0x54, 0x54, 0x20},
    {0x04, 0x3f, 0x44, 0x40, 0x20}, {0x3c, 0x40, 0x40, 0x20, 0x7c},
    {0x1c, 0x20, 0x40, 0x20, 0x1c}, {0x3c, 0x40, 0x30, 0x40, 0x3c},
    {0x44, 0x28, 0x10, 0x28, 0x44}, {0x0c, 0x50, 0x50, 0x50, 0x3c},
    {0x44, 0x64, 0x54, 0x4c, 0x44}, {0x00, 0x08, 0x36, 0x41, 0x00},
    {0x00, 0x00, 0x7f, 0x00, 0x00}, {0x00, 0x41, 0x36, 0x08, 0x00},
    {0x02, 0x01, 0x02, 0x04, 0x02},
};

const Rgb kPalette[10] = {
    {31, 119, 180}, {255, 127, 14}, {44, 160, 44},   {214, 39, 40},
    {148, 103, 189}, {140, 86, 75},  {227, 119, 194}, {127, 127, 127},
    {188, 189, 34},  {23, 190, 207},
};

Rgb palette(size_t i) { return kPalette[i % 10]; }

Rgb lighten(Rgb c, double f) {
  auto mix = [&](uint8_t v) {
    return static_cast<uint8_t>(v + (255 - v) * f + 0.5);
  };
  return {mix(c[0]), mix(c[1]), mix(c[2])};
}

void put(Image8& img, int x, int y, Rgb color) {
  if (x < 0 || y < 0 || x >= img.w || y >= img.h) return;
  for (int ch = 0; ch < 3; ++ch) img.at(x, y, ch) = color[ch];
}

std::string fmt_num(double v) {
  if (v == 0) return "0";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

std::string fmt_coord(double v) {
  double r = std::round(v * 100.0) / 100.0;
  if (r == 0) r = 0;  // avoid "-0"
  return format_double(r);
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '&') out += "&amp;";
    else if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else out += c;
  }
  return out;
}

struct Range {
  double lo = 1e300, hi = -1e300;
  void include(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void pad() {
    if (lo > hi) {
      lo = 0;
      hi = 1;
      return;
    }
    if (hi <= lo) {
      double d = std::max(1.0, std::abs(lo) * 0.1);
      lo -= d;
      hi += d;
    } else {
      double d = (hi - lo) * 0.05;
      lo -= d;
      hi += d;
    }
  }
};

// Shared chart geometry so the PNG and SVG stay in lockstep.
struct Layout {
  int ml = 68, mr = 14, mt = 26, mb = 42;
  int width, height;
  Range xr, yr;

  double px(double x) const {
    return ml + (x - xr.lo) / (xr.hi - xr.lo) * (width - ml - mr);
  }
  double py(double y) const {
    return height - mb - (y - yr.lo) / (yr.hi - yr.lo) * (height - mt - mb);
  }
};

Layout make_layout(const PlotSpec& spec) {
  Layout lay;
  lay.width = spec.width;
  lay.height = spec.height;
  if (!spec.series.empty()) {
    for (const auto& s : spec.series)
      for (size_t i = 0; i < s.x.size(); ++i) {
        lay.xr.include(s.x[i]);
        double b = i < s.band.size() ? s.band[i] : 0;
        lay.yr.include(s.y[i] - b);
        lay.yr.include(s.y[i] + b);
      }
  } else {
    lay.xr.include(0);
    lay.xr.include(static_cast<double>(std::max<size_t>(1, spec.bar_values.size())));
    lay.yr.include(0);
    for (size_t i = 0; i < spec.bar_values.size(); ++i) {
      double e = i < spec.bar_err.size() ? spec.bar_err[i] : 0;
      lay.yr.include(spec.bar_values[i] - e);
      lay.yr.include(spec.bar_values[i] + e);
    }
  }
  lay.xr.pad();
  lay.yr.pad();
  return lay;
}

}  // namespace

int text_width(const std::string& s, int scale) {
  return static_cast<int>(s.size()) * 6 * scale;
}

void draw_text(Image8& img, int x, int y, const std::string& s, Rgb color,
               int scale) {
  int cx = x;
  for (char ch : s) {
    if (ch >= 0x20 && ch <= 0x7e) {
      const uint8_t* cols = kFont[ch - 0x20];
      for (int col = 0; col < 5; ++col)
        for (int row = 0; row < 7; ++row)
          if (cols[col] & (1 << row))
            for (int sy = 0; sy < scale; ++sy)
              for (int sx = 0; sx < scale; ++sx)
                put(img, cx + col * scale + sx, y + row * scale + sy, color);
    }
    cx += 6 * scale;
  }
}

void draw_line(Image8& img, int x0, int y0, int x1, int y1, Rgb color) {
  int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
  int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
  int err = dx + dy;
  while (true) {
    put(img, x0, y0, color);
    if (x0 == x1 && y0 == y1) break;
    int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
}

std::vector<double> nice_ticks(double lo, double hi, int target) {
  if (!(hi > lo) || target < 1) return {lo};
  double raw = (hi - lo) / target;
  double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = 10 * mag;
  for (double m : {1.0, 2.0, 5.0}) {
    if (m * mag >= raw) {
      step = m * mag;
      break;
    }
  }
  std::vector<double> ticks;
  double first = std::ceil(lo / step) * step;
  for (double v = first; v <= hi + step * 1e-9; v += step) {
    double r = std::abs(v) < step * 1e-9 ? 0.0 : v;
    ticks.push_back(r);
  }
  return ticks;
}

Image8 render_plot_png(const PlotSpec& spec) {
  Layout lay = make_layout(spec);
  Image8 img(spec.width, spec.height, 3, 255);
  const Rgb black{0, 0, 0}, grey{208, 208, 208}, dark{64, 64, 64};

  int x0 = lay.ml, x1 = spec.width - lay.mr;
  int y0 = lay.mt, y1 = spec.height - lay.mb;

  for (double t : nice_ticks(lay.yr.lo, lay.yr.hi)) {
    int y = static_cast<int>(std::lround(lay.py(t)));
    draw_line(img, x0, y, x1, y, grey);
    std::string label = fmt_num(t);
    draw_text(img, x0 - 6 - text_width(label), y - 3, label, dark);
  }
  if (spec.series.empty()) {
    // bar slots are categorical; ticks go under the bars instead
  } else {
    for (double t : nice_ticks(lay.xr.lo, lay.xr.hi)) {
      int x = static_cast<int>(std::lround(lay.px(t)));
      draw_line(img, x, y1, x, y1 + 4, dark);
      std::string label = fmt_num(t);
      draw_text(img, x - text_width(label) / 2, y1 + 8, label, dark);
    }
  }

  if (spec.series.empty()) {
    size_t n = spec.bar_values.size();
    for (size_t i = 0; i < n; ++i) {
      double cx = i + 0.5;
      double half = 0.3;
      int bx0 = static_cast<int>(std::lround(lay.px(cx - half)));
      int bx1 = static_cast<int>(std::lround(lay.px(cx + half)));
      int by = static_cast<int>(std::lround(lay.py(spec.bar_values[i])));
      int base = static_cast<int>(std::lround(lay.py(std::max(0.0, lay.yr.lo))));
      Rgb c = palette(i);
      draw_rect(img, bx0, std::min(by, base), bx1, std::max(by, base), c);
      if (i < spec.bar_err.size() && spec.bar_err[i] > 0) {
        int xm = (bx0 + bx1) / 2;
        int elo = static_cast<int>(
            std::lround(lay.py(spec.bar_values[i] - spec.bar_err[i])));
        int ehi = static_cast<int>(
            std::lround(lay.py(spec.bar_values[i] + spec.bar_err[i])));
        draw_line(img, xm, ehi, xm, elo, black);
        draw_line(img, xm - 3, ehi, xm + 3, ehi, black);
        draw_line(img, xm - 3, elo, xm + 3, elo, black);
      }
      if (i < spec.bar_labels.size()) {
        std::string label = spec.bar_labels[i];
        int slot = static_cast<int>(lay.px(i + 1) - lay.px(i));
        size_t fit = std::max<size_t>(1, static_cast<size_t>(slot / 6) - 1);
        if (label.size() > fit) label = label.substr(0, fit);
        int xm = static_cast<int>(std::lround(lay.px(cx)));
        draw_text(img, xm - text_width(label) / 2, y1 + 8, label, dark);
      }
    }
  } else {
    for (size_t si = 0; si < spec.series.size(); ++si) {
      const PlotSeries& s = spec.series[si];
      Rgb c = palette(si);
      if (!s.band.empty() && s.x.size() >= 2) {
        Rgb bc = lighten(c, 0.75);
        for (size_t i = 0; i + 1 < s.x.size(); ++i) {
          int ax = static_cast<int>(std::lround(lay.px(s.x[i])));
          int bx = static_cast<int>(std::lround(lay.px(s.x[i + 1])));
          if (bx <= ax) continue;
          for (int x = std::max(ax, x0); x <= std::min(bx, x1); ++x) {
            double f = bx == ax ? 0 : double(x - ax) / (bx - ax);
            double ym = s.y[i] + f * (s.y[i + 1] - s.y[i]);
            double bd = s.band[i] + f * (s.band[i + 1] - s.band[i]);
            int ylo = static_cast<int>(std::lround(lay.py(ym - bd)));
            int yhi = static_cast<int>(std::lround(lay.py(ym + bd)));
            for (int y = std::max(yhi, y0); y <= std::min(ylo, y1); ++y)
              put(img, x, y, bc);
          }
        }
      }
    }
    for (size_t si = 0; si < spec.series.size(); ++si) {
      const PlotSeries& s = spec.series[si];
      Rgb c = palette(si);
      for (size_t i = 0; i + 1 < s.x.size(); ++i)
        draw_line(img, static_cast<int>(std::lround(lay.px(s.x[i]))),
                  static_cast<int>(std::lround(lay.py(s.y[i]))),
                  static_cast<int>(std::lround(lay.px(s.x[i + 1]))),
                  static_cast<int>(std::lround(lay.py(s.y[i + 1]))), c);
      std::string label = s.label;
      if (!label.empty())
        draw_text(img, x1 - text_width(label),
                  y0 + 4 + static_cast<int>(si) * 10, label, c);
    }
  }

  draw_line(img, x0, y0, x0, y1, black);
  draw_line(img, x0, y1, x1, y1, black);
  if (!spec.title.empty())
    draw_text(img, (x0 + x1) / 2 - text_width(spec.title) / 2, 8, spec.title,
              black);
  if (!spec.xlabel.empty())
    draw_text(img, (x0 + x1) / 2 - text_width(spec.xlabel) / 2,
              spec.height - 12, spec.xlabel, dark);
  if (!spec.ylabel.empty()) draw_text(img, 4, 8, spec.ylabel, dark);
  return img;
}

std::string render_plot_svg(const PlotSpec& spec) {
  Layout lay = make_layout(spec);
  int x0 = lay.ml, x1 = spec.width - lay.mr;
  int y0 = lay.mt, y1 = spec.height - lay.mb;

  std::string out;
  auto rgb = [](Rgb c) {
    return "rgb(" + std::to_string(c[0]) + "," + std::to_string(c[1]) + "," +
           std::to_string(c[2]) + ")";
  };
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
         std::to_string(spec.width) + "\" height=\"" +
         std::to_string(spec.height) + "\">\n";
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  auto text = [&](double x, double y, const std::string& s,
                  const std::string& anchor, const std::string& fill) {
    out += "<text x=\"" + fmt_coord(x) + "\" y=\"" + fmt_coord(y) +
           "\" font-family=\"monospace\" font-size=\"11\" text-anchor=\"" +
           anchor + "\" fill=\"" + fill + "\">" + xml_escape(s) + "</text>\n";
  };
  auto line = [&](double ax, double ay, double bx, double by,
                  const std::string& stroke) {
    out += "<line x1=\"" + fmt_coord(ax) + "\" y1=\"" + fmt_coord(ay) +
           "\" x2=\"" + fmt_coord(bx) + "\" y2=\"" + fmt_coord(by) +
           "\" stroke=\"" + stroke + "\"/>\n";
  };

  for (double t : nice_ticks(lay.yr.lo, lay.yr.hi)) {
    double y = lay.py(t);
    line(x0, y, x1, y, "rgb(208,208,208)");
    text(x0 - 6, y + 3, fmt_num(t), "end", "rgb(64,64,64)");
  }

  if (spec.series.empty()) {
    for (size_t i = 0; i < spec.bar_values.size(); ++i) {
      double cx = i + 0.5, half = 0.3;
      double bx = lay.px(cx - half);
      double bw = lay.px(cx + half) - bx;
      double vy = lay.py(spec.bar_values[i]);
      double base = lay.py(std::max(0.0, lay.yr.lo));
      double top = std::min(vy, base);
      double h = std::abs(base - vy);
      out += "<rect x=\"" + fmt_coord(bx) + "\" y=\"" + fmt_coord(top) +
             "\" width=\"" + fmt_coord(bw) + "\" height=\"" + fmt_coord(h) +
             "\" fill=\"" + rgb(palette(i)) + "\"/>\n";
      if (i < spec.bar_err.size() && spec.bar_err[i] > 0) {
        double xm = lay.px(cx);
        double elo = lay.py(spec.bar_values[i] - spec.bar_err[i]);
        double ehi = lay.py(spec.bar_values[i] + spec.bar_err[i]);
        line(xm, ehi, xm, elo, "black");
        line(xm - 3, ehi, xm + 3, ehi, "black");
        line(xm - 3, elo, xm + 3, elo, "black");
      }
      if (i < spec.bar_labels.size())
        text(lay.px(cx), y1 + 14, spec.bar_labels[i], "middle",
             "rgb(64,64,64)");
    }
  } else {
    for (double t : nice_ticks(lay.xr.lo, lay.xr.hi)) {
      double x = lay.px(t);
      line(x, y1, x, y1 + 4, "rgb(64,64,64)");
      text(x, y1 + 16, fmt_num(t), "middle", "rgb(64,64,64)");
    }
    for (size_t si = 0; si < spec.series.size(); ++si) {
      const PlotSeries& s = spec.series[si];
      if (s.band.empty() || s.x.size() < 2) continue;
      std::string pts;
      for (size_t i = 0; i < s.x.size(); ++i)
        pts += fmt_coord(lay.px(s.x[i])) + "," +
               fmt_coord(lay.py(s.y[i] + s.band[i])) + " ";
      for (size_t i = s.x.size(); i-- > 0;)
        pts += fmt_coord(lay.px(s.x[i])) + "," +
               fmt_coord(lay.py(s.y[i] - s.band[i])) + " ";
      pts.pop_back();
      out += "<polygon points=\"" + pts + "\" fill=\"" +
             rgb(lighten(palette(si), 0.75)) + "\"/>\n";
    }
    for (size_t si = 0; si < spec.series.size(); ++si) {
      const PlotSeries& s = spec.series[si];
      if (s.x.empty()) continue;
      std::string pts;
      for (size_t i = 0; i < s.x.size(); ++i)
        pts += fmt_coord(lay.px(s.x[i])) + "," + fmt_coord(lay.py(s.y[i])) + " ";
      pts.pop_back();
      out += "<polyline points=\"" + pts + "\" fill=\"none\" stroke=\"" +
             rgb(palette(si)) + "\" stroke-width=\"1.5\"/>\n";
      if (!s.label.empty())
        text(x1, y0 + 10 + static_cast<double>(si) * 12, s.label, "end",
             rgb(palette(si)));
    }
  }

  line(x0, y0, x0, y1, "black");
  line(x0, y1, x1, y1, "black");
  if (!spec.title.empty())
    text((x0 + x1) / 2.0, 16, spec.title, "middle", "black");
  if (!spec.xlabel.empty())
    text((x0 + x1) / 2.0, spec.height - 6, spec.xlabel, "middle",
         "rgb(64,64,64)");
  if (!spec.ylabel.empty()) text(4, 16, spec.ylabel, "start", "rgb(64,64,64)");
  out += "</svg>\n";
  return out;
}

void write_plot(const PlotSpec& spec, const std::string& base) {
  write_png(base + ".png", render_plot_png(spec));
  write_text_file(base + ".svg", render_plot_svg(spec));
}

}  // namespace replab

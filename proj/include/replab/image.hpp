#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "replab/common.hpp"

namespace replab {

// Row-major, interleaved channels.
struct Image8 {
  int w = 0;
  int h = 0;
  int c = 3;
  std::vector<uint8_t> px;

  Image8() = default;
  Image8(int width, int height, int channels, uint8_t fill = 0)
      : w(width), h(height), c(channels),
        px(static_cast<size_t>(width) * height * channels, fill) {}

  uint8_t& at(int x, int y, int ch) {
    return px[(static_cast<size_t>(y) * w + x) * c + ch];
  }
  uint8_t at(int x, int y, int ch) const {
    return px[(static_cast<size_t>(y) * w + x) * c + ch];
  }
  size_t size() const { return px.size(); }
  bool same_shape(const Image8& o) const {
    return w == o.w && h == o.h && c == o.c;
  }
};

using Rgb = std::array<uint8_t, 3>;

void fill(Image8& img, Rgb color);
// Filled disc: pixels with (x-cx)^2 + (y-cy)^2 <= r^2, clipped to bounds.
void draw_disc(Image8& img, int cx, int cy, int r, Rgb color);
// Filled axis-aligned rectangle [x0, x1) x [y0, y1), clipped to bounds.
void draw_rect(Image8& img, int x0, int y0, int x1, int y1, Rgb color);
// Square of the given side with its centre at (cx, cy); side s covers
// [c - s/2, c - s/2 + s) (left-biased split for even sides).
void draw_square(Image8& img, int cx, int cy, int side, Rgb color);

Image8 read_png(const std::string& path);
// Minimal deterministic encoder (8-bit RGB or gray, fixed zlib settings,
// no ancillary chunks), so identical pixels give identical files.
void write_png(const std::string& path, const Image8& img);
std::vector<uint8_t> encode_png(const Image8& img);

}  // namespace replab

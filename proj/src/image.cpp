#include "replab/image.hpp"

#include <png.h>
#include <zlib.h>

#include <algorithm>
#include <cstdio>
#include <cstring>

namespace replab {

void fill(Image8& img, Rgb color) {
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x)
      for (int ch = 0; ch < img.c && ch < 3; ++ch)
        img.at(x, y, ch) = color[ch];
}

void draw_disc(Image8& img, int cx, int cy, int r, Rgb color) {
  int r2 = r * r;
  int y0 = std::max(0, cy - r), y1 = std::min(img.h - 1, cy + r);
  int x0 = std::max(0, cx - r), x1 = std::min(img.w - 1, cx + r);
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      int dx = x - cx, dy = y - cy;
      if (dx * dx + dy * dy <= r2) {
        for (int ch = 0; ch < img.c && ch < 3; ++ch)
          img.at(x, y, ch) = color[ch];
      }
    }
  }
}

void draw_rect(Image8& img, int x0, int y0, int x1, int y1, Rgb color) {
  x0 = std::max(0, x0);
  y0 = std::max(0, y0);
  x1 = std::min(img.w, x1);
  y1 = std::min(img.h, y1);
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x)
      for (int ch = 0; ch < img.c && ch < 3; ++ch)
        img.at(x, y, ch) = color[ch];
}

void draw_square(Image8& img, int cx, int cy, int side, Rgb color) {
  int half = side / 2;
  draw_rect(img, cx - half, cy - half, cx - half + side, cy - half + side,
            color);
}

Image8 read_png(const std::string& path) {
  FILE* fp = std::fopen(path.c_str(), "rb");
  if (!fp) throw IoError("cannot open png: " + path);
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    if (png) png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    throw IoError("libpng init failure");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    throw IoError("png decode failure: " + path);
  }
  png_init_io(png, fp);
  png_read_info(png, info);

  png_uint_32 w = png_get_image_width(png, info);
  png_uint_32 h = png_get_image_height(png, info);
  int color = png_get_color_type(png, info);
  int depth = png_get_bit_depth(png, info);

  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA)
    png_set_gray_to_rgb(png);
  png_set_strip_alpha(png);
  png_set_interlace_handling(png);
  png_read_update_info(png, info);

  Image8 img(static_cast<int>(w), static_cast<int>(h), 3);
  std::vector<png_bytep> rows(h);
  for (png_uint_32 y = 0; y < h; ++y)
    rows[y] = img.px.data() + static_cast<size_t>(y) * w * 3;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  std::fclose(fp);
  return img;
}

namespace {

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(static_cast<uint8_t>(v >> 24));
  out.push_back(static_cast<uint8_t>(v >> 16));
  out.push_back(static_cast<uint8_t>(v >> 8));
  out.push_back(static_cast<uint8_t>(v));
}

void put_chunk(std::vector<uint8_t>& out, const char type[4],
               const std::vector<uint8_t>& data) {
  put_u32(out, static_cast<uint32_t>(data.size()));
  size_t start = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), data.begin(), data.end());
  uint32_t crc = static_cast<uint32_t>(
      crc32(0, out.data() + start, static_cast<uInt>(out.size() - start)));
  put_u32(out, crc);
}

}  // namespace

std::vector<uint8_t> encode_png(const Image8& img) {
  if (img.c != 1 && img.c != 3)
    throw ValidationError("png encoder supports 1 or 3 channels");
  const size_t stride = static_cast<size_t>(img.w) * img.c;
  std::vector<uint8_t> raw;
  raw.reserve((stride + 1) * img.h);
  for (int y = 0; y < img.h; ++y) {
    raw.push_back(0);  // filter: none
    const uint8_t* row = img.px.data() + static_cast<size_t>(y) * stride;
    raw.insert(raw.end(), row, row + stride);
  }

  uLongf bound = compressBound(static_cast<uLong>(raw.size()));
  std::vector<uint8_t> z(bound);
  if (compress2(z.data(), &bound, raw.data(), static_cast<uLong>(raw.size()),
                6) != Z_OK)
    throw IoError("zlib compression failure");
  z.resize(bound);

  std::vector<uint8_t> out = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  std::vector<uint8_t> ihdr;
  put_u32(ihdr, static_cast<uint32_t>(img.w));
  put_u32(ihdr, static_cast<uint32_t>(img.h));
  ihdr.push_back(8);                          // bit depth
  ihdr.push_back(img.c == 3 ? 2 : 0);         // color type
  ihdr.push_back(0);                          // compression
  ihdr.push_back(0);                          // filter
  ihdr.push_back(0);                          // interlace
  put_chunk(out, "IHDR", ihdr);
  put_chunk(out, "IDAT", z);
  put_chunk(out, "IEND", {});
  return out;
}

void write_png(const std::string& path, const Image8& img) {
  auto bytes = encode_png(img);
  write_binary_file(path, bytes.data(), bytes.size());
}

}  // namespace replab

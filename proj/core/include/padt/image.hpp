#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "padt/geometry.hpp"

namespace padt {

struct Rgb {
  uint8_t r = 0, g = 0, b = 0;
};

// Interleaved 8-bit RGB image, row-major.
struct Image {
  int height = 0;
  int width = 0;
  std::vector<uint8_t> data;  // size height * width * 3

  Image() = default;
  Image(int h, int w, Rgb fill = {0, 0, 0});

  Rgb get(int x, int y) const;
  void set(int x, int y, Rgb c);

  void fill_rect(const PixelRect& r, Rgb c);
  void fill_circle(int cx, int cy, int radius, Rgb c);
  void fill_triangle(int x0, int y0, int x1, int y1, int x2, int y2, Rgb c);
  // 1px outline, clipped to the image.
  void draw_rect_outline(const PixelRect& r, Rgb c);
  // Alpha-blend color over pixels where mask is set.
  void blend_mask(const Mask2D& mask, Rgb c, double alpha);
};

void write_png(const std::string& path, const Image& img);
Image read_png(const std::string& path);

}  // namespace padt

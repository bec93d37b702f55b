#include "padt/image.hpp"

#include <png.h>

#include <algorithm>
#include <cstdio>
#include <memory>

#include "padt/errors.hpp"

namespace padt {

Image::Image(int h, int w, Rgb fill) : height(h), width(w) {
  data.resize(size_t(h) * w * 3);
  for (size_t i = 0; i < data.size(); i += 3) {
    data[i] = fill.r;
    data[i + 1] = fill.g;
    data[i + 2] = fill.b;
  }
}

Rgb Image::get(int x, int y) const {
  const size_t i = (size_t(y) * width + x) * 3;
  return {data[i], data[i + 1], data[i + 2]};
}

void Image::set(int x, int y, Rgb c) {
  const size_t i = (size_t(y) * width + x) * 3;
  data[i] = c.r;
  data[i + 1] = c.g;
  data[i + 2] = c.b;
}

void Image::fill_rect(const PixelRect& r, Rgb c) {
  const int x0 = std::max(0, r.x0), x1 = std::min(width, r.x1);
  const int y0 = std::max(0, r.y0), y1 = std::min(height, r.y1);
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) set(x, y, c);
}

void Image::fill_circle(int cx, int cy, int radius, Rgb c) {
  const long long r2 = static_cast<long long>(radius) * radius;
  const int x0 = std::max(0, cx - radius), x1 = std::min(width, cx + radius + 1);
  const int y0 = std::max(0, cy - radius), y1 = std::min(height, cy + radius + 1);
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) {
      const long long dx = x - cx, dy = y - cy;
      if (dx * dx + dy * dy <= r2) set(x, y, c);
    }
}

void Image::fill_triangle(int x0, int y0, int x1, int y1, int x2, int y2,
                          Rgb c) {
  const int lo_x = std::max(0, std::min({x0, x1, x2}));
  const int hi_x = std::min(width - 1, std::max({x0, x1, x2}));
  const int lo_y = std::max(0, std::min({y0, y1, y2}));
  const int hi_y = std::min(height - 1, std::max({y0, y1, y2}));
  auto edge = [](int ax, int ay, int bx, int by, int px, int py) {
    return static_cast<long long>(bx - ax) * (py - ay) -
           static_cast<long long>(by - ay) * (px - ax);
  };
  for (int y = lo_y; y <= hi_y; ++y)
    for (int x = lo_x; x <= hi_x; ++x) {
      const long long e0 = edge(x0, y0, x1, y1, x, y);
      const long long e1 = edge(x1, y1, x2, y2, x, y);
      const long long e2 = edge(x2, y2, x0, y0, x, y);
      if ((e0 >= 0 && e1 >= 0 && e2 >= 0) || (e0 <= 0 && e1 <= 0 && e2 <= 0))
        set(x, y, c);
    }
}

void Image::draw_rect_outline(const PixelRect& r, Rgb c) {
  for (int x = std::max(0, r.x0); x < std::min(width, r.x1); ++x) {
    if (r.y0 >= 0 && r.y0 < height) set(x, r.y0, c);
    if (r.y1 - 1 >= 0 && r.y1 - 1 < height) set(x, r.y1 - 1, c);
  }
  for (int y = std::max(0, r.y0); y < std::min(height, r.y1); ++y) {
    if (r.x0 >= 0 && r.x0 < width) set(r.x0, y, c);
    if (r.x1 - 1 >= 0 && r.x1 - 1 < width) set(r.x1 - 1, y, c);
  }
}

void Image::blend_mask(const Mask2D& mask, Rgb c, double alpha) {
  if (mask.height != height || mask.width != width)
    throw ShapeError("Image::blend_mask: mask size mismatch");
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      if (!mask.at(y, x)) continue;
      const Rgb p = get(x, y);
      auto mixc = [&](uint8_t a, uint8_t b) {
        return static_cast<uint8_t>(a + alpha * (b - a) + 0.5);
      };
      set(x, y, {mixc(p.r, c.r), mixc(p.g, c.g), mixc(p.b, c.b)});
    }
}

void write_png(const std::string& path, const Image& img) {
  std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.c_str(), "wb"),
                                           std::fclose);
  if (!fp) throw IoError("write_png: cannot open " + path);
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("write_png: png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("write_png: png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("write_png: libpng error writing " + path);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, img.width, img.height, 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_bytep> rows(img.height);
  for (int y = 0; y < img.height; ++y)
    rows[y] = const_cast<png_bytep>(&img.data[size_t(y) * img.width * 3]);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Image read_png(const std::string& path) {
  std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.c_str(), "rb"),
                                           std::fclose);
  if (!fp) throw IoError("read_png: cannot open " + path);
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("read_png: png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("read_png: png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("read_png: libpng error reading " + path);
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);
  // Normalize everything to 8-bit RGB.
  png_set_strip_16(png);
  png_set_palette_to_rgb(png);
  png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_set_strip_alpha(png);
  if (png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY ||
      png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY_ALPHA)
    png_set_gray_to_rgb(png);
  png_read_update_info(png, info);

  Image img(static_cast<int>(png_get_image_height(png, info)),
            static_cast<int>(png_get_image_width(png, info)));
  std::vector<png_bytep> rows(img.height);
  for (int y = 0; y < img.height; ++y)
    rows[y] = &img.data[size_t(y) * img.width * 3];
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

}  // namespace padt

#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

namespace padt {

// Axis-aligned box, corner form. Coordinates can be normalized [0,1] or
// pixels; every helper is scale-agnostic except where noted.
struct Box {
  double x0 = 0.0;
  double y0 = 0.0;
  double x1 = 0.0;
  double y1 = 0.0;

  double w() const { return x1 - x0; }
  double h() const { return y1 - y0; }
  double area() const { return std::max(0.0, w()) * std::max(0.0, h()); }

  // Reorders the corners so x0 <= x1 and y0 <= y1.
  Box canonical() const {
    return {std::min(x0, x1), std::min(y0, y1), std::max(x0, x1),
            std::max(y0, y1)};
  }
  bool is_canonical() const { return x0 <= x1 && y0 <= y1; }
};

double box_intersection(const Box& a, const Box& b);
double box_union(const Box& a, const Box& b);
// IoU of two canonical boxes. Empty union gives 0.
double box_iou(const Box& a, const Box& b);
// Generalized IoU: IoU - (hull - union) / hull, in [-1, 1].
double box_giou(const Box& a, const Box& b);

// Integer rectangle over pixel coordinates, half-open: covers columns
// [x0, x1) and rows [y0, y1).
struct PixelRect {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;

  int w() const { return x1 - x0; }
  int h() const { return y1 - y0; }
  long long area() const {
    return static_cast<long long>(std::max(0, w())) * std::max(0, h());
  }
  bool contains(int x, int y) const {
    return x >= x0 && x < x1 && y >= y0 && y < y1;
  }
};

bool rects_intersect(const PixelRect& a, const PixelRect& b);

// Dense binary mask, row-major; (y, x) indexing.
struct Mask2D {
  int height = 0;
  int width = 0;
  std::vector<uint8_t> data;  // 0 or 1, size height * width

  Mask2D() = default;
  Mask2D(int h, int w) : height(h), width(w), data(size_t(h) * w, 0) {}

  uint8_t& at(int y, int x) { return data[size_t(y) * width + x]; }
  uint8_t at(int y, int x) const { return data[size_t(y) * width + x]; }

  long long count() const;
  bool any_in(const PixelRect& r) const;
  // Tight bounding rect of the set pixels, half-open. Empty mask gives a
  // zero-area rect at the origin.
  PixelRect bounding_rect() const;
};

long long mask_intersection(const Mask2D& a, const Mask2D& b);
long long mask_union(const Mask2D& a, const Mask2D& b);
double mask_iou(const Mask2D& a, const Mask2D& b);

// Nearest-neighbour resize; used to compare masks across resolutions.
Mask2D resize_nearest(const Mask2D& m, int out_h, int out_w);

}  // namespace padt

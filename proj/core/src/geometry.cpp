#include "padt/geometry.hpp"

#include "padt/errors.hpp"

namespace padt {

double box_intersection(const Box& a, const Box& b) {
  const double ix = std::min(a.x1, b.x1) - std::max(a.x0, b.x0);
  const double iy = std::min(a.y1, b.y1) - std::max(a.y0, b.y0);
  if (ix <= 0.0 || iy <= 0.0) return 0.0;
  return ix * iy;
}

double box_union(const Box& a, const Box& b) {
  return a.area() + b.area() - box_intersection(a, b);
}

double box_iou(const Box& a, const Box& b) {
  const double u = box_union(a, b);
  if (u <= 0.0) return 0.0;
  return box_intersection(a, b) / u;
}

double box_giou(const Box& a, const Box& b) {
  const double u = box_union(a, b);
  const double hull_w = std::max(a.x1, b.x1) - std::min(a.x0, b.x0);
  const double hull_h = std::max(a.y1, b.y1) - std::min(a.y0, b.y0);
  const double c = std::max(0.0, hull_w) * std::max(0.0, hull_h);
  const double iou = u > 0.0 ? box_intersection(a, b) / u : 0.0;
  if (c <= 0.0) return iou;
  return iou - (c - u) / c;
}

bool rects_intersect(const PixelRect& a, const PixelRect& b) {
  return std::max(a.x0, b.x0) < std::min(a.x1, b.x1) &&
         std::max(a.y0, b.y0) < std::min(a.y1, b.y1);
}

long long Mask2D::count() const {
  long long n = 0;
  for (uint8_t v : data) n += v != 0;
  return n;
}

bool Mask2D::any_in(const PixelRect& r) const {
  const int x0 = std::max(0, r.x0), x1 = std::min(width, r.x1);
  const int y0 = std::max(0, r.y0), y1 = std::min(height, r.y1);
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x)
      if (at(y, x)) return true;
  return false;
}

PixelRect Mask2D::bounding_rect() const {
  int x0 = width, y0 = height, x1 = 0, y1 = 0;
  bool seen = false;
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      if (at(y, x)) {
        seen = true;
        x0 = std::min(x0, x);
        y0 = std::min(y0, y);
        x1 = std::max(x1, x + 1);
        y1 = std::max(y1, y + 1);
      }
  if (!seen) return {0, 0, 0, 0};
  return {x0, y0, x1, y1};
}

long long mask_intersection(const Mask2D& a, const Mask2D& b) {
  if (a.height != b.height || a.width != b.width)
    throw ShapeError("mask_intersection: size mismatch");
  long long n = 0;
  for (size_t i = 0; i < a.data.size(); ++i) n += (a.data[i] && b.data[i]);
  return n;
}

long long mask_union(const Mask2D& a, const Mask2D& b) {
  if (a.height != b.height || a.width != b.width)
    throw ShapeError("mask_union: size mismatch");
  long long n = 0;
  for (size_t i = 0; i < a.data.size(); ++i) n += (a.data[i] || b.data[i]);
  return n;
}

double mask_iou(const Mask2D& a, const Mask2D& b) {
  const long long u = mask_union(a, b);
  if (u == 0) return 0.0;
  return static_cast<double>(mask_intersection(a, b)) / static_cast<double>(u);
}

Mask2D resize_nearest(const Mask2D& m, int out_h, int out_w) {
  if (m.height <= 0 || m.width <= 0)
    throw ShapeError("resize_nearest: empty source mask");
  Mask2D out(out_h, out_w);
  for (int y = 0; y < out_h; ++y) {
    int sy = static_cast<int>((static_cast<long long>(y) * m.height) / out_h);
    sy = std::min(sy, m.height - 1);
    for (int x = 0; x < out_w; ++x) {
      int sx = static_cast<int>((static_cast<long long>(x) * m.width) / out_w);
      sx = std::min(sx, m.width - 1);
      out.at(y, x) = m.at(sy, sx);
    }
  }
  return out;
}

}  // namespace padt

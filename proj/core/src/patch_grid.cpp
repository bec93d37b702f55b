#include "padt/patch_grid.hpp"

#include <string>

#include "padt/errors.hpp"

namespace padt {

PatchGrid::PatchGrid(int height, int width, int patch, int merge)
    : height_(height), width_(width), patch_(patch), merge_(merge) {
  if (patch <= 0) throw DimensionError("PatchGrid: patch must be positive");
  if (merge <= 0) throw DimensionError("PatchGrid: merge must be positive");
  const int cell = patch * merge;
  if (height <= 0 || height % cell != 0)
    throw DimensionError("PatchGrid: height " + std::to_string(height) +
                         " not divisible by patch*merge " +
                         std::to_string(cell));
  if (width <= 0 || width % cell != 0)
    throw DimensionError("PatchGrid: width " + std::to_string(width) +
                         " not divisible by patch*merge " +
                         std::to_string(cell));
  rows_raw_ = height / patch;
  cols_raw_ = width / patch;
  rows_merged_ = height / cell;
  cols_merged_ = width / cell;
}

void PatchGrid::check_raw(int n) const {
  if (n < 0 || n >= n_raw())
    throw IndexError("PatchGrid: raw patch index " + std::to_string(n) +
                     " out of range [0, " + std::to_string(n_raw()) + ")");
}

void PatchGrid::check_merged(int n) const {
  if (n < 0 || n >= n_merged())
    throw IndexError("PatchGrid: merged patch index " + std::to_string(n) +
                     " out of range [0, " + std::to_string(n_merged()) + ")");
}

PixelRect PatchGrid::raw_patch_rect(int n) const {
  check_raw(n);
  const int row = n / cols_raw_;
  const int col = n % cols_raw_;
  return {col * patch_, row * patch_, (col + 1) * patch_, (row + 1) * patch_};
}

PixelRect PatchGrid::merged_patch_rect(int n) const {
  check_merged(n);
  const int cell = patch_ * merge_;
  const int row = n / cols_merged_;
  const int col = n % cols_merged_;
  return {col * cell, row * cell, (col + 1) * cell, (row + 1) * cell};
}

std::vector<int> PatchGrid::raw_indices_of_merged(int n) const {
  check_merged(n);
  const int row0 = (n / cols_merged_) * merge_;
  const int col0 = (n % cols_merged_) * merge_;
  std::vector<int> out;
  out.reserve(size_t(merge_) * merge_);
  for (int dr = 0; dr < merge_; ++dr)
    for (int dc = 0; dc < merge_; ++dc)
      out.push_back((row0 + dr) * cols_raw_ + (col0 + dc));
  return out;
}

int PatchGrid::merged_index_at(int x, int y) const {
  if (x < 0 || x >= width_ || y < 0 || y >= height_)
    throw IndexError("PatchGrid: pixel (" + std::to_string(x) + ", " +
                     std::to_string(y) + ") outside image");
  const int cell = patch_ * merge_;
  return (y / cell) * cols_merged_ + (x / cell);
}

void PatchGrid::merged_center(int n, double* cx, double* cy) const {
  const PixelRect r = merged_patch_rect(n);
  *cx = 0.5 * (r.x0 + r.x1) / width_;
  *cy = 0.5 * (r.y0 + r.y1) / height_;
}

std::vector<int> PatchGrid::foreground_vrts(const Mask2D& mask) const {
  if (mask.height != height_ || mask.width != width_)
    throw ShapeError("PatchGrid::foreground_vrts: mask " +
                     std::to_string(mask.height) + "x" +
                     std::to_string(mask.width) + " does not match grid " +
                     std::to_string(height_) + "x" + std::to_string(width_));
  std::vector<int> out;
  for (int n = 0; n < n_merged(); ++n)
    if (mask.any_in(merged_patch_rect(n))) out.push_back(n);
  if (out.empty())
    throw EmptyRegionError("PatchGrid::foreground_vrts: mask has no pixels");
  return out;
}

std::vector<int> PatchGrid::foreground_vrts(const PixelRect& box) const {
  if (box.x0 < 0 || box.y0 < 0 || box.x1 > width_ || box.y1 > height_ ||
      box.w() <= 0 || box.h() <= 0)
    throw EmptyRegionError(
        "PatchGrid::foreground_vrts: box (" + std::to_string(box.x0) + "," +
        std::to_string(box.y0) + "," + std::to_string(box.x1) + "," +
        std::to_string(box.y1) + ") degenerate or outside " +
        std::to_string(width_) + "x" + std::to_string(height_));
  std::vector<int> out;
  for (int n = 0; n < n_merged(); ++n)
    if (rects_intersect(box, merged_patch_rect(n))) out.push_back(n);
  return out;
}

}  // namespace padt

#pragma once

#include <vector>

#include "padt/geometry.hpp"

namespace padt {

// Patch bookkeeping for one image: raw p x p patches plus the merged grid
// obtained by fusing merge x merge raw blocks. All indices are row-major
// raster order (left to right, top to bottom).
class PatchGrid {
 public:
  // Throws DimensionError when height/width is not divisible by
  // patch * merge, naming the offending axis.
  PatchGrid(int height, int width, int patch, int merge);

  int height() const { return height_; }
  int width() const { return width_; }
  int patch() const { return patch_; }
  int merge() const { return merge_; }

  int rows_raw() const { return rows_raw_; }
  int cols_raw() const { return cols_raw_; }
  int n_raw() const { return rows_raw_ * cols_raw_; }

  int rows_merged() const { return rows_merged_; }
  int cols_merged() const { return cols_merged_; }
  int n_merged() const { return rows_merged_ * cols_merged_; }

  // Pixel footprint of a raw patch, half-open. Throws IndexError when out
  // of range.
  PixelRect raw_patch_rect(int n) const;
  // Pixel footprint of a merged patch, half-open.
  PixelRect merged_patch_rect(int n) const;

  // The merge*merge raw patch indices fused into merged patch n, in
  // row-major order within the block (NW, NE, SW, SE when merge == 2).
  std::vector<int> raw_indices_of_merged(int n) const;

  // Merged patch index covering pixel (x, y). Throws IndexError when the
  // pixel is outside the image.
  int merged_index_at(int x, int y) const;

  // Center of merged patch n in normalized [0,1] image coordinates.
  void merged_center(int n, double* cx, double* cy) const;

  // Foreground VRT indices: merged patches whose pixel rect contains at
  // least one set pixel of the mask, ascending. The mask must match the
  // grid size; an all-zero mask throws EmptyRegionError.
  std::vector<int> foreground_vrts(const Mask2D& mask) const;
  // Box fallback: merged patches whose rect intersects the box interior.
  // The box must lie within the image and have positive area.
  std::vector<int> foreground_vrts(const PixelRect& box) const;

 private:
  void check_raw(int n) const;
  void check_merged(int n) const;

  int height_, width_, patch_, merge_;
  int rows_raw_, cols_raw_;
  int rows_merged_, cols_merged_;
};

}  // namespace padt

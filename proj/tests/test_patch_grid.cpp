#include <doctest.h>

#include <set>

#include "padt/errors.hpp"
#include "padt/patch_grid.hpp"
#include "padt/rng.hpp"

using namespace padt;

TEST_SUITE("patch_grid") {

TEST_CASE("counts for the default layout") {
  PatchGrid g(56, 56, 14, 2);
  CHECK(g.n_raw() == 16);
  CHECK(g.rows_raw() == 4);
  CHECK(g.n_merged() == 4);
  CHECK(g.rows_merged() == 2);

  PatchGrid wide(112, 56, 14, 2);
  CHECK(wide.n_raw() == 32);
  CHECK(wide.rows_merged() == 4);
  CHECK(wide.cols_merged() == 2);
}

TEST_CASE("divisibility errors name the axis") {
  CHECK_THROWS_AS(PatchGrid(57, 56, 14, 2), DimensionError);
  CHECK_THROWS_AS(PatchGrid(56, 60, 14, 2), DimensionError);
  try {
    PatchGrid(57, 56, 14, 2);
  } catch (const DimensionError& e) {
    CHECK(std::string(e.what()).find("height") != std::string::npos);
  }
  try {
    PatchGrid(56, 60, 14, 2);
  } catch (const DimensionError& e) {
    CHECK(std::string(e.what()).find("width") != std::string::npos);
  }
}

TEST_CASE("raster order of raw patches") {
  PatchGrid g(56, 56, 14, 2);
  // Index 1 sits immediately right of index 0, index cols_raw directly
  // below it.
  const PixelRect r0 = g.raw_patch_rect(0);
  const PixelRect r1 = g.raw_patch_rect(1);
  const PixelRect r4 = g.raw_patch_rect(g.cols_raw());
  CHECK(r0.x0 == 0);
  CHECK(r0.y0 == 0);
  CHECK(r1.x0 == 14);
  CHECK(r1.y0 == 0);
  CHECK(r4.x0 == 0);
  CHECK(r4.y0 == 14);
  CHECK_THROWS_AS(g.raw_patch_rect(16), IndexError);
  CHECK_THROWS_AS(g.raw_patch_rect(-1), IndexError);
}

TEST_CASE("merged patches fuse merge^2 raws in block raster order") {
  PatchGrid g(56, 56, 14, 2);
  const auto raws = g.raw_indices_of_merged(1);  // top-right merged cell
  REQUIRE(raws.size() == 4);
  CHECK(raws[0] == 2);  // NW of the block
  CHECK(raws[1] == 3);  // NE
  CHECK(raws[2] == 6);  // SW
  CHECK(raws[3] == 7);  // SE
  const PixelRect m = g.merged_patch_rect(1);
  CHECK(m.x0 == 28);
  CHECK(m.y0 == 0);
  CHECK(m.x1 == 56);
  CHECK(m.y1 == 28);
}

TEST_CASE("merged_index_at agrees with the rects") {
  PatchGrid g(112, 112, 14, 2);
  for (int n = 0; n < g.n_merged(); ++n) {
    const PixelRect r = g.merged_patch_rect(n);
    CHECK(g.merged_index_at(r.x0, r.y0) == n);
    CHECK(g.merged_index_at(r.x1 - 1, r.y1 - 1) == n);
  }
  CHECK_THROWS_AS(g.merged_index_at(112, 0), IndexError);
}

TEST_CASE("merged centers are normalized cell midpoints") {
  PatchGrid g(56, 56, 14, 2);
  double cx, cy;
  g.merged_center(0, &cx, &cy);
  CHECK(cx == doctest::Approx(0.25));
  CHECK(cy == doctest::Approx(0.25));
  g.merged_center(3, &cx, &cy);
  CHECK(cx == doctest::Approx(0.75));
  CHECK(cy == doctest::Approx(0.75));
}

TEST_CASE("foreground from mask matches a per-cell scan") {
  Rng rng(99);
  PatchGrid g(56, 56, 14, 2);
  for (int trial = 0; trial < 50; ++trial) {
    Mask2D mask(56, 56);
    const int n_px = 1 + static_cast<int>(rng.below(40));
    for (int i = 0; i < n_px; ++i)
      mask.at(static_cast<int>(rng.below(56)),
              static_cast<int>(rng.below(56))) = 1;
    const auto got = g.foreground_vrts(mask);

    std::set<int> expect;
    for (int y = 0; y < 56; ++y)
      for (int x = 0; x < 56; ++x)
        if (mask.at(y, x)) expect.insert(g.merged_index_at(x, y));
    REQUIRE(got.size() == expect.size());
    CHECK(std::equal(got.begin(), got.end(), expect.begin()));
    // ascending
    for (size_t i = 1; i < got.size(); ++i) CHECK(got[i - 1] < got[i]);
  }
}

TEST_CASE("empty foreground throws") {
  PatchGrid g(56, 56, 14, 2);
  Mask2D empty(56, 56);
  CHECK_THROWS_AS(g.foreground_vrts(empty), EmptyRegionError);
  Mask2D wrong(28, 28);
  CHECK_THROWS_AS(g.foreground_vrts(wrong), ShapeError);
}

TEST_CASE("foreground from a box uses rect intersection") {
  PatchGrid g(56, 56, 14, 2);
  // Box straddling all four merged cells.
  const auto all = g.foreground_vrts(PixelRect{20, 20, 36, 36});
  CHECK(all == std::vector<int>{0, 1, 2, 3});
  // Box inside cell 0 only.
  const auto one = g.foreground_vrts(PixelRect{0, 0, 10, 10});
  CHECK(one == std::vector<int>{0});
  CHECK_THROWS_AS(g.foreground_vrts(PixelRect{10, 10, 10, 20}),
                  EmptyRegionError);
  CHECK_THROWS_AS(g.foreground_vrts(PixelRect{-2, 0, 10, 10}),
                  EmptyRegionError);
}

}  // TEST_SUITE

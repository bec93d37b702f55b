#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "padt/data.hpp"
#include "padt/errors.hpp"
#include "padt/rng.hpp"

using namespace padt;
namespace fs = std::filesystem;

namespace {

constexpr Rgb kBackground{28, 28, 30};

bool same_rgb(Rgb a, Rgb b) { return a.r == b.r && a.g == b.g && a.b == b.b; }

fs::path fresh_dir(const std::string& tag) {
  const fs::path dir = fs::temp_directory_path() / ("padt_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

Box rect_to_box(const PixelRect& r, int h, int w) {
  return Box{static_cast<double>(r.x0) / w, static_cast<double>(r.y0) / h,
             static_cast<double>(r.x1) / w, static_cast<double>(r.y1) / h};
}

}  // namespace

TEST_SUITE("data") {

TEST_CASE("scene generation is deterministic per seed") {
  const SceneProfile profile;
  const auto a = generate_scene(917, profile);
  const auto b = generate_scene(917, profile);
  CHECK(a.image.data == b.image.data);
  REQUIRE(a.ann.objects.size() == b.ann.objects.size());
  for (size_t i = 0; i < a.ann.objects.size(); ++i) {
    CHECK(a.ann.objects[i].category == b.ann.objects[i].category);
    CHECK(a.ann.objects[i].box.x0 == b.ann.objects[i].box.x0);
    CHECK(a.ann.objects[i].mask.data == b.ann.objects[i].mask.data);
  }
  bool any_differs = false;
  for (uint64_t s = 0; s < 5 && !any_differs; ++s)
    any_differs = generate_scene(s, profile).image.data != a.image.data;
  CHECK(any_differs);
}

TEST_CASE("scenes keep their promises across many seeds") {
  const SceneProfile profile;
  for (uint64_t seed = 0; seed < 120; ++seed) {
    const auto scene = generate_scene(seed, profile);
    const auto& ann = scene.ann;
    REQUIRE(ann.image_h == profile.image_h);
    REQUIRE(ann.image_w == profile.image_w);
    REQUIRE(ann.objects.size() >= static_cast<size_t>(profile.min_objects));
    REQUIRE(ann.objects.size() <= static_cast<size_t>(profile.max_objects));

    std::set<std::string> cats;
    for (const auto& obj : ann.objects) {
      REQUIRE(obj.has_mask);
      REQUIRE(obj.mask.height == profile.image_h);
      REQUIRE(obj.mask.width == profile.image_w);
      CHECK(obj.mask.count() >= 4);
      CHECK(obj.phrase == "the " + obj.category);
      cats.insert(obj.category);

      // the recorded box is the tight bound of the visible mask
      const Box tight = rect_to_box(obj.mask.bounding_rect(), ann.image_h,
                                    ann.image_w);
      CHECK(obj.box.x0 == doctest::Approx(tight.x0).epsilon(1e-12));
      CHECK(obj.box.y0 == doctest::Approx(tight.y0).epsilon(1e-12));
      CHECK(obj.box.x1 == doctest::Approx(tight.x1).epsilon(1e-12));
      CHECK(obj.box.y1 == doctest::Approx(tight.y1).epsilon(1e-12));
    }
    CHECK(cats.size() == ann.objects.size());  // unique categories
  }
}

TEST_CASE("visible masks partition the painted pixels") {
  const SceneProfile profile;
  for (uint64_t seed = 200; seed < 240; ++seed) {
    const auto scene = generate_scene(seed, profile);
    for (int y = 0; y < scene.ann.image_h; ++y)
      for (int x = 0; x < scene.ann.image_w; ++x) {
        int owners = 0;
        for (const auto& obj : scene.ann.objects)
          owners += obj.mask.at(y, x) != 0;
        REQUIRE(owners <= 1);
        const bool painted = !same_rgb(scene.image.get(x, y), kBackground);
        REQUIRE(painted == (owners == 1));
      }
  }
}

TEST_CASE("impossible profiles give up loudly") {
  SceneProfile profile;
  profile.min_objects = 4;
  profile.max_objects = 4;
  profile.min_size = 40;
  profile.max_size = 40;
  profile.max_overlap_iou = 0.0;
  CHECK_THROWS_AS(generate_scene(3, profile), ConfigError);
}

TEST_CASE("palette categories cover the color-kind grid") {
  const auto cats = all_palette_categories();
  CHECK(cats.size() == palette_colors().size() * shape_kinds().size());
  CHECK(std::find(cats.begin(), cats.end(), "red square") != cats.end());
  CHECK(std::find(cats.begin(), cats.end(), "cyan triangle") != cats.end());
  const std::set<std::string> unique(cats.begin(), cats.end());
  CHECK(unique.size() == cats.size());
}

TEST_CASE("rle round-trips random masks and leads with background") {
  Rng rng(55);
  for (int trial = 0; trial < 50; ++trial) {
    Mask2D mask(7, 11);
    for (auto& v : mask.data) v = rng.below(3) == 0 ? 1 : 0;
    const auto counts = rle_encode(mask);
    const Mask2D back = rle_decode(7, 11, counts);
    CHECK(back.data == mask.data);
    long long total = 0;
    for (int c : counts) {
      CHECK(c >= 0);
      total += c;
    }
    CHECK(total == 7 * 11);
    if (mask.data[0] == 1) CHECK(counts[0] == 0);
  }
  CHECK_THROWS_AS(rle_decode(4, 4, {3, 2}), ShapeError);
  CHECK_THROWS_AS(rle_decode(2, 2, {5}), ShapeError);
}

TEST_CASE("scene datasets round-trip through disk") {
  const auto dir = fresh_dir("dataset_rt");
  std::vector<GeneratedScene> scenes;
  for (uint64_t s = 0; s < 3; ++s) scenes.push_back(generate_scene(s, {}));
  write_scene_dataset(dir.string(), scenes);
  CHECK(fs::exists(dir / "scenes.jsonl"));
  CHECK(fs::exists(dir / "images" / "scene_00000.png"));

  const auto back = read_scene_dataset(dir.string());
  REQUIRE(back.size() == scenes.size());
  for (size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].image.data == scenes[i].image.data);
    REQUIRE(back[i].ann.objects.size() == scenes[i].ann.objects.size());
    for (size_t j = 0; j < back[i].ann.objects.size(); ++j) {
      const auto& p = back[i].ann.objects[j];
      const auto& q = scenes[i].ann.objects[j];
      CHECK(p.category == q.category);
      CHECK(p.phrase == q.phrase);
      CHECK(p.mask.data == q.mask.data);
      CHECK(p.box.x0 == doctest::Approx(q.box.x0).epsilon(1e-9));
      CHECK(p.box.y1 == doctest::Approx(q.box.y1).epsilon(1e-9));
    }
  }
  fs::remove_all(dir);
}

TEST_CASE("coco ingestion: polygons, rle, crowd and damage control") {
  const auto dir = fresh_dir("coco_fixture");
  fs::create_directories(dir / "imgs");
  write_png((dir / "imgs" / "img1.png").string(), Image(8, 8, {90, 90, 90}));
  write_png((dir / "imgs" / "img3.png").string(),
            Image(16, 16, {10, 120, 70}));

  // counts "0X18XO" unpacks to [0, 40, 8, 16]: continuation chunks, the
  // sign-extend guard, and the two-back delta all on one string.
  const std::string json_text = R"({
    "images": [
      {"id": 1, "file_name": "img1.png", "height": 8, "width": 8},
      {"id": 2, "file_name": "missing.png", "height": 8, "width": 8},
      {"id": 3, "file_name": "img3.png", "height": 16, "width": 16}
    ],
    "categories": [{"id": 7, "name": "widget"}, {"id": 9, "name": "gadget"}],
    "annotations": [
      {"id": 11, "image_id": 1, "category_id": 7, "bbox": [0, 0, 5, 8],
       "segmentation": {"size": [8, 8], "counts": "0X18XO"}, "iscrowd": 0},
      {"id": 12, "image_id": 1, "category_id": 9, "bbox": [1, 1, 3, 3],
       "iscrowd": 1},
      {"id": 13, "image_id": 1, "category_id": 9, "bbox": [0, 0, 0, 4]},
      {"id": 14, "image_id": 3, "category_id": 7, "bbox": [2, 2, 8, 8],
       "segmentation": [[2, 2, 10, 2, 10, 10, 2, 10]]},
      {"id": 15, "image_id": 3, "category_id": 9, "bbox": [1, 1, 2, 2],
       "segmentation": 42},
      {"id": 16, "image_id": 3, "category_id": 9, "bbox": [8, 8, 2, 4],
       "segmentation": {"size": [16, 16], "counts": [136, 4, 12, 4, 100]}},
      {"id": 17, "image_id": 2, "category_id": 7, "bbox": [0, 0, 2, 2]}
    ]
  })";
  {
    std::ofstream out(dir / "instances.json");
    out << json_text;
  }

  CocoLoadStats stats;
  const auto scenes =
      load_coco((dir / "instances.json").string(), (dir / "imgs").string(),
                &stats);
  CHECK(stats.images_loaded == 2);
  CHECK(stats.skipped_missing_image == 1);
  CHECK(stats.malformed == 2);
  REQUIRE(scenes.size() == 2);

  // image 1: only the compressed-RLE annotation survives
  REQUIRE(scenes[0].ann.objects.size() == 1);
  const auto& rle_obj = scenes[0].ann.objects[0];
  CHECK(rle_obj.category == "widget");
  CHECK(rle_obj.phrase == "the widget");
  REQUIRE(rle_obj.has_mask);
  CHECK(rle_obj.mask.count() == 56);
  for (int y = 0; y < 8; ++y) {
    CHECK(rle_obj.mask.at(y, 4) == 1);
    CHECK(rle_obj.mask.at(y, 5) == 0);
    CHECK(rle_obj.mask.at(y, 6) == 1);
  }
  CHECK(rle_obj.box.x0 == doctest::Approx(0.0));
  CHECK(rle_obj.box.x1 == doctest::Approx(5.0 / 8.0));

  // image 3: polygon square then the plain-counts block, in id order
  REQUIRE(scenes[1].ann.objects.size() == 2);
  const auto& poly = scenes[1].ann.objects[0];
  CHECK(poly.category == "widget");
  REQUIRE(poly.has_mask);
  // analytic area of the 8x8 polygon, rasterized at pixel centers
  CHECK(std::abs(static_cast<double>(poly.mask.count()) - 64.0) / 64.0 <
        0.02);
  const PixelRect pr = poly.mask.bounding_rect();
  CHECK(pr.x0 == 2);
  CHECK(pr.y0 == 2);
  CHECK(pr.x1 == 10);
  CHECK(pr.y1 == 10);
  CHECK(poly.box.x1 == doctest::Approx(10.0 / 16.0));

  const auto& counts_obj = scenes[1].ann.objects[1];
  CHECK(counts_obj.category == "gadget");
  CHECK(counts_obj.mask.count() == 8);
  CHECK(counts_obj.mask.at(8, 8) == 1);
  CHECK(counts_obj.mask.at(11, 9) == 1);
  CHECK(counts_obj.mask.at(12, 8) == 0);
  CHECK(counts_obj.box.y1 == doctest::Approx(12.0 / 16.0));

  CHECK_THROWS_AS(load_coco((dir / "nope.json").string(), dir.string()),
                  IoError);
  fs::remove_all(dir);
}

}  // TEST_SUITE

#include "padt/data.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>

#include "padt/errors.hpp"

namespace padt {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

// Counts come column-major, background first.
Mask2D mask_from_counts(int h, int w, const std::vector<long long>& counts) {
  Mask2D mask(h, w);
  long long pos = 0;
  uint8_t cur = 0;
  const long long total = static_cast<long long>(h) * w;
  for (long long c : counts) {
    if (c < 0 || pos + c > total)
      throw ShapeError("RLE counts overrun the mask");
    for (long long i = 0; i < c; ++i, ++pos)
      mask.data[static_cast<size_t>((pos % h) * w + pos / h)] = cur;
    cur = cur ? 0 : 1;
  }
  if (pos != total) throw ShapeError("RLE counts do not cover the mask");
  return mask;
}

// The packed string stores 6 bits per char offset by 48, low bits first,
// with 0x20 as the continuation flag; counts beyond the second are deltas
// against the count two back.
std::vector<long long> unpack_rle_string(const std::string& s) {
  std::vector<long long> counts;
  size_t p = 0;
  while (p < s.size()) {
    long long x = 0;
    int k = 0;
    bool more = true;
    long long c = 0;
    while (more) {
      if (p >= s.size()) throw ShapeError("truncated RLE string");
      c = s[p] - 48;
      x |= (c & 0x1f) << (5 * k);
      more = (c & 0x20) != 0;
      ++p;
      ++k;
    }
    if (c & 0x10) x |= -1LL << (5 * k);
    if (counts.size() > 2) x += counts[counts.size() - 2];
    counts.push_back(x);
  }
  return counts;
}

// Even-odd scanline fill at pixel centers; polygons union together.
void fill_polygon(Mask2D& mask, const std::vector<double>& pts) {
  const size_t n = pts.size() / 2;
  if (n < 3) throw ShapeError("polygon needs at least 3 points");
  for (int y = 0; y < mask.height; ++y) {
    const double cy = y + 0.5;
    std::vector<double> xs;
    for (size_t i = 0; i < n; ++i) {
      const double x0 = pts[2 * i], y0 = pts[2 * i + 1];
      const double x1 = pts[2 * ((i + 1) % n)], y1 = pts[2 * ((i + 1) % n) + 1];
      if ((y0 <= cy && y1 > cy) || (y1 <= cy && y0 > cy))
        xs.push_back(x0 + (cy - y0) / (y1 - y0) * (x1 - x0));
    }
    std::sort(xs.begin(), xs.end());
    for (size_t i = 0; i + 1 < xs.size(); i += 2) {
      int xa = static_cast<int>(std::ceil(xs[i] - 0.5));
      int xb = static_cast<int>(std::floor(xs[i + 1] - 0.5));
      xa = std::max(xa, 0);
      xb = std::min(xb, mask.width - 1);
      for (int x = xa; x <= xb; ++x) mask.at(y, x) = 1;
    }
  }
}

}  // namespace

std::vector<GeneratedScene> load_coco(const std::string& instances_json,
                                      const std::string& images_dir,
                                      CocoLoadStats* stats) {
  std::ifstream in(instances_json);
  if (!in) throw IoError("cannot open " + instances_json);
  json root = json::parse(in);

  struct ImageInfo {
    std::string file;
    int h = 0, w = 0;
  };
  std::map<long long, ImageInfo> images;
  for (const auto& im : root.at("images"))
    images[im.at("id").get<long long>()] = {im.at("file_name").get<std::string>(),
                                            im.at("height").get<int>(),
                                            im.at("width").get<int>()};
  std::map<long long, std::string> categories;
  for (const auto& c : root.at("categories"))
    categories[c.at("id").get<long long>()] = c.at("name").get<std::string>();

  CocoLoadStats local;
  CocoLoadStats& st = stats ? *stats : local;
  st = CocoLoadStats{};

  std::map<long long, std::vector<json>> by_image;
  if (root.contains("annotations"))
    for (const auto& a : root["annotations"])
      by_image[a.value("image_id", -1LL)].push_back(a);

  std::vector<GeneratedScene> scenes;
  for (const auto& [image_id, info] : images) {
    const fs::path path = fs::path(images_dir) / info.file;
    if (!fs::exists(path)) {
      ++st.skipped_missing_image;
      continue;
    }
    GeneratedScene scene;
    scene.image = read_png(path.string());
    scene.ann.image_h = info.h;
    scene.ann.image_w = info.w;

    auto it = by_image.find(image_id);
    std::vector<json> anns = it == by_image.end() ? std::vector<json>{}
                                                  : it->second;
    std::stable_sort(anns.begin(), anns.end(), [](const json& a,
                                                  const json& b) {
      return a.value("id", 0LL) < b.value("id", 0LL);
    });
    for (const auto& a : anns) {
      try {
        if (a.value("iscrowd", 0) == 1) continue;
        const auto cat = categories.find(a.at("category_id").get<long long>());
        if (cat == categories.end())
          throw ConfigError("unknown category id");
        const auto& bb = a.at("bbox");
        const double x = bb.at(0).get<double>(), y = bb.at(1).get<double>();
        const double bw = bb.at(2).get<double>(), bh = bb.at(3).get<double>();
        if (bw <= 0 || bh <= 0) throw ShapeError("degenerate bbox");
        SceneObject obj;
        obj.category = cat->second;
        obj.phrase = "the " + obj.category;
        obj.box = Box{x / info.w, y / info.h, (x + bw) / info.w,
                      (y + bh) / info.h};
        if (a.contains("segmentation")) {
          const auto& seg = a["segmentation"];
          Mask2D mask(info.h, info.w);
          if (seg.is_array()) {
            for (const auto& poly : seg)
              fill_polygon(mask, poly.get<std::vector<double>>());
          } else if (seg.is_object()) {
            const int mh = seg.at("size").at(0).get<int>();
            const int mw = seg.at("size").at(1).get<int>();
            std::vector<long long> counts;
            if (seg.at("counts").is_string())
              counts = unpack_rle_string(seg["counts"].get<std::string>());
            else
              counts = seg["counts"].get<std::vector<long long>>();
            mask = mask_from_counts(mh, mw, counts);
          } else {
            throw ShapeError("unsupported segmentation payload");
          }
          obj.has_mask = true;
          obj.mask = std::move(mask);
        }
        scene.ann.objects.push_back(std::move(obj));
      } catch (const std::exception&) {
        ++st.malformed;
      }
    }
    ++st.images_loaded;
    scenes.push_back(std::move(scene));
  }
  return scenes;
}

}  // namespace padt

#include "padt/data.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "padt/errors.hpp"
#include "padt/rng.hpp"

namespace padt {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

const std::vector<std::string>& palette_colors() {
  static const std::vector<std::string> colors = {"red",    "green", "blue",
                                                  "yellow", "purple", "cyan"};
  return colors;
}

const std::vector<std::string>& shape_kinds() {
  static const std::vector<std::string> kinds = {"square", "circle",
                                                 "triangle"};
  return kinds;
}

std::vector<std::string> all_palette_categories() {
  std::vector<std::string> cats;
  for (const auto& color : palette_colors())
    for (const auto& kind : shape_kinds()) cats.push_back(color + " " + kind);
  return cats;
}

namespace {

Rgb color_rgb(int color_idx) {
  static const Rgb table[6] = {{210, 50, 50},  {60, 180, 80}, {60, 90, 210},
                               {220, 200, 60}, {150, 70, 190}, {60, 190, 200}};
  return table[color_idx];
}

constexpr Rgb kBackground{28, 28, 30};

// Shape occupancy at pixel centers; bounding square is [x0,x0+s)x[y0,y0+s).
void raster_shape(Mask2D& mask, int kind, int x0, int y0, int s) {
  auto set = [&](int x, int y) { mask.at(y, x) = 1; };
  if (kind == 0) {
    for (int y = y0; y < y0 + s; ++y)
      for (int x = x0; x < x0 + s; ++x) set(x, y);
    return;
  }
  if (kind == 1) {
    const double cx = x0 + s / 2.0;
    const double cy = y0 + s / 2.0;
    const double r2 = (s / 2.0) * (s / 2.0);
    for (int y = y0; y < y0 + s; ++y)
      for (int x = x0; x < x0 + s; ++x) {
        const double dx = x + 0.5 - cx;
        const double dy = y + 0.5 - cy;
        if (dx * dx + dy * dy <= r2) set(x, y);
      }
    return;
  }
  // Upward triangle: apex mid-top, base along the bottom edge.
  const double ax = x0 + s / 2.0, ay = y0;
  const double bx = x0, by = y0 + s;
  const double cx = x0 + s, cy = y0 + s;
  auto edge = [](double px, double py, double qx, double qy, double rx,
                 double ry) {
    return (qx - px) * (ry - py) - (qy - py) * (rx - px);
  };
  for (int y = y0; y < y0 + s; ++y)
    for (int x = x0; x < x0 + s; ++x) {
      const double px = x + 0.5, py = y + 0.5;
      const double e0 = edge(ax, ay, bx, by, px, py);
      const double e1 = edge(bx, by, cx, cy, px, py);
      const double e2 = edge(cx, cy, ax, ay, px, py);
      const bool pos = e0 >= 0 && e1 >= 0 && e2 >= 0;
      const bool neg = e0 <= 0 && e1 <= 0 && e2 <= 0;
      if (pos || neg) set(x, y);
    }
}

struct Placement {
  int kind = 0;
  int color = 0;
  int x0 = 0, y0 = 0, size = 0;
};

bool try_generate(Rng& rng, const SceneProfile& profile, GeneratedScene& out) {
  const int h = profile.image_h, w = profile.image_w;
  const int span = std::min(h, w);
  const int lo = std::min(profile.min_size, span);
  const int hi = std::min(profile.max_size, span);
  if (lo < 2 || hi < lo)
    throw ConfigError("scene profile size range is unusable");
  const int want =
      profile.min_objects +
      static_cast<int>(rng.below(
          static_cast<uint64_t>(profile.max_objects - profile.min_objects) + 1));

  const int n_cat = static_cast<int>(palette_colors().size() *
                                     shape_kinds().size());
  std::vector<int> combo(n_cat);
  for (int i = 0; i < n_cat; ++i) combo[i] = i;
  if (profile.unique_categories && want > n_cat)
    throw ConfigError("more objects requested than distinct categories");

  std::vector<Placement> placed;
  std::vector<PixelRect> rects;
  for (int i = 0; i < want; ++i) {
    int cat;
    if (profile.unique_categories) {
      const int j = i + static_cast<int>(rng.below(n_cat - i));
      std::swap(combo[i], combo[j]);
      cat = combo[i];
    } else {
      cat = static_cast<int>(rng.below(n_cat));
    }
    bool ok = false;
    for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
      const int s = lo + static_cast<int>(rng.below(hi - lo + 1));
      const int x0 = static_cast<int>(rng.below(w - s + 1));
      const int y0 = static_cast<int>(rng.below(h - s + 1));
      const PixelRect cand{x0, y0, x0 + s, y0 + s};
      ok = true;
      for (const auto& r : rects) {
        const int ix0 = std::max(cand.x0, r.x0), iy0 = std::max(cand.y0, r.y0);
        const int ix1 = std::min(cand.x1, r.x1), iy1 = std::min(cand.y1, r.y1);
        const int inter = std::max(0, ix1 - ix0) * std::max(0, iy1 - iy0);
        const int uni = cand.area() + r.area() - inter;
        const int mn = std::min(cand.area(), r.area());
        // Two caps: bounded pairwise IoU, and no shape mostly buried under
        // another so every object keeps visible pixels.
        if (inter > profile.max_overlap_iou * uni || 2 * inter > mn) {
          ok = false;
          break;
        }
      }
      if (ok) {
        placed.push_back({cat % 3, cat / 3, x0, y0, s});
        rects.push_back(cand);
      }
    }
    if (!ok) break;
  }
  if (static_cast<int>(placed.size()) < profile.min_objects) return false;

  std::vector<Mask2D> own;
  own.reserve(placed.size());
  for (const auto& p : placed) {
    Mask2D m(h, w);
    raster_shape(m, p.kind, p.x0, p.y0, p.size);
    own.push_back(std::move(m));
  }

  // Later placements overdraw earlier ones; the annotation keeps only what
  // stays visible.
  std::vector<Mask2D> visible = own;
  for (size_t i = 0; i < placed.size(); ++i)
    for (size_t j = i + 1; j < placed.size(); ++j)
      for (int k = 0; k < h * w; ++k)
        if (own[j].data[k]) visible[i].data[k] = 0;

  for (size_t i = 0; i < placed.size(); ++i) {
    const long long own_count = own[i].count();
    if (visible[i].count() < std::max<long long>(4, own_count / 4)) return false;
  }

  out.image = Image(h, w, kBackground);
  out.ann = SceneAnnotation{};
  out.ann.image_h = h;
  out.ann.image_w = w;
  for (size_t i = 0; i < placed.size(); ++i) {
    const Rgb c = color_rgb(placed[i].color);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        if (own[i].at(y, x)) out.image.set(x, y, c);
    const PixelRect b = visible[i].bounding_rect();
    SceneObject obj;
    obj.category = palette_colors()[placed[i].color] + " " +
                   shape_kinds()[placed[i].kind];
    obj.phrase = "the " + obj.category;
    obj.box = Box{static_cast<double>(b.x0) / w, static_cast<double>(b.y0) / h,
                  static_cast<double>(b.x1) / w, static_cast<double>(b.y1) / h};
    obj.has_mask = true;
    obj.mask = std::move(visible[i]);
    out.ann.objects.push_back(std::move(obj));
  }
  return true;
}

}  // namespace

GeneratedScene generate_scene(uint64_t seed, const SceneProfile& profile) {
  Rng base(seed);
  for (uint64_t attempt = 0; attempt < 64; ++attempt) {
    Rng rng = base.fork(attempt);
    GeneratedScene scene;
    if (try_generate(rng, profile, scene)) return scene;
  }
  throw ConfigError("scene generation kept violating profile constraints");
}

std::vector<int> rle_encode(const Mask2D& mask) {
  std::vector<int> counts;
  uint8_t cur = 0;
  int run = 0;
  for (size_t i = 0; i < mask.data.size(); ++i) {
    if (mask.data[i] == cur) {
      ++run;
    } else {
      counts.push_back(run);
      cur = mask.data[i];
      run = 1;
    }
  }
  counts.push_back(run);
  return counts;
}

Mask2D rle_decode(int height, int width, const std::vector<int>& counts) {
  Mask2D mask(height, width);
  size_t pos = 0;
  uint8_t cur = 0;
  for (int c : counts) {
    if (c < 0 || pos + c > mask.data.size())
      throw ShapeError("run-length data overruns the mask");
    for (int i = 0; i < c; ++i) mask.data[pos++] = cur;
    cur = cur ? 0 : 1;
  }
  if (pos != mask.data.size())
    throw ShapeError("run-length data does not cover the mask");
  return mask;
}

void write_scene_dataset(const std::string& dir,
                         const std::vector<GeneratedScene>& scenes) {
  fs::create_directories(fs::path(dir) / "images");
  std::ofstream out(fs::path(dir) / "scenes.jsonl");
  if (!out) throw IoError("cannot open scenes.jsonl for writing");
  for (size_t i = 0; i < scenes.size(); ++i) {
    std::ostringstream name;
    name << "scene_" << std::setw(5) << std::setfill('0') << i << ".png";
    write_png((fs::path(dir) / "images" / name.str()).string(),
              scenes[i].image);
    json rec;
    rec["image"] = "images/" + name.str();
    rec["height"] = scenes[i].ann.image_h;
    rec["width"] = scenes[i].ann.image_w;
    rec["objects"] = json::array();
    for (const auto& obj : scenes[i].ann.objects) {
      json o;
      o["category"] = obj.category;
      o["phrase"] = obj.phrase;
      o["box"] = {obj.box.x0, obj.box.y0, obj.box.x1, obj.box.y1};
      o["rle"] = {{"size", {obj.mask.height, obj.mask.width}},
                  {"counts", rle_encode(obj.mask)}};
      rec["objects"].push_back(std::move(o));
    }
    out << rec.dump() << "\n";
  }
}

std::vector<GeneratedScene> read_scene_dataset(const std::string& dir) {
  std::ifstream in(fs::path(dir) / "scenes.jsonl");
  if (!in) throw IoError("cannot open scenes.jsonl for reading");
  std::vector<GeneratedScene> scenes;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json rec = json::parse(line);
    GeneratedScene scene;
    scene.image = read_png((fs::path(dir) / rec["image"].get<std::string>())
                               .string());
    scene.ann.image_h = rec["height"].get<int>();
    scene.ann.image_w = rec["width"].get<int>();
    for (const auto& o : rec["objects"]) {
      SceneObject obj;
      obj.category = o["category"].get<std::string>();
      obj.phrase = o["phrase"].get<std::string>();
      const auto& b = o["box"];
      obj.box = Box{b[0].get<double>(), b[1].get<double>(), b[2].get<double>(),
                    b[3].get<double>()};
      obj.has_mask = true;
      obj.mask = rle_decode(o["rle"]["size"][0].get<int>(),
                            o["rle"]["size"][1].get<int>(),
                            o["rle"]["counts"].get<std::vector<int>>());
      scene.ann.objects.push_back(std::move(obj));
    }
    scenes.push_back(std::move(scene));
  }
  return scenes;
}

}  // namespace padt

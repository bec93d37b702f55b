#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "padt/image.hpp"
#include "padt/sequencing.hpp"

namespace padt {

struct SceneProfile {
  int image_h = 56;
  int image_w = 56;
  int min_objects = 1;
  int max_objects = 4;
  int min_size = 14;  // shape bounding-box side, px
  int max_size = 28;
  double max_overlap_iou = 0.30;
  // REC referring phrases stay unambiguous when every (color, kind) pair is
  // unique within a scene.
  bool unique_categories = true;
};

struct GeneratedScene {
  Image image;
  SceneAnnotation ann;
};

// Deterministic per seed: same (seed, profile) gives byte-identical image
// and annotation. Boxes are tight bounds of the visible (post-occlusion)
// pixel masks, normalized to [0,1]; every object keeps a non-empty mask.
GeneratedScene generate_scene(uint64_t seed, const SceneProfile& profile);

const std::vector<std::string>& palette_colors();
const std::vector<std::string>& shape_kinds();
// Every "{color} {kind}" combination.
std::vector<std::string> all_palette_categories();

// Row-major run-length encoding, alternating background/foreground run
// lengths and starting with background.
std::vector<int> rle_encode(const Mask2D& mask);
Mask2D rle_decode(int height, int width, const std::vector<int>& counts);

// Materialized dataset: <dir>/images/scene_<i>.png plus <dir>/scenes.jsonl
// with one scene per line (image, size, objects with category, normalized
// box, RLE mask, phrase).
void write_scene_dataset(const std::string& dir,
                         const std::vector<GeneratedScene>& scenes);
std::vector<GeneratedScene> read_scene_dataset(const std::string& dir);

// COCO-format instance ingestion.
struct CocoLoadStats {
  int images_loaded = 0;
  int skipped_missing_image = 0;
  int malformed = 0;
};
std::vector<GeneratedScene> load_coco(const std::string& instances_json,
                                      const std::string& images_dir,
                                      CocoLoadStats* stats = nullptr);

}  // namespace padt

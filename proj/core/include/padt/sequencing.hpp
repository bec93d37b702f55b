#pragma once

#include <optional>
#include <string>
#include <vector>

#include "padt/autograd.hpp"
#include "padt/geometry.hpp"
#include "padt/rng.hpp"

namespace padt {

// Byte-level tokenizer over printable ASCII plus three specials. Fixed ids:
// BOS=0, EOS=1, SEP=2, then ' '..'~' as 3..97.
struct Tokenizer {
  static constexpr int kBos = 0;
  static constexpr int kEos = 1;
  static constexpr int kSep = 2;
  static constexpr int kCharBase = 3;
  static constexpr int kVText = 98;

  static bool encodable(char c) { return c >= 32 && c <= 126; }
  static int char_id(char c);
  static bool is_char_id(int id) { return id >= kCharBase && id < kVText; }
  static char id_char(int id);
  static std::vector<int> encode(const std::string& text);
  // Human-readable rendering: chars verbatim, specials dropped, ids beyond
  // the text range shown as <VRT_n>.
  static std::string decode(const std::vector<int>& ids);
};

struct SceneObject {
  std::string category;
  Box box;  // normalized [0,1], x0<x1, y0<y1
  bool has_mask = false;
  Mask2D mask;  // pixel resolution when present
  std::string phrase;
};

struct SceneAnnotation {
  int image_h = 0;
  int image_w = 0;
  std::vector<SceneObject> objects;
};

enum class Task { kRec, kRes, kOvd, kRic };
const char* task_name(Task t);
Task task_from_name(const std::string& name);

// One rendered or generated token sequence tied to an image's vocabulary.
struct VrtSequence {
  std::vector<int> ids;
  Task task = Task::kRec;
  int prompt_len = 0;  // index of the first target token (BOS+prompt+SEP)
  int v_text = 0;
  int n_vocab = 0;  // v_text + n_merged

  int n_merged() const { return n_vocab - v_text; }
  std::vector<int> target_ids() const {
    return {ids.begin() + prompt_len, ids.end()};
  }
};

// Maximal consecutive VRT run with its hidden states.
struct ObjectQueryGroup {
  std::vector<int> vrt_ids;  // merged patch indices
  ag::Mat hidden;            // |group| x d
  int span_begin = 0;        // token index range [begin, end)
  int span_end = 0;
};

struct RenderedSample {
  VrtSequence seq;
  // Emission order -> annotation object index.
  std::vector<int> object_order;
  // Per emitted object (emission order): its sampled VRT patch indices.
  std::vector<std::vector<int>> selected;
  // Per target step: emitted-object ordinal, -1 for text steps.
  std::vector<int> step_object;

  std::vector<std::vector<int>> per_step_selected() const;

  // Per target step: the emitting object's foreground ids that were NOT
  // sampled (empty at text steps). foreground_per_object is indexed by
  // annotation object, like render_template's sampled_per_object.
  std::vector<std::vector<int>> per_step_masked(
      const std::vector<std::vector<int>>& foreground_per_object) const;
};

constexpr int kAllVrts = -1;

// Uniform sample without replacement of min(n_vrt, |foreground|) ids,
// returned in ascending (raster) order. n_vrt == kAllVrts returns the whole
// set. foreground must be non-empty.
std::vector<int> sample_vrts(const std::vector<int>& foreground, int n_vrt,
                             Rng& rng);

// Renders the task template over the annotation. sampled_per_object is
// indexed by annotation object; every emitted object needs >= 1 sampled id.
// ovd_queries (OVD only) fixes the queried category list; defaults to the
// annotation's categories in first-appearance order.
RenderedSample render_template(
    Task task, const SceneAnnotation& ann,
    const std::vector<std::vector<int>>& sampled_per_object, int v_text,
    int n_merged,
    const std::vector<std::string>* ovd_queries = nullptr);

// Splits the sequence into maximal VRT runs, attaching hidden rows by
// position. hidden must have one row per token id.
std::vector<ObjectQueryGroup> parse_response(const VrtSequence& seq,
                                             const ag::Mat& hidden);

// For an OVD-format sequence: the category each group was emitted under
// (the most recent complete quoted string before the run).
std::vector<std::string> group_categories_ovd(
    const VrtSequence& seq, const std::vector<ObjectQueryGroup>& groups);

// T x n_merged binary mask over target steps, 1 = removed from that step's
// softmax. per_step_masked[t] lists the spared VRT ids at step t; for a VRT
// step that is the emitting object's unsampled foreground, so background and
// other objects' references keep competing while valid alternates are
// neither rewarded nor penalized. A step's ground-truth VRT must never be
// in its own masked set.
ag::Mat build_foreground_mask(
    const VrtSequence& seq,
    const std::vector<std::vector<int>>& per_step_masked);

// Expands the T x n_merged mask to T x (v_text + n_merged) for the CE loss;
// text columns are never blocked.
ag::Mat blocked_from_foreground(const ag::Mat& fg_mask, int v_text);

}  // namespace padt

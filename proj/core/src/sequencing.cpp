#include "padt/sequencing.hpp"

#include <algorithm>
#include <iterator>

#include "padt/errors.hpp"

namespace padt {

int Tokenizer::char_id(char c) {
  if (!encodable(c))
    throw VocabRangeError("Tokenizer: character code " +
                          std::to_string(int(c)) + " not encodable");
  return kCharBase + (c - 32);
}

char Tokenizer::id_char(int id) {
  if (!is_char_id(id))
    throw VocabRangeError("Tokenizer: id " + std::to_string(id) +
                          " is not a character token");
  return static_cast<char>(32 + (id - kCharBase));
}

std::vector<int> Tokenizer::encode(const std::string& text) {
  std::vector<int> out;
  out.reserve(text.size());
  for (char c : text) out.push_back(char_id(c));
  return out;
}

std::string Tokenizer::decode(const std::vector<int>& ids) {
  std::string out;
  for (int id : ids) {
    if (is_char_id(id)) {
      out.push_back(id_char(id));
    } else if (id >= kVText) {
      out += "<VRT_" + std::to_string(id - kVText) + ">";
    }
  }
  return out;
}

const char* task_name(Task t) {
  switch (t) {
    case Task::kRec:
      return "rec";
    case Task::kRes:
      return "res";
    case Task::kOvd:
      return "ovd";
    case Task::kRic:
      return "ric";
  }
  return "?";
}

Task task_from_name(const std::string& name) {
  if (name == "rec") return Task::kRec;
  if (name == "res") return Task::kRes;
  if (name == "ovd") return Task::kOvd;
  if (name == "ric") return Task::kRic;
  throw TaskError("unknown task '" + name + "' (expected rec/res/ovd/ric)");
}

std::vector<std::vector<int>> RenderedSample::per_step_selected() const {
  std::vector<std::vector<int>> out(step_object.size());
  for (size_t t = 0; t < step_object.size(); ++t)
    if (step_object[t] >= 0) out[t] = selected[step_object[t]];
  return out;
}

std::vector<std::vector<int>> RenderedSample::per_step_masked(
    const std::vector<std::vector<int>>& foreground_per_object) const {
  std::vector<std::vector<int>> spared(selected.size());
  for (size_t g = 0; g < selected.size(); ++g) {
    const int ann = object_order[g];
    if (ann < 0 || ann >= static_cast<int>(foreground_per_object.size()))
      throw IndexError("per_step_masked: object " + std::to_string(ann) +
                       " has no foreground set");
    std::vector<int> fg = foreground_per_object[ann];
    std::vector<int> sel = selected[g];
    std::sort(fg.begin(), fg.end());
    std::sort(sel.begin(), sel.end());
    spared[g].reserve(fg.size());
    std::set_difference(fg.begin(), fg.end(), sel.begin(), sel.end(),
                        std::back_inserter(spared[g]));
  }
  std::vector<std::vector<int>> out(step_object.size());
  for (size_t t = 0; t < step_object.size(); ++t)
    if (step_object[t] >= 0) out[t] = spared[step_object[t]];
  return out;
}

std::vector<int> sample_vrts(const std::vector<int>& foreground, int n_vrt,
                             Rng& rng) {
  if (foreground.empty())
    throw EmptyRegionError("sample_vrts: empty foreground set");
  if (n_vrt == kAllVrts) {
    std::vector<int> all = foreground;
    std::sort(all.begin(), all.end());
    return all;
  }
  if (n_vrt < 1)
    throw ConfigError("sample_vrts: n_vrt must be >= 1 (or ALL)");
  const int k = std::min<int>(n_vrt, static_cast<int>(foreground.size()));
  // Partial Fisher-Yates over a copy, then raster order.
  std::vector<int> pool = foreground;
  for (int i = 0; i < k; ++i) {
    const size_t j = i + rng.below(pool.size() - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  std::sort(pool.begin(), pool.end());
  return pool;
}

namespace {

// Incremental sequence builder tracking the per-step object attribution.
struct SeqBuilder {
  std::vector<int> ids;
  std::vector<int> step_object;  // only grows during the target section
  bool in_target = false;

  void text(const std::string& s) {
    for (int id : Tokenizer::encode(s)) {
      ids.push_back(id);
      if (in_target) step_object.push_back(-1);
    }
  }
  void special(int id) {
    ids.push_back(id);
    if (in_target) step_object.push_back(-1);
  }
  void vrt_group(const std::vector<int>& patch_indices, int v_text,
                 int n_merged, int emitted_ordinal) {
    for (int n : patch_indices) {
      if (n < 0 || n >= n_merged)
        throw VocabRangeError("render_template: sampled VRT " +
                              std::to_string(n) + " out of [0, " +
                              std::to_string(n_merged) + ")");
      ids.push_back(v_text + n);
      step_object.push_back(emitted_ordinal);
    }
  }
};

std::string quoted(const std::string& s) { return "\"" + s + "\""; }

}  // namespace

RenderedSample render_template(
    Task task, const SceneAnnotation& ann,
    const std::vector<std::vector<int>>& sampled_per_object, int v_text,
    int n_merged, const std::vector<std::string>* ovd_queries) {
  if (sampled_per_object.size() != ann.objects.size())
    throw TaskError("render_template: " +
                    std::to_string(sampled_per_object.size()) +
                    " sampled sets for " + std::to_string(ann.objects.size()) +
                    " objects");

  RenderedSample out;
  SeqBuilder b;
  b.special(Tokenizer::kBos);

  auto emit_object = [&](int obj_idx) {
    if (sampled_per_object[obj_idx].empty())
      throw EmptyRegionError("render_template: object " +
                             std::to_string(obj_idx) + " has no sampled VRTs");
    const int ordinal = static_cast<int>(out.object_order.size());
    out.object_order.push_back(obj_idx);
    out.selected.push_back(sampled_per_object[obj_idx]);
    b.vrt_group(sampled_per_object[obj_idx], v_text, n_merged, ordinal);
  };

  switch (task) {
    case Task::kRec:
    case Task::kRes: {
      if (ann.objects.size() != 1)
        throw TaskError("render_template: rec/res expects exactly one "
                        "referent object, got " +
                        std::to_string(ann.objects.size()));
      const std::string& q = ann.objects[0].phrase;
      if (q.empty())
        throw TaskError("render_template: referent object has no phrase");
      b.text(
          "Please carefully check the image and detect the object this "
          "sentence describes: " +
          quoted(q) + ".");
      b.special(Tokenizer::kSep);
      out.seq.prompt_len = static_cast<int>(b.ids.size());
      b.in_target = true;
      b.text("The " + quoted(q) + " refers to ");
      emit_object(0);
      b.text(" in this image.");
      break;
    }
    case Task::kOvd: {
      std::vector<std::string> queries;
      if (ovd_queries != nullptr) {
        queries = *ovd_queries;
      } else {
        for (const auto& obj : ann.objects)
          if (std::find(queries.begin(), queries.end(), obj.category) ==
              queries.end())
            queries.push_back(obj.category);
      }
      if (queries.empty())
        throw TaskError("render_template: ovd with no queried categories");
      std::string cat_list;
      for (size_t i = 0; i < queries.size(); ++i) {
        if (i) cat_list += ", ";
        cat_list += quoted(queries[i]);
      }
      b.text(
          "Please carefully check the image and detect the following "
          "objects: [" +
          cat_list + "].");
      b.special(Tokenizer::kSep);
      out.seq.prompt_len = static_cast<int>(b.ids.size());
      b.in_target = true;
      b.text("In this image, ");
      for (size_t qi = 0; qi < queries.size(); ++qi) {
        if (qi) b.text(" and ");
        std::vector<int> instances;
        for (size_t oi = 0; oi < ann.objects.size(); ++oi)
          if (ann.objects[oi].category == queries[qi])
            instances.push_back(static_cast<int>(oi));
        if (instances.empty()) {
          b.text("there are no " + quoted(queries[qi]));
          continue;
        }
        b.text("there are " + std::to_string(instances.size()) + " " +
               quoted(queries[qi]) + " (");
        for (size_t k = 0; k < instances.size(); ++k) {
          if (k) b.text(", ");
          emit_object(instances[k]);
        }
        b.text(")");
      }
      b.text(".");
      break;
    }
    case Task::kRic: {
      if (ann.objects.empty())
        throw TaskError("render_template: ric needs at least one object");
      b.text("Please describe this image.");
      b.special(Tokenizer::kSep);
      out.seq.prompt_len = static_cast<int>(b.ids.size());
      b.in_target = true;
      b.text("In this image, you can see ");
      const size_t n = ann.objects.size();
      for (size_t i = 0; i < n; ++i) {
        if (i > 0) {
          if (n == 2)
            b.text(" and ");
          else
            b.text(i + 1 == n ? ", and " : ", ");
        }
        b.text("a " + ann.objects[i].category + " (");
        emit_object(static_cast<int>(i));
        b.text(")");
      }
      b.text(".");
      break;
    }
  }

  b.special(Tokenizer::kEos);
  out.seq.ids = std::move(b.ids);
  out.seq.task = task;
  out.seq.v_text = v_text;
  out.seq.n_vocab = v_text + n_merged;
  out.step_object = std::move(b.step_object);
  return out;
}

std::vector<ObjectQueryGroup> parse_response(const VrtSequence& seq,
                                             const ag::Mat& hidden) {
  const int T = static_cast<int>(seq.ids.size());
  if (hidden.rows() != T)
    throw ShapeError("parse_response: " + std::to_string(hidden.rows()) +
                     " hidden rows for " + std::to_string(T) + " tokens");
  std::vector<ObjectQueryGroup> groups;
  int i = 0;
  while (i < T) {
    const int id = seq.ids[i];
    if (id >= seq.n_vocab)
      throw VocabRangeError("parse_response: id " + std::to_string(id) +
                            " outside vocabulary of " +
                            std::to_string(seq.n_vocab));
    if (id < seq.v_text) {
      ++i;
      continue;
    }
    ObjectQueryGroup g;
    g.span_begin = i;
    while (i < T && seq.ids[i] >= seq.v_text) {
      if (seq.ids[i] >= seq.n_vocab)
        throw VocabRangeError("parse_response: id " +
                              std::to_string(seq.ids[i]) +
                              " outside vocabulary of " +
                              std::to_string(seq.n_vocab));
      g.vrt_ids.push_back(seq.ids[i] - seq.v_text);
      ++i;
    }
    g.span_end = i;
    g.hidden.resize(g.span_end - g.span_begin, hidden.cols());
    for (int r = g.span_begin; r < g.span_end; ++r)
      g.hidden.row(r - g.span_begin) = hidden.row(r);
    groups.push_back(std::move(g));
  }
  return groups;
}

std::vector<std::string> group_categories_ovd(
    const VrtSequence& seq, const std::vector<ObjectQueryGroup>& groups) {
  // Walk the target section tracking the last completed quoted string;
  // every VRT run that starts is attributed to it.
  std::vector<std::string> out;
  std::string cur, buf;
  bool in_quote = false;
  size_t next_group = 0;
  for (int i = seq.prompt_len; i < static_cast<int>(seq.ids.size()); ++i) {
    const int id = seq.ids[i];
    if (id >= seq.v_text) {
      if (next_group < groups.size() && groups[next_group].span_begin == i) {
        out.push_back(cur);
        ++next_group;
      }
      continue;
    }
    if (!Tokenizer::is_char_id(id)) continue;
    const char c = Tokenizer::id_char(id);
    if (c == '"') {
      if (in_quote) {
        cur = buf;
        buf.clear();
      }
      in_quote = !in_quote;
    } else if (in_quote) {
      buf.push_back(c);
    }
  }
  if (out.size() != groups.size())
    throw TaskError("group_categories_ovd: matched " +
                    std::to_string(out.size()) + " of " +
                    std::to_string(groups.size()) + " groups");
  return out;
}

ag::Mat build_foreground_mask(
    const VrtSequence& seq,
    const std::vector<std::vector<int>>& per_step_masked) {
  const int T = static_cast<int>(seq.ids.size()) - seq.prompt_len;
  if (T < 0) throw ShapeError("build_foreground_mask: prompt_len past end");
  if (static_cast<int>(per_step_masked.size()) != T)
    throw ShapeError("build_foreground_mask: " +
                     std::to_string(per_step_masked.size()) +
                     " step sets for " + std::to_string(T) + " target steps");
  const int np = seq.n_merged();
  // Only the listed alternates leave the softmax. Every other VRT column
  // stays in and gets suppressed; that contrast against background is what
  // teaches free-run decoding where an object is.
  ag::Mat m = ag::Mat::Zero(T, np);
  for (int t = 0; t < T; ++t) {
    for (int n : per_step_masked[t]) {
      if (n < 0 || n >= np)
        throw VocabRangeError("build_foreground_mask: VRT " +
                              std::to_string(n) + " out of [0, " +
                              std::to_string(np) + ")");
      m(t, n) = 1.0;
    }
    const int tid = seq.ids[seq.prompt_len + t];
    if (tid >= seq.v_text && m(t, tid - seq.v_text) != 0.0)
      throw MaskConsistencyError(
          "build_foreground_mask: step " + std::to_string(t) +
          " emits VRT " + std::to_string(tid - seq.v_text) +
          " but the step's masked set removes it");
  }
  return m;
}

ag::Mat blocked_from_foreground(const ag::Mat& fg_mask, int v_text) {
  ag::Mat blocked = ag::Mat::Zero(fg_mask.rows(), v_text + fg_mask.cols());
  blocked.rightCols(fg_mask.cols()) = fg_mask;
  return blocked;
}

}  // namespace padt

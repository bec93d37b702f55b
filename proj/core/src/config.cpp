#include "padt/config.hpp"

#include <fstream>

#include "padt/errors.hpp"

namespace padt {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

void RunConfig::validate() const {
  if (task != "rec" && task != "res" && task != "ovd" && task != "ric" &&
      task != "pro")
    throw ConfigError("unknown task: " + task);
  if (model.image_h != data.image_h || model.image_w != data.image_w)
    throw ConfigError("model and data disagree on the image size");
  if (n_vrt != kAllVrts && n_vrt < 1)
    throw ConfigError("n_vrt must be positive or the all-VRTs sentinel");
  if (steps < 1 || batch_size < 1) throw ConfigError("steps and batch must be positive");
  if (lr <= 0) throw ConfigError("lr must be positive");
  if (eval_scenes < 1) throw ConfigError("eval_scenes must be positive");
  if (max_gen_len < 3) throw ConfigError("max_gen_len too small to finish a target");
  model.grid();  // throws when the patch arithmetic is inconsistent
}

ojson run_config_to_json(const RunConfig& c) {
  ojson j;
  j["task"] = c.task;
  j["preset"] = c.preset;
  j["seed"] = c.seed;
  j["out_dir"] = c.out_dir;
  j["model"] = {{"d", c.model.d},
                {"d_v", c.model.d_v},
                {"layers", c.model.n_layers},
                {"heads", c.model.n_heads},
                {"vision_layers", c.model.vision_layers},
                {"vision_heads", c.model.vision_heads},
                {"mlp_ratio", c.model.mlp_ratio},
                {"image_h", c.model.image_h},
                {"image_w", c.model.image_w},
                {"patch", c.model.patch},
                {"merge", c.model.merge},
                {"fvp_rank", c.model.fvp_rank},
                {"use_fvp", c.model.use_fvp},
                {"use_positional", c.model.use_positional},
                {"max_seq", c.model.max_seq},
                {"decoder",
                 {{"heads", c.model.decoder.heads},
                  {"blocks", c.model.decoder.n_blocks},
                  {"mlp_hidden", c.model.decoder.mlp_hidden},
                  {"upsample", c.model.decoder.upsample}}}};
  j["data"] = {{"min_objects", c.data.min_objects},
               {"max_objects", c.data.max_objects},
               {"min_size", c.data.min_size},
               {"max_size", c.data.max_size},
               {"max_overlap_iou", c.data.max_overlap_iou},
               {"unique_categories", c.data.unique_categories}};
  j["vrt"] = {{"n_vrt", c.n_vrt}, {"robust_mask", c.robust_mask}};
  j["train"] = {{"steps", c.steps},
                {"batch", c.batch_size},
                {"lr", c.lr},
                {"lr_min_ratio", c.lr_min_ratio},
                {"warmup", c.warmup_steps},
                {"weight_decay", c.weight_decay},
                {"beta1", c.beta1},
                {"beta2", c.beta2},
                {"grad_clip", c.grad_clip},
                {"w_ce", c.w_ce},
                {"w_bbox", c.w_bbox},
                {"w_mask", c.w_mask},
                {"w_score", c.w_score},
                {"eval_every", c.eval_every},
                {"log_every", c.log_every}};
  j["eval"] = {{"scenes", c.eval_scenes},
               {"seed", c.eval_seed},
               {"max_gen_len", c.max_gen_len},
               {"overlay_scenes", c.overlay_scenes}};
  return j;
}

namespace {

template <typename T>
void pick(const json& j, const char* key, T& dst) {
  if (j.contains(key)) dst = j.at(key).get<T>();
}

// A mistyped override otherwise vanishes in the json -> config -> json
// round trip; unknown keys must be loud.
void reject_unknown(const json& j, const std::string& scope,
                    std::initializer_list<const char*> known) {
  if (!j.is_object()) return;
  for (const auto& item : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || item.key() == k;
    if (!ok)
      throw ConfigError("unknown config key '" + scope + item.key() + "'");
  }
}

}  // namespace

RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  reject_unknown(j, "",
                 {"task", "preset", "seed", "out_dir", "model", "data", "vrt",
                  "train", "eval"});
  pick(j, "task", c.task);
  pick(j, "preset", c.preset);
  pick(j, "seed", c.seed);
  pick(j, "out_dir", c.out_dir);
  if (j.contains("model")) {
    const json& m = j["model"];
    reject_unknown(m, "model.",
                   {"d", "d_v", "layers", "heads", "vision_layers",
                    "vision_heads", "mlp_ratio", "image_h", "image_w", "patch",
                    "merge", "fvp_rank", "use_fvp", "use_positional",
                    "max_seq", "decoder"});
    pick(m, "d", c.model.d);
    pick(m, "d_v", c.model.d_v);
    pick(m, "layers", c.model.n_layers);
    pick(m, "heads", c.model.n_heads);
    pick(m, "vision_layers", c.model.vision_layers);
    pick(m, "vision_heads", c.model.vision_heads);
    pick(m, "mlp_ratio", c.model.mlp_ratio);
    pick(m, "image_h", c.model.image_h);
    pick(m, "image_w", c.model.image_w);
    pick(m, "patch", c.model.patch);
    pick(m, "merge", c.model.merge);
    pick(m, "fvp_rank", c.model.fvp_rank);
    pick(m, "use_fvp", c.model.use_fvp);
    pick(m, "use_positional", c.model.use_positional);
    pick(m, "max_seq", c.model.max_seq);
    if (m.contains("decoder")) {
      const json& d = m["decoder"];
      reject_unknown(d, "model.decoder.",
                     {"heads", "blocks", "mlp_hidden", "upsample"});
      pick(d, "heads", c.model.decoder.heads);
      pick(d, "blocks", c.model.decoder.n_blocks);
      pick(d, "mlp_hidden", c.model.decoder.mlp_hidden);
      pick(d, "upsample", c.model.decoder.upsample);
    }
  }
  // The model governs the canvas size; the data profile follows it.
  c.data.image_h = c.model.image_h;
  c.data.image_w = c.model.image_w;
  if (j.contains("data")) {
    const json& d = j["data"];
    reject_unknown(d, "data.",
                   {"min_objects", "max_objects", "min_size", "max_size",
                    "max_overlap_iou", "unique_categories"});
    pick(d, "min_objects", c.data.min_objects);
    pick(d, "max_objects", c.data.max_objects);
    pick(d, "min_size", c.data.min_size);
    pick(d, "max_size", c.data.max_size);
    pick(d, "max_overlap_iou", c.data.max_overlap_iou);
    pick(d, "unique_categories", c.data.unique_categories);
  }
  if (j.contains("vrt")) {
    reject_unknown(j["vrt"], "vrt.", {"n_vrt", "robust_mask"});
    pick(j["vrt"], "n_vrt", c.n_vrt);
    pick(j["vrt"], "robust_mask", c.robust_mask);
  }
  if (j.contains("train")) {
    const json& t = j["train"];
    reject_unknown(t, "train.",
                   {"steps", "batch", "lr", "lr_min_ratio", "warmup",
                    "weight_decay", "beta1", "beta2", "grad_clip", "w_ce",
                    "w_bbox", "w_mask", "w_score", "eval_every", "log_every"});
    pick(t, "steps", c.steps);
    pick(t, "batch", c.batch_size);
    pick(t, "lr", c.lr);
    pick(t, "lr_min_ratio", c.lr_min_ratio);
    pick(t, "warmup", c.warmup_steps);
    pick(t, "weight_decay", c.weight_decay);
    pick(t, "beta1", c.beta1);
    pick(t, "beta2", c.beta2);
    pick(t, "grad_clip", c.grad_clip);
    pick(t, "w_ce", c.w_ce);
    pick(t, "w_bbox", c.w_bbox);
    pick(t, "w_mask", c.w_mask);
    pick(t, "w_score", c.w_score);
    pick(t, "eval_every", c.eval_every);
    pick(t, "log_every", c.log_every);
  }
  if (j.contains("eval")) {
    const json& e = j["eval"];
    reject_unknown(e, "eval.",
                   {"scenes", "seed", "max_gen_len", "overlay_scenes"});
    pick(e, "scenes", c.eval_scenes);
    pick(e, "seed", c.eval_seed);
    pick(e, "max_gen_len", c.max_gen_len);
    pick(e, "overlay_scenes", c.overlay_scenes);
  }
  c.validate();
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config: " + path);
  return run_config_from_json(json::parse(in));
}

void save_run_config(const std::string& path, const RunConfig& cfg) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write config: " + path);
  out << run_config_to_json(cfg).dump(2) << "\n";
}

RunConfig preset_config(const std::string& name) {
  RunConfig c;
  c.preset = name;
  if (name == "toy") {
    // Defaults as declared: 56 px canvas, d = 128, 4 LM layers.
    c.data.min_size = 14;
    c.data.max_size = 28;
    c.steps = 600;
    c.batch_size = 8;
    c.eval_scenes = 200;
  } else if (name == "bench") {
    c.model.image_h = c.model.image_w = 112;
    c.model.d = 96;
    c.model.d_v = 48;
    c.model.n_layers = 3;
    c.model.decoder.mlp_hidden = 192;
    c.data.image_h = c.data.image_w = 112;
    c.data.min_size = 28;
    c.data.max_size = 64;
    c.steps = 2200;
    c.batch_size = 8;
    c.warmup_steps = 100;
    c.eval_scenes = 500;
    c.max_gen_len = 96;
  } else if (name == "ablation") {
    c.model.image_h = c.model.image_w = 112;
    c.model.d = 64;
    c.model.d_v = 32;
    c.model.n_layers = 2;
    c.model.vision_layers = 1;
    c.model.decoder.mlp_hidden = 128;
    c.data.image_h = c.data.image_w = 112;
    c.data.min_size = 28;
    c.data.max_size = 64;
    c.steps = 900;
    c.batch_size = 8;
    c.warmup_steps = 60;
    c.eval_scenes = 200;
    c.max_gen_len = 96;
  } else if (name == "tiny") {
    c.model.image_h = c.model.image_w = 28;
    c.model.patch = 14;
    c.model.merge = 1;
    c.model.d = 32;
    c.model.d_v = 16;
    c.model.n_layers = 1;
    c.model.n_heads = 2;
    c.model.vision_layers = 1;
    c.model.vision_heads = 2;
    c.model.max_seq = 256;
    c.model.decoder.heads = 2;
    c.model.decoder.n_blocks = 1;
    c.model.decoder.mlp_hidden = 64;
    c.data.image_h = c.data.image_w = 28;
    c.data.min_size = 8;
    c.data.max_size = 16;
    c.data.max_objects = 2;
    c.steps = 30;
    c.batch_size = 2;
    c.eval_scenes = 20;
    c.max_gen_len = 80;
  } else {
    throw ConfigError("unknown preset: " + name);
  }
  c.validate();
  return c;
}

std::vector<std::string> preset_names() {
  return {"toy", "bench", "ablation", "tiny"};
}

void apply_override(json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("override must look like path.key=value: " + assignment);
  const std::string path = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);

  json* node = &j;
  size_t start = 0;
  while (true) {
    const size_t dot = path.find('.', start);
    const std::string key = path.substr(start, dot - start);
    if (key.empty()) throw ConfigError("empty key in override: " + assignment);
    if (dot == std::string::npos) {
      json value;
      try {
        value = json::parse(raw);
      } catch (const json::exception&) {
        value = raw;  // unquoted strings land here
      }
      (*node)[key] = value;
      return;
    }
    node = &(*node)[key];
    start = dot + 1;
  }
}

}  // namespace padt

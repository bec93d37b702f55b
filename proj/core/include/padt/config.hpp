#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <string>
#include <vector>

#include "padt/data.hpp"
#include "padt/toy_model.hpp"

namespace padt {

struct RunConfig {
  std::string task = "rec";  // rec, res, ovd, ric, or pro for a uniform mix
  std::string preset = "toy";
  uint64_t seed = 1;
  std::string out_dir;

  ModelConfig model;
  SceneProfile data;

  int n_vrt = 5;  // VRTs sampled per object; kAllVrts keeps the whole set
  bool robust_mask = true;

  int steps = 600;
  int batch_size = 8;
  double lr = 3e-3;
  double lr_min_ratio = 0.1;
  int warmup_steps = 40;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.95;
  double grad_clip = 1.0;
  double w_ce = 1.0, w_bbox = 1.0, w_mask = 1.0, w_score = 1.0;
  int eval_every = 0;  // 0 evaluates only after the last step
  int log_every = 20;

  int eval_scenes = 200;
  uint64_t eval_seed = 1000000007ull;
  int max_gen_len = 64;
  int overlay_scenes = 4;  // per-eval rendered previews

  void validate() const;
};

nlohmann::ordered_json run_config_to_json(const RunConfig& cfg);
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);
void save_run_config(const std::string& path, const RunConfig& cfg);

// Named starting points; unknown names throw.
RunConfig preset_config(const std::string& name);
std::vector<std::string> preset_names();

// Dotted-path assignment on the JSON form, e.g. "train.lr=0.001",
// "model.layers=2", "task=res". Values parse as JSON with a string
// fallback.
void apply_override(nlohmann::json& j, const std::string& assignment);

}  // namespace padt

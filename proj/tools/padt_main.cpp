#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "padt/ablate.hpp"
#include "padt/checkpoint.hpp"
#include "padt/config.hpp"
#include "padt/data.hpp"
#include "padt/errors.hpp"
#include "padt/eval.hpp"
#include "padt/train.hpp"

namespace fs = std::filesystem;
using padt::RunConfig;
using json = nlohmann::json;

namespace {

std::string resolve_out(const std::string& out) {
  if (out.empty()) return out;
  const fs::path p(out);
  if (p.is_absolute() || out.front() == '.') return out;
  const char* root = std::getenv("PADT_OUT_ROOT");
  return (fs::path(root ? root : "runs") / p).string();
}

RunConfig build_config(const std::string& preset, const std::string& file,
                       const std::vector<std::string>& sets) {
  nlohmann::json j;
  if (!file.empty()) {
    std::ifstream in(file);
    if (!in) throw padt::IoError("cannot open config: " + file);
    j = nlohmann::json::parse(in);
  } else {
    j = padt::run_config_to_json(padt::preset_config(preset));
  }
  for (const auto& s : sets) padt::apply_override(j, s);
  return padt::run_config_from_json(j);
}

padt::PadtModel model_from_checkpoint(const std::string& path,
                                      RunConfig& cfg_out,
                                      const std::vector<std::string>& sets) {
  const padt::Checkpoint ck = padt::load_checkpoint(path);
  nlohmann::json j = nlohmann::json::parse(ck.meta);
  for (const auto& s : sets) padt::apply_override(j, s);
  cfg_out = padt::run_config_from_json(j);
  padt::PadtModel model(cfg_out.model, cfg_out.seed);
  padt::apply_checkpoint(model.params(), ck);
  return model;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dynamic-vocabulary grounding sandbox"};
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "materialize synthetic scenes");
  std::string gen_out, gen_preset = "toy";
  int gen_count = 100;
  uint64_t gen_seed = 1;
  gen->add_option("--out", gen_out, "output directory")->required();
  gen->add_option("--preset", gen_preset, "config preset for the profile");
  gen->add_option("--count", gen_count, "number of scenes");
  gen->add_option("--seed", gen_seed, "base seed");

  // train
  auto* tr = app.add_subcommand("train", "train a model and evaluate it");
  std::string tr_preset = "toy", tr_config, tr_out = "run";
  std::vector<std::string> tr_sets;
  tr->add_option("--preset", tr_preset, "named starting config");
  tr->add_option("--config", tr_config, "config JSON file");
  tr->add_option("--out", tr_out, "output directory");
  tr->add_option("--set", tr_sets, "override, e.g. train.lr=0.001");

  // eval
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint");
  std::string ev_ckpt, ev_out = "eval";
  int ev_scenes = 0;
  std::vector<std::string> ev_sets;
  ev->add_option("--checkpoint", ev_ckpt, "checkpoint file")->required();
  ev->add_option("--out", ev_out, "output directory");
  ev->add_option("--scenes", ev_scenes, "held-out scene count override");
  ev->add_option("--set", ev_sets, "config override, e.g. task=res");

  // ablate
  auto* ab = app.add_subcommand("ablate", "sweep the mechanism knobs");
  std::string ab_preset = "ablation", ab_config, ab_out = "ablation";
  std::vector<std::string> ab_sets;
  ab->add_option("--preset", ab_preset, "named starting config");
  ab->add_option("--config", ab_config, "config JSON file");
  ab->add_option("--out", ab_out, "output directory");
  ab->add_option("--set", ab_sets, "override applied to every cell");

  // demo
  auto* de = app.add_subcommand("demo", "run one scene end to end");
  std::string de_ckpt, de_out = "demo", de_task;
  uint64_t de_seed = 7;
  std::vector<std::string> de_sets;
  de->add_option("--checkpoint", de_ckpt, "checkpoint file")->required();
  de->add_option("--out", de_out, "output directory");
  de->add_option("--seed", de_seed, "scene seed");
  de->add_option("--task", de_task, "task override (rec/res/ovd/ric)");
  de->add_option("--set", de_sets, "config override");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      const RunConfig cfg = padt::preset_config(gen_preset);
      std::vector<padt::GeneratedScene> scenes;
      scenes.reserve(gen_count);
      for (int i = 0; i < gen_count; ++i)
        scenes.push_back(padt::generate_scene(
            padt::Rng(gen_seed).fork(i).next_u64(), cfg.data));
      const std::string out = resolve_out(gen_out);
      padt::write_scene_dataset(out, scenes);
      std::cout << "wrote " << scenes.size() << " scenes to " << out << "\n";
      return 0;
    }

    if (tr->parsed()) {
      RunConfig cfg = build_config(tr_preset, tr_config, tr_sets);
      cfg.out_dir = resolve_out(tr_out);
      std::cerr << "training task=" << cfg.task << " steps=" << cfg.steps
                << " out=" << cfg.out_dir << "\n";
      padt::PadtModel model(cfg.model, cfg.seed);
      const padt::TrainResult result = padt::train_run(model, cfg, &std::cerr);
      const padt::EvalResult evr = padt::eval_run(
          model, cfg, cfg.eval_scenes,
          (fs::path(cfg.out_dir) / "eval").string());
      std::cout << evr.metrics.dump(2) << "\n";
      std::cerr << "checkpoint: " << result.checkpoint_path << "\n";
      return 0;
    }

    if (ev->parsed()) {
      RunConfig cfg;
      padt::PadtModel model = model_from_checkpoint(ev_ckpt, cfg, ev_sets);
      const int n = ev_scenes > 0 ? ev_scenes : cfg.eval_scenes;
      const padt::EvalResult evr =
          padt::eval_run(model, cfg, n, resolve_out(ev_out));
      std::cout << evr.metrics.dump(2) << "\n";
      return 0;
    }

    if (ab->parsed()) {
      const RunConfig base = build_config(ab_preset, ab_config, ab_sets);
      const auto rows = padt::run_ablation(
          padt::default_ablation_cells(base), resolve_out(ab_out),
          &std::cerr);
      for (const auto& row : rows)
        std::cout << row.name << " " << row.metrics.dump() << "\n";
      return 0;
    }

    if (de->parsed()) {
      RunConfig cfg;
      padt::PadtModel model = model_from_checkpoint(de_ckpt, cfg, de_sets);
      if (!de_task.empty()) cfg.task = de_task;
      cfg.validate();
      if (cfg.task == "pro") cfg.task = "rec";
      cfg.overlay_scenes = 1;
      cfg.eval_seed = de_seed;
      const padt::EvalResult evr =
          padt::eval_run(model, cfg, 1, resolve_out(de_out));
      std::cout << evr.scenes.dump(2) << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

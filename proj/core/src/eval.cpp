#include "padt/eval.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "padt/errors.hpp"
#include "padt/metrics.hpp"
#include "padt/train.hpp"

namespace padt {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

Box box_from_row(const ag::Mat& m, int row) {
  return Box{m(row, 0), m(row, 1), m(row, 2), m(row, 3)};
}

json box_json(const Box& b) { return json::array({b.x0, b.y0, b.x1, b.y1}); }

PixelRect to_pixels(const Box& b, int img_h, int img_w) {
  auto px = [&](double v, int span) {
    return std::clamp(static_cast<int>(std::lround(v * span)), 0, span);
  };
  return PixelRect{px(b.x0, img_w), px(b.y0, img_h), px(b.x1, img_w),
                   px(b.y1, img_h)};
}

struct RecStats {
  int n = 0, hit50 = 0, hit75 = 0, no_group = 0, truncated = 0;
  double iou_sum = 0.0;
};

struct ResStats {
  int n = 0, no_group = 0, truncated = 0;
  CumulativeIoU ciou;
};

struct OvdStats {
  int n = 0, truncated = 0, parse_failures = 0;
  std::vector<Detection> dets;
  std::vector<GroundTruthBox> gts;
};

struct RicStats {
  int n = 0, truncated = 0;
  long long matched = 0, n_pred = 0, n_gt = 0;
};

}  // namespace

EvalResult eval_run(PadtModel& model, const RunConfig& cfg, int n_scenes,
                    const std::string& out_dir) {
  const ModelConfig& mc = model.config();
  const PatchGrid grid = mc.grid();
  const int n_merged = grid.n_merged();
  const bool mixed = cfg.task == "pro";
  static const Task kOrder[4] = {Task::kRec, Task::kRes, Task::kOvd,
                                 Task::kRic};

  RecStats rec;
  ResStats res;
  OvdStats ovd;
  RicStats ric;
  json scenes = json::array();

  const bool save = !out_dir.empty();
  if (save) fs::create_directories(fs::path(out_dir) / "overlays");

  for (int i = 0; i < n_scenes; ++i) {
    const uint64_t seed = eval_scene_seed(cfg, i);
    const GeneratedScene scene = generate_scene(seed, cfg.data);
    const Task task =
        mixed ? kOrder[i % 4] : task_from_name(cfg.task);

    SceneAnnotation view;
    if (task == Task::kRec || task == Task::kRes) {
      view.image_h = scene.ann.image_h;
      view.image_w = scene.ann.image_w;
      view.objects.push_back(
          scene.ann.objects[i % scene.ann.objects.size()]);
    } else {
      view = scene.ann;
    }
    std::vector<std::string> queries;
    const std::vector<std::string>* queries_ptr = nullptr;
    if (task == Task::kOvd) {
      queries = ovd_eval_queries(scene.ann, seed);
      queries_ptr = &queries;
    }

    const std::vector<int> prompt =
        prompt_ids(task, view, mc.v_text, n_merged, queries_ptr);
    GenerationResult gen =
        model.generate(scene.image, prompt, task, cfg.max_gen_len);
    const std::vector<ObjectQueryGroup> groups =
        parse_response(gen.seq, gen.hidden);

    std::vector<Box> pred_boxes;
    std::vector<double> pred_scores;
    ag::Mat first_mask_logits;
    if (!groups.empty()) {
      ag::Tape t;
      EncodedImage enc = model.encode(t, scene.image);
      const auto preds = model.decoder().decode_all(
          t, model.params(), groups, enc.patch_features, enc.rows_merged,
          enc.cols_merged);
      for (const auto& p : preds) {
        pred_boxes.push_back(box_from_row(t.val(p.box), 0));
        pred_scores.push_back(t.val(p.score)(0, 0));
      }
      first_mask_logits = t.val(preds[0].mask_logits);
    }

    json record;
    record["scene"] = i;
    record["task"] = task_name(task);
    record["response"] = Tokenizer::decode(gen.seq.target_ids());
    record["truncated"] = gen.truncated;
    record["groups"] = static_cast<int>(groups.size());

    if (task == Task::kRec) {
      ++rec.n;
      rec.truncated += gen.truncated;
      const Box gt = view.objects[0].box;
      double iou = 0.0;
      if (pred_boxes.empty()) {
        ++rec.no_group;
      } else {
        iou = box_iou(pred_boxes[0], gt);
      }
      rec.iou_sum += iou;
      rec.hit50 += iou >= 0.5;
      rec.hit75 += iou >= 0.75;
      record["phrase"] = view.objects[0].phrase;
      record["gt_box"] = box_json(gt);
      if (!pred_boxes.empty()) record["pred_box"] = box_json(pred_boxes[0]);
      record["iou"] = iou;
    } else if (task == Task::kRes) {
      ++res.n;
      res.truncated += gen.truncated;
      const SceneObject& gt = view.objects[0];
      Mask2D pred_mask(scene.ann.image_h, scene.ann.image_w);
      if (pred_boxes.empty()) {
        ++res.no_group;
      } else {
        Mask2D grid_mask(static_cast<int>(first_mask_logits.rows()),
                         static_cast<int>(first_mask_logits.cols()));
        for (int y = 0; y < grid_mask.height; ++y)
          for (int x = 0; x < grid_mask.width; ++x)
            grid_mask.at(y, x) = first_mask_logits(y, x) > 0.0 ? 1 : 0;
        pred_mask =
            resize_nearest(grid_mask, scene.ann.image_h, scene.ann.image_w);
      }
      const long long inter = mask_intersection(pred_mask, gt.mask);
      const long long uni = mask_union(pred_mask, gt.mask);
      res.ciou.add(static_cast<double>(inter), static_cast<double>(uni));
      record["phrase"] = gt.phrase;
      record["mask_iou"] = uni > 0 ? static_cast<double>(inter) / uni : 0.0;
    } else if (task == Task::kOvd) {
      ++ovd.n;
      ovd.truncated += gen.truncated;
      std::vector<std::string> cats;
      try {
        cats = group_categories_ovd(gen.seq, groups);
      } catch (const std::exception&) {
        ++ovd.parse_failures;
      }
      json dets = json::array();
      for (size_t k = 0; k < pred_boxes.size(); ++k) {
        if (k >= cats.size() || cats[k].empty()) continue;
        ovd.dets.push_back({i, cats[k], pred_scores[k], pred_boxes[k]});
        dets.push_back({{"category", cats[k]},
                        {"score", pred_scores[k]},
                        {"box", box_json(pred_boxes[k])}});
      }
      for (const auto& obj : scene.ann.objects)
        ovd.gts.push_back({i, obj.category, obj.box});
      record["queries"] = queries;
      record["detections"] = std::move(dets);
    } else {
      ++ric.n;
      ric.truncated += gen.truncated;
      std::vector<Box> gts;
      for (const auto& obj : scene.ann.objects) gts.push_back(obj.box);
      const GreedyMatch gm = greedy_match(pred_boxes, gts, 0.5);
      ric.matched += gm.matched;
      ric.n_pred += gm.n_pred;
      ric.n_gt += gm.n_gt;
      record["matched"] = gm.matched;
      record["n_gt"] = gm.n_gt;
    }
    scenes.push_back(std::move(record));

    if (save && i < cfg.overlay_scenes) {
      Image overlay = scene.image;
      for (const auto& obj : view.objects)
        overlay.draw_rect_outline(
            to_pixels(obj.box, overlay.height, overlay.width), {40, 220, 40});
      for (const auto& b : pred_boxes)
        overlay.draw_rect_outline(to_pixels(b, overlay.height, overlay.width),
                                  {230, 40, 40});
      if (task == Task::kRes && !pred_boxes.empty()) {
        Mask2D grid_mask(static_cast<int>(first_mask_logits.rows()),
                         static_cast<int>(first_mask_logits.cols()));
        for (int y = 0; y < grid_mask.height; ++y)
          for (int x = 0; x < grid_mask.width; ++x)
            grid_mask.at(y, x) = first_mask_logits(y, x) > 0.0 ? 1 : 0;
        overlay.blend_mask(
            resize_nearest(grid_mask, overlay.height, overlay.width),
            {230, 40, 40}, 0.4);
      }
      std::ostringstream name;
      name << "scene_" << std::setw(3) << std::setfill('0') << i << ".png";
      write_png((fs::path(out_dir) / "overlays" / name.str()).string(),
                overlay);
    }
  }

  auto rec_json = [&]() {
    json m;
    m["scenes"] = rec.n;
    m["acc50"] = rec.n ? static_cast<double>(rec.hit50) / rec.n : 0.0;
    m["acc75"] = rec.n ? static_cast<double>(rec.hit75) / rec.n : 0.0;
    m["mean_iou"] = rec.n ? rec.iou_sum / rec.n : 0.0;
    m["no_group"] = rec.no_group;
    m["truncated"] = rec.truncated;
    return m;
  };
  auto res_json = [&]() {
    json m;
    m["scenes"] = res.n;
    m["ciou"] = res.ciou.value();
    m["no_group"] = res.no_group;
    m["truncated"] = res.truncated;
    return m;
  };
  auto ovd_json = [&]() {
    json m;
    m["scenes"] = ovd.n;
    m["ap50"] = mean_ap(ovd.dets, ovd.gts, 0.5);
    m["ap"] = mean_ap_range(ovd.dets, ovd.gts);
    json per;
    for (const auto& [cat, ap] : ap_per_category(ovd.dets, ovd.gts, 0.5))
      per[cat] = ap;
    m["per_class_ap50"] = std::move(per);
    m["parse_failures"] = ovd.parse_failures;
    m["truncated"] = ovd.truncated;
    return m;
  };
  auto ric_json = [&]() {
    json m;
    m["scenes"] = ric.n;
    m["precision"] =
        ric.n_pred ? static_cast<double>(ric.matched) / ric.n_pred : 0.0;
    m["recall"] = ric.n_gt ? static_cast<double>(ric.matched) / ric.n_gt : 0.0;
    m["truncated"] = ric.truncated;
    return m;
  };

  EvalResult out;
  out.metrics["task"] = cfg.task;
  out.metrics["scenes"] = n_scenes;
  if (mixed) {
    out.metrics["rec"] = rec_json();
    out.metrics["res"] = res_json();
    out.metrics["ovd"] = ovd_json();
    out.metrics["ric"] = ric_json();
  } else if (cfg.task == "rec") {
    out.metrics.update(rec_json());
  } else if (cfg.task == "res") {
    out.metrics.update(res_json());
  } else if (cfg.task == "ovd") {
    out.metrics.update(ovd_json());
  } else {
    out.metrics.update(ric_json());
  }
  out.scenes = std::move(scenes);

  if (save) {
    std::ofstream mf(fs::path(out_dir) / "metrics.json");
    mf << out.metrics.dump(2) << "\n";
    std::ofstream pf(fs::path(out_dir) / "predictions.json");
    pf << out.scenes.dump(2) << "\n";
  }
  return out;
}

}  // namespace padt

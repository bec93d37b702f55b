#include "padt/train.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "padt/checkpoint.hpp"
#include "padt/errors.hpp"
#include "padt/eval.hpp"

namespace padt {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

// Distinct stream tags keep train scenes, held-out scenes, and sampling
// draws on unrelated seed sequences.
constexpr uint64_t kTrainTag = 0x545241494E5343ull;
constexpr uint64_t kEvalTag = 0x4556414C5343ull;
constexpr uint64_t kTaskTag = 0x5441534Bull;
constexpr uint64_t kDrawTag = 0x565254ull;

}  // namespace

uint64_t train_scene_seed(const RunConfig& cfg, uint64_t idx) {
  return Rng(cfg.seed ^ kTrainTag).fork(idx).next_u64();
}

uint64_t eval_scene_seed(const RunConfig& cfg, uint64_t idx) {
  // Keyed by eval_seed alone so every training seed shares one held-out
  // split.
  return Rng(cfg.eval_seed ^ kEvalTag).fork(idx).next_u64();
}

Task pick_task(const RunConfig& cfg, uint64_t idx) {
  if (cfg.task != "pro") return task_from_name(cfg.task);
  static const Task all[4] = {Task::kRec, Task::kRes, Task::kOvd, Task::kRic};
  return all[Rng(cfg.seed ^ kTaskTag).fork(idx).below(4)];
}

std::vector<std::string> present_categories(const SceneAnnotation& ann) {
  std::vector<std::string> cats;
  for (const auto& obj : ann.objects)
    if (std::find(cats.begin(), cats.end(), obj.category) == cats.end())
      cats.push_back(obj.category);
  return cats;
}

namespace {

std::vector<std::string> absent_categories(
    const std::vector<std::string>& present) {
  std::vector<std::string> absent;
  for (const auto& cat : all_palette_categories())
    if (std::find(present.begin(), present.end(), cat) == present.end())
      absent.push_back(cat);
  return absent;
}

std::vector<std::string> ovd_query_list(const SceneAnnotation& ann, Rng& rng) {
  std::vector<std::string> queries = present_categories(ann);
  // Half the time one absent category joins the query list so the "there
  // are no" clause stays in distribution.
  if (rng.below(2) == 0) {
    const auto absent = absent_categories(queries);
    if (!absent.empty())
      queries.push_back(absent[rng.below(absent.size())]);
  }
  return queries;
}

}  // namespace

std::vector<std::string> ovd_eval_queries(const SceneAnnotation& ann,
                                          uint64_t seed) {
  std::vector<std::string> queries = present_categories(ann);
  Rng rng(seed ^ 0x4F5644ull);
  auto absent = absent_categories(queries);
  for (int k = 0; k < 2 && !absent.empty(); ++k) {
    const size_t j = rng.below(absent.size());
    queries.push_back(absent[j]);
    absent.erase(absent.begin() + static_cast<long>(j));
  }
  return queries;
}

TrainingExample make_example(const RunConfig& cfg, uint64_t idx) {
  TrainingExample ex;
  const uint64_t scene_seed = train_scene_seed(cfg, idx);
  ex.scene = generate_scene(scene_seed, cfg.data);
  ex.task = pick_task(cfg, idx);

  Rng rng(scene_seed ^ kDrawTag);
  if (ex.task == Task::kRec || ex.task == Task::kRes) {
    const size_t j = rng.below(ex.scene.ann.objects.size());
    ex.view.image_h = ex.scene.ann.image_h;
    ex.view.image_w = ex.scene.ann.image_w;
    ex.view.objects.push_back(ex.scene.ann.objects[j]);
  } else {
    ex.view = ex.scene.ann;
  }

  const PatchGrid grid = cfg.model.grid();
  std::vector<std::vector<int>> sampled;
  sampled.reserve(ex.view.objects.size());
  for (const auto& obj : ex.view.objects) {
    ex.foreground.push_back(grid.foreground_vrts(obj.mask));
    sampled.push_back(sample_vrts(ex.foreground.back(), cfg.n_vrt, rng));
  }

  if (ex.task == Task::kOvd) {
    const auto queries = ovd_query_list(ex.view, rng);
    ex.rendered = render_template(ex.task, ex.view, sampled, cfg.model.v_text,
                                  grid.n_merged(), &queries);
  } else {
    ex.rendered = render_template(ex.task, ex.view, sampled, cfg.model.v_text,
                                  grid.n_merged());
  }
  return ex;
}

std::vector<int> prompt_ids(Task task, const SceneAnnotation& view, int v_text,
                            int n_merged,
                            const std::vector<std::string>* ovd_queries) {
  // The prompt section never depends on the sampled VRTs, so a placeholder
  // set keeps this on the exact same template path as training.
  std::vector<std::vector<int>> dummy(view.objects.size(),
                                      std::vector<int>{0});
  const RenderedSample r =
      render_template(task, view, dummy, v_text, n_merged, ovd_queries);
  return {r.seq.ids.begin(), r.seq.ids.begin() + r.seq.prompt_len};
}

std::vector<VrtSpan> vrt_spans(const VrtSequence& seq) {
  std::vector<VrtSpan> spans;
  const int n = static_cast<int>(seq.ids.size());
  int i = 0;
  while (i < n) {
    if (seq.ids[i] >= seq.v_text) {
      int j = i;
      while (j < n && seq.ids[j] >= seq.v_text) ++j;
      spans.push_back({i, j});
      i = j;
    } else {
      ++i;
    }
  }
  return spans;
}

LossTerms example_losses(ag::Tape& t, PadtModel& model,
                         const TrainingExample& ex, const RunConfig& cfg) {
  const VrtSequence& seq = ex.rendered.seq;
  EncodedImage enc = model.encode(t, ex.scene.image);

  ag::Value hidden_all = model.forward_hidden(t, enc, seq.ids);
  ag::Value pred_hidden = t.gather_rows(hidden_all, predictor_rows(seq));
  ag::Value logits = model.forward_logits(t, enc, pred_hidden);

  const int n_target = static_cast<int>(seq.ids.size()) - seq.prompt_len;
  ag::Mat fg_mask;
  if (cfg.robust_mask) {
    fg_mask =
        build_foreground_mask(seq, ex.rendered.per_step_masked(ex.foreground));
  } else {
    fg_mask = ag::Mat::Zero(n_target, seq.n_merged());
  }
  ag::Value ce =
      robust_ce(t, logits, seq.target_ids(), fg_mask, seq.v_text);

  const auto spans = vrt_spans(seq);
  if (spans.size() != ex.rendered.object_order.size())
    throw ShapeError("rendered sequence groups disagree with object order");

  ag::Value bbox, mask, score;
  if (!spans.empty()) {
    std::vector<ag::Value> groups;
    groups.reserve(spans.size());
    for (const auto& s : spans) {
      std::vector<int> rows(s.end - s.begin);
      for (int r = s.begin; r < s.end; ++r) rows[r - s.begin] = r;
      groups.push_back(t.gather_rows(hidden_all, rows));
    }
    const auto preds = model.decoder().decode_all(
        t, model.params(), groups, enc.patch_features, enc.rows_merged,
        enc.cols_merged);

    const int n = static_cast<int>(preds.size());
    ag::Mat gt_boxes(n, 4);
    std::vector<ag::Value> box_rows, score_rows;
    std::vector<ag::Value> mask_probs;
    std::vector<ag::Mat> mask_gts;
    for (int k = 0; k < n; ++k) {
      const SceneObject& obj =
          ex.view.objects[ex.rendered.object_order[k]];
      gt_boxes(k, 0) = obj.box.x0;
      gt_boxes(k, 1) = obj.box.y0;
      gt_boxes(k, 2) = obj.box.x1;
      gt_boxes(k, 3) = obj.box.y1;
      box_rows.push_back(preds[k].box);
      score_rows.push_back(preds[k].score);
      if (obj.has_mask) {
        const int gh = t.rows(preds[k].mask_logits);
        const int gw = t.cols(preds[k].mask_logits);
        const Mask2D small = resize_nearest(obj.mask, gh, gw);
        ag::Mat gt(gh, gw);
        for (int y = 0; y < gh; ++y)
          for (int x = 0; x < gw; ++x) gt(y, x) = small.at(y, x) ? 1.0 : 0.0;
        mask_probs.push_back(t.sigmoid(preds[k].mask_logits));
        mask_gts.push_back(std::move(gt));
      }
    }
    ag::Value pred_boxes = t.concat_rows(box_rows);
    bbox = bbox_loss(t, pred_boxes, gt_boxes);
    if (!mask_probs.empty()) mask = mask_loss(t, mask_probs, mask_gts);
    ag::Value pred_scores = t.concat_rows(score_rows);
    score = score_loss(t, pred_scores,
                       score_targets(t.val(pred_boxes), gt_boxes));
  }

  return total_loss(t, ce, bbox, mask, score, cfg.w_ce, cfg.w_bbox, cfg.w_mask,
                    cfg.w_score);
}

AdamW::AdamW(ag::ParamStore& params, double beta1, double beta2,
             double weight_decay, double eps)
    : params_(&params),
      beta1_(beta1),
      beta2_(beta2),
      weight_decay_(weight_decay),
      eps_(eps) {
  m_.reserve(params.size());
  v_.reserve(params.size());
  for (int i = 0; i < params.size(); ++i) {
    m_.push_back(ag::Mat::Zero(params.value(i).rows(), params.value(i).cols()));
    v_.push_back(ag::Mat::Zero(params.value(i).rows(), params.value(i).cols()));
  }
}

double AdamW::clip_grads(double max_norm) {
  double sq = 0.0;
  for (int i = 0; i < params_->size(); ++i) sq += params_->grad(i).squaredNorm();
  const double norm = std::sqrt(sq);
  if (max_norm > 0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (int i = 0; i < params_->size(); ++i) params_->grad(i) *= s;
  }
  return norm;
}

void AdamW::step(double lr) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, t_);
  const double bc2 = 1.0 - std::pow(beta2_, t_);
  for (int i = 0; i < params_->size(); ++i) {
    ag::Mat& g = params_->grad(i);
    ag::Mat& w = params_->value(i);
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g.cwiseProduct(g);
    const ag::Mat mhat = m_[i] / bc1;
    const ag::Mat vhat = v_[i] / bc2;
    w.array() -= lr * mhat.array() / (vhat.array().sqrt() + eps_);
    // Decay applies to matrix-shaped tensors; biases, norms, and task
    // tokens are row vectors and skip it.
    if (w.rows() > 1 && weight_decay_ > 0)
      w -= lr * weight_decay_ * w;
  }
  params_->zero_grad();
}

double lr_at(const RunConfig& cfg, int step) {
  if (step < cfg.warmup_steps)
    return cfg.lr * (step + 1) / std::max(1, cfg.warmup_steps);
  const double lr_min = cfg.lr * cfg.lr_min_ratio;
  const int span = std::max(1, cfg.steps - cfg.warmup_steps);
  const double u = static_cast<double>(step - cfg.warmup_steps) / span;
  return lr_min + 0.5 * (cfg.lr - lr_min) * (1.0 + std::cos(u * 3.14159265358979323846));
}

TrainResult train_run(PadtModel& model, const RunConfig& cfg,
                      std::ostream* progress) {
  cfg.validate();
  const bool persist = !cfg.out_dir.empty();
  std::ofstream log;
  if (persist) {
    fs::create_directories(cfg.out_dir);
    save_run_config((fs::path(cfg.out_dir) / "config.json").string(), cfg);
    log.open(fs::path(cfg.out_dir) / "train_log.jsonl");
  }

  AdamW opt(model.params(), cfg.beta1, cfg.beta2, cfg.weight_decay);
  model.params().zero_grad();

  LossBreakdown window{};
  int window_n = 0;
  TrainResult result;

  for (int step = 0; step < cfg.steps; ++step) {
    LossBreakdown batch{};
    for (int i = 0; i < cfg.batch_size; ++i) {
      const uint64_t idx =
          static_cast<uint64_t>(step) * cfg.batch_size + i;
      const TrainingExample ex = make_example(cfg, idx);
      ag::Tape t;
      const LossTerms terms = example_losses(t, model, ex, cfg);
      t.backward(t.scale(terms.total, 1.0 / cfg.batch_size));
      const LossBreakdown bd = breakdown(t, terms);
      if (!std::isfinite(bd.total)) {
        json dump;
        dump["step"] = step;
        dump["sample"] = i;
        dump["scene_seed"] = train_scene_seed(cfg, idx);
        dump["task"] = task_name(ex.task);
        dump["ce"] = bd.ce;
        dump["bbox"] = bd.bbox;
        dump["mask"] = bd.mask;
        dump["score"] = bd.score;
        if (persist) {
          std::ofstream nan_out(fs::path(cfg.out_dir) / "nan_dump.json");
          nan_out << dump.dump(2) << "\n";
        }
        throw NumericError("non-finite loss at step " + std::to_string(step) +
                           ": " + dump.dump());
      }
      batch.ce += bd.ce / cfg.batch_size;
      batch.bbox += bd.bbox / cfg.batch_size;
      batch.mask += bd.mask / cfg.batch_size;
      batch.score += bd.score / cfg.batch_size;
      batch.total += bd.total / cfg.batch_size;
    }

    const double lr = lr_at(cfg, step);
    const double gnorm = opt.clip_grads(cfg.grad_clip);
    opt.step(lr);

    window.ce += batch.ce;
    window.bbox += batch.bbox;
    window.mask += batch.mask;
    window.score += batch.score;
    window.total += batch.total;
    ++window_n;

    const bool log_now =
        (step + 1) % std::max(1, cfg.log_every) == 0 || step + 1 == cfg.steps;
    if (log_now) {
      json line;
      line["step"] = step + 1;
      line["lr"] = lr;
      line["grad_norm"] = gnorm;
      line["ce"] = window.ce / window_n;
      line["bbox"] = window.bbox / window_n;
      line["mask"] = window.mask / window_n;
      line["score"] = window.score / window_n;
      line["total"] = window.total / window_n;
      if (persist) log << line.dump() << "\n" << std::flush;
      if (progress)
        (*progress) << "step " << (step + 1) << "/" << cfg.steps
                    << " total " << window.total / window_n << " ce "
                    << window.ce / window_n << " bbox "
                    << window.bbox / window_n << "\n"
                    << std::flush;
      result.final_losses = {window.ce / window_n, window.bbox / window_n,
                             window.mask / window_n, window.score / window_n,
                             window.total / window_n};
      window = LossBreakdown{};
      window_n = 0;
    }

    if (cfg.eval_every > 0 && (step + 1) % cfg.eval_every == 0 &&
        step + 1 < cfg.steps) {
      const int quick = std::min(50, cfg.eval_scenes);
      const EvalResult ev = eval_run(model, cfg, quick);
      if (persist) {
        json line;
        line["step"] = step + 1;
        line["eval"] = ev.metrics;
        log << line.dump() << "\n" << std::flush;
      }
      if (progress)
        (*progress) << "step " << (step + 1) << " eval " << ev.metrics.dump()
                    << "\n"
                    << std::flush;
    }
  }

  result.steps = cfg.steps;
  if (persist) {
    const std::string path =
        (fs::path(cfg.out_dir) / "checkpoint.bin").string();
    save_checkpoint(path, model.params(), run_config_to_json(cfg).dump());
    result.checkpoint_path = path;
  }
  return result;
}

}  // namespace padt

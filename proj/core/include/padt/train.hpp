#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "padt/config.hpp"
#include "padt/data.hpp"
#include "padt/losses.hpp"
#include "padt/toy_model.hpp"

namespace padt {

// Deterministic, non-overlapping seed streams for train and held-out
// scenes.
uint64_t train_scene_seed(const RunConfig& cfg, uint64_t idx);
uint64_t eval_scene_seed(const RunConfig& cfg, uint64_t idx);

// Task for sample idx; "pro" mixes the four tasks uniformly.
Task pick_task(const RunConfig& cfg, uint64_t idx);

// One ready-to-train example: scene, task view (REC/RES keep a single
// referent object), sampled VRTs, rendered sequence. foreground keeps each
// view object's full foreground set so the robust CE can spare the
// unsampled alternates.
struct TrainingExample {
  GeneratedScene scene;
  SceneAnnotation view;
  Task task = Task::kRec;
  RenderedSample rendered;
  std::vector<std::vector<int>> foreground;
};

TrainingExample make_example(const RunConfig& cfg, uint64_t idx);

// Prompt ids ([BOS, prompt, SEP]) for a task view, identical to the
// rendered prompt section.
std::vector<int> prompt_ids(Task task, const SceneAnnotation& view, int v_text,
                            int n_merged,
                            const std::vector<std::string>* ovd_queries);

std::vector<std::string> present_categories(const SceneAnnotation& ann);
// Held-out query list: the scene's categories plus up to two absent ones.
std::vector<std::string> ovd_eval_queries(const SceneAnnotation& ann,
                                          uint64_t seed);

// Token positions of maximal VRT runs in the sequence.
struct VrtSpan {
  int begin = 0;
  int end = 0;
};
std::vector<VrtSpan> vrt_spans(const VrtSequence& seq);

// Builds the full teacher-forced graph for one example: robust CE over
// target steps plus decoder box/mask/score terms for every emitted group.
LossTerms example_losses(ag::Tape& t, PadtModel& model,
                         const TrainingExample& ex, const RunConfig& cfg);

// Adam with decoupled weight decay on matrix-shaped parameters. Gradients
// live in the ParamStore; call step() after accumulating a batch.
class AdamW {
 public:
  AdamW(ag::ParamStore& params, double beta1, double beta2,
        double weight_decay, double eps = 1e-8);
  // Global-norm clip; returns the pre-clip norm.
  double clip_grads(double max_norm);
  void step(double lr);
  int steps_taken() const { return t_; }

 private:
  ag::ParamStore* params_;
  double beta1_, beta2_, weight_decay_, eps_;
  int t_ = 0;
  std::vector<ag::Mat> m_, v_;
};

double lr_at(const RunConfig& cfg, int step);  // warmup then cosine

struct TrainResult {
  LossBreakdown final_losses;  // mean over the last logged window
  std::string checkpoint_path;
  int steps = 0;
};

// Full loop: batches of per-sample tapes, AdamW, NaN abort with a batch
// dump, JSONL loss log, periodic quick eval, checkpoint at the end.
// progress (optional) receives one line per log interval.
TrainResult train_run(PadtModel& model, const RunConfig& cfg,
                      std::ostream* progress = nullptr);

}  // namespace padt

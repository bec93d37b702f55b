#pragma once

#include <map>
#include <string>
#include <vector>

#include "padt/geometry.hpp"

namespace padt {

// Cumulative IoU: ratio of summed intersections to summed unions over a
// whole split, not a mean of per-sample IoUs.
struct CumulativeIoU {
  double inter = 0.0;
  double uni = 0.0;
  void add_masks(const Mask2D& pred, const Mask2D& gt);
  void add(double intersection, double union_area);
  double value() const { return uni > 0 ? inter / uni : 0.0; }
};

struct Detection {
  int image_id = 0;
  std::string category;
  double score = 0.0;
  Box box;
};

struct GroundTruthBox {
  int image_id = 0;
  std::string category;
  Box box;
};

// 101-point interpolated AP, detections ranked by score, greedy best-IoU
// assignment to unmatched ground truth within an image.
double average_precision(const std::vector<Detection>& dets,
                         const std::vector<GroundTruthBox>& gts,
                         double iou_thr);
// Per-category AP; categories without ground truth are skipped.
std::map<std::string, double> ap_per_category(
    const std::vector<Detection>& dets,
    const std::vector<GroundTruthBox>& gts, double iou_thr);
double mean_ap(const std::vector<Detection>& dets,
               const std::vector<GroundTruthBox>& gts, double iou_thr);
// Mean over thresholds 0.50:0.05:0.95.
double mean_ap_range(const std::vector<Detection>& dets,
                     const std::vector<GroundTruthBox>& gts);

// Order-respecting matching for caption grounding: predictions claim the
// best still-unmatched ground truth in emission order.
struct GreedyMatch {
  int matched = 0;
  int n_pred = 0;
  int n_gt = 0;
  double precision() const;
  double recall() const;
};
GreedyMatch greedy_match(const std::vector<Box>& preds_in_order,
                         const std::vector<Box>& gts, double iou_thr = 0.5);

}  // namespace padt

#include "padt/metrics.hpp"

#include <algorithm>
#include <numeric>

#include "padt/errors.hpp"

namespace padt {

void CumulativeIoU::add_masks(const Mask2D& pred, const Mask2D& gt) {
  inter += mask_intersection(pred, gt);
  uni += mask_union(pred, gt);
}

void CumulativeIoU::add(double intersection, double union_area) {
  inter += intersection;
  uni += union_area;
}

double average_precision(const std::vector<Detection>& dets,
                         const std::vector<GroundTruthBox>& gts,
                         double iou_thr) {
  if (gts.empty()) return 0.0;
  std::vector<size_t> order(dets.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return dets[a].score > dets[b].score;
  });

  std::vector<char> gt_used(gts.size(), 0);
  std::vector<char> tp(dets.size(), 0);
  for (size_t rank = 0; rank < order.size(); ++rank) {
    const Detection& d = dets[order[rank]];
    double best = iou_thr;
    int best_gt = -1;
    for (size_t g = 0; g < gts.size(); ++g) {
      if (gt_used[g] || gts[g].image_id != d.image_id ||
          gts[g].category != d.category)
        continue;
      const double iou = box_iou(d.box, gts[g].box);
      if (iou >= best) {
        best = iou;
        best_gt = static_cast<int>(g);
      }
    }
    if (best_gt >= 0) {
      gt_used[best_gt] = 1;
      tp[rank] = 1;
    }
  }

  std::vector<double> precision(dets.size()), recall(dets.size());
  int cum_tp = 0;
  for (size_t i = 0; i < dets.size(); ++i) {
    cum_tp += tp[i];
    precision[i] = static_cast<double>(cum_tp) / static_cast<double>(i + 1);
    recall[i] = static_cast<double>(cum_tp) / static_cast<double>(gts.size());
  }

  double ap = 0.0;
  for (int k = 0; k <= 100; ++k) {
    const double r = k / 100.0;
    double best_p = 0.0;
    for (size_t i = 0; i < dets.size(); ++i)
      if (recall[i] >= r) best_p = std::max(best_p, precision[i]);
    ap += best_p;
  }
  return ap / 101.0;
}

std::map<std::string, double> ap_per_category(
    const std::vector<Detection>& dets,
    const std::vector<GroundTruthBox>& gts, double iou_thr) {
  std::map<std::string, std::vector<GroundTruthBox>> gt_by_cat;
  for (const auto& g : gts) gt_by_cat[g.category].push_back(g);
  std::map<std::string, std::vector<Detection>> det_by_cat;
  for (const auto& d : dets) det_by_cat[d.category].push_back(d);

  std::map<std::string, double> out;
  for (const auto& [cat, cat_gts] : gt_by_cat) {
    auto it = det_by_cat.find(cat);
    static const std::vector<Detection> none;
    out[cat] =
        average_precision(it == det_by_cat.end() ? none : it->second, cat_gts,
                          iou_thr);
  }
  return out;
}

double mean_ap(const std::vector<Detection>& dets,
               const std::vector<GroundTruthBox>& gts, double iou_thr) {
  const auto per = ap_per_category(dets, gts, iou_thr);
  if (per.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& [cat, ap] : per) sum += ap;
  return sum / static_cast<double>(per.size());
}

double mean_ap_range(const std::vector<Detection>& dets,
                     const std::vector<GroundTruthBox>& gts) {
  double sum = 0.0;
  int n = 0;
  for (int t = 50; t <= 95; t += 5, ++n) sum += mean_ap(dets, gts, t / 100.0);
  return n ? sum / n : 0.0;
}

double GreedyMatch::precision() const {
  if (n_pred == 0) return n_gt == 0 ? 1.0 : 0.0;
  return static_cast<double>(matched) / n_pred;
}

double GreedyMatch::recall() const {
  if (n_gt == 0) return 1.0;
  return static_cast<double>(matched) / n_gt;
}

GreedyMatch greedy_match(const std::vector<Box>& preds_in_order,
                         const std::vector<Box>& gts, double iou_thr) {
  GreedyMatch res;
  res.n_pred = static_cast<int>(preds_in_order.size());
  res.n_gt = static_cast<int>(gts.size());
  std::vector<char> used(gts.size(), 0);
  for (const Box& p : preds_in_order) {
    double best = iou_thr;
    int best_gt = -1;
    for (size_t g = 0; g < gts.size(); ++g) {
      if (used[g]) continue;
      const double iou = box_iou(p, gts[g]);
      if (iou >= best) {
        best = iou;
        best_gt = static_cast<int>(g);
      }
    }
    if (best_gt >= 0) {
      used[best_gt] = 1;
      ++res.matched;
    }
  }
  return res;
}

}  // namespace padt

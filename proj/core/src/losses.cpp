#include "padt/losses.hpp"

#include <cmath>
#include <limits>

#include "padt/errors.hpp"
#include "padt/geometry.hpp"
#include "padt/sequencing.hpp"

namespace padt {

ag::Value robust_ce(ag::Tape& t, ag::Value logits,
                    const std::vector<int>& targets, const ag::Mat& fg_mask,
                    int v_text) {
  if (!logits.valid()) throw ShapeError("robust_ce: invalid logits value");
  if (fg_mask.rows() != t.rows(logits) ||
      v_text + fg_mask.cols() != t.cols(logits))
    throw ShapeError("robust_ce: mask " + std::to_string(fg_mask.rows()) +
                     "x" + std::to_string(fg_mask.cols()) +
                     " does not extend to logits " +
                     std::to_string(t.rows(logits)) + "x" +
                     std::to_string(t.cols(logits)));
  for (int r = 0; r < fg_mask.rows(); ++r)
    for (int c = 0; c < fg_mask.cols(); ++c)
      if (!std::isfinite(fg_mask(r, c)) ||
          (fg_mask(r, c) != 0.0 && fg_mask(r, c) != 1.0))
        throw MaskConsistencyError("robust_ce: mask entries must be 0 or 1");
  return t.ce_robust(logits, targets, blocked_from_foreground(fg_mask, v_text));
}

ag::Value bbox_loss(ag::Tape& t, ag::Value pred, const ag::Mat& gt,
                    int* degenerate) {
  if (degenerate != nullptr) {
    const ag::Mat& p = t.val(pred);
    int n = 0;
    for (int i = 0; i < p.rows(); ++i)
      if (p(i, 0) > p(i, 2) || p(i, 1) > p(i, 3)) ++n;
    *degenerate = n;
  }
  return t.bbox_giou_l1(pred, gt, 1.0, 1.0);
}

ag::Value mask_loss(ag::Tape& t, const std::vector<ag::Value>& pred_probs,
                    const std::vector<ag::Mat>& gt, double eps, double gamma,
                    double alpha) {
  if (pred_probs.size() != gt.size())
    throw ShapeError("mask_loss: " + std::to_string(pred_probs.size()) +
                     " predictions vs " + std::to_string(gt.size()) +
                     " targets");
  if (pred_probs.empty()) return t.input(ag::Mat::Zero(1, 1));
  ag::Value acc;
  for (size_t i = 0; i < pred_probs.size(); ++i) {
    ag::Value term = t.add(t.dice(pred_probs[i], gt[i], eps),
                           t.focal(pred_probs[i], gt[i], gamma, alpha));
    acc = i == 0 ? term : t.add(acc, term);
  }
  return t.scale(acc, 1.0 / static_cast<double>(pred_probs.size()));
}

ag::Value score_loss(ag::Tape& t, ag::Value pred, const ag::Mat& gt) {
  if (gt.cols() != 1 || t.cols(pred) != 1)
    throw ShapeError("score_loss: scores must be L x 1");
  return t.mse(pred, t.input(gt));
}

ag::Mat score_targets(const ag::Mat& pred_boxes, const ag::Mat& gt_boxes) {
  if (pred_boxes.rows() != gt_boxes.rows() || pred_boxes.cols() != 4 ||
      gt_boxes.cols() != 4)
    throw ShapeError("score_targets: expected matching L x 4 boxes");
  ag::Mat s(pred_boxes.rows(), 1);
  for (int i = 0; i < pred_boxes.rows(); ++i) {
    const Box p{pred_boxes(i, 0), pred_boxes(i, 1), pred_boxes(i, 2),
                pred_boxes(i, 3)};
    const Box g{gt_boxes(i, 0), gt_boxes(i, 1), gt_boxes(i, 2),
                gt_boxes(i, 3)};
    s(i, 0) = box_iou(p.canonical(), g);
  }
  return s;
}

LossTerms total_loss(ag::Tape& t, ag::Value ce, ag::Value bbox, ag::Value mask,
                     ag::Value score, double w_ce, double w_bbox,
                     double w_mask, double w_score) {
  auto term = [&](ag::Value v, double w) {
    if (!v.valid()) return t.input(ag::Mat::Zero(1, 1));
    return w == 1.0 ? v : t.scale(v, w);
  };
  LossTerms out;
  out.ce = term(ce, w_ce);
  out.bbox = term(bbox, w_bbox);
  out.mask = term(mask, w_mask);
  out.score = term(score, w_score);
  out.total = t.add(t.add(out.ce, out.bbox), t.add(out.mask, out.score));
  return out;
}

LossBreakdown breakdown(const ag::Tape& t, const LossTerms& terms) {
  LossBreakdown b;
  b.ce = t.scalar(terms.ce);
  b.bbox = t.scalar(terms.bbox);
  b.mask = t.scalar(terms.mask);
  b.score = t.scalar(terms.score);
  b.total = t.scalar(terms.total);
  return b;
}

Eigen::RowVectorXd masked_probs(const Eigen::RowVectorXd& logits,
                                const Eigen::RowVectorXd& blocked) {
  if (logits.size() != blocked.size())
    throw ShapeError("masked_probs: size mismatch");
  double m = -std::numeric_limits<double>::infinity();
  for (int v = 0; v < logits.size(); ++v)
    if (blocked(v) == 0.0) m = std::max(m, logits(v));
  if (!std::isfinite(m))
    throw MaskConsistencyError("masked_probs: everything blocked");
  Eigen::RowVectorXd p = Eigen::RowVectorXd::Zero(logits.size());
  double denom = 0.0;
  for (int v = 0; v < logits.size(); ++v)
    if (blocked(v) == 0.0) denom += std::exp(logits(v) - m);
  for (int v = 0; v < logits.size(); ++v)
    if (blocked(v) == 0.0) p(v) = std::exp(logits(v) - m) / denom;
  return p;
}

}  // namespace padt

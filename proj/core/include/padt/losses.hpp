#pragma once

#include <vector>

#include "padt/autograd.hpp"

namespace padt {

struct LossBreakdown {
  double ce = 0.0;
  double bbox = 0.0;
  double mask = 0.0;
  double score = 0.0;
  double total = 0.0;
};

// Scalar loss terms on one tape. Invalid Values stand for absent terms
// (text-only samples) and count as zero.
struct LossTerms {
  ag::Value ce;
  ag::Value bbox;
  ag::Value mask;
  ag::Value score;
  ag::Value total;
};

// Per-token CE over target steps with unselected VRT logits removed from
// the distribution. fg_mask is T x N' (1 = masked); text columns are never
// masked. targets[t] == -1 skips a row.
ag::Value robust_ce(ag::Tape& t, ag::Value logits,
                    const std::vector<int>& targets, const ag::Mat& fg_mask,
                    int v_text);

// Mean over matched pairs of (1 - GIoU) + L1 summed over the 4 normalized
// coordinates. degenerate (optional out) counts pred boxes with inverted
// corners; the loss itself clamps them.
ag::Value bbox_loss(ag::Tape& t, ag::Value pred, const ag::Mat& gt,
                    int* degenerate = nullptr);

// Mean dice (eps) + mean focal (gamma, alpha) over per-object probability
// grids. Grids may differ in shape across objects but each must match its
// target. Empty list -> 0.
ag::Value mask_loss(ag::Tape& t, const std::vector<ag::Value>& pred_probs,
                    const std::vector<ag::Mat>& gt, double eps = 1.0,
                    double gamma = 2.0, double alpha = 0.25);

// Mean squared error over L confidence scores (pred: L x 1 Value).
ag::Value score_loss(ag::Tape& t, ag::Value pred, const ag::Mat& gt);

// Score supervision targets: per-row IoU(pred, gt) of corner boxes, no
// gradient (plain matrix in, plain matrix out).
ag::Mat score_targets(const ag::Mat& pred_boxes, const ag::Mat& gt_boxes);

// Unweighted sum; optional per-term weights cover the config surface and
// default to 1.
LossTerms total_loss(ag::Tape& t, ag::Value ce, ag::Value bbox, ag::Value mask,
                     ag::Value score, double w_ce = 1.0, double w_bbox = 1.0,
                     double w_mask = 1.0, double w_score = 1.0);

LossBreakdown breakdown(const ag::Tape& t, const LossTerms& terms);

// Probabilities of one logit row under the same masking rule as robust_ce
// (exact zeros at masked entries). Test and diagnostic helper.
Eigen::RowVectorXd masked_probs(const Eigen::RowVectorXd& logits,
                                const Eigen::RowVectorXd& blocked);

}  // namespace padt

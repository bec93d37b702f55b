#include <doctest.h>

#include <cmath>

#include "padt/errors.hpp"
#include "padt/losses.hpp"
#include "padt/rng.hpp"
#include "padt/sequencing.hpp"

using namespace padt;
using ag::Mat;
using ag::ParamStore;
using ag::Tape;
using ag::Value;

namespace {

constexpr int kVText = 3;
constexpr int kNp = 8;
constexpr int kV = kVText + kNp;

Mat random_mat(int r, int c, Rng& rng, double lo = -2.0, double hi = 2.0) {
  Mat m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = rng.uniform(lo, hi);
  return m;
}

double textbook_ce(const Mat& logits, const std::vector<int>& targets) {
  double total = 0.0;
  int count = 0;
  for (int t = 0; t < logits.rows(); ++t) {
    if (targets[t] < 0) continue;
    const double m = logits.row(t).maxCoeff();
    const double lse =
        m + std::log((logits.row(t).array() - m).exp().sum());
    total += lse - logits(t, targets[t]);
    ++count;
  }
  return total / count;
}

}  // namespace

TEST_SUITE("losses") {

TEST_CASE("uniform logits over the open set price at log of its size") {
  Tape t;
  Value logits = t.input(Mat::Zero(1, kV));
  Mat fg = Mat::Zero(1, kNp);
  fg(0, 0) = fg(0, 3) = fg(0, 5) = fg(0, 7) = 1.0;  // 11 - 4 = 7 open
  Value loss = robust_ce(t, logits, {1}, fg, kVText);
  CHECK(t.scalar(loss) == doctest::Approx(std::log(7.0)).epsilon(1e-9));
}

TEST_CASE("masked columns carry exactly zero probability and gradient") {
  Tape t;
  ParamStore ps;
  Rng rng(31);
  ps.add("logits", random_mat(3, kV, rng));
  Value logits = t.param(ps, "logits");

  Mat fg = Mat::Zero(3, kNp);
  fg(0, 0) = fg(0, 1) = 1.0;
  for (int c = 0; c < kNp; ++c) fg(1, c) = c == 2 ? 0.0 : 1.0;
  const std::vector<int> targets = {2, kVText + 2, 0};

  Value loss = robust_ce(t, logits, targets, fg, kVText);
  t.backward(loss);

  const Mat& g = ps.grad("logits");
  CHECK(g(0, kVText + 0) == 0.0);
  CHECK(g(0, kVText + 1) == 0.0);
  for (int c = 0; c < kNp; ++c)
    if (c != 2) CHECK(g(1, kVText + c) == 0.0);
  // open text columns still receive signal
  CHECK(g(0, 2) != 0.0);
  CHECK(g(1, kVText + 2) != 0.0);

  const auto blocked = blocked_from_foreground(fg, kVText);
  const Eigen::RowVectorXd p =
      masked_probs(ps.value("logits").row(0), blocked.row(0));
  CHECK(p(kVText + 0) == 0.0);
  CHECK(p(kVText + 1) == 0.0);
  CHECK(p.sum() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(
      masked_probs(p, Eigen::RowVectorXd::Ones(kV)), MaskConsistencyError);
}

TEST_CASE("all-zero mask reproduces textbook cross entropy") {
  Rng rng(32);
  Tape t;
  const Mat logits = random_mat(5, kV, rng, -3.0, 3.0);
  std::vector<int> targets;
  for (int i = 0; i < 5; ++i)
    targets.push_back(static_cast<int>(rng.below(kV)));
  Value loss =
      robust_ce(t, t.input(logits), targets, Mat::Zero(5, kNp), kVText);
  CHECK(t.scalar(loss) ==
        doctest::Approx(textbook_ce(logits, targets)).epsilon(1e-9));
}

TEST_CASE("minus-one targets drop rows from the mean") {
  Rng rng(33);
  Tape t;
  Mat logits = random_mat(4, kV, rng);
  logits.row(1).setConstant(1e6);  // would dominate if counted
  const std::vector<int> targets = {0, -1, 5, -1};
  Value loss =
      robust_ce(t, t.input(logits), targets, Mat::Zero(4, kNp), kVText);
  CHECK(t.scalar(loss) ==
        doctest::Approx(textbook_ce(logits, targets)).epsilon(1e-9));
}

TEST_CASE("robust ce rejects inconsistent inputs") {
  Tape t;
  Value logits = t.input(Mat::Zero(2, kV));
  Mat fg = Mat::Zero(2, kNp);
  fg(0, 4) = 1.0;
  // VRT target blocked at its own step
  CHECK_THROWS_AS(robust_ce(t, logits, {kVText + 4, 0}, fg, kVText),
                  MaskConsistencyError);
  CHECK_THROWS_AS(robust_ce(t, logits, {0, 0}, Mat::Zero(3, kNp), kVText),
                  ShapeError);
  Mat bad = Mat::Zero(2, kNp);
  bad(1, 1) = 0.5;
  CHECK_THROWS_AS(robust_ce(t, logits, {0, 0}, bad, kVText),
                  MaskConsistencyError);
  // fully blocked row is only reachable through the raw op
  CHECK_THROWS_AS(t.ce_robust(logits, {0, 0}, Mat::Ones(2, kV)),
                  MaskConsistencyError);
  CHECK_THROWS_AS(t.ce_robust(logits, {kV, 0}, Mat::Zero(2, kV)),
                  IndexError);
}

TEST_CASE("bbox loss matches the hand-computed pair") {
  // pred (0,0,2,2) vs gt (1,1,3,3) on a 3x3 frame:
  // IoU 1/7, GIoU -5/63, L1 4/3, total 152/63.
  Tape t;
  Mat pred(1, 4), gt(1, 4);
  pred << 0.0, 0.0, 2.0 / 3.0, 2.0 / 3.0;
  gt << 1.0 / 3.0, 1.0 / 3.0, 1.0, 1.0;
  Value loss = bbox_loss(t, t.input(pred), gt);
  CHECK(t.scalar(loss) == doctest::Approx(152.0 / 63.0).epsilon(1e-12));
}

TEST_CASE("perfect boxes cost nothing, inverted corners are counted") {
  Tape t;
  Mat gt(2, 4);
  gt << 0.1, 0.2, 0.5, 0.8, 0.0, 0.0, 1.0, 1.0;
  int degenerate = -1;
  Value loss = bbox_loss(t, t.input(gt), gt, &degenerate);
  CHECK(degenerate == 0);
  CHECK(t.scalar(loss) == doctest::Approx(0.0).epsilon(1e-12));

  Mat bad(1, 4);
  bad << 0.7, 0.6, 0.2, 0.1;
  Value loss2 = bbox_loss(t, t.input(bad), gt.topRows(1), &degenerate);
  CHECK(degenerate == 1);
  CHECK(std::isfinite(t.scalar(loss2)));
}

TEST_CASE("dice prices the half-confident grid at one half") {
  Tape t;
  Mat gt(2, 2);
  gt << 1.0, 0.0, 0.0, 1.0;
  Value probs = t.input(Mat::Constant(2, 2, 0.5));
  CHECK(t.scalar(t.dice(probs, gt, 1e-12)) ==
        doctest::Approx(0.5).epsilon(1e-9));
  // exact hit with the smoothing eps stays exactly zero
  CHECK(t.scalar(t.dice(t.input(gt), gt, 1.0)) == 0.0);
}

TEST_CASE("focal at gamma zero and alpha half is half of bce") {
  Rng rng(34);
  Tape t;
  Mat probs = random_mat(3, 4, rng, 0.05, 0.95);
  Mat gt(3, 4);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 4; ++j) gt(i, j) = rng.below(2) ? 1.0 : 0.0;
  double bce = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 4; ++j)
      bce += gt(i, j) != 0.0 ? -std::log(probs(i, j))
                             : -std::log(1.0 - probs(i, j));
  bce /= 12.0;
  CHECK(t.scalar(t.focal(t.input(probs), gt, 0.0, 0.5)) ==
        doctest::Approx(0.5 * bce).epsilon(1e-9));
}

TEST_CASE("mask loss averages dice plus focal per object") {
  Tape t;
  Mat gt(2, 2);
  gt << 1.0, 0.0, 0.0, 1.0;
  Value probs = t.input(Mat::Constant(2, 2, 0.5));
  // dice(eps=1): 1 - 3/5; focal(2, 0.25): ln2 / 8 per grid mean
  const double expect = 0.4 + 0.125 * std::log(2.0);
  Value single = mask_loss(t, {probs}, {gt});
  CHECK(t.scalar(single) == doctest::Approx(expect).epsilon(1e-9));
  // two identical grids keep the same mean
  Value twice = mask_loss(t, {probs, probs}, {gt, gt});
  CHECK(t.scalar(twice) == doctest::Approx(expect).epsilon(1e-9));

  CHECK(t.scalar(mask_loss(t, {}, {})) == 0.0);
  CHECK_THROWS_AS(mask_loss(t, {probs}, {}), ShapeError);
  CHECK_THROWS_AS(mask_loss(t, {probs}, {Mat::Zero(3, 2)}), ShapeError);
}

TEST_CASE("score targets are ious, score loss is mse") {
  Mat pred(3, 4), gt(3, 4);
  pred << 0.0, 0.0, 2.0 / 3, 2.0 / 3,   // IoU 1/7 pair
      0.1, 0.1, 0.4, 0.4,               // identical
      0.0, 0.0, 0.2, 0.2;               // disjoint
  gt << 1.0 / 3, 1.0 / 3, 1.0, 1.0,
      0.1, 0.1, 0.4, 0.4,
      0.5, 0.5, 0.9, 0.9;
  const Mat s = score_targets(pred, gt);
  CHECK(s(0, 0) == doctest::Approx(1.0 / 7.0).epsilon(1e-12));
  CHECK(s(1, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(s(2, 0) == 0.0);

  Tape t;
  Mat scores(3, 1);
  scores << 0.2, 0.9, 0.1;
  const double mse = ((0.2 - 1.0 / 7) * (0.2 - 1.0 / 7) +
                      (0.9 - 1.0) * (0.9 - 1.0) + 0.1 * 0.1) /
                     3.0;
  CHECK(t.scalar(score_loss(t, t.input(scores), s)) ==
        doctest::Approx(mse).epsilon(1e-9));
  CHECK_THROWS_AS(score_loss(t, t.input(Mat::Zero(3, 2)), s), ShapeError);
  CHECK_THROWS_AS(score_targets(pred, gt.topRows(2)), ShapeError);
}

TEST_CASE("total loss weighs terms and zeroes the absent ones") {
  Tape t;
  Value ce = t.input(Mat::Constant(1, 1, 0.7));
  Value bbox = t.input(Mat::Constant(1, 1, 1.3));
  LossTerms terms = total_loss(t, ce, bbox, Value{}, Value{}, 2.0, 3.0,
                               5.0, 7.0);
  const LossBreakdown b = breakdown(t, terms);
  CHECK(b.ce == doctest::Approx(1.4));
  CHECK(b.bbox == doctest::Approx(3.9));
  CHECK(b.mask == 0.0);
  CHECK(b.score == 0.0);
  CHECK(b.total == doctest::Approx(5.3));
  t.backward(terms.total);  // absent terms must not break the walk
}

TEST_CASE("robust ce is invariant to row order") {
  Rng rng(35);
  Tape t;
  const Mat logits = random_mat(6, kV, rng);
  std::vector<int> targets;
  Mat fg = Mat::Zero(6, kNp);
  for (int i = 0; i < 6; ++i) {
    targets.push_back(static_cast<int>(rng.below(kVText)));  // text targets
    fg(i, rng.below(kNp)) = 1.0;
  }
  const std::vector<int> perm = {4, 1, 5, 0, 2, 3};
  Mat plogits(6, kV);
  Mat pfg = Mat::Zero(6, kNp);
  std::vector<int> ptargets(6);
  for (int i = 0; i < 6; ++i) {
    plogits.row(i) = logits.row(perm[i]);
    pfg.row(i) = fg.row(perm[i]);
    ptargets[i] = targets[perm[i]];
  }
  const double a =
      t.scalar(robust_ce(t, t.input(logits), targets, fg, kVText));
  const double b =
      t.scalar(robust_ce(t, t.input(plogits), ptargets, pfg, kVText));
  CHECK(a == doctest::Approx(b).epsilon(1e-12));
}

}  // TEST_SUITE

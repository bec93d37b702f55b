#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "padt/metrics.hpp"
#include "padt/rng.hpp"

using namespace padt;

namespace {

Box random_box(Rng& rng) {
  const double x0 = rng.uniform(0.0, 0.7);
  const double y0 = rng.uniform(0.0, 0.7);
  return Box{x0, y0, x0 + rng.uniform(0.05, 0.3), y0 + rng.uniform(0.05, 0.3)};
}

// Reference AP: sort by score, greedy-match within (image, category), then
// integrate max precision at the 101 recall knots.
double reference_ap(std::vector<Detection> dets,
                    const std::vector<GroundTruthBox>& gts, double thr) {
  if (gts.empty()) return 0.0;
  std::stable_sort(dets.begin(), dets.end(),
                   [](const Detection& a, const Detection& b) {
                     return a.score > b.score;
                   });
  std::vector<bool> taken(gts.size(), false);
  std::vector<int> tp_flags;
  for (const auto& d : dets) {
    int best = -1;
    double best_iou = thr;
    for (size_t g = 0; g < gts.size(); ++g) {
      if (taken[g] || gts[g].image_id != d.image_id ||
          gts[g].category != d.category)
        continue;
      const double iou = box_iou(d.box, gts[g].box);
      if (iou >= best_iou) {
        best_iou = iou;
        best = static_cast<int>(g);
      }
    }
    if (best >= 0) taken[best] = true;
    tp_flags.push_back(best >= 0 ? 1 : 0);
  }
  std::vector<double> precision, recall;
  int tp = 0;
  for (size_t i = 0; i < tp_flags.size(); ++i) {
    tp += tp_flags[i];
    precision.push_back(static_cast<double>(tp) / (i + 1));
    recall.push_back(static_cast<double>(tp) / gts.size());
  }
  double ap = 0.0;
  for (int k = 0; k <= 100; ++k) {
    const double r = k / 100.0;
    double best = 0.0;
    for (size_t i = 0; i < precision.size(); ++i)
      if (recall[i] >= r) best = std::max(best, precision[i]);
    ap += best;
  }
  return ap / 101.0;
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("cumulative iou pools intersections before dividing") {
  CumulativeIoU c;
  CHECK(c.value() == 0.0);
  c.add(2.0, 10.0);
  c.add(8.0, 10.0);
  // (2+8)/(10+10), not mean(0.2, 0.8)
  CHECK(c.value() == doctest::Approx(0.5));

  Mask2D a(4, 4), b(4, 4);
  for (int y = 0; y < 2; ++y)
    for (int x = 0; x < 4; ++x) a.at(y, x) = 1;  // top half
  for (int y = 1; y < 3; ++y)
    for (int x = 0; x < 4; ++x) b.at(y, x) = 1;  // middle band
  CumulativeIoU m;
  m.add_masks(a, b);
  CHECK(m.inter == doctest::Approx(4.0));
  CHECK(m.uni == doctest::Approx(12.0));
  // empty-vs-empty adds nothing to either pool
  m.add_masks(Mask2D(4, 4), Mask2D(4, 4));
  CHECK(m.value() == doctest::Approx(4.0 / 12.0));
}

TEST_CASE("perfect detector scores ap one, hopeless detector zero") {
  std::vector<GroundTruthBox> gts;
  std::vector<Detection> dets;
  Rng rng(66);
  for (int i = 0; i < 6; ++i) {
    const Box b = random_box(rng);
    gts.push_back({i / 2, "thing", b});
    dets.push_back({i / 2, "thing", rng.uniform(0.3, 0.9), b});
  }
  CHECK(average_precision(dets, gts, 0.5) == doctest::Approx(1.0));
  CHECK(mean_ap_range(dets, gts) == doctest::Approx(1.0));

  std::vector<Detection> misses;
  for (const auto& g : gts) {
    Box far = g.box;
    far.x0 += 10.0;
    far.x1 += 10.0;
    misses.push_back({g.image_id, g.category, 0.9, far});
  }
  CHECK(average_precision(misses, gts, 0.5) == doctest::Approx(0.0));
  CHECK(average_precision({}, gts, 0.5) == doctest::Approx(0.0));
  // no ground truth pins AP at zero by convention
  CHECK(average_precision(dets, {}, 0.5) == doctest::Approx(0.0));
}

TEST_CASE("a duplicate detection costs precision at full recall") {
  const Box b{0.1, 0.1, 0.4, 0.4};
  std::vector<GroundTruthBox> gts = {{0, "thing", b}};
  std::vector<Detection> dets = {{0, "thing", 0.9, b}, {0, "thing", 0.8, b}};
  // the lower-ranked duplicate cannot drag down precision at any knot
  CHECK(average_precision(dets, gts, 0.5) == doctest::Approx(1.0));
  // a false positive outranking the hit caps every knot at 1/2
  std::vector<Detection> swapped = {{0, "nothing-there", 0.9, b},
                                    {0, "thing", 0.8, b}};
  CHECK(average_precision(swapped, gts, 0.5) == doctest::Approx(0.5));
}

TEST_CASE("ap agrees with the reference on random workloads") {
  Rng rng(67);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<GroundTruthBox> gts;
    std::vector<Detection> dets;
    const int n_gt = 1 + static_cast<int>(rng.below(8));
    const char* cats[] = {"a", "b"};
    for (int i = 0; i < n_gt; ++i)
      gts.push_back({static_cast<int>(rng.below(3)), cats[rng.below(2)],
                     random_box(rng)});
    const int n_det = static_cast<int>(rng.below(10));
    for (int i = 0; i < n_det; ++i) {
      // half the detections perturb a ground truth, half are noise
      if (rng.below(2) && !gts.empty()) {
        const auto& g = gts[rng.below(gts.size())];
        const double dx = rng.uniform(-0.05, 0.05);
        Box j{g.box.x0 + dx, g.box.y0 + dx, g.box.x1 + dx, g.box.y1 + dx};
        dets.push_back({g.image_id, g.category, rng.unit(), j});
      } else {
        dets.push_back({static_cast<int>(rng.below(3)), cats[rng.below(2)],
                        rng.unit(), random_box(rng)});
      }
    }
    for (double thr : {0.5, 0.75}) {
      CHECK(average_precision(dets, gts, thr) ==
            doctest::Approx(reference_ap(dets, gts, thr)).epsilon(1e-12));
    }
  }
}

TEST_CASE("per-category ap skips categories without ground truth") {
  const Box b{0.2, 0.2, 0.6, 0.6};
  std::vector<GroundTruthBox> gts = {{0, "cat", b}};
  std::vector<Detection> dets = {{0, "cat", 0.9, b}, {0, "ghost", 0.8, b}};
  const auto per = ap_per_category(dets, gts, 0.5);
  REQUIRE(per.size() == 1);
  CHECK(per.count("cat") == 1);
  CHECK(per.at("cat") == doctest::Approx(1.0));
  CHECK(mean_ap(dets, gts, 0.5) == doctest::Approx(1.0));
}

TEST_CASE("greedy matching respects emission order") {
  const Box g0{0.0, 0.0, 0.3, 0.3};
  const Box g1{0.5, 0.5, 0.9, 0.9};
  // first prediction grabs g0; the duplicate cannot re-claim it
  const auto m = greedy_match({g0, g0, g1}, {g0, g1}, 0.5);
  CHECK(m.matched == 2);
  CHECK(m.n_pred == 3);
  CHECK(m.n_gt == 2);
  CHECK(m.precision() == doctest::Approx(2.0 / 3.0));
  CHECK(m.recall() == doctest::Approx(1.0));

  // empty edge conventions
  CHECK(greedy_match({}, {}, 0.5).precision() == doctest::Approx(1.0));
  CHECK(greedy_match({}, {g0}, 0.5).precision() == doctest::Approx(0.0));
  CHECK(greedy_match({}, {g0}, 0.5).recall() == doctest::Approx(0.0));
  CHECK(greedy_match({g0}, {}, 0.5).recall() == doctest::Approx(1.0));
  CHECK(greedy_match({g0}, {}, 0.5).precision() == doctest::Approx(0.0));
}

TEST_CASE("box helpers agree on hand values") {
  const Box a{0.0, 0.0, 2.0, 2.0};
  const Box b{1.0, 1.0, 3.0, 3.0};
  CHECK(box_intersection(a, b) == doctest::Approx(1.0));
  CHECK(box_union(a, b) == doctest::Approx(7.0));
  CHECK(box_iou(a, b) == doctest::Approx(1.0 / 7.0));
  CHECK(box_giou(a, b) == doctest::Approx(1.0 / 7.0 - 2.0 / 9.0));
  CHECK(box_iou(a, Box{5.0, 5.0, 6.0, 6.0}) == 0.0);
}

}  // TEST_SUITE

#include <gtest/gtest.h>

#include <random>

#include "ictext/errors.hpp"
#include "ictext/metrics.hpp"
#include "oracles.hpp"

namespace ictext {
namespace {

Detection det(BoxXYXY b, int cls, double score) {
  Detection d;
  d.box = b;
  d.class_id = cls;
  d.score = score;
  return d;
}

GroundTruthChar gt(BoxXYXY b, int cls, AestheticBits bits = {}) {
  GroundTruthChar g;
  g.box = b;
  g.class_id = cls;
  g.aesthetic = bits;
  return g;
}

TEST(Match, ExactHit) {
  const std::vector<Detection> p{det({0, 0, 10, 10}, 3, 0.9)};
  const std::vector<GroundTruthChar> g{gt({0, 0, 10, 10}, 3)};
  const auto m = match_detections(p, g, 0.5);
  ASSERT_TRUE(m.det_gt[0]);
  EXPECT_EQ(*m.det_gt[0], 0u);
  EXPECT_EQ(m.det_iou[0], 1.0);
  EXPECT_TRUE(m.gt_matched[0]);
}

TEST(Match, ClassGate) {
  const std::vector<Detection> p{det({0, 0, 10, 10}, 10, 0.9)};
  const std::vector<GroundTruthChar> g{gt({0, 0, 10, 10}, 11)};
  EXPECT_FALSE(match_detections(p, g, 0.5).det_gt[0]);
}

TEST(Match, GreedyByScoreAgreesWithExhaustiveAssignment) {
  // Input order deliberately puts the weaker prediction first.
  const std::vector<Detection> p{det({0, 0, 10, 9}, 1, 0.8), det({0, 0, 10, 8}, 1, 0.9)};
  const std::vector<GroundTruthChar> g{gt({0, 0, 10, 10}, 1)};
  const auto m = match_detections(p, g, 0.5);
  EXPECT_FALSE(m.det_gt[0]);
  ASSERT_TRUE(m.det_gt[1]);

  // Exhaustive: among assignments of the single GT, the greedy rule picks the
  // one maximising the score of the matched prediction.
  std::size_t best = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (oracle::box_iou(p[i].box, g[0].box) >= 0.5 && p[i].score > p[best].score) best = i;
  }
  EXPECT_EQ(best, 1u);
}

TEST(Match, EachGtMatchedOnce) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 100; ++trial) {
    const auto inst = oracle::random_det_instance(rng, 1, 30, 3);
    if (inst.preds.empty()) continue;
    const auto m = match_detections(inst.preds[0].dets, inst.gts[0].chars, 0.5);
    std::vector<int> hits(inst.gts[0].chars.size(), 0);
    for (std::size_t d = 0; d < m.det_gt.size(); ++d) {
      if (!m.det_gt[d]) continue;
      ++hits[*m.det_gt[d]];
      EXPECT_GE(m.det_iou[d], 0.5);
      EXPECT_EQ(inst.preds[0].dets[d].class_id, inst.gts[0].chars[*m.det_gt[d]].class_id);
    }
    for (int h : hits) EXPECT_LE(h, 1);
  }
}

TEST(AssignMaxIou, PicksBestAndRespectsFloor) {
  const std::vector<BoxXYXY> boxes{{0, 0, 10, 10}, {50, 50, 60, 60}};
  const std::vector<BoxXYXY> gts{{0, 5, 10, 15}, {0, 0, 10, 11}};
  const auto a = assign_max_iou(boxes, gts, 0.3);
  EXPECT_EQ(a[0], std::optional<std::size_t>(1));
  EXPECT_FALSE(a[1]);
}

TEST(AveragePrecision, SingleTruePositive) {
  const std::vector<RankedMatch> r{{0.9, true}};
  EXPECT_EQ(average_precision(r, 1), 1.0);
}

TEST(AveragePrecision, NoDetections) { EXPECT_EQ(average_precision({}, 1), 0.0); }

TEST(AveragePrecision, TpFpTpAgainstBruteForce) {
  // Recall 0.5 at precision 1 covers 51 grid points, recall 1.0 at 2/3 the other 50.
  const std::vector<RankedMatch> r{{0.9, true}, {0.8, false}, {0.7, true}};
  const double expected = 253.0 / 303.0;
  EXPECT_NEAR(oracle::brute_ap({true, false, true}, 2), expected, 1e-15);
  EXPECT_NEAR(average_precision(r, 2), expected, 1e-9);
}

TEST(AveragePrecision, MatchesBruteForceOnRandomRankings) {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = rng() % 40;
    std::vector<RankedMatch> r;
    std::vector<bool> tps;
    std::size_t tp = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const bool t = rng() % 2;
      tp += t;
      r.push_back({1.0 - static_cast<double>(i) / 100.0, t});
      tps.push_back(t);
    }
    const std::size_t num_gt = tp + rng() % 5;
    if (num_gt == 0) continue;
    EXPECT_NEAR(average_precision(r, num_gt), oracle::brute_ap(tps, num_gt), 1e-12);
  }
}

TEST(AveragePrecision, RejectsUnsorted) {
  const std::vector<RankedMatch> r{{0.5, true}, {0.6, false}};
  EXPECT_THROW(average_precision(r, 1), ValidationError);
}

TEST(AveragePrecision, TrailingFalsePositiveNeverHelps) {
  std::mt19937_64 rng(78);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<RankedMatch> r;
    std::size_t tp = 0;
    for (int i = 0; i < 20; ++i) {
      const bool t = rng() % 2;
      tp += t;
      r.push_back({1.0 - i * 0.01, t});
    }
    const double before = average_precision(r, tp + 1);
    r.push_back({0.0, false});
    EXPECT_LE(average_precision(r, tp + 1), before);
  }
}

std::vector<ImageRecord> toy_dataset() {
  ImageRecord a;
  a.image_id = "a";
  a.dims = {100, 100};
  a.chars = {gt({0, 0, 10, 10}, 1), gt({20, 20, 30, 30}, 2), gt({40, 40, 50, 50}, 1)};
  ImageRecord b;
  b.image_id = "b";
  b.dims = {100, 100};
  b.chars = {gt({5, 5, 15, 15}, 2)};
  return {a, b};
}

std::vector<ImagePredictions> perfect(const std::vector<ImageRecord>& gts) {
  std::vector<ImagePredictions> out;
  for (const auto& g : gts) {
    ImagePredictions p;
    p.image_id = g.image_id;
    for (const auto& c : g.chars) p.dets.push_back(det(c.box, c.class_id, 1.0));
    out.push_back(p);
  }
  return out;
}

TEST(EvaluateDetection, PerfectPredictions) {
  const auto gts = toy_dataset();
  const auto thr = coco_iou_thresholds();
  const auto r = evaluate_detection(perfect(gts), gts, thr);
  EXPECT_EQ(r.ap, 1.0);
  EXPECT_EQ(r.ap50, 1.0);
  EXPECT_EQ(r.ap75, 1.0);
  EXPECT_EQ(r.per_class.size(), 2u);
  EXPECT_EQ(r.num_gt, 4u);
}

TEST(EvaluateDetection, NoPredictions) {
  const auto gts = toy_dataset();
  const auto thr = coco_iou_thresholds();
  const auto r = evaluate_detection({}, gts, thr);
  EXPECT_EQ(r.ap, 0.0);
  EXPECT_EQ(r.ap50, 0.0);
  EXPECT_EQ(r.ap75, 0.0);
}

TEST(EvaluateDetection, UnknownImageRejected) {
  const auto gts = toy_dataset();
  std::vector<ImagePredictions> preds{{"zzz", {det({0, 0, 1, 1}, 1, 0.5)}}};
  const auto thr = coco_iou_thresholds();
  try {
    evaluate_detection(preds, gts, thr);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("zzz"), std::string::npos);
  }
}

TEST(EvaluateDetection, ThreeImageSetMatchesNaiveEvaluator) {
  auto gts = toy_dataset();
  ImageRecord c;
  c.image_id = "c";
  c.dims = {64, 64};
  c.chars = {gt({1, 1, 9, 9}, 1)};
  gts.push_back(c);
  std::vector<ImagePredictions> preds{
      {"a", {det({0, 0, 10, 9}, 1, 0.9), det({41, 41, 50, 50}, 1, 0.6), det({0, 0, 10, 10}, 1, 0.4),
             det({22, 22, 30, 30}, 2, 0.7)}},
      {"b", {det({5, 5, 14, 15}, 2, 0.8), det({50, 50, 60, 60}, 2, 0.75)}},
      {"c", {det({1, 2, 9, 9}, 1, 0.6), det({1, 1, 9, 9}, 5, 0.95)}}};
  const auto thr = coco_iou_thresholds();
  const auto got = evaluate_detection(preds, gts, thr);
  const auto want = oracle::brute_evaluate(preds, gts, thr);
  EXPECT_NEAR(got.ap, want.ap, 1e-9);
  EXPECT_NEAR(got.ap50, want.ap50, 1e-9);
  EXPECT_NEAR(got.ap75, want.ap75, 1e-9);
  EXPECT_LE(got.ap, got.ap50);
}

TEST(EvaluateDetection, SingleThresholdStillReportsAp75) {
  const auto gts = toy_dataset();
  const std::vector<double> thr{0.5};
  const auto r = evaluate_detection(perfect(gts), gts, thr);
  EXPECT_EQ(r.ap, r.ap50);
  EXPECT_EQ(r.ap75, 1.0);
}

TEST(EvaluateDetection, ScoreRescalingInvariance) {
  std::mt19937_64 rng(55);
  const auto thr = coco_iou_thresholds();
  for (int trial = 0; trial < 50; ++trial) {
    const auto inst = oracle::random_det_instance(rng, 5, 30, 4);
    auto squashed = inst.preds;
    for (auto& p : squashed) {
      for (auto& d : p.dets) d.score = d.score * d.score * 0.5;  // strictly monotone on [0, 1]
    }
    const auto a = evaluate_detection(inst.preds, inst.gts, thr);
    const auto b = evaluate_detection(squashed, inst.gts, thr);
    EXPECT_NEAR(a.ap, b.ap, 1e-12);
    EXPECT_NEAR(a.ap50, b.ap50, 1e-12);
  }
}

TEST(FBeta, Identities) {
  EXPECT_DOUBLE_EQ(f_beta(0.77, 0.77, 2.0), 0.77);
  EXPECT_NEAR(f_beta(0.5, 1.0, 2.0), 2.5 / 3.0, 1e-15);
  EXPECT_EQ(f_beta(0.0, 0.0, 2.0), 0.0);
}

std::vector<ImagePredictions> with_aesthetics(const std::vector<ImageRecord>& gts) {
  auto preds = perfect(gts);
  for (std::size_t i = 0; i < gts.size(); ++i) {
    for (std::size_t k = 0; k < gts[i].chars.size(); ++k) {
      AestheticScores s{};
      for (std::size_t j = 0; j < 3; ++j) s[j] = gts[i].chars[k].aesthetic[j] ? 0.9 : 0.05;
      preds[i].dets[k].aesthetic_scores = s;
    }
  }
  return preds;
}

TEST(EvaluateAesthetic, PerfectPredictions) {
  auto gts = toy_dataset();
  gts[0].chars[0].aesthetic = {true, false, true};
  gts[1].chars[0].aesthetic = {false, true, false};
  const auto r = evaluate_aesthetic(with_aesthetics(gts), gts, 0.5, 0.2);
  EXPECT_EQ(r.precision, 1.0);
  EXPECT_EQ(r.recall, 1.0);
  EXPECT_EQ(r.f2, 1.0);
}

TEST(EvaluateAesthetic, CountsUnmatchedSides) {
  auto gts = toy_dataset();
  gts[0].chars[0].aesthetic = {true, false, false};
  gts[0].chars[1].aesthetic = {false, false, true};  // left unmatched -> FN
  std::vector<ImagePredictions> preds{{"a", {}}};
  Detection hit = det({0, 0, 10, 10}, 1, 0.9);
  hit.aesthetic_scores = AestheticScores{0.5, 0.3, 0.0};  // TP, FP
  Detection miss = det({70, 70, 80, 80}, 1, 0.9);
  miss.aesthetic_scores = AestheticScores{0.0, 0.0, 0.9};  // unmatched -> FP
  preds[0].dets = {hit, miss};
  const auto r = evaluate_aesthetic(preds, gts, 0.5, 0.2);
  EXPECT_EQ(r.tp, (std::array<std::size_t, 3>{1, 0, 0}));
  EXPECT_EQ(r.fp, (std::array<std::size_t, 3>{0, 1, 1}));
  EXPECT_EQ(r.fn, (std::array<std::size_t, 3>{0, 0, 1}));
  EXPECT_DOUBLE_EQ(r.precision, 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(r.recall, 0.5);
}

TEST(EvaluateAesthetic, MissingScoresRejected) {
  const auto gts = toy_dataset();
  EXPECT_THROW(evaluate_aesthetic(perfect(gts), gts, 0.5, 0.2), ValidationError);
}

TEST(Score3s, Normalisations) {
  EXPECT_EQ(normalised_speed(31.04, 30.0), 1.0);
  EXPECT_EQ(normalised_speed(15.0, 30.0), 0.5);
  EXPECT_EQ(normalised_speed(0.0, 30.0), 0.0);
  EXPECT_NEAR(normalised_size(305.88, 4000.0), 0.07647, 1e-15);
  EXPECT_EQ(normalised_size(4000.0, 4000.0), 1.0);
  EXPECT_EQ(normalised_size(8000.0, 4000.0), 1.0);
  EXPECT_THROW(normalised_speed(-1.0, 30.0), ValidationError);
  EXPECT_THROW(normalised_size(-1.0, 4000.0), ValidationError);
  EXPECT_THROW(score_3s(1.2, 30, 100, 30, 4000), ValidationError);
}

TEST(Score3s, ReferenceRows) {
  // Hand values of 0.2 * speed + 0.2 * (1 - size) + 0.6 * score.
  EXPECT_NEAR(score_3s(0.59, 31.04, 305.88, 30, 4000).s3, 0.2 + 0.2 * (1 - 0.07647) + 0.354, 1e-12);
  EXPECT_NEAR(score_3s(0.62, 3.69, 1323.75, 30, 4000).s3, 0.530412, 1e-6);
  // The reference value for this row is 0.85; the formula gives 0.8566 (see README).
  EXPECT_NEAR(score_3s(0.79, 29.68, 305.88, 30, 4000).s3, 0.856572667, 1e-9);
}

TEST(Score3s, MonotoneAndBounded) {
  std::mt19937_64 rng(90);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const double s = u(rng), f = 60 * u(rng), m = 8000 * u(rng);
    const double v = score_3s(s, f, m, 30, 4000).s3;
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
    EXPECT_LE(v, score_3s(std::min(1.0, s + 0.1), f, m, 30, 4000).s3);
    EXPECT_LE(v, score_3s(s, f + 1, m, 30, 4000).s3);
    EXPECT_GE(v, score_3s(s, f, m + 100, 30, 4000).s3);
  }
}

}  // namespace
}  // namespace ictext

#include <gtest/gtest.h>

#include <random>

#include "fixture.hpp"
#include "ictext/dataio.hpp"
#include "ictext/errors.hpp"
#include "ictext/fusion.hpp"
#include "ictext/headmath.hpp"
#include "ictext/metrics.hpp"
#include "ictext/parallel.hpp"
#include "ictext/sampling.hpp"

namespace ictext {
namespace {

class Parallel : public ::testing::TestWithParam<int> {
 protected:
  void SetUp() override { set_num_threads(GetParam()); }
  void TearDown() override { set_num_threads(0); }
};

TEST_P(Parallel, EvaluateDetectionMatchesSerial) {
  const auto d = fixture::make_dataset(11, 150, 20);
  const auto thresholds = coco_iou_thresholds();
  const auto par = evaluate_detection(d.preds, d.gt, thresholds);
  const auto ser = serial::evaluate_detection(d.preds, d.gt, thresholds);
  EXPECT_EQ(to_json(par), to_json(ser));
}

TEST_P(Parallel, ClassFrequenciesMatchSerial) {
  const auto d = fixture::make_dataset(12, 300, 15);
  EXPECT_EQ(class_frequencies(d.gt), serial::class_frequencies(d.gt));
}

TEST_P(Parallel, FuseRotatedViewsMatchesSerial) {
  const auto d = fixture::make_dataset(13, 60, 10);
  std::vector<RotatedViews> views(d.gt.size());
  for (Rotation rot : kAllRotations) {
    const auto rotated = fixture::rotate_predictions(d, rot);
    for (std::size_t i = 0; i < views.size(); ++i) {
      views[i].dims = d.gt[i].dims;
      views[i].preds_by_rotation[rot] = rotated[i].dets;
    }
  }
  FusionConfig cfg;
  const auto par = fuse_rotated_views_batch(views, cfg, 0.3);
  const auto ser = serial::fuse_rotated_views_batch(views, cfg, 0.3);
  ASSERT_EQ(par.size(), ser.size());
  for (std::size_t i = 0; i < par.size(); ++i) EXPECT_EQ(par[i], ser[i]);
}

TEST_P(Parallel, DistillationLossMatchesSerial) {
  std::mt19937_64 rng(14);
  std::normal_distribution<double> n(0.0, 2.0);
  const std::size_t slots = 500;
  FeatureGrid t(slots, kTask2HeadWidth), s(slots, kTask2HeadWidth);
  DistillMask mask(slots);
  for (std::size_t i = 0; i < slots; ++i) {
    mask[i] = rng() % 2;
    for (std::size_t c = 0; c < kTask2HeadWidth; ++c) {
      t.at(i, c) = n(rng);
      s.at(i, c) = n(rng);
    }
  }
  const auto par = masked_distillation_loss(t, s, mask);
  const auto ser = serial::masked_distillation_loss(t, s, mask);
  EXPECT_NEAR(par.mse, ser.mse, 1e-9);
  EXPECT_NEAR(par.kl, ser.kl, 1e-9);
  EXPECT_NEAR(par.total, ser.total, 1e-9);
  // Reduction order is fixed, so the parallel value is the same on every run.
  EXPECT_EQ(masked_distillation_loss(t, s, mask).total, par.total);
}

TEST_P(Parallel, ExceptionsPropagate) {
  auto d = fixture::make_dataset(15, 40, 3);
  d.preds[25].image_id = "nowhere";
  EXPECT_THROW(evaluate_detection(d.preds, d.gt, coco_iou_thresholds()), ValidationError);
}

INSTANTIATE_TEST_SUITE_P(Threads, Parallel, ::testing::Values(1, 2, 4, 7));

TEST(ParallelConfig, ThreadCount) {
  set_num_threads(3);
  if (parallel_enabled()) {
    EXPECT_EQ(max_threads(), 3);
  } else {
    EXPECT_EQ(max_threads(), 1);
  }
  set_num_threads(0);
  EXPECT_GE(max_threads(), 1);
}

}  // namespace
}  // namespace ictext

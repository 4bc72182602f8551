#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "ictext/annotations.hpp"
#include "ictext/detection.hpp"

namespace ictext {

// ---------------------------------------------------------------------------
// Matching

struct MatchResult {
  double iou_threshold = 0.5;
  /// Indexed like the input predictions.
  std::vector<std::optional<std::size_t>> det_gt;
  std::vector<double> det_iou;
  /// Indexed like the input ground truths.
  std::vector<bool> gt_matched;
};

/// Greedy same-class matching. Predictions are visited by descending score
/// (ties: input order); each takes the unmatched same-class ground truth
/// with the highest IoU (ties: lowest index) if that IoU >= threshold.
MatchResult match_detections(std::span<const Detection> preds,
                             std::span<const GroundTruthChar> gts, double iou_threshold);

/// Maximum-IoU assignment of each box to a ground-truth box, or none when
/// the best IoU is below `min_iou`. Ground truths may be reused. Feeds
/// iou_aware_targets and distill_mask slot assignments.
std::vector<std::optional<std::size_t>> assign_max_iou(std::span<const BoxXYXY> boxes,
                                                       std::span<const BoxXYXY> gt_boxes,
                                                       double min_iou);

// ---------------------------------------------------------------------------
// Average precision

struct RankedMatch {
  double score = 0.0;
  bool is_tp = false;
};

/// 101-point interpolated AP (COCO). `ranked` must be sorted by descending
/// score. Returns 0 when num_gt is 0.
double average_precision(std::span<const RankedMatch> ranked, std::size_t num_gt);

/// 0.50, 0.55, ..., 0.95.
std::vector<double> coco_iou_thresholds();

struct ClassAP {
  int class_id = 0;
  std::size_t num_gt = 0;
  std::size_t num_dets = 0;
  /// Mean over the evaluated thresholds.
  double ap = 0.0;
  double ap50 = 0.0;
  double ap75 = 0.0;
};

struct DetEvalReport {
  double ap = 0.0;
  double ap50 = 0.0;
  double ap75 = 0.0;
  std::vector<double> iou_thresholds;
  /// Classes present in the ground truth, ascending class id.
  std::vector<ClassAP> per_class;
  std::size_t num_images = 0;
  std::size_t num_gt = 0;
  std::size_t num_dets = 0;
};

/// Detection AP over a dataset.
///
/// Per class and IoU threshold, predictions are matched image by image,
/// pooled across images (ties: image order in `gts`, then per-image score
/// rank) and scored with average_precision. AP is the mean over classes
/// present in the ground truth and over `iou_thresholds`; AP@0.5 and
/// AP@0.75 are class means at those thresholds. Per-image matching runs in
/// parallel; pooling is sequential, so results do not depend on threads.
DetEvalReport evaluate_detection(std::span<const ImagePredictions> preds,
                                 std::span<const ImageRecord> gts,
                                 std::span<const double> iou_thresholds);

// ---------------------------------------------------------------------------
// Aesthetic multi-label

struct AesEvalReport {
  double precision = 0.0;
  double recall = 0.0;
  double f2 = 0.0;
  std::array<std::size_t, 3> tp{};
  std::array<std::size_t, 3> fp{};
  std::array<std::size_t, 3> fn{};
  std::size_t matched_pairs = 0;
};

/// F-beta from precision and recall; 0 when the denominator vanishes.
double f_beta(double precision, double recall, double beta);

/// Multi-label aesthetic precision / recall / F2 (micro-averaged).
///
/// Predictions are matched to same-class ground truth at `match_iou`. Bits
/// are decoded from the predictions' aesthetic scores at `threshold`.
/// Matched pairs contribute per-label TP/FP/FN; set bits of unmatched
/// predictions are false positives and set bits of unmatched ground truth
/// are false negatives.
AesEvalReport evaluate_aesthetic(std::span<const ImagePredictions> preds,
                                 std::span<const ImageRecord> gts, double match_iou,
                                 double threshold);

// ---------------------------------------------------------------------------
// Composite speed / size / score

struct S3Breakdown {
  double actual_fps = 0.0;
  double allocated_mb = 0.0;
  double acceptable_fps = 0.0;
  double acceptable_mb = 0.0;
  double normalised_speed = 0.0;
  double normalised_size = 0.0;
  double normalised_score = 0.0;
  double s3 = 0.0;
};

/// min(actual_fps / acceptable_fps, 1).
double normalised_speed(double actual_fps, double acceptable_fps);
/// min(allocated_mb / acceptable_mb, 1).
double normalised_size(double allocated_mb, double acceptable_mb);

/// 0.2 * speed + 0.2 * (1 - size) + 0.6 * score.
S3Breakdown score_3s(double normalised_score, double actual_fps, double allocated_mb,
                     double acceptable_fps, double acceptable_mb);

namespace serial {

DetEvalReport evaluate_detection(std::span<const ImagePredictions> preds,
                                 std::span<const ImageRecord> gts,
                                 std::span<const double> iou_thresholds);

}  // namespace serial

}  // namespace ictext

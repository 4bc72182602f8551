#pragma once

#include <map>
#include <span>
#include <vector>

#include "ictext/detection.hpp"
#include "ictext/geometry.hpp"

namespace ictext {

/// How a fused cluster's mean score is rescaled.
enum class ConfRescale {
  none,
  /// Multiply by min(members, num_sources) / num_sources.
  count_over_sources,
};

struct FusionConfig {
  double iou_threshold = 0.55;
  /// Detections scoring below this are ignored.
  double skip_score = 0.0;
  int num_sources = 1;
  ConfRescale conf_rescale = ConfRescale::count_over_sources;

  void validate() const;
};

/// Class-aware greedy non-maximum suppression.
///
/// Detections scoring below `score_threshold` are dropped, the rest are
/// visited by descending score (ties: class id, then input order) and kept
/// when their IoU with every kept detection of the same class is at most
/// `iou_threshold`. Kept detections are returned unmodified in visit order.
std::vector<Detection> nms(std::span<const Detection> dets, double iou_threshold,
                           double score_threshold);

/// Weighted Boxes Fusion over `per_source` detection lists.
///
/// Per class, boxes are visited by descending score (ties: source order,
/// then input order). A box joins the first cluster whose running fused box
/// overlaps it with IoU > cfg.iou_threshold, otherwise it opens a new
/// cluster. Fused coordinates and aesthetic scores are score-weighted
/// averages of the members; the fused score is the members' mean score,
/// optionally rescaled per cfg.conf_rescale. Aesthetic scores survive only
/// when every member carries them. Output is sorted by descending fused
/// score (ties: class id, then cluster creation order).
std::vector<Detection> weighted_boxes_fusion(std::span<const std::vector<Detection>> per_source,
                                             const FusionConfig& cfg);

/// Pseudo-labels for one image from predictions made on rotated copies of it.
///
/// Each view's boxes are mapped back into the original frame, the views are
/// fused with weighted_boxes_fusion (num_sources = number of views; the
/// remaining fields of `cfg` apply) and fused detections scoring below
/// `min_pseudo_score` are dropped.
std::vector<Detection> fuse_rotated_views(
    const std::map<Rotation, std::vector<Detection>>& preds_by_rotation, ImageDims dims,
    const FusionConfig& cfg, double min_pseudo_score);

/// Inputs for pseudo-labelling one image.
struct RotatedViews {
  ImageDims dims;
  std::map<Rotation, std::vector<Detection>> preds_by_rotation;
};

/// fuse_rotated_views over many images, parallel across images.
std::vector<std::vector<Detection>> fuse_rotated_views_batch(std::span<const RotatedViews> images,
                                                             const FusionConfig& cfg,
                                                             double min_pseudo_score);

namespace serial {

std::vector<std::vector<Detection>> fuse_rotated_views_batch(std::span<const RotatedViews> images,
                                                             const FusionConfig& cfg,
                                                             double min_pseudo_score);

}  // namespace serial

}  // namespace ictext

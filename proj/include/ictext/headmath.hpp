#pragma once

#include <array>
#include <bitset>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "ictext/annotations.hpp"
#include "ictext/classes.hpp"
#include "ictext/detection.hpp"
#include "ictext/geometry.hpp"

namespace ictext {

// Head vector layout: [prob, x, y, w, h] ++ 62 class scores (++ 3 aesthetic).
inline constexpr std::size_t kHeadPrefix = 5;
inline constexpr std::size_t kClassOffset = kHeadPrefix;
inline constexpr std::size_t kAestheticOffset = kClassOffset + kNumClasses;
inline constexpr std::size_t kTask1HeadWidth = kHeadPrefix + kNumClasses;
inline constexpr std::size_t kTask2HeadWidth = kTask1HeadWidth + kNumAesthetic;

struct DecodedHead {
  double confidence = 0.0;
  BoxXYXY box;
  std::array<double, kNumClasses> class_scores{};
  std::optional<AestheticScores> aesthetic_scores;
};

/// Splits a 67- or 70-wide head vector, converting the center/size box to
/// corners. Throws LayoutError on other widths and ValidationError when a
/// score leaves [0, 1] or the box size is negative.
DecodedHead decode_head_vector(std::span<const double> v);

/// Mean binary cross entropy. Predictions are clamped to [1e-7, 1 - 1e-7]
/// before the log; targets must be 0 or 1.
double bce_loss(std::span<const double> predicted, std::span<const double> target);

/// Bit k is set iff scores[k] >= threshold.
AestheticBits aesthetic_decode(const AestheticScores& scores, double threshold);

/// IoU-aware confidence targets: the IoU between each prediction and the
/// ground truth it is assigned to, 0 for unassigned predictions.
std::vector<double> iou_aware_targets(std::span<const BoxXYXY> pred_boxes,
                                      std::span<const std::optional<std::size_t>> assignments,
                                      std::span<const BoxXYXY> gt_boxes);

class RareClassSet {
 public:
  RareClassSet() = default;
  explicit RareClassSet(std::span<const int> classes);

  /// Lowercase letters a-z (indices 10..35).
  static RareClassSet lowercase();

  bool contains(int class_id) const noexcept;
  std::size_t size() const noexcept { return bits_.count(); }

 private:
  std::bitset<kNumClasses> bits_;
};

/// Ground truth assigned to an anchor slot.
struct SlotTarget {
  BoxXYXY gt_box;
  int gt_class = 0;
};

using DistillMask = std::vector<std::uint8_t>;

/// mask[s] = 1 iff slot s has an assigned ground truth of a rare class and
/// the teacher's box overlaps it with IoU strictly above `iou_threshold`.
DistillMask distill_mask(std::span<const BoxXYXY> teacher_boxes,
                         std::span<const std::optional<SlotTarget>> slot_gt,
                         const RareClassSet& rare, double iou_threshold);

/// Dense (slots x channels) row-major feature array. Channels must be a
/// head-vector width so that the class slice sits at kClassOffset.
class FeatureGrid {
 public:
  FeatureGrid() = default;
  FeatureGrid(std::size_t slots, std::size_t channels, std::vector<double> data);
  FeatureGrid(std::size_t slots, std::size_t channels);

  std::size_t slots() const noexcept { return slots_; }
  std::size_t channels() const noexcept { return channels_; }
  std::span<const double> data() const noexcept { return data_; }

  std::span<const double> row(std::size_t slot) const;
  std::span<double> row(std::size_t slot);
  std::span<const double> class_slice(std::size_t slot) const;

  double& at(std::size_t slot, std::size_t channel);
  double at(std::size_t slot, std::size_t channel) const;

 private:
  std::size_t slots_ = 0;
  std::size_t channels_ = kTask1HeadWidth;
  std::vector<double> data_;
};

struct DistillLoss {
  double total = 0.0;
  double mse = 0.0;
  double kl = 0.0;
};

/// Masked feature distillation loss.
///
/// mse: mean over every grid element of (f_t * mask - f_s * mask)^2, the
/// slot mask broadcast across channels. kl: mean over slots of
/// KL(softmax(teacher classes) || softmax(student classes)) at temperature 1,
/// not masked. total = mse + kl; any loss weight is the caller's business.
///
/// Per-slot terms are computed in parallel and reduced in slot order, so
/// the result does not depend on the thread count.
DistillLoss masked_distillation_loss(const FeatureGrid& teacher, const FeatureGrid& student,
                                     std::span<const std::uint8_t> mask);

/// KL(softmax(p_logits) || softmax(q_logits)).
double softmax_kl(std::span<const double> p_logits, std::span<const double> q_logits);

namespace serial {

DistillLoss masked_distillation_loss(const FeatureGrid& teacher, const FeatureGrid& student,
                                     std::span<const std::uint8_t> mask);

}  // namespace serial

}  // namespace ictext

#include "ictext/headmath.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "ictext/errors.hpp"

namespace ictext {

namespace {

void check_unit(double v, const char* what) {
  if (!(v >= 0.0 && v <= 1.0)) {
    throw ValidationError(std::string(what) + " outside [0, 1]: " + std::to_string(v));
  }
}

}  // namespace

DecodedHead decode_head_vector(std::span<const double> v) {
  if (v.size() != kTask1HeadWidth && v.size() != kTask2HeadWidth) {
    throw LayoutError("head vector length must be " + std::to_string(kTask1HeadWidth) + " or " +
                      std::to_string(kTask2HeadWidth) + ", got " + std::to_string(v.size()));
  }
  for (double x : v) {
    if (!std::isfinite(x)) throw ValidationError("head vector has a non-finite entry");
  }
  DecodedHead out;
  out.confidence = v[0];
  check_unit(out.confidence, "head confidence");
  const double w = v[3];
  const double h = v[4];
  if (w < 0.0 || h < 0.0) throw ValidationError("head vector box has negative size");
  out.box = BoxXYXY::from_cxcywh(v[1], v[2], w, h);

  for (std::size_t k = 0; k < out.class_scores.size(); ++k) {
    out.class_scores[k] = v[kClassOffset + k];
    check_unit(out.class_scores[k], "class score");
  }
  if (v.size() == kTask2HeadWidth) {
    AestheticScores a{};
    for (std::size_t k = 0; k < a.size(); ++k) {
      a[k] = v[kAestheticOffset + k];
      check_unit(a[k], "aesthetic score");
    }
    out.aesthetic_scores = a;
  }
  return out;
}

double bce_loss(std::span<const double> predicted, std::span<const double> target) {
  if (predicted.size() != target.size()) {
    throw ValidationError("bce_loss: prediction and target lengths differ");
  }
  if (predicted.empty()) throw ValidationError("bce_loss: empty input");
  constexpr double eps = 1e-7;
  double sum = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    check_unit(predicted[i], "BCE prediction");
    const double t = target[i];
    if (t != 0.0 && t != 1.0) throw ValidationError("BCE target must be 0 or 1");
    const double p = std::clamp(predicted[i], eps, 1.0 - eps);
    sum += -(t * std::log(p) + (1.0 - t) * std::log(1.0 - p));
  }
  return sum / static_cast<double>(predicted.size());
}

AestheticBits aesthetic_decode(const AestheticScores& scores, double threshold) {
  AestheticBits bits{};
  for (std::size_t k = 0; k < scores.size(); ++k) bits[k] = scores[k] >= threshold;
  return bits;
}

std::vector<double> iou_aware_targets(std::span<const BoxXYXY> pred_boxes,
                                      std::span<const std::optional<std::size_t>> assignments,
                                      std::span<const BoxXYXY> gt_boxes) {
  if (assignments.size() != pred_boxes.size()) {
    throw ValidationError("iou_aware_targets: one assignment per prediction required");
  }
  std::vector<double> targets(pred_boxes.size(), 0.0);
  for (std::size_t i = 0; i < pred_boxes.size(); ++i) {
    pred_boxes[i].validate();
    if (!assignments[i]) continue;
    const std::size_t g = *assignments[i];
    if (g >= gt_boxes.size()) {
      throw ValidationError("iou_aware_targets: assignment " + std::to_string(g) +
                            " out of range for " + std::to_string(gt_boxes.size()) +
                            " ground-truth boxes");
    }
    targets[i] = iou(pred_boxes[i], gt_boxes[g]);
  }
  return targets;
}

RareClassSet::RareClassSet(std::span<const int> classes) {
  for (int c : classes) {
    if (!is_valid_class(c)) throw ValidationError("rare class id out of range: " + std::to_string(c));
    bits_.set(static_cast<std::size_t>(c));
  }
}

RareClassSet RareClassSet::lowercase() {
  RareClassSet s;
  for (int c = kFirstLowercase; c <= kLastLowercase; ++c) s.bits_.set(static_cast<std::size_t>(c));
  return s;
}

bool RareClassSet::contains(int class_id) const noexcept {
  return is_valid_class(class_id) && bits_.test(static_cast<std::size_t>(class_id));
}

DistillMask distill_mask(std::span<const BoxXYXY> teacher_boxes,
                         std::span<const std::optional<SlotTarget>> slot_gt,
                         const RareClassSet& rare, double iou_threshold) {
  if (teacher_boxes.size() != slot_gt.size()) {
    throw ValidationError("distill_mask: teacher boxes and slot targets differ in slot count");
  }
  check_unit(iou_threshold, "distillation IoU threshold");
  DistillMask mask(teacher_boxes.size(), 0);
  for (std::size_t s = 0; s < mask.size(); ++s) {
    const auto& gt = slot_gt[s];
    if (!gt || !rare.contains(gt->gt_class)) continue;
    mask[s] = iou(teacher_boxes[s], gt->gt_box) > iou_threshold ? 1 : 0;
  }
  return mask;
}

FeatureGrid::FeatureGrid(std::size_t slots, std::size_t channels, std::vector<double> data)
    : slots_(slots), channels_(channels), data_(std::move(data)) {
  if (channels != kTask1HeadWidth && channels != kTask2HeadWidth) {
    throw LayoutError("feature grid channels must be a head-vector width (" +
                      std::to_string(kTask1HeadWidth) + " or " + std::to_string(kTask2HeadWidth) +
                      "), got " + std::to_string(channels));
  }
  if (data_.size() != slots * channels) {
    throw LayoutError("feature grid data has " + std::to_string(data_.size()) +
                      " values, shape needs " + std::to_string(slots * channels));
  }
  for (double x : data_) {
    if (!std::isfinite(x)) throw ValidationError("feature grid has a non-finite entry");
  }
}

FeatureGrid::FeatureGrid(std::size_t slots, std::size_t channels)
    : FeatureGrid(slots, channels, std::vector<double>(slots * channels, 0.0)) {}

std::span<const double> FeatureGrid::row(std::size_t slot) const {
  return std::span<const double>(data_).subspan(slot * channels_, channels_);
}

std::span<double> FeatureGrid::row(std::size_t slot) {
  return std::span<double>(data_).subspan(slot * channels_, channels_);
}

std::span<const double> FeatureGrid::class_slice(std::size_t slot) const {
  return row(slot).subspan(kClassOffset, kNumClasses);
}

double& FeatureGrid::at(std::size_t slot, std::size_t channel) {
  return data_.at(slot * channels_ + channel);
}

double FeatureGrid::at(std::size_t slot, std::size_t channel) const {
  return data_.at(slot * channels_ + channel);
}

namespace {

void log_softmax(std::span<const double> logits, std::span<double> out) {
  const double m = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double x : logits) z += std::exp(x - m);
  const double log_z = m + std::log(z);
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - log_z;
}

void check_grids(const FeatureGrid& t, const FeatureGrid& s, std::span<const std::uint8_t> mask) {
  if (t.slots() != s.slots() || t.channels() != s.channels()) {
    throw ValidationError("teacher and student feature grids differ in shape");
  }
  if (mask.size() != t.slots()) {
    throw ValidationError("distillation mask has " + std::to_string(mask.size()) +
                          " slots, grids have " + std::to_string(t.slots()));
  }
  for (auto m : mask) {
    if (m > 1) throw ValidationError("distillation mask must be binary");
  }
  // Default-constructed or mutated grids bypass the constructor check.
  for (double x : t.data()) {
    if (!std::isfinite(x)) throw ValidationError("teacher features contain a non-finite value");
  }
  for (double x : s.data()) {
    if (!std::isfinite(x)) throw ValidationError("student features contain a non-finite value");
  }
}

}  // namespace

double softmax_kl(std::span<const double> p_logits, std::span<const double> q_logits) {
  if (p_logits.size() != q_logits.size() || p_logits.empty()) {
    throw ValidationError("softmax_kl: logit vectors must be non-empty and of equal length");
  }
  std::vector<double> log_p(p_logits.size());
  std::vector<double> log_q(q_logits.size());
  log_softmax(p_logits, log_p);
  log_softmax(q_logits, log_q);
  double kl = 0.0;
  for (std::size_t i = 0; i < log_p.size(); ++i) {
    const double p = std::exp(log_p[i]);
    if (p > 0.0) kl += p * (log_p[i] - log_q[i]);
  }
  return std::max(kl, 0.0);
}

DistillLoss masked_distillation_loss(const FeatureGrid& teacher, const FeatureGrid& student,
                                     std::span<const std::uint8_t> mask) {
  check_grids(teacher, student, mask);
  const std::size_t slots = teacher.slots();
  if (slots == 0) return {};

  std::vector<double> sq(slots, 0.0);
  std::vector<double> kl(slots, 0.0);
  const auto n = static_cast<long long>(slots);
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < n; ++i) {
    const auto s = static_cast<std::size_t>(i);
    if (mask[s]) {
      const auto t = teacher.row(s);
      const auto u = student.row(s);
      double acc = 0.0;
      for (std::size_t c = 0; c < t.size(); ++c) {
        const double d = t[c] - u[c];
        acc += d * d;
      }
      sq[s] = acc;
    }
    kl[s] = softmax_kl(teacher.class_slice(s), student.class_slice(s));
  }

  double sq_sum = 0.0;
  double kl_sum = 0.0;
  for (std::size_t s = 0; s < slots; ++s) {
    sq_sum += sq[s];
    kl_sum += kl[s];
  }
  DistillLoss out;
  out.mse = sq_sum / static_cast<double>(slots * teacher.channels());
  out.kl = kl_sum / static_cast<double>(slots);
  out.total = out.mse + out.kl;
  return out;
}

namespace serial {

DistillLoss masked_distillation_loss(const FeatureGrid& teacher, const FeatureGrid& student,
                                     std::span<const std::uint8_t> mask) {
  check_grids(teacher, student, mask);
  const std::size_t slots = teacher.slots();
  if (slots == 0) return {};
  const std::size_t channels = teacher.channels();

  // Literal form: scale both grids by the mask, then take the MSE.
  double sq_sum = 0.0;
  for (std::size_t s = 0; s < slots; ++s) {
    const double m = mask[s];
    for (std::size_t c = 0; c < channels; ++c) {
      const double d = teacher.at(s, c) * m - student.at(s, c) * m;
      sq_sum += d * d;
    }
  }

  double kl_sum = 0.0;
  for (std::size_t s = 0; s < slots; ++s) {
    kl_sum += softmax_kl(teacher.class_slice(s), student.class_slice(s));
  }

  DistillLoss out;
  out.mse = sq_sum / static_cast<double>(slots * channels);
  out.kl = kl_sum / static_cast<double>(slots);
  out.total = out.mse + out.kl;
  return out;
}

}  // namespace serial

}  // namespace ictext

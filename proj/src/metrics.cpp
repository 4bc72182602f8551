#include "ictext/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <unordered_map>

#include "ictext/classes.hpp"
#include "ictext/errors.hpp"
#include "ictext/headmath.hpp"
#include "parallel_for.hpp"

namespace ictext {

namespace {

void check_unit(double v, const char* what) {
  if (!(v >= 0.0 && v <= 1.0)) {
    throw ValidationError(std::string(what) + " must lie in [0, 1], got " + std::to_string(v));
  }
}

std::vector<std::size_t> score_order(std::span<const Detection> preds) {
  std::vector<std::size_t> order(preds.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return preds[a].score > preds[b].score; });
  return order;
}

// IoU of every (prediction, ground truth) pair of the same class; -1 marks
// cross-class pairs, which can never match.
std::vector<double> iou_matrix(std::span<const Detection> preds,
                               std::span<const GroundTruthChar> gts) {
  std::vector<double> m(preds.size() * gts.size(), -1.0);
  for (std::size_t d = 0; d < preds.size(); ++d) {
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (preds[d].class_id == gts[g].class_id) m[d * gts.size() + g] = iou(preds[d].box, gts[g].box);
    }
  }
  return m;
}

// Greedy matching over a precomputed IoU matrix. `order` lists prediction
// indices in visiting order.
void greedy_match(std::span<const std::size_t> order, std::span<const double> ious,
                  std::size_t num_gt, double threshold, MatchResult& out) {
  out.iou_threshold = threshold;
  out.gt_matched.assign(num_gt, false);
  for (std::size_t d : order) {
    std::optional<std::size_t> best;
    double best_iou = -1.0;
    for (std::size_t g = 0; g < num_gt; ++g) {
      if (out.gt_matched[g]) continue;
      const double v = ious[d * num_gt + g];
      if (v < 0.0) continue;
      if (v > best_iou) {
        best_iou = v;
        best = g;
      }
    }
    if (best && best_iou >= threshold) {
      out.gt_matched[*best] = true;
      out.det_gt[d] = best;
      out.det_iou[d] = best_iou;
    } else {
      out.det_gt[d].reset();
      out.det_iou[d] = 0.0;
    }
  }
}

void validate_preds(std::span<const Detection> preds) {
  for (const auto& d : preds) d.validate();
}

void validate_gts(std::span<const GroundTruthChar> gts) {
  for (const auto& g : gts) {
    g.box.validate();
    if (!is_valid_class(g.class_id)) {
      throw ValidationError("ground-truth class id out of range: " + std::to_string(g.class_id));
    }
  }
}

}  // namespace

MatchResult match_detections(std::span<const Detection> preds,
                             std::span<const GroundTruthChar> gts, double iou_threshold) {
  check_unit(iou_threshold, "match IoU threshold");
  validate_preds(preds);
  validate_gts(gts);
  MatchResult out;
  out.det_gt.resize(preds.size());
  out.det_iou.assign(preds.size(), 0.0);
  const auto order = score_order(preds);
  const auto ious = iou_matrix(preds, gts);
  greedy_match(order, ious, gts.size(), iou_threshold, out);
  return out;
}

std::vector<std::optional<std::size_t>> assign_max_iou(std::span<const BoxXYXY> boxes,
                                                       std::span<const BoxXYXY> gt_boxes,
                                                       double min_iou) {
  check_unit(min_iou, "assignment IoU threshold");
  std::vector<std::optional<std::size_t>> out(boxes.size());
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    double best = -1.0;
    for (std::size_t g = 0; g < gt_boxes.size(); ++g) {
      const double v = iou(boxes[i], gt_boxes[g]);
      if (v > best) {
        best = v;
        out[i] = g;
      }
    }
    if (out[i] && (best < min_iou || best <= 0.0)) out[i].reset();
  }
  return out;
}

double average_precision(std::span<const RankedMatch> ranked, std::size_t num_gt) {
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    if (!std::isfinite(ranked[i].score)) throw ValidationError("AP input has a non-finite score");
    if (i > 0 && ranked[i].score > ranked[i - 1].score) {
      throw ValidationError("AP input must be sorted by descending score");
    }
  }
  const auto tp_total = static_cast<std::size_t>(
      std::count_if(ranked.begin(), ranked.end(), [](const RankedMatch& m) { return m.is_tp; }));
  if (tp_total > num_gt) {
    throw ValidationError("AP input has more true positives than ground truths");
  }
  if (num_gt == 0 || ranked.empty()) return 0.0;

  std::vector<double> recall(ranked.size());
  std::vector<double> precision(ranked.size());
  std::size_t tp = 0;
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    tp += ranked[i].is_tp ? 1 : 0;
    recall[i] = static_cast<double>(tp) / static_cast<double>(num_gt);
    precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
  }
  for (std::size_t i = precision.size() - 1; i > 0; --i) {
    precision[i - 1] = std::max(precision[i - 1], precision[i]);
  }

  double sum = 0.0;
  for (int k = 0; k <= 100; ++k) {
    // k / 100.0 and tp / num_gt are both correctly rounded quotients, so a
    // recall that equals a grid point mathematically compares equal.
    const double r = k / 100.0;
    const auto it = std::lower_bound(recall.begin(), recall.end(), r);
    if (it == recall.end()) break;
    sum += precision[static_cast<std::size_t>(it - recall.begin())];
  }
  return sum / 101.0;
}

std::vector<double> coco_iou_thresholds() {
  std::vector<double> t;
  for (int k = 0; k < 10; ++k) t.push_back((50 + 5 * k) / 100.0);
  return t;
}

namespace {

// Matching outcome of one image at every evaluated threshold.
struct ImageEval {
  std::vector<std::size_t> order;
  // tp[k][rank]: prediction at order[rank] is a true positive at threshold k.
  std::vector<std::vector<std::uint8_t>> tp;
};

ImageEval evaluate_image(std::span<const Detection> preds, std::span<const GroundTruthChar> gts,
                         std::span<const double> thresholds) {
  ImageEval out;
  out.order = score_order(preds);
  const auto ious = iou_matrix(preds, gts);
  MatchResult m;
  m.det_gt.resize(preds.size());
  m.det_iou.assign(preds.size(), 0.0);
  out.tp.resize(thresholds.size());
  for (std::size_t k = 0; k < thresholds.size(); ++k) {
    greedy_match(out.order, ious, gts.size(), thresholds[k], m);
    auto& row = out.tp[k];
    row.resize(out.order.size());
    for (std::size_t r = 0; r < out.order.size(); ++r) row[r] = m.det_gt[out.order[r]] ? 1 : 0;
  }
  return out;
}

// Predictions regrouped to follow the ground-truth image order.
std::vector<std::vector<Detection>> align_predictions(std::span<const ImagePredictions> preds,
                                                      std::span<const ImageRecord> gts) {
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < gts.size(); ++i) {
    if (!index.emplace(gts[i].image_id, i).second) {
      throw ValidationError("duplicate ground-truth image id: " + gts[i].image_id);
    }
  }
  std::vector<std::vector<Detection>> aligned(gts.size());
  for (const auto& p : preds) {
    const auto it = index.find(p.image_id);
    if (it == index.end()) {
      throw ValidationError("prediction references unknown image id: " + p.image_id);
    }
    validate_preds(p.dets);
    auto& dst = aligned[it->second];
    dst.insert(dst.end(), p.dets.begin(), p.dets.end());
  }
  return aligned;
}

DetEvalReport evaluate_detection_impl(std::span<const ImagePredictions> preds,
                                      std::span<const ImageRecord> gts,
                                      std::span<const double> iou_thresholds, bool parallel) {
  if (iou_thresholds.empty()) throw ValidationError("at least one IoU threshold is required");
  for (double t : iou_thresholds) check_unit(t, "IoU threshold");
  for (const auto& g : gts) validate_gts(g.chars);
  const auto aligned = align_predictions(preds, gts);

  // Evaluated thresholds: the requested ones, then 0.5 and 0.75 if missing.
  std::vector<double> thresholds(iou_thresholds.begin(), iou_thresholds.end());
  const std::size_t num_requested = thresholds.size();
  auto slot_of = [&](double t) {
    const auto it = std::find(thresholds.begin(), thresholds.end(), t);
    if (it != thresholds.end()) return static_cast<std::size_t>(it - thresholds.begin());
    thresholds.push_back(t);
    return thresholds.size() - 1;
  };
  const std::size_t k50 = slot_of(0.5);
  const std::size_t k75 = slot_of(0.75);

  std::vector<ImageEval> evals(gts.size());
  auto body = [&](std::size_t i) { evals[i] = evaluate_image(aligned[i], gts[i].chars, thresholds); };
  if (parallel) {
    detail::parallel_for(gts.size(), body);
  } else {
    for (std::size_t i = 0; i < gts.size(); ++i) body(i);
  }

  DetEvalReport report;
  report.iou_thresholds.assign(iou_thresholds.begin(), iou_thresholds.end());
  report.num_images = gts.size();

  std::array<std::size_t, kNumClasses> gt_count{};
  for (const auto& g : gts) {
    for (const auto& c : g.chars) ++gt_count[static_cast<std::size_t>(c.class_id)];
    report.num_gt += g.chars.size();
  }

  struct Entry {
    double score;
    std::size_t image;
    std::size_t rank;
  };
  std::vector<std::vector<Entry>> pooled(kNumClasses);
  for (std::size_t i = 0; i < gts.size(); ++i) {
    const auto& order = evals[i].order;
    for (std::size_t r = 0; r < order.size(); ++r) {
      const Detection& d = aligned[i][order[r]];
      pooled[static_cast<std::size_t>(d.class_id)].push_back(Entry{d.score, i, r});
    }
    report.num_dets += order.size();
  }

  std::vector<RankedMatch> ranked;
  std::size_t classes_present = 0;
  double sum_ap = 0.0;
  double sum_ap50 = 0.0;
  double sum_ap75 = 0.0;
  for (int c = 0; c < kNumClasses; ++c) {
    const auto cu = static_cast<std::size_t>(c);
    if (gt_count[cu] == 0) continue;
    auto& entries = pooled[cu];
    std::stable_sort(entries.begin(), entries.end(),
                     [](const Entry& a, const Entry& b) { return a.score > b.score; });

    std::vector<double> ap_at(thresholds.size());
    for (std::size_t k = 0; k < thresholds.size(); ++k) {
      ranked.clear();
      for (const auto& e : entries) {
        ranked.push_back(RankedMatch{e.score, evals[e.image].tp[k][e.rank] != 0});
      }
      ap_at[k] = average_precision(ranked, gt_count[cu]);
    }
    ClassAP row;
    row.class_id = c;
    row.num_gt = gt_count[cu];
    row.num_dets = entries.size();
    row.ap = std::accumulate(ap_at.begin(), ap_at.begin() + static_cast<long>(num_requested), 0.0) /
             static_cast<double>(num_requested);
    row.ap50 = ap_at[k50];
    row.ap75 = ap_at[k75];
    report.per_class.push_back(row);

    ++classes_present;
    sum_ap += row.ap;
    sum_ap50 += row.ap50;
    sum_ap75 += row.ap75;
  }
  if (classes_present > 0) {
    const auto n = static_cast<double>(classes_present);
    report.ap = sum_ap / n;
    report.ap50 = sum_ap50 / n;
    report.ap75 = sum_ap75 / n;
  }
  return report;
}

}  // namespace

DetEvalReport evaluate_detection(std::span<const ImagePredictions> preds,
                                 std::span<const ImageRecord> gts,
                                 std::span<const double> iou_thresholds) {
  return evaluate_detection_impl(preds, gts, iou_thresholds, true);
}

namespace serial {

DetEvalReport evaluate_detection(std::span<const ImagePredictions> preds,
                                 std::span<const ImageRecord> gts,
                                 std::span<const double> iou_thresholds) {
  return evaluate_detection_impl(preds, gts, iou_thresholds, false);
}

}  // namespace serial

double f_beta(double precision, double recall, double beta) {
  const double b2 = beta * beta;
  const double denom = b2 * precision + recall;
  if (denom <= 0.0) return 0.0;
  return (1.0 + b2) * precision * recall / denom;
}

AesEvalReport evaluate_aesthetic(std::span<const ImagePredictions> preds,
                                 std::span<const ImageRecord> gts, double match_iou,
                                 double threshold) {
  check_unit(match_iou, "aesthetic match IoU");
  check_unit(threshold, "aesthetic threshold");
  for (const auto& p : preds) {
    for (const auto& d : p.dets) {
      if (!d.aesthetic_scores) {
        throw ValidationError("prediction in image " + p.image_id + " has no aesthetic scores");
      }
    }
  }
  for (const auto& g : gts) validate_gts(g.chars);
  const auto aligned = align_predictions(preds, gts);

  struct Counts {
    std::array<std::size_t, 3> tp{}, fp{}, fn{};
    std::size_t pairs = 0;
  };
  std::vector<Counts> per_image(gts.size());
  detail::parallel_for(gts.size(), [&](std::size_t i) {
    const auto& dets = aligned[i];
    const auto& chars = gts[i].chars;
    const MatchResult m = match_detections(dets, chars, match_iou);
    Counts& c = per_image[i];
    for (std::size_t d = 0; d < dets.size(); ++d) {
      const AestheticBits bits = aesthetic_decode(*dets[d].aesthetic_scores, threshold);
      if (m.det_gt[d]) {
        ++c.pairs;
        const AestheticBits& truth = chars[*m.det_gt[d]].aesthetic;
        for (std::size_t k = 0; k < 3; ++k) {
          if (bits[k] && truth[k]) ++c.tp[k];
          if (bits[k] && !truth[k]) ++c.fp[k];
          if (!bits[k] && truth[k]) ++c.fn[k];
        }
      } else {
        for (std::size_t k = 0; k < 3; ++k) c.fp[k] += bits[k] ? 1 : 0;
      }
    }
    for (std::size_t g = 0; g < chars.size(); ++g) {
      if (m.gt_matched[g]) continue;
      for (std::size_t k = 0; k < 3; ++k) c.fn[k] += chars[g].aesthetic[k] ? 1 : 0;
    }
  });

  AesEvalReport report;
  for (const auto& c : per_image) {
    for (std::size_t k = 0; k < 3; ++k) {
      report.tp[k] += c.tp[k];
      report.fp[k] += c.fp[k];
      report.fn[k] += c.fn[k];
    }
    report.matched_pairs += c.pairs;
  }
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t k = 0; k < 3; ++k) {
    tp += report.tp[k];
    fp += report.fp[k];
    fn += report.fn[k];
  }
  report.precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  report.recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  report.f2 = f_beta(report.precision, report.recall, 2.0);
  return report;
}

double normalised_speed(double actual_fps, double acceptable_fps) {
  if (!(actual_fps >= 0.0) || !std::isfinite(actual_fps)) {
    throw ValidationError("FPS must be a finite non-negative number");
  }
  if (!(acceptable_fps > 0.0) || !std::isfinite(acceptable_fps)) {
    throw ValidationError("acceptable FPS must be positive");
  }
  return std::min(actual_fps / acceptable_fps, 1.0);
}

double normalised_size(double allocated_mb, double acceptable_mb) {
  if (!(allocated_mb >= 0.0) || !std::isfinite(allocated_mb)) {
    throw ValidationError("allocated memory must be a finite non-negative number");
  }
  if (!(acceptable_mb > 0.0) || !std::isfinite(acceptable_mb)) {
    throw ValidationError("acceptable memory must be positive");
  }
  return std::min(allocated_mb / acceptable_mb, 1.0);
}

S3Breakdown score_3s(double normalised_score, double actual_fps, double allocated_mb,
                     double acceptable_fps, double acceptable_mb) {
  check_unit(normalised_score, "normalised score");
  S3Breakdown out;
  out.actual_fps = actual_fps;
  out.allocated_mb = allocated_mb;
  out.acceptable_fps = acceptable_fps;
  out.acceptable_mb = acceptable_mb;
  out.normalised_speed = normalised_speed(actual_fps, acceptable_fps);
  out.normalised_size = normalised_size(allocated_mb, acceptable_mb);
  out.normalised_score = normalised_score;
  out.s3 = 0.2 * out.normalised_speed + 0.2 * (1.0 - out.normalised_size) +
           0.6 * out.normalised_score;
  return out;
}

}  // namespace ictext

#include "ictext/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "ictext/classes.hpp"
#include "ictext/errors.hpp"
#include "parallel_for.hpp"

namespace ictext {

void Detection::validate() const {
  box.validate();
  if (!is_valid_class(class_id)) {
    throw ValidationError("detection class id out of range: " + std::to_string(class_id));
  }
  if (!(score >= 0.0 && score <= 1.0)) {
    throw ValidationError("detection score outside [0, 1]: " + std::to_string(score));
  }
  if (aesthetic_scores) {
    for (double s : *aesthetic_scores) {
      if (!(s >= 0.0 && s <= 1.0)) {
        throw ValidationError("aesthetic score outside [0, 1]: " + std::to_string(s));
      }
    }
  }
}

void FusionConfig::validate() const {
  if (!(iou_threshold > 0.0 && iou_threshold < 1.0)) {
    throw ValidationError("fusion IoU threshold must lie in (0, 1)");
  }
  if (!(skip_score >= 0.0 && skip_score <= 1.0)) {
    throw ValidationError("fusion skip score must lie in [0, 1]");
  }
  if (num_sources < 1) throw ValidationError("fusion needs at least one source");
}

namespace {

void check_unit(double v, const char* what) {
  if (!(v >= 0.0 && v <= 1.0)) throw ValidationError(std::string(what) + " must lie in [0, 1]");
}

}  // namespace

std::vector<Detection> nms(std::span<const Detection> dets, double iou_threshold,
                           double score_threshold) {
  check_unit(iou_threshold, "NMS IoU threshold");
  check_unit(score_threshold, "NMS score threshold");
  for (const auto& d : dets) d.validate();

  std::vector<std::size_t> order;
  order.reserve(dets.size());
  for (std::size_t i = 0; i < dets.size(); ++i) {
    if (dets[i].score >= score_threshold) order.push_back(i);
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (dets[a].score != dets[b].score) return dets[a].score > dets[b].score;
    return dets[a].class_id < dets[b].class_id;
  });

  std::vector<Detection> kept;
  for (std::size_t i : order) {
    const Detection& cand = dets[i];
    const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](const Detection& k) {
      return k.class_id == cand.class_id && iou(k.box, cand.box) > iou_threshold;
    });
    if (!suppressed) kept.push_back(cand);
  }
  return kept;
}

namespace {

struct Member {
  const Detection* det;
  std::size_t source;
};

struct Cluster {
  std::vector<Member> members;
  Detection fused;
};

// Weighted mean written as an offset from the first member so that a
// cluster of identical values (in particular a singleton) reproduces them
// bit for bit.
double weighted_mean(const std::vector<Member>& members, const std::vector<double>& weights,
                     double weight_sum, auto&& get) {
  const double base = get(*members.front().det);
  double acc = 0.0;
  for (std::size_t i = 0; i < members.size(); ++i) {
    acc += weights[i] * (get(*members[i].det) - base);
  }
  return base + acc / weight_sum;
}

Detection fuse_cluster(const std::vector<Member>& members, const FusionConfig& cfg) {
  std::vector<double> weights(members.size());
  double score_sum = 0.0;
  for (std::size_t i = 0; i < members.size(); ++i) {
    weights[i] = members[i].det->score;
    score_sum += weights[i];
  }
  // All-zero scores: fall back to an unweighted mean.
  if (score_sum <= 0.0) {
    std::fill(weights.begin(), weights.end(), 1.0);
  }
  const double weight_sum = score_sum > 0.0 ? score_sum : static_cast<double>(members.size());

  Detection out;
  out.class_id = members.front().det->class_id;
  out.box.x1 = weighted_mean(members, weights, weight_sum, [](const Detection& d) { return d.box.x1; });
  out.box.y1 = weighted_mean(members, weights, weight_sum, [](const Detection& d) { return d.box.y1; });
  out.box.x2 = weighted_mean(members, weights, weight_sum, [](const Detection& d) { return d.box.x2; });
  out.box.y2 = weighted_mean(members, weights, weight_sum, [](const Detection& d) { return d.box.y2; });

  const bool all_aesthetic = std::all_of(members.begin(), members.end(), [](const Member& m) {
    return m.det->aesthetic_scores.has_value();
  });
  if (all_aesthetic) {
    AestheticScores a{};
    for (std::size_t k = 0; k < a.size(); ++k) {
      a[k] = weighted_mean(members, weights, weight_sum,
                           [k](const Detection& d) { return (*d.aesthetic_scores)[k]; });
    }
    out.aesthetic_scores = a;
  }

  const auto n = static_cast<double>(members.size());
  double score = score_sum / n;
  if (cfg.conf_rescale == ConfRescale::count_over_sources) {
    const double sources = cfg.num_sources;
    score *= std::min(n, sources) / sources;
  }
  out.score = std::clamp(score, 0.0, 1.0);
  return out;
}

}  // namespace

std::vector<Detection> weighted_boxes_fusion(std::span<const std::vector<Detection>> per_source,
                                             const FusionConfig& cfg) {
  if (per_source.empty()) throw ValidationError("weighted boxes fusion needs at least one source");
  cfg.validate();
  if (static_cast<std::size_t>(cfg.num_sources) != per_source.size()) {
    throw ValidationError("num_sources (" + std::to_string(cfg.num_sources) +
                          ") does not match the number of detection lists (" +
                          std::to_string(per_source.size()) + ")");
  }

  std::vector<std::vector<Member>> by_class(kNumClasses);
  for (std::size_t s = 0; s < per_source.size(); ++s) {
    for (const Detection& d : per_source[s]) {
      d.validate();
      if (d.score < cfg.skip_score) continue;
      by_class[static_cast<std::size_t>(d.class_id)].push_back(Member{&d, s});
    }
  }

  struct Output {
    Detection det;
    int class_id;
    std::size_t rank;
  };
  std::vector<Output> fused;

  for (auto& members : by_class) {
    // Members were appended in (source, input) order; stable sort keeps it for ties.
    std::stable_sort(members.begin(), members.end(),
                     [](const Member& a, const Member& b) { return a.det->score > b.det->score; });
    std::vector<Cluster> clusters;
    for (const Member& m : members) {
      auto it = std::find_if(clusters.begin(), clusters.end(), [&](const Cluster& c) {
        return iou(c.fused.box, m.det->box) > cfg.iou_threshold;
      });
      if (it == clusters.end()) {
        clusters.push_back(Cluster{{m}, {}});
        it = std::prev(clusters.end());
      } else {
        it->members.push_back(m);
      }
      it->fused = fuse_cluster(it->members, cfg);
    }
    for (std::size_t i = 0; i < clusters.size(); ++i) {
      fused.push_back(Output{clusters[i].fused, clusters[i].fused.class_id, i});
    }
  }

  std::stable_sort(fused.begin(), fused.end(), [](const Output& a, const Output& b) {
    if (a.det.score != b.det.score) return a.det.score > b.det.score;
    if (a.class_id != b.class_id) return a.class_id < b.class_id;
    return a.rank < b.rank;
  });
  std::vector<Detection> out;
  out.reserve(fused.size());
  for (auto& f : fused) out.push_back(std::move(f.det));
  return out;
}

std::vector<Detection> fuse_rotated_views(
    const std::map<Rotation, std::vector<Detection>>& preds_by_rotation, ImageDims dims,
    const FusionConfig& cfg, double min_pseudo_score) {
  check_unit(min_pseudo_score, "minimum pseudo-label score");
  dims.validate();
  if (preds_by_rotation.empty()) throw ValidationError("no rotated views supplied");

  std::vector<std::vector<Detection>> views;
  views.reserve(preds_by_rotation.size());
  for (const auto& [rot, preds] : preds_by_rotation) {
    // Guards against values cast into the enum from unchecked integers.
    rotation_from_degrees(degrees(rot));
    std::vector<Detection> mapped;
    mapped.reserve(preds.size());
    for (const Detection& d : preds) {
      Detection m = d;
      m.box = unrotate_box(d.box, rot, dims);
      mapped.push_back(std::move(m));
    }
    views.push_back(std::move(mapped));
  }

  FusionConfig view_cfg = cfg;
  view_cfg.num_sources = static_cast<int>(views.size());
  std::vector<Detection> fused = weighted_boxes_fusion(views, view_cfg);
  std::erase_if(fused, [&](const Detection& d) { return d.score < min_pseudo_score; });
  return fused;
}

std::vector<std::vector<Detection>> fuse_rotated_views_batch(std::span<const RotatedViews> images,
                                                             const FusionConfig& cfg,
                                                             double min_pseudo_score) {
  std::vector<std::vector<Detection>> out(images.size());
  detail::parallel_for(images.size(), [&](std::size_t i) {
    out[i] = fuse_rotated_views(images[i].preds_by_rotation, images[i].dims, cfg, min_pseudo_score);
  });
  return out;
}

namespace serial {

std::vector<std::vector<Detection>> fuse_rotated_views_batch(std::span<const RotatedViews> images,
                                                             const FusionConfig& cfg,
                                                             double min_pseudo_score) {
  std::vector<std::vector<Detection>> out;
  out.reserve(images.size());
  for (const auto& img : images) {
    out.push_back(fuse_rotated_views(img.preds_by_rotation, img.dims, cfg, min_pseudo_score));
  }
  return out;
}

}  // namespace serial

}  // namespace ictext

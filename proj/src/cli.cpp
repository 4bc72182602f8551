#include "ictext/cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "CLI11.hpp"
#include "ictext/dataio.hpp"
#include "ictext/errors.hpp"
#include "ictext/fusion.hpp"
#include "ictext/headmath.hpp"
#include "ictext/metrics.hpp"
#include "ictext/parallel.hpp"
#include "ictext/sampling.hpp"
#include "parallel_for.hpp"

namespace ictext {

namespace {

// Defaults used by the deployed pipeline.
constexpr double kNmsIou = 0.1;
constexpr double kNmsConf = 0.01;
constexpr double kAestheticThreshold = 0.2;
constexpr double kAestheticMatchIou = 0.5;
constexpr double kAcceptableFps = 30.0;
constexpr double kAcceptableMemMb = 4000.0;
constexpr double kWbfIou = 0.55;
constexpr double kMinPseudoScore = 0.5;
constexpr double kDistillWeight = 0.05;
constexpr std::uint64_t kDefaultSeed = 42;

/// Bad flag combination discovered after CLI11 parsing.
class ArgumentError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string fixed2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string general(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) parts.push_back(item);
  return parts;
}

std::vector<double> parse_thresholds(const std::string& spec) {
  if (spec == "coco") return coco_iou_thresholds();
  std::vector<double> out;
  for (const auto& part : split(spec, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(part, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != part.size() || !(v > 0.0 && v <= 1.0)) {
      throw ArgumentError("--thresholds: expected 'coco' or comma-separated values in (0, 1], got '" +
                          spec + "'");
    }
    out.push_back(v);
  }
  if (out.empty()) throw ArgumentError("--thresholds: empty list");
  return out;
}

std::vector<Rotation> parse_rotations(const std::string& spec) {
  std::vector<Rotation> out;
  std::set<int> seen;
  for (const auto& part : split(spec, ',')) {
    int deg = -1;
    std::size_t used = 0;
    try {
      deg = std::stoi(part, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != part.size() || (deg != 0 && deg != 90 && deg != 180 && deg != 270)) {
      throw ArgumentError("--rotations: each entry must be 0, 90, 180 or 270, got '" + part + "'");
    }
    if (!seen.insert(deg).second) throw ArgumentError("--rotations: duplicate rotation " + part);
    out.push_back(rotation_from_degrees(deg));
  }
  return out;
}

ConfRescale parse_rescale(const std::string& s) {
  return s == "none" ? ConfRescale::none : ConfRescale::count_over_sources;
}

void warn_duplicates(const PredictionFile& f, const std::string& path, bool quiet,
                     std::ostream& err) {
  if (f.merged_duplicates > 0 && !quiet) {
    err << "warning: " << path << ": merged " << f.merged_duplicates
        << " duplicate image_id line(s)\n";
  }
}

std::size_t count_dets(const std::vector<ImagePredictions>& images) {
  std::size_t n = 0;
  for (const auto& p : images) n += p.dets.size();
  return n;
}

struct Options {
  std::uint64_t seed = kDefaultSeed;
  std::optional<int> threads;
  bool quiet = false;

  // eval-det / eval-aes / rfs / pseudo
  std::string gt;
  std::string pred;
  std::string out;
  std::string thresholds = "coco";
  double aes_threshold = kAestheticThreshold;
  double match_iou = kAestheticMatchIou;

  // score3s
  double score = 0.0;
  double fps = 0.0;
  double mem_mb = 0.0;
  double acceptable_fps = kAcceptableFps;
  double acceptable_mem = kAcceptableMemMb;

  // nms
  double nms_iou = kNmsIou;
  double nms_conf = kNmsConf;

  // wbf / pseudo
  std::vector<std::string> inputs;
  double wbf_iou = kWbfIou;
  double skip_score = 0.0;
  std::string rescale = "count";
  std::string rotations = "0,90,180,270";
  double min_score = kMinPseudoScore;

  // rfs
  double rfs_t = kDefaultRfsThreshold;

  // distill-check
  std::string teacher;
  std::string student;
  std::string mask;
  double distill_weight = kDistillWeight;
};

int cmd_eval_det(const Options& o, std::ostream& out, std::ostream& err) {
  const auto thresholds = parse_thresholds(o.thresholds);
  const auto gts = load_ground_truth(o.gt);
  const auto preds = load_predictions(o.pred);
  warn_duplicates(preds, o.pred, o.quiet, err);
  const DetEvalReport report = evaluate_detection(preds.images, gts, thresholds);
  save_report(report, o.out);
  if (!o.quiet) {
    out << "AP=" << fixed2(report.ap) << " AP50=" << fixed2(report.ap50)
        << " AP75=" << fixed2(report.ap75) << " classes=" << report.per_class.size()
        << " images=" << report.num_images << "\n";
  }
  return 0;
}

int cmd_eval_aes(const Options& o, std::ostream& out, std::ostream& err) {
  const auto gts = load_ground_truth(o.gt);
  const auto preds = load_predictions(o.pred);
  warn_duplicates(preds, o.pred, o.quiet, err);
  const AesEvalReport report = evaluate_aesthetic(preds.images, gts, o.match_iou, o.aes_threshold);
  save_report(report, o.out);
  if (!o.quiet) {
    out << "P=" << fixed2(report.precision) << " R=" << fixed2(report.recall)
        << " F2=" << fixed2(report.f2) << " pairs=" << report.matched_pairs << "\n";
  }
  return 0;
}

int cmd_score3s(const Options& o, std::ostream& out) {
  const S3Breakdown s = score_3s(o.score, o.fps, o.mem_mb, o.acceptable_fps, o.acceptable_mem);
  if (!o.out.empty()) save_report(s, o.out);
  if (!o.quiet) {
    out << "3S=" << fixed2(s.s3) << " speed=" << fixed2(s.normalised_speed)
        << " size=" << fixed2(s.normalised_size) << " score=" << fixed2(s.normalised_score)
        << "\n";
  }
  return 0;
}

int cmd_nms(const Options& o, std::ostream& out, std::ostream& err) {
  const auto preds = load_predictions(o.pred);
  warn_duplicates(preds, o.pred, o.quiet, err);
  std::vector<ImagePredictions> result(preds.images.size());
  detail::parallel_for(preds.images.size(), [&](std::size_t i) {
    result[i].image_id = preds.images[i].image_id;
    result[i].dets = nms(preds.images[i].dets, o.nms_iou, o.nms_conf);
  });
  save_predictions(result, o.out);
  if (!o.quiet) {
    out << "nms: kept " << count_dets(result) << " of " << count_dets(preds.images)
        << " detections in " << result.size() << " images\n";
  }
  return 0;
}

int cmd_wbf(const Options& o, std::ostream& out, std::ostream& err) {
  std::vector<PredictionFile> files;
  for (const auto& path : o.inputs) {
    files.push_back(load_predictions(path));
    warn_duplicates(files.back(), path, o.quiet, err);
  }
  // Images in order of first appearance across the inputs.
  std::vector<std::string> ids;
  std::unordered_map<std::string, std::size_t> index;
  std::vector<std::vector<std::vector<Detection>>> per_image;
  for (std::size_t s = 0; s < files.size(); ++s) {
    for (const auto& img : files[s].images) {
      auto [it, inserted] = index.emplace(img.image_id, ids.size());
      if (inserted) {
        ids.push_back(img.image_id);
        per_image.emplace_back(files.size());
      }
      per_image[it->second][s] = img.dets;
    }
  }
  FusionConfig cfg;
  cfg.iou_threshold = o.wbf_iou;
  cfg.skip_score = o.skip_score;
  cfg.num_sources = static_cast<int>(files.size());
  cfg.conf_rescale = parse_rescale(o.rescale);

  std::vector<ImagePredictions> result(ids.size());
  detail::parallel_for(ids.size(), [&](std::size_t i) {
    result[i].image_id = ids[i];
    result[i].dets = weighted_boxes_fusion(per_image[i], cfg);
  });
  save_predictions(result, o.out);
  if (!o.quiet) {
    out << "wbf: fused " << files.size() << " sources into " << count_dets(result)
        << " detections in " << result.size() << " images\n";
  }
  return 0;
}

int cmd_pseudo(const Options& o, std::ostream& out, std::ostream& err) {
  const auto rotations = parse_rotations(o.rotations);
  if (rotations.size() != o.inputs.size()) {
    throw ArgumentError("--preds has " + std::to_string(o.inputs.size()) +
                        " files but --rotations lists " + std::to_string(rotations.size()));
  }
  const auto images = load_ground_truth(o.gt);
  std::unordered_map<std::string, std::size_t> index;
  std::vector<RotatedViews> views(images.size());
  for (std::size_t i = 0; i < images.size(); ++i) {
    index.emplace(images[i].image_id, i);
    views[i].dims = images[i].dims;
    for (Rotation r : rotations) views[i].preds_by_rotation[r];
  }
  for (std::size_t v = 0; v < rotations.size(); ++v) {
    const auto preds = load_predictions(o.inputs[v]);
    warn_duplicates(preds, o.inputs[v], o.quiet, err);
    for (const auto& p : preds.images) {
      const auto it = index.find(p.image_id);
      if (it == index.end()) {
        throw ValidationError(o.inputs[v] + ": image id not present in --gt-dims: " + p.image_id);
      }
      auto& dst = views[it->second].preds_by_rotation[rotations[v]];
      dst.insert(dst.end(), p.dets.begin(), p.dets.end());
    }
  }
  FusionConfig cfg;
  cfg.iou_threshold = o.wbf_iou;
  cfg.skip_score = o.skip_score;
  cfg.num_sources = static_cast<int>(rotations.size());
  cfg.conf_rescale = parse_rescale(o.rescale);

  const auto fused = fuse_rotated_views_batch(views, cfg, o.min_score);
  std::vector<ImagePredictions> result(images.size());
  for (std::size_t i = 0; i < images.size(); ++i) {
    result[i].image_id = images[i].image_id;
    result[i].dets = fused[i];
  }
  save_predictions(result, o.out);
  if (!o.quiet) {
    out << "pseudo: " << count_dets(result) << " pseudo-labels from " << rotations.size()
        << " views over " << result.size() << " images\n";
  }
  return 0;
}

int cmd_rfs(const Options& o, std::ostream& out) {
  const auto gts = load_ground_truth(o.gt);
  const RepeatFactorPlan plan = make_repeat_factor_plan(gts, o.rfs_t, o.seed);
  save_plan(plan, o.out);
  if (!o.quiet) {
    std::size_t repeated = 0;
    for (const auto& [id, r] : plan.factors) repeated += r > 1.0 ? 1 : 0;
    out << "rfs: t=" << general(plan.threshold) << " images=" << plan.factors.size()
        << " repeated=" << repeated << " epoch_length=" << plan.epoch.size() << "\n";
  }
  return 0;
}

int cmd_distill_check(const Options& o, std::ostream& out) {
  const FeatureGrid teacher = load_feature_grid(o.teacher);
  const FeatureGrid student = load_feature_grid(o.student);
  const DistillMask mask = load_mask(o.mask);
  const DistillLoss loss = masked_distillation_loss(teacher, student, mask);
  // The loss itself is always printed; --quiet only applies to summaries.
  out << "total=" << general(loss.total) << " mse=" << general(loss.mse)
      << " kl=" << general(loss.kl) << " weighted=" << general(o.distill_weight * loss.total)
      << "\n";
  return 0;
}

void configure_threads(const Options& o) {
  std::optional<int> n = o.threads;
  if (!n) {
    if (const char* env = std::getenv("ICTEXT_THREADS")) {
      try {
        n = std::stoi(env);
      } catch (const std::exception&) {
        throw ArgumentError(std::string("ICTEXT_THREADS is not an integer: ") + env);
      }
      if (*n < 1) throw ArgumentError("ICTEXT_THREADS must be >= 1");
    }
  }
  if (n) set_num_threads(*n);
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Box fusion, sampling plans, loss checks and evaluation for character detection",
               "ictext"};
  app.require_subcommand(1);
  app.fallthrough();
  app.add_option("--seed", o.seed, "Seed for every stochastic step")->capture_default_str();
  app.add_option("--threads", o.threads, "Worker threads (falls back to ICTEXT_THREADS)")
      ->check(CLI::PositiveNumber);
  app.add_flag("--quiet", o.quiet, "Suppress the summary line");

  const auto unit = CLI::Range(0.0, 1.0);
  const auto non_negative = CLI::NonNegativeNumber;

  auto* eval_det = app.add_subcommand("eval-det", "AP, AP@0.5 and AP@0.75 of predictions");
  eval_det->add_option("--gt", o.gt, "Ground-truth JSONL")->required()->check(CLI::ExistingFile);
  eval_det->add_option("--pred", o.pred, "Predictions JSONL")->required()->check(CLI::ExistingFile);
  eval_det->add_option("--thresholds", o.thresholds, "'coco' (0.50:0.05:0.95) or a list like 0.5")
      ->capture_default_str();
  eval_det->add_option("--out", o.out, "Report JSON")->required();

  auto* eval_aes = app.add_subcommand("eval-aes", "Multi-label aesthetic precision, recall, F2");
  eval_aes->add_option("--gt", o.gt, "Ground-truth JSONL")->required()->check(CLI::ExistingFile);
  eval_aes->add_option("--pred", o.pred, "Predictions JSONL")->required()->check(CLI::ExistingFile);
  eval_aes->add_option("--threshold", o.aes_threshold, "Aesthetic decision threshold")
      ->check(unit)->capture_default_str();
  eval_aes->add_option("--match-iou", o.match_iou, "IoU needed to pair a prediction with a char")
      ->check(unit)->capture_default_str();
  eval_aes->add_option("--out", o.out, "Report JSON")->required();

  auto* s3 = app.add_subcommand("score3s", "Composite speed / size / score value");
  s3->add_option("--score", o.score, "Normalised task score (AP or F2)")->required()->check(unit);
  s3->add_option("--fps", o.fps, "Measured frames per second")->required()->check(non_negative);
  s3->add_option("--mem-mb", o.mem_mb, "Allocated memory in MB")->required()->check(non_negative);
  s3->add_option("--acceptable-fps", o.acceptable_fps)->check(CLI::PositiveNumber)->capture_default_str();
  s3->add_option("--acceptable-mem", o.acceptable_mem)->check(CLI::PositiveNumber)->capture_default_str();
  s3->add_option("--out", o.out, "Optional breakdown JSON");

  auto* nms_cmd = app.add_subcommand("nms", "Class-aware non-maximum suppression");
  nms_cmd->add_option("--pred", o.pred, "Predictions JSONL")->required()->check(CLI::ExistingFile);
  nms_cmd->add_option("--iou", o.nms_iou, "Suppression IoU threshold")->check(unit)->capture_default_str();
  nms_cmd->add_option("--conf", o.nms_conf, "Minimum confidence")->check(unit)->capture_default_str();
  nms_cmd->add_option("--out", o.out, "Output predictions JSONL")->required();

  auto* wbf = app.add_subcommand("wbf", "Weighted boxes fusion of several prediction files");
  wbf->add_option("--inputs", o.inputs, "Prediction files, one per source")
      ->required()->expected(1, -1)->check(CLI::ExistingFile);
  wbf->add_option("--iou", o.wbf_iou, "Cluster IoU threshold")
      ->check(CLI::Range(0.0, 1.0) & !CLI::IsMember({0.0, 1.0}))->capture_default_str();
  wbf->add_option("--skip", o.skip_score, "Ignore boxes scoring below this")->check(unit);
  wbf->add_option("--rescale", o.rescale, "Score rescaling")
      ->check(CLI::IsMember({"count", "none"}))->capture_default_str();
  wbf->add_option("--out", o.out, "Output predictions JSONL")->required();

  auto* pseudo = app.add_subcommand("pseudo", "Pseudo-labels from rotated-view predictions");
  pseudo->add_option("--preds", o.inputs, "One prediction file per rotation")
      ->required()->expected(1, 4)->check(CLI::ExistingFile);
  pseudo->add_option("--rotations", o.rotations, "Rotation of each --preds file, clockwise")
      ->capture_default_str();
  pseudo->add_option("--gt-dims", o.gt, "JSONL with image ids and sizes (chars ignored)")
      ->required()->check(CLI::ExistingFile);
  pseudo->add_option("--min-score", o.min_score, "Drop fused boxes scoring below this")
      ->check(unit)->capture_default_str();
  pseudo->add_option("--iou", o.wbf_iou, "Cluster IoU threshold")
      ->check(CLI::Range(0.0, 1.0) & !CLI::IsMember({0.0, 1.0}))->capture_default_str();
  pseudo->add_option("--skip", o.skip_score, "Ignore boxes scoring below this")->check(unit);
  pseudo->add_option("--rescale", o.rescale, "Score rescaling")
      ->check(CLI::IsMember({"count", "none"}))->capture_default_str();
  pseudo->add_option("--out", o.out, "Output predictions JSONL")->required();

  auto* rfs = app.add_subcommand("rfs", "Repeat factor sampling plan");
  rfs->add_option("--gt", o.gt, "Ground-truth JSONL")->required()->check(CLI::ExistingFile);
  rfs->add_option("--t", o.rfs_t, "Frequency threshold")
      ->check(CLI::Range(0.0, 1.0) & !CLI::IsMember({0.0}))->capture_default_str();
  rfs->add_option("--out", o.out, "Plan JSON")->required();

  auto* distill = app.add_subcommand("distill-check", "Masked distillation loss of two grids");
  distill->add_option("--teacher", o.teacher, "Teacher feature grid JSON")->required()->check(CLI::ExistingFile);
  distill->add_option("--student", o.student, "Student feature grid JSON")->required()->check(CLI::ExistingFile);
  distill->add_option("--mask", o.mask, "Slot mask JSON")->required()->check(CLI::ExistingFile);
  distill->add_option("--weight", o.distill_weight, "Loss weight for the 'weighted' column")
      ->check(non_negative)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return 2;
  }

  try {
    configure_threads(o);
    if (*eval_det) return cmd_eval_det(o, out, err);
    if (*eval_aes) return cmd_eval_aes(o, out, err);
    if (*s3) return cmd_score3s(o, out);
    if (*nms_cmd) return cmd_nms(o, out, err);
    if (*wbf) return cmd_wbf(o, out, err);
    if (*pseudo) return cmd_pseudo(o, out, err);
    if (*rfs) return cmd_rfs(o, out);
    if (*distill) return cmd_distill_check(o, out);
  } catch (const ArgumentError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace ictext

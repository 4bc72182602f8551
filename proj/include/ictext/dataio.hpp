#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "ictext/annotations.hpp"
#include "ictext/detection.hpp"
#include "ictext/headmath.hpp"
#include "ictext/metrics.hpp"
#include "ictext/sampling.hpp"

// File formats. All text is UTF-8 with LF line endings; writers emit keys in
// the order shown and doubles with 17 significant digits.
//
// Ground truth, JSON Lines, one image per line:
//   {"image_id":"img0","width":W,"height":H,
//    "chars":[{"bbox":[x,y,w,h],"rotation":deg,"class":"a","aesthetic":[0,1,0]}]}
//
// Predictions, JSON Lines, one image per line:
//   {"image_id":"img0","dets":[{"bbox":[x,y,w,h],"score":s,"class":"a",
//                               "aesthetic_scores":[f,f,f],"source_id":k}]}
//   aesthetic_scores and source_id are optional.
//
// Feature grid:      {"shape":[slots,channels],"data":[row-major values]}
// Distillation mask: {"mask":[0,1,...]}

namespace ictext {

struct PredictionFile {
  std::vector<ImagePredictions> images;
  /// Lines whose image_id repeated an earlier line; their detections were
  /// appended to the first occurrence.
  std::size_t merged_duplicates = 0;
};

std::vector<ImageRecord> read_ground_truth(std::istream& in, const std::string& name);
void write_ground_truth(std::ostream& out, std::span<const ImageRecord> records);
std::vector<ImageRecord> load_ground_truth(const std::filesystem::path& path);
void save_ground_truth(std::span<const ImageRecord> records, const std::filesystem::path& path);

PredictionFile read_predictions(std::istream& in, const std::string& name);
void write_predictions(std::ostream& out, std::span<const ImagePredictions> images);
PredictionFile load_predictions(const std::filesystem::path& path);
void save_predictions(std::span<const ImagePredictions> images, const std::filesystem::path& path);

std::string to_json(const DetEvalReport& report);
std::string to_json(const AesEvalReport& report);
std::string to_json(const S3Breakdown& report);
std::string to_json(const RepeatFactorPlan& plan);
std::string to_json(const FeatureGrid& grid);

void save_report(const DetEvalReport& report, const std::filesystem::path& path);
void save_report(const AesEvalReport& report, const std::filesystem::path& path);
void save_report(const S3Breakdown& report, const std::filesystem::path& path);

void save_plan(const RepeatFactorPlan& plan, const std::filesystem::path& path);
RepeatFactorPlan load_plan(const std::filesystem::path& path);

FeatureGrid load_feature_grid(const std::filesystem::path& path);
void save_feature_grid(const FeatureGrid& grid, const std::filesystem::path& path);
DistillMask load_mask(const std::filesystem::path& path);
void save_mask(std::span<const std::uint8_t> mask, const std::filesystem::path& path);

/// Writes `text` to `path`, replacing the file. Throws IoError.
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace ictext

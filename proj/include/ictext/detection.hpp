#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "ictext/geometry.hpp"

namespace ictext {

using AestheticScores = std::array<double, 3>;

struct Detection {
  BoxXYXY box;
  int class_id = 0;
  double score = 0.0;
  std::optional<AestheticScores> aesthetic_scores;
  /// Producing model or view, when known.
  std::optional<int> source_id;

  void validate() const;

  friend bool operator==(const Detection&, const Detection&) = default;
};

/// Detections of one image.
struct ImagePredictions {
  std::string image_id;
  std::vector<Detection> dets;

  friend bool operator==(const ImagePredictions&, const ImagePredictions&) = default;
};

}  // namespace ictext

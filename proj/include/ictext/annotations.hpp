#pragma once

#include <array>
#include <string>
#include <vector>

#include "ictext/geometry.hpp"

namespace ictext {

/// Aesthetic bits in label order (blurry, low contrast, broken).
using AestheticBits = std::array<bool, 3>;

struct GroundTruthChar {
  BoxXYXY box;
  /// Carried through I/O untouched; no metric reads it.
  double rotation_deg = 0.0;
  int class_id = 0;
  AestheticBits aesthetic{};

  friend bool operator==(const GroundTruthChar&, const GroundTruthChar&) = default;
};

struct ImageRecord {
  std::string image_id;
  ImageDims dims;
  std::vector<GroundTruthChar> chars;

  /// Checks class range, box validity and that every box lies inside dims.
  void validate() const;

  friend bool operator==(const ImageRecord&, const ImageRecord&) = default;
};

}  // namespace ictext

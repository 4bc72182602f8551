#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ictext/annotations.hpp"
#include "ictext/classes.hpp"

namespace ictext {

/// Default frequency threshold t for repeat factor sampling.
inline constexpr double kDefaultRfsThreshold = 0.001;

/// Fraction of images containing at least one instance of each class.
struct ClassFrequencyTable {
  std::array<double, kNumClasses> fraction{};
  std::array<std::size_t, kNumClasses> image_count{};
  std::size_t num_images = 0;

  friend bool operator==(const ClassFrequencyTable&, const ClassFrequencyTable&) = default;
};

struct RepeatFactorPlan {
  double threshold = kDefaultRfsThreshold;
  std::uint64_t seed = 0;
  std::map<std::string, double> factors;
  std::vector<std::string> epoch;
};

/// Counts each class once per image that contains it. Parallel over images.
ClassFrequencyTable class_frequencies(std::span<const ImageRecord> dataset);

/// max(1, sqrt(t / f_c)). Throws for f_c == 0: an absent class has no
/// finite repeat factor.
double repeat_factor(double f_c, double t);

/// Per image, the largest class repeat factor over the classes it contains
/// (1 for images without annotations). Image ids must be unique.
std::map<std::string, double> image_repeat_factors(std::span<const ImageRecord> dataset,
                                                   double t);

/// Expands repeat factors into one epoch of image ids.
///
/// Each image appears floor(r) times plus once more with probability
/// frac(r). That draw is keyed on (seed, image_id) so an image's count does
/// not depend on the rest of the dataset. The list is then shuffled with a
/// generator seeded by `seed` alone.
std::vector<std::string> expand_epoch_indices(const std::map<std::string, double>& factors,
                                              std::uint64_t seed);

/// image_repeat_factors followed by expand_epoch_indices.
RepeatFactorPlan make_repeat_factor_plan(std::span<const ImageRecord> dataset, double t,
                                         std::uint64_t seed);

namespace serial {

ClassFrequencyTable class_frequencies(std::span<const ImageRecord> dataset);

}  // namespace serial

}  // namespace ictext

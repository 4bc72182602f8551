#include "ictext/sampling.hpp"

#include <algorithm>
#include <bitset>
#include <exception>
#include <limits>
#include <cmath>
#include <random>
#include <set>

#include "ictext/errors.hpp"

namespace ictext {

namespace {

std::bitset<kNumClasses> classes_in(const ImageRecord& img) {
  std::bitset<kNumClasses> present;
  for (const auto& c : img.chars) {
    if (!is_valid_class(c.class_id)) {
      throw ValidationError("image " + img.image_id + " has an out-of-range class id");
    }
    present.set(static_cast<std::size_t>(c.class_id));
  }
  return present;
}

ClassFrequencyTable finish_table(const std::array<std::size_t, kNumClasses>& counts,
                                 std::size_t num_images) {
  ClassFrequencyTable table;
  table.image_count = counts;
  table.num_images = num_images;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    table.fraction[c] = static_cast<double>(counts[c]) / static_cast<double>(num_images);
  }
  return table;
}

void check_threshold(double t) {
  if (!(t > 0.0 && t <= 1.0)) throw ValidationError("RFS threshold t must lie in (0, 1]");
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::mt19937_64 make_engine(std::initializer_list<std::uint64_t> words) {
  std::vector<std::uint32_t> seq;
  for (std::uint64_t w : words) {
    seq.push_back(static_cast<std::uint32_t>(w));
    seq.push_back(static_cast<std::uint32_t>(w >> 32));
  }
  std::seed_seq ss(seq.begin(), seq.end());
  return std::mt19937_64(ss);
}

// The standard distributions are implementation-defined; these are not,
// which keeps epoch plans identical across standard libraries.
double uniform01(std::mt19937_64& eng) { return static_cast<double>(eng() >> 11) * 0x1.0p-53; }

std::uint64_t uniform_below(std::mt19937_64& eng, std::uint64_t bound) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x;
  do {
    x = eng();
  } while (x >= limit);
  return x % bound;
}

constexpr std::uint64_t kShuffleStream = 0x53485546464c45ULL;

}  // namespace

ClassFrequencyTable class_frequencies(std::span<const ImageRecord> dataset) {
  if (dataset.empty()) throw ValidationError("class frequencies need a non-empty dataset");

  std::vector<std::bitset<kNumClasses>> present(dataset.size());
  std::vector<std::exception_ptr> errors(dataset.size());
  const auto n = static_cast<long long>(dataset.size());
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < n; ++i) {
    try {
      present[static_cast<std::size_t>(i)] = classes_in(dataset[static_cast<std::size_t>(i)]);
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  // Integer sums: the merge order cannot change the result.
  std::array<std::size_t, kNumClasses> counts{};
  for (const auto& p : present) {
    for (std::size_t c = 0; c < counts.size(); ++c) counts[c] += p[c];
  }
  return finish_table(counts, dataset.size());
}

namespace serial {

ClassFrequencyTable class_frequencies(std::span<const ImageRecord> dataset) {
  if (dataset.empty()) throw ValidationError("class frequencies need a non-empty dataset");
  std::array<std::size_t, kNumClasses> counts{};
  for (const auto& img : dataset) {
    const auto present = classes_in(img);
    for (std::size_t c = 0; c < counts.size(); ++c) counts[c] += present[c];
  }
  return finish_table(counts, dataset.size());
}

}  // namespace serial

double repeat_factor(double f_c, double t) {
  check_threshold(t);
  if (!(f_c >= 0.0 && f_c <= 1.0)) throw ValidationError("class frequency must lie in [0, 1]");
  if (f_c == 0.0) throw ValidationError("class frequency is 0: class is absent from the dataset");
  return std::max(1.0, std::sqrt(t / f_c));
}

std::map<std::string, double> image_repeat_factors(std::span<const ImageRecord> dataset,
                                                   double t) {
  check_threshold(t);
  const ClassFrequencyTable table = class_frequencies(dataset);

  std::array<double, kNumClasses> class_factor{};
  for (std::size_t c = 0; c < class_factor.size(); ++c) {
    class_factor[c] = table.image_count[c] > 0 ? repeat_factor(table.fraction[c], t) : 1.0;
  }

  std::map<std::string, double> factors;
  for (const auto& img : dataset) {
    double r = 1.0;
    for (const auto& c : img.chars) {
      r = std::max(r, class_factor[static_cast<std::size_t>(c.class_id)]);
    }
    if (!factors.emplace(img.image_id, r).second) {
      throw ValidationError("duplicate image id in dataset: " + img.image_id);
    }
  }
  return factors;
}

std::vector<std::string> expand_epoch_indices(const std::map<std::string, double>& factors,
                                              std::uint64_t seed) {
  std::vector<std::string> epoch;
  for (const auto& [id, r] : factors) {
    if (!(r >= 1.0) || !std::isfinite(r)) {
      throw ValidationError("repeat factor for " + id + " must be a finite value >= 1");
    }
    const double whole = std::floor(r);
    auto copies = static_cast<std::size_t>(whole);
    const double frac = r - whole;
    if (frac > 0.0) {
      auto eng = make_engine({seed, fnv1a(id)});
      if (uniform01(eng) < frac) ++copies;
    }
    epoch.insert(epoch.end(), copies, id);
  }

  auto eng = make_engine({seed, kShuffleStream});
  for (std::size_t i = epoch.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform_below(eng, i));
    std::swap(epoch[i - 1], epoch[j]);
  }
  return epoch;
}

RepeatFactorPlan make_repeat_factor_plan(std::span<const ImageRecord> dataset, double t,
                                         std::uint64_t seed) {
  RepeatFactorPlan plan;
  plan.threshold = t;
  plan.seed = seed;
  plan.factors = image_repeat_factors(dataset, t);
  plan.epoch = expand_epoch_indices(plan.factors, seed);
  return plan;
}

}  // namespace ictext

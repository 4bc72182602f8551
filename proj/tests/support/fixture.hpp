#pragma once

// Test-only helpers: scratch directories, a small synthetic dataset on disk,
// and an in-process CLI runner.

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ictext/cli.hpp"
#include "ictext/dataio.hpp"
#include "ictext/geometry.hpp"
#include "oracles.hpp"

namespace fixture {

namespace fs = std::filesystem;

class ScratchDir {
 public:
  explicit ScratchDir(const std::string& tag) {
    static int counter = 0;
    path_ = fs::temp_directory_path() /
            ("ictext_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~ScratchDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;

  const fs::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  fs::path path_;
};

inline std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

struct CliResult {
  int code = 0;
  std::string out;
  std::string err;
};

inline CliResult run(std::vector<std::string> args) {
  args.insert(args.begin(), "ictext");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  CliResult r;
  r.code = ictext::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

// Ground truth plus predictions that are noisy copies of it, and the same
// predictions seen through each rotation.
struct Dataset {
  std::vector<ictext::ImageRecord> gt;
  std::vector<ictext::ImagePredictions> preds;
};

inline Dataset make_dataset(std::uint64_t seed, int images, int chars_per_image) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Dataset d;
  for (int i = 0; i < images; ++i) {
    ictext::ImageRecord r;
    r.image_id = "img" + std::to_string(i);
    r.dims = {320, 240};
    ictext::ImagePredictions p;
    p.image_id = r.image_id;
    for (int k = 0; k < chars_per_image; ++k) {
      ictext::GroundTruthChar c;
      c.box = oracle::grid_box(rng, r.dims.width, r.dims.height);
      c.class_id = static_cast<int>(rng() % 62);
      c.aesthetic = {rng() % 3 == 0, rng() % 4 == 0, rng() % 5 == 0};
      r.chars.push_back(c);
      if (rng() % 5 != 0) {
        ictext::Detection det;
        det.box = c.box;
        det.box.x1 = std::max(0.0, det.box.x1 - 1.0);
        det.class_id = rng() % 6 == 0 ? static_cast<int>(rng() % 62) : c.class_id;
        det.score = std::round(u(rng) * 1024.0) / 1024.0;
        det.aesthetic_scores = ictext::AestheticScores{u(rng), u(rng), u(rng)};
        p.dets.push_back(det);
      }
    }
    d.gt.push_back(std::move(r));
    d.preds.push_back(std::move(p));
  }
  return d;
}

inline std::vector<ictext::ImagePredictions> rotate_predictions(const Dataset& d, ictext::Rotation rot) {
  std::vector<ictext::ImagePredictions> out;
  for (std::size_t i = 0; i < d.preds.size(); ++i) {
    ictext::ImagePredictions p = d.preds[i];
    for (auto& det : p.dets) det.box = ictext::rotate_box(det.box, rot, d.gt[i].dims);
    out.push_back(std::move(p));
  }
  return out;
}

// Writes gt.jsonl, pred.jsonl, rot{0,90,180,270}.jsonl, teacher/student
// grids and a mask into `dir`.
inline void write_dataset(const ScratchDir& dir, std::uint64_t seed = 7, int images = 12, int chars = 6) {
  const Dataset d = make_dataset(seed, images, chars);
  ictext::save_ground_truth(d.gt, dir.file("gt.jsonl"));
  ictext::save_predictions(d.preds, dir.file("pred.jsonl"));
  for (ictext::Rotation rot : ictext::kAllRotations) {
    ictext::save_predictions(rotate_predictions(d, rot),
                             dir.file("rot" + std::to_string(ictext::degrees(rot)) + ".jsonl"));
  }
  std::mt19937_64 rng(seed + 1);
  std::normal_distribution<double> n(0.0, 1.0);
  ictext::FeatureGrid teacher(8, ictext::kTask1HeadWidth), student(8, ictext::kTask1HeadWidth);
  for (std::size_t s = 0; s < 8; ++s) {
    for (std::size_t c = 0; c < ictext::kTask1HeadWidth; ++c) {
      teacher.at(s, c) = n(rng);
      student.at(s, c) = n(rng);
    }
  }
  ictext::save_feature_grid(teacher, dir.file("teacher.json"));
  ictext::save_feature_grid(student, dir.file("student.json"));
  ictext::save_mask(ictext::DistillMask{1, 0, 1, 1, 0, 0, 1, 0}, dir.file("mask.json"));
}

}  // namespace fixture

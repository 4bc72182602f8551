// Serial reference vs OpenMP kernels on synthetic data.
//
//   ictext_bench --benchmark_filter=Eval

#include <benchmark/benchmark.h>

#include <cmath>
#include <random>

#include "ictext/fusion.hpp"
#include "ictext/headmath.hpp"
#include "ictext/metrics.hpp"
#include "ictext/parallel.hpp"
#include "ictext/sampling.hpp"

namespace {

using namespace ictext;

struct Synthetic {
  std::vector<ImageRecord> gt;
  std::vector<ImagePredictions> preds;
};

const Synthetic& synthetic() {
  static const Synthetic data = [] {
    Synthetic s;
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 3000; ++i) {
      ImageRecord r;
      r.image_id = "img" + std::to_string(i);
      r.dims = {640, 480};
      ImagePredictions p{r.image_id, {}};
      for (int k = 0; k < 30; ++k) {
        const double x = u(rng) * 600, y = u(rng) * 440;
        GroundTruthChar c;
        c.box = {x, y, x + 8 + u(rng) * 32, y + 8 + u(rng) * 32};
        c.class_id = static_cast<int>(rng() % kNumClasses);
        r.chars.push_back(c);
        Detection d;
        d.box = {c.box.x1 + u(rng) * 4 - 2, c.box.y1 + u(rng) * 4 - 2, c.box.x2, c.box.y2};
        d.box.x1 = std::max(0.0, d.box.x1);
        d.box.y1 = std::max(0.0, d.box.y1);
        d.class_id = rng() % 5 == 0 ? static_cast<int>(rng() % kNumClasses) : c.class_id;
        d.score = u(rng);
        p.dets.push_back(d);
      }
      s.gt.push_back(std::move(r));
      s.preds.push_back(std::move(p));
    }
    return s;
  }();
  return data;
}

struct Grids {
  FeatureGrid teacher, student;
  DistillMask mask;
};

const Grids& grids() {
  static const Grids g = [] {
    const std::size_t slots = 25200;
    Grids out{FeatureGrid(slots, kTask2HeadWidth), FeatureGrid(slots, kTask2HeadWidth), DistillMask(slots)};
    std::mt19937_64 rng(2);
    std::normal_distribution<double> n(0.0, 1.0);
    for (std::size_t i = 0; i < slots; ++i) {
      out.mask[i] = rng() % 8 == 0;
      for (std::size_t c = 0; c < kTask2HeadWidth; ++c) {
        out.teacher.at(i, c) = n(rng);
        out.student.at(i, c) = n(rng);
      }
    }
    return out;
  }();
  return g;
}

void BM_EvalSerial(benchmark::State& state) {
  const auto& d = synthetic();
  const auto thr = coco_iou_thresholds();
  for (auto _ : state) benchmark::DoNotOptimize(serial::evaluate_detection(d.preds, d.gt, thr));
}

void BM_EvalParallel(benchmark::State& state) {
  set_num_threads(static_cast<int>(state.range(0)));
  const auto& d = synthetic();
  const auto thr = coco_iou_thresholds();
  for (auto _ : state) benchmark::DoNotOptimize(evaluate_detection(d.preds, d.gt, thr));
  set_num_threads(0);
}

void BM_DistillSerial(benchmark::State& state) {
  const auto& g = grids();
  for (auto _ : state) benchmark::DoNotOptimize(serial::masked_distillation_loss(g.teacher, g.student, g.mask));
}

void BM_DistillParallel(benchmark::State& state) {
  set_num_threads(static_cast<int>(state.range(0)));
  const auto& g = grids();
  for (auto _ : state) benchmark::DoNotOptimize(masked_distillation_loss(g.teacher, g.student, g.mask));
  set_num_threads(0);
}

void BM_FrequenciesSerial(benchmark::State& state) {
  const auto& d = synthetic();
  for (auto _ : state) benchmark::DoNotOptimize(serial::class_frequencies(d.gt));
}

void BM_FrequenciesParallel(benchmark::State& state) {
  set_num_threads(static_cast<int>(state.range(0)));
  const auto& d = synthetic();
  for (auto _ : state) benchmark::DoNotOptimize(class_frequencies(d.gt));
  set_num_threads(0);
}

BENCHMARK(BM_EvalSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EvalParallel)->RangeMultiplier(2)->Range(1, 8)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_DistillSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_DistillParallel)->RangeMultiplier(2)->Range(1, 8)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_FrequenciesSerial)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_FrequenciesParallel)->RangeMultiplier(2)->Range(1, 8)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();

// Microbenchmarks for the hot paths: box metrics, matching, the attention
// stack, and scene synthesis.
#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "tinytarget/data.hpp"
#include "tinytarget/dynhead.hpp"
#include "tinytarget/evaluation.hpp"
#include "tinytarget/geometry.hpp"
#include "tinytarget/rng.hpp"

namespace geo = tinytarget::geometry;
namespace dh = tinytarget::dynhead;
namespace ev = tinytarget::evaluation;
namespace td = tinytarget::data;

namespace {

std::vector<geo::BBox> random_boxes(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<geo::BBox> boxes;
  boxes.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    boxes.emplace_back(tinytarget::uniform_real(rng, 0.0, 60.0),
                       tinytarget::uniform_real(rng, 0.0, 60.0),
                       tinytarget::uniform_real(rng, 0.5, 10.0),
                       tinytarget::uniform_real(rng, 0.5, 10.0));
  }
  return boxes;
}

void BM_Iou(benchmark::State &state) {
  const auto boxes = random_boxes(256, 1);
  std::size_t i = 0;
  for (auto _ : state) {
    const auto &a = boxes[i % boxes.size()];
    const auto &b = boxes[(i + 7) % boxes.size()];
    benchmark::DoNotOptimize(geo::iou(a, b));
    ++i;
  }
}
BENCHMARK(BM_Iou);

void BM_Nwd(benchmark::State &state) {
  const auto boxes = random_boxes(256, 2);
  std::size_t i = 0;
  for (auto _ : state) {
    const auto &a = boxes[i % boxes.size()];
    const auto &b = boxes[(i + 7) % boxes.size()];
    benchmark::DoNotOptimize(geo::nwd(a, b));
    ++i;
  }
}
BENCHMARK(BM_Nwd);

void BM_Match(benchmark::State &state) {
  const int nd = static_cast<int>(state.range(0));
  const int ng = nd / 2;
  const auto dboxes = random_boxes(nd, 3);
  const auto gboxes = random_boxes(ng, 4);
  std::vector<ev::Detection> dets;
  std::vector<ev::GroundTruth> gts;
  std::mt19937_64 rng(5);
  for (const auto &b : dboxes) {
    dets.push_back({b, tinytarget::uniform_real(rng, 0.0, 1.0), "img"});
  }
  for (const auto &b : gboxes) gts.push_back({b, "img"});
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        ev::match(dets, gts, ev::Criterion::iou, 0.5));
  }
}
BENCHMARK(BM_Match)->Arg(16)->Arg(64)->Arg(256);

void BM_DynHeadForward(benchmark::State &state) {
  const int blocks = static_cast<int>(state.range(0));
  const dh::FeatureTensor f = dh::FeatureTensor::random(3, 16, 16, 16, 11);
  const dh::BlockStack stack = dh::BlockStack::random(blocks, 3, 16, 12);
  for (auto _ : state) {
    benchmark::DoNotOptimize(dh::forward(f, stack));
  }
}
BENCHMARK(BM_DynHeadForward)->Arg(1)->Arg(4);

void BM_GenerateScene(benchmark::State &state) {
  td::SceneParams params;
  std::uint64_t seed = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(td::generate_scene(params, seed++));
  }
}
BENCHMARK(BM_GenerateScene);

}  // namespace

int main(int argc, char **argv) {
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}

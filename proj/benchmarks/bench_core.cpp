#include <benchmark/benchmark.h>

#include "cte/assignment.hpp"
#include "cte/attention.hpp"
#include "cte/metrics.hpp"
#include "cte/random.hpp"
#include "cte/supervision.hpp"
#include "cte/synth.hpp"
#include "cte/tracker.hpp"

using namespace cte;

namespace {

GroundTruthObjects random_objects(Rng& rng, int count, int grid) {
  GroundTruthObjects gt;
  for (int k = 0; k < count; ++k) {
    gt.centers.push_back({rng.uniform(1.0, grid - 1.0), rng.uniform(1.0, grid - 1.0)});
    gt.sizes.push_back({rng.uniform(2.0, 10.0), rng.uniform(2.0, 10.0)});
  }
  return gt;
}

}  // namespace

static void BM_BuildGtHeatmap(benchmark::State& state) {
  Rng rng(1);
  const GridGeometry geom(640, 640);
  const GroundTruthObjects gt = random_objects(rng, static_cast<int>(state.range(0)), 160);
  for (auto _ : state) {
    benchmark::DoNotOptimize(build_gt_heatmap(gt, geom));
  }
}
BENCHMARK(BM_BuildGtHeatmap)->Arg(8)->Arg(32);

static void BM_CenterFocalLoss(benchmark::State& state) {
  Rng rng(2);
  const GridGeometry geom(256, 256);
  const GroundTruthObjects gt = random_objects(rng, 16, 64);
  const DenseMap heat = build_gt_heatmap(gt, geom);
  DenseMap pred(64, 64, 1);
  for (double& v : pred.values) v = rng.uniform(0.05, 0.95);
  for (auto _ : state) {
    benchmark::DoNotOptimize(center_focal_loss(pred, heat, FocalParams{}, gt.count()));
  }
}
BENCHMARK(BM_CenterFocalLoss);

static void BM_DecodeDetections(benchmark::State& state) {
  SyntheticScenario s;
  s.seed = 3;
  s.num_objects = 24;
  s.num_frames = 1;
  s.width = 640;
  s.height = 384;
  const auto frames = generate_oracle_sequence(s);
  const GridGeometry geom(s.height, s.width);
  const TrackerConfig cfg;
  for (auto _ : state) {
    benchmark::DoNotOptimize(decode_detections(frames[0].maps, cfg, geom));
  }
}
BENCHMARK(BM_DecodeDetections);

static void BM_Hungarian(benchmark::State& state) {
  Rng rng(4);
  const int n = static_cast<int>(state.range(0));
  const Eigen::MatrixXd cost = rng.matrix(n, n, 0.0, 1.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(hungarian_match(cost));
  }
}
BENCHMARK(BM_Hungarian)->Arg(8)->Arg(64);

static void BM_ScaledDotAttention(benchmark::State& state) {
  Rng rng(5);
  const int n = static_cast<int>(state.range(0));
  const AttentionInputs inp{rng.matrix(n, 64, -1.0, 1.0), rng.matrix(n, 64, -1.0, 1.0),
                            rng.matrix(n, 64, -1.0, 1.0)};
  for (auto _ : state) {
    benchmark::DoNotOptimize(scaled_dot_attention(inp));
  }
}
BENCHMARK(BM_ScaledDotAttention)->Arg(64)->Arg(256);

static void BM_SraAttention(benchmark::State& state) {
  Rng rng(6);
  const AttentionInputs inp{rng.matrix(256, 64, -1.0, 1.0), rng.matrix(256, 64, -1.0, 1.0),
                            rng.matrix(256, 64, -1.0, 1.0)};
  const SRAConfig cfg{static_cast<int>(state.range(0))};
  for (auto _ : state) {
    benchmark::DoNotOptimize(sra_attention(inp, cfg));
  }
}
BENCHMARK(BM_SraAttention)->Arg(1)->Arg(4);

static void BM_DeformableAttention(benchmark::State& state) {
  Rng rng(7);
  const int h = 32;
  const GridGeometry geom(128, 128);
  FeaturePyramid memory = make_pyramid(geom, h);
  for (DenseMap& level : memory.levels) {
    for (double& v : level.values) v = rng.uniform(-1.0, 1.0);
  }
  const DeformAttnParams params = make_deform_attn_params(h, 4, 7, 8, 4);
  const int n_q = static_cast<int>(state.range(0));
  const Eigen::MatrixXd queries = rng.matrix(n_q, h, -1.0, 1.0);
  std::vector<Point> refs;
  for (int i = 0; i < n_q; ++i) refs.push_back({rng.uniform(), rng.uniform()});
  for (auto _ : state) {
    benchmark::DoNotOptimize(deformable_cross_attention(queries, refs, memory, params));
  }
}
BENCHMARK(BM_DeformableAttention)->Arg(16)->Arg(128);

static void BM_TrackerSequence(benchmark::State& state) {
  SyntheticScenario s;
  s.seed = 8;
  s.num_objects = 16;
  s.num_frames = 30;
  s.width = 512;
  s.height = 256;
  const auto frames = generate_oracle_sequence(s);
  const GridGeometry geom(s.height, s.width);
  for (auto _ : state) {
    Tracker tracker(TrackerConfig{}, geom);
    for (const OracleFrame& f : frames) {
      benchmark::DoNotOptimize(tracker.step(f.frame, f.maps, &f.features));
    }
  }
}
BENCHMARK(BM_TrackerSequence);

static void BM_Evaluate(benchmark::State& state) {
  SyntheticScenario s;
  s.seed = 9;
  s.num_objects = 12;
  s.num_frames = 50;
  const auto frames = generate_oracle_sequence(s);
  std::vector<FrameAnnotations> gt;
  for (const OracleFrame& f : frames) gt.push_back(f.gt);
  for (auto _ : state) {
    benchmark::DoNotOptimize(evaluate(gt, gt, 0.5));
  }
}
BENCHMARK(BM_Evaluate);

BENCHMARK_MAIN();

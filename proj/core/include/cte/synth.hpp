#pragma once

#include <cstdint>
#include <vector>

#include "cte/grid.hpp"
#include "cte/metrics.hpp"

namespace cte {

struct OcclusionWindow {
  int object = 0;  // object index
  int first_frame = 0;
  int last_frame = 0;  // inclusive, 1-based frames
};

/// Deterministic synthetic sequence standing in for the trained network.
/// Objects move with constant velocity plus seeded jitter and bounce at the
/// borders; identical seeds give bit-identical outputs.
struct SyntheticScenario {
  std::uint64_t seed = 1;
  int num_objects = 8;
  int num_frames = 50;
  int width = 256;   // divisible by 32
  int height = 192;  // divisible by 32
  double min_size = 24.0;
  double max_size = 72.0;
  double min_speed = 0.5;
  double max_speed = 6.0;
  double jitter = 0.0;  // per-frame velocity noise, pixels
  bool lane_motion = false;  // one object per row lane, horizontal motion only
  std::vector<OcclusionWindow> occlusions;

  // corruption knobs
  double heatmap_noise = 0.0;  // additive Gaussian sigma on the heatmap
  double dropout_prob = 0.0;   // chance an object is missing from the maps
  double displacement_noise = 0.0;  // additive sigma on displacement cells

  int feature_dim = 16;
};

struct OracleFrame {
  int frame = 1;
  OutputMaps maps;
  DenseMap features;  // feature_dim channels at 1/4 resolution
  FrameAnnotations gt;
};

/// Ground-truth boxes are quantized to the output lattice so a noise-free
/// sequence decodes back to the exact annotations. Occluded objects stay in
/// the annotations but leave no response in the maps.
std::vector<OracleFrame> generate_oracle_sequence(const SyntheticScenario& scenario);

}  // namespace cte

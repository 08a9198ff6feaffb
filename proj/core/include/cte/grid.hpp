#pragma once

#include <vector>

#include <Eigen/Dense>

namespace cte {

/// Continuous grid position. Cell (i, j) has its sampling center at
/// (j + 0.5, i + 0.5) in cell units; pixel coordinate p maps to grid
/// coordinate p / down_ratio + 0.5, so pixel r*j sits exactly at the
/// center of cell j.
struct Point {
  double x = 0.0;
  double y = 0.0;
};

/// Input-image geometry. H and W must be positive and divisible by 32 so
/// all four pyramid scales are integral; output maps live at 1/down_ratio.
struct GridGeometry {
  int input_height = 0;
  int input_width = 0;
  int down_ratio = 4;

  GridGeometry() = default;
  GridGeometry(int height, int width);

  int output_height() const { return input_height / down_ratio; }
  int output_width() const { return input_width / down_ratio; }
};

/// Dense planar map: channel-major storage, each channel plane row-major.
struct DenseMap {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<double> values;

  DenseMap() = default;
  DenseMap(int height_, int width_, int channels_, double fill = 0.0);

  double& at(int i, int j, int c = 0) {
    return values[(static_cast<std::size_t>(c) * height + i) * width + j];
  }
  double at(int i, int j, int c = 0) const {
    return values[(static_cast<std::size_t>(c) * height + i) * width + j];
  }
  bool empty() const { return values.empty(); }
};

/// Multi-scale feature maps, coarse to fine: 1/32, 1/16, 1/8, 1/4 of the
/// input resolution. All levels share hidden_dim channels.
struct FeaturePyramid {
  std::vector<DenseMap> levels;
  int hidden_dim = 0;
};

FeaturePyramid make_pyramid(const GridGeometry& geom, int hidden_dim, double fill = 0.0);
void validate_pyramid(const FeaturePyramid& pyramid, const GridGeometry& geom);

/// Dense network outputs at 1/4 resolution: center heatmap (1 channel,
/// values in [0,1]), size map (2 channels, input pixels), displacement map
/// (2 channels, grid cells per frame).
struct OutputMaps {
  DenseMap center;
  DenseMap size;
  DenseMap displacement;
};

Point grid_from_pixel(const Point& pixel, int down_ratio);

/// Bilinear interpolation of the 4 nearest cell centers; out-of-grid
/// coordinates clamp to the border cell. Returns one value per channel.
std::vector<double> bilinear_sample(const DenseMap& map, const Point& p);

/// Single-channel 3x3 max pooling, window shrinks at the border. A cell is
/// a strict local max iff the pooled value equals its own value.
DenseMap max_pool_3x3(const DenseMap& map);

/// Numerically stabilized softmax (max subtraction).
Eigen::VectorXd softmax(const Eigen::VectorXd& v);
std::vector<double> softmax(const std::vector<double>& v);

/// Bilinear upscale by factor 2, 4 or 8. Center-anchored: output cell
/// (I, J) samples the input at ((J)/f + 0.5, (I)/f + 0.5), so input cell
/// centers land on exact output cell centers and resampling the result at
/// an original center reproduces the original value.
DenseMap upscale_bilinear(const DenseMap& map, int factor);

struct AffineLayer {
  Eigen::MatrixXd weight;
  Eigen::VectorXd bias;
};
using FfnWeights = std::vector<AffineLayer>;

/// Alternating affine map and rectifier; no activation after the last layer.
Eigen::VectorXd ffn_forward(const Eigen::VectorXd& x, const FfnWeights& layers);

FfnWeights identity_ffn(int dim);

}  // namespace cte

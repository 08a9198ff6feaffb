#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "cte/grid.hpp"

namespace cte {

/// Ground-truth objects in output-grid coordinates. Displacement targets
/// are optional; when empty the displacement loss targets are zero.
struct GroundTruthObjects {
  std::vector<Point> centers;
  std::vector<std::array<double, 2>> sizes;          // (w, h), grid units
  std::vector<std::array<double, 2>> displacements;  // (dx, dy), grid units

  std::size_t count() const { return centers.size(); }
};

struct FocalParams {
  double alpha = 2.0;
  double beta = 4.0;
};

struct LossWeights {
  double lambda_s = 0.1;
  double lambda_t = 1.0;
  double lambda_r = 0.5;
};

/// Component losses plus gradients of `total` w.r.t. each prediction map.
struct LossReport {
  double total = 0.0;
  double l_c = 0.0;
  double l_s = 0.0;
  double l_t = 0.0;
  double l_r = 0.0;
  DenseMap grad_c;
  DenseMap grad_s;
  DenseMap grad_t;
};

struct GridCell {
  int row = 0;
  int col = 0;
};

/// Minimum-overlap kernel radius rule (0.7 overlap), the smallest of the
/// three quadratic cases.
double gaussian_radius(double width, double height, double min_overlap = 0.7);

/// Cell containing the center (floor); errors if the center is outside.
GridCell center_cell(const Point& center, int grid_height, int grid_width);

/// Per-cell max over one Gaussian kernel per object, sigma = radius / 3.
/// The cell containing each center is exactly 1.
DenseMap build_gt_heatmap(const GroundTruthObjects& objects, const GridGeometry& geom);

struct ScalarWithGrad {
  double value = 0.0;
  DenseMap grad;
};

/// Penalty-reduced focal loss over the heatmap, negated so the value is
/// >= 0 and minimized at the target. Predictions are clamped to
/// [1e-4, 1 - 1e-4] before logs; the gradient is zero where the clamp is
/// active.
ScalarWithGrad center_focal_loss(const DenseMap& pred, const DenseMap& gt,
                                 const FocalParams& params, std::size_t k);

/// L1 penalty on the listed center cells only; gradient is +-1/k there and
/// zero elsewhere. Duplicate cells are rejected.
ScalarWithGrad sparse_l1_loss(const DenseMap& pred,
                              const std::vector<std::vector<double>>& targets,
                              const std::vector<GridCell>& center_cells,
                              std::size_t k);

/// L = L_C + lambda_S L_S + lambda_T L_T + lambda_R L_R. L_R regresses box
/// corners computed from the size map and ground-truth centers against the
/// ground-truth boxes.
LossReport total_loss(const OutputMaps& pred, const GroundTruthObjects& gt,
                      const LossWeights& weights, const FocalParams& params);

}  // namespace cte

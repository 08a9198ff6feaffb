#include "cte/supervision.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>
#include <string>

namespace cte {

namespace {

constexpr double kClamp = 1e-4;        // keeps the logs finite
constexpr double kPeakTol = 1e-9;      // "C* = 1" test on rendered kernels

double clamp_pred(double v) { return std::clamp(v, kClamp, 1.0 - kClamp); }

void check_same_shape(const DenseMap& a, const DenseMap& b, const char* what) {
  if (a.height != b.height || a.width != b.width || a.channels != b.channels) {
    throw std::invalid_argument(std::string(what) + ": shape mismatch");
  }
}

}  // namespace

double gaussian_radius(double width, double height, double min_overlap) {
  // Three quadratic cases (corner inside, corner outside, both shifted);
  // the denominators follow the reference implementation of the radius rule.
  const double a1 = 1.0;
  const double b1 = height + width;
  const double c1 = width * height * (1.0 - min_overlap) / (1.0 + min_overlap);
  const double sq1 = std::sqrt(b1 * b1 - 4.0 * a1 * c1);
  const double r1 = (b1 + sq1) / 2.0;

  const double a2 = 4.0;
  const double b2 = 2.0 * (height + width);
  const double c2 = (1.0 - min_overlap) * width * height;
  const double sq2 = std::sqrt(b2 * b2 - 4.0 * a2 * c2);
  const double r2 = (b2 + sq2) / 2.0;

  const double a3 = 4.0 * min_overlap;
  const double b3 = -2.0 * min_overlap * (height + width);
  const double c3 = (min_overlap - 1.0) * width * height;
  const double sq3 = std::sqrt(b3 * b3 - 4.0 * a3 * c3);
  const double r3 = (b3 + sq3) / 2.0;

  return std::min({r1, r2, r3});
}

GridCell center_cell(const Point& center, int grid_height, int grid_width) {
  if (center.x < 0.0 || center.y < 0.0 || center.x >= grid_width || center.y >= grid_height) {
    throw std::invalid_argument("center outside the output grid");
  }
  return GridCell{static_cast<int>(std::floor(center.y)), static_cast<int>(std::floor(center.x))};
}

DenseMap build_gt_heatmap(const GroundTruthObjects& objects, const GridGeometry& geom) {
  if (objects.count() == 0) throw std::invalid_argument("build_gt_heatmap: no objects");
  if (objects.sizes.size() != objects.count()) {
    throw std::invalid_argument("build_gt_heatmap: centers/sizes length mismatch");
  }
  const int gh = geom.output_height();
  const int gw = geom.output_width();
  DenseMap map(gh, gw, 1, 0.0);

  for (std::size_t k = 0; k < objects.count(); ++k) {
    const auto [w, h] = objects.sizes[k];
    if (w <= 0.0 || h <= 0.0) throw std::invalid_argument("build_gt_heatmap: non-positive size");
    const GridCell cell = center_cell(objects.centers[k], gh, gw);
    const double sigma = std::max(gaussian_radius(w, h), 1e-6) / 3.0;
    const double inv = 1.0 / (2.0 * sigma * sigma);
    for (int i = 0; i < gh; ++i) {
      for (int j = 0; j < gw; ++j) {
        const double dx = j - cell.col;
        const double dy = i - cell.row;
        const double g = std::exp(-(dx * dx + dy * dy) * inv);
        map.at(i, j) = std::max(map.at(i, j), g);
      }
    }
  }
  return map;
}

ScalarWithGrad center_focal_loss(const DenseMap& pred, const DenseMap& gt,
                                 const FocalParams& params, std::size_t k) {
  check_same_shape(pred, gt, "center_focal_loss");
  if (pred.channels != 1) throw std::invalid_argument("center_focal_loss: expected 1 channel");
  if (k == 0) throw std::invalid_argument("center_focal_loss: k must be >= 1");

  const double inv_k = 1.0 / static_cast<double>(k);
  ScalarWithGrad out;
  out.grad = DenseMap(pred.height, pred.width, 1, 0.0);

  double sum = 0.0;
  for (int i = 0; i < pred.height; ++i) {
    for (int j = 0; j < pred.width; ++j) {
      const double raw = pred.at(i, j);
      const double c = clamp_pred(raw);
      const double cs = gt.at(i, j);
      double term = 0.0;
      double dterm = 0.0;  // d(-term)/dc
      if (cs > 1.0 - kPeakTol) {
        const double om = 1.0 - c;
        term = std::pow(om, params.alpha) * std::log(c);
        dterm = params.alpha * std::pow(om, params.alpha - 1.0) * std::log(c) -
                std::pow(om, params.alpha) / c;
      } else {
        const double w = std::pow(1.0 - cs, params.beta);
        term = w * std::pow(c, params.alpha) * std::log1p(-c);
        dterm = -w * (params.alpha * std::pow(c, params.alpha - 1.0) * std::log1p(-c) -
                      std::pow(c, params.alpha) / (1.0 - c));
      }
      sum += term;
      // zero gradient where the clamp is active
      out.grad.at(i, j) = (raw > kClamp && raw < 1.0 - kClamp) ? inv_k * dterm : 0.0;
    }
  }
  out.value = -sum * inv_k;
  return out;
}

ScalarWithGrad sparse_l1_loss(const DenseMap& pred,
                              const std::vector<std::vector<double>>& targets,
                              const std::vector<GridCell>& center_cells, std::size_t k) {
  if (k == 0) throw std::invalid_argument("sparse_l1_loss: k must be >= 1");
  if (targets.size() != center_cells.size()) {
    throw std::invalid_argument("sparse_l1_loss: targets/cells length mismatch");
  }
  std::set<std::pair<int, int>> seen;
  for (const GridCell& c : center_cells) {
    if (c.row < 0 || c.col < 0 || c.row >= pred.height || c.col >= pred.width) {
      throw std::invalid_argument("sparse_l1_loss: center cell outside the grid");
    }
    if (!seen.insert({c.row, c.col}).second) {
      throw std::invalid_argument("sparse_l1_loss: duplicate center cells");
    }
  }

  const double inv_k = 1.0 / static_cast<double>(k);
  ScalarWithGrad out;
  out.grad = DenseMap(pred.height, pred.width, pred.channels, 0.0);

  double sum = 0.0;
  for (std::size_t n = 0; n < center_cells.size(); ++n) {
    const GridCell& cell = center_cells[n];
    const std::vector<double>& target = targets[n];
    if (static_cast<int>(target.size()) != pred.channels) {
      throw std::invalid_argument("sparse_l1_loss: target channel mismatch");
    }
    for (int c = 0; c < pred.channels; ++c) {
      const double d = pred.at(cell.row, cell.col, c) - target[c];
      sum += std::abs(d);
      out.grad.at(cell.row, cell.col, c) = (d > 0.0) ? inv_k : (d < 0.0 ? -inv_k : 0.0);
    }
  }
  out.value = sum * inv_k;
  return out;
}

namespace {

// L1 over box corners computed from the size map at the center cells and
// the ground-truth centers, against the ground-truth boxes. With matching
// centers each corner contributes half of the per-axis size error.
ScalarWithGrad box_regression_loss(const DenseMap& size_pred, const GroundTruthObjects& gt,
                                   const std::vector<GridCell>& cells) {
  const double inv_k = 1.0 / static_cast<double>(gt.count());
  ScalarWithGrad out;
  out.grad = DenseMap(size_pred.height, size_pred.width, size_pred.channels, 0.0);

  double sum = 0.0;
  for (std::size_t k = 0; k < gt.count(); ++k) {
    const GridCell& cell = cells[k];
    for (int axis = 0; axis < 2; ++axis) {
      const double s = size_pred.at(cell.row, cell.col, axis);
      const double st = gt.sizes[k][axis];
      const double lo = -0.5 * s - (-0.5 * st);  // low corner difference
      const double hi = 0.5 * s - 0.5 * st;      // high corner difference
      sum += std::abs(lo) + std::abs(hi);
      double g = 0.0;
      g += (lo > 0.0) ? -0.5 : (lo < 0.0 ? 0.5 : 0.0);
      g += (hi > 0.0) ? 0.5 : (hi < 0.0 ? -0.5 : 0.0);
      out.grad.at(cell.row, cell.col, axis) = inv_k * g;
    }
  }
  out.value = sum * inv_k;
  return out;
}

}  // namespace

LossReport total_loss(const OutputMaps& pred, const GroundTruthObjects& gt,
                      const LossWeights& weights, const FocalParams& params) {
  if (gt.count() == 0) throw std::invalid_argument("total_loss: no objects");
  check_same_shape(pred.size, pred.displacement, "total_loss size/displacement");
  if (pred.center.height != pred.size.height || pred.center.width != pred.size.width) {
    throw std::invalid_argument("total_loss: inconsistent map geometry");
  }

  GridGeometry geom;
  geom.input_height = pred.center.height * 4;
  geom.input_width = pred.center.width * 4;

  const DenseMap gt_heat = build_gt_heatmap(gt, geom);

  std::vector<GridCell> cells;
  std::vector<std::vector<double>> size_targets;
  std::vector<std::vector<double>> disp_targets;
  cells.reserve(gt.count());
  for (std::size_t k = 0; k < gt.count(); ++k) {
    cells.push_back(center_cell(gt.centers[k], pred.center.height, pred.center.width));
    size_targets.push_back({gt.sizes[k][0], gt.sizes[k][1]});
    if (gt.displacements.empty()) {
      disp_targets.push_back({0.0, 0.0});
    } else {
      disp_targets.push_back({gt.displacements[k][0], gt.displacements[k][1]});
    }
  }

  const ScalarWithGrad focal = center_focal_loss(pred.center, gt_heat, params, gt.count());
  const ScalarWithGrad size_l1 = sparse_l1_loss(pred.size, size_targets, cells, gt.count());
  const ScalarWithGrad disp_l1 = sparse_l1_loss(pred.displacement, disp_targets, cells, gt.count());
  const ScalarWithGrad box_reg = box_regression_loss(pred.size, gt, cells);

  LossReport report;
  report.l_c = focal.value;
  report.l_s = size_l1.value;
  report.l_t = disp_l1.value;
  report.l_r = box_reg.value;
  report.total = report.l_c + weights.lambda_s * report.l_s + weights.lambda_t * report.l_t +
                 weights.lambda_r * report.l_r;

  report.grad_c = focal.grad;
  report.grad_s = DenseMap(pred.size.height, pred.size.width, pred.size.channels, 0.0);
  for (std::size_t i = 0; i < report.grad_s.values.size(); ++i) {
    report.grad_s.values[i] =
        weights.lambda_s * size_l1.grad.values[i] + weights.lambda_r * box_reg.grad.values[i];
  }
  report.grad_t = disp_l1.grad;
  for (double& v : report.grad_t.values) v *= weights.lambda_t;

  return report;
}

}  // namespace cte

#include <cmath>
#include <stdexcept>

#include "cte/gradcheck.hpp"
#include "cte/random.hpp"
#include "cte/supervision.hpp"
#include "doctest.h"

using namespace cte;

namespace {

const GridGeometry kGeom(64, 64);  // 16x16 output grid

GroundTruthObjects one_object(double x, double y, double w = 3.0, double h = 3.0) {
  GroundTruthObjects gt;
  gt.centers.push_back({x, y});
  gt.sizes.push_back({w, h});
  return gt;
}

}  // namespace

TEST_CASE("build_gt_heatmap peaks at exactly 1 on the center cell") {
  const DenseMap map = build_gt_heatmap(one_object(10.0, 10.0), kGeom);
  CHECK(map.at(10, 10) == 1.0);
  for (double v : map.values) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("build_gt_heatmap is idempotent for duplicated objects") {
  GroundTruthObjects twice = one_object(5.0, 7.0);
  twice.centers.push_back({5.0, 7.0});
  twice.sizes.push_back({3.0, 3.0});
  const DenseMap a = build_gt_heatmap(one_object(5.0, 7.0), kGeom);
  const DenseMap b = build_gt_heatmap(twice, kGeom);
  CHECK(a.values == b.values);
}

TEST_CASE("build_gt_heatmap of two objects is the pointwise max of single renders") {
  GroundTruthObjects both;
  both.centers = {{6.0, 8.0}, {9.0, 8.0}};  // 3 cells apart, kernels overlap
  both.sizes = {{4.0, 4.0}, {5.0, 3.0}};

  const DenseMap joint = build_gt_heatmap(both, kGeom);
  const DenseMap first = build_gt_heatmap(one_object(6.0, 8.0, 4.0, 4.0), kGeom);
  const DenseMap second = build_gt_heatmap(one_object(9.0, 8.0, 5.0, 3.0), kGeom);
  for (std::size_t i = 0; i < joint.values.size(); ++i) {
    CHECK(joint.values[i] == std::max(first.values[i], second.values[i]));
  }
}

TEST_CASE("build_gt_heatmap decreases away from an isolated center") {
  const DenseMap map = build_gt_heatmap(one_object(8.0, 8.0, 5.0, 5.0), kGeom);
  for (int step = 1; step < 8; ++step) {
    CHECK(map.at(8, 8 + step) <= map.at(8, 8 + step - 1) + 1e-15);
    CHECK(map.at(8 + step, 8) <= map.at(8 + step - 1, 8) + 1e-15);
    CHECK(map.at(8 + step, 8 + step) <= map.at(8 + step - 1, 8 + step - 1) + 1e-15);
  }
}

TEST_CASE("build_gt_heatmap rejects out-of-grid centers and bad sizes") {
  CHECK_THROWS_AS(build_gt_heatmap(one_object(-1.0, 5.0), kGeom), std::invalid_argument);
  CHECK_THROWS_AS(build_gt_heatmap(one_object(5.0, 16.0), kGeom), std::invalid_argument);
  CHECK_THROWS_AS(build_gt_heatmap(one_object(5.0, 5.0, 0.0, 2.0), kGeom), std::invalid_argument);
  CHECK_THROWS_AS(build_gt_heatmap(GroundTruthObjects{}, kGeom), std::invalid_argument);
}

TEST_CASE("gaussian_radius grows with the object") {
  const double small = gaussian_radius(2.0, 2.0);
  const double large = gaussian_radius(10.0, 10.0);
  CHECK(small > 0.0);
  CHECK(large > small);
}

TEST_CASE("center_focal_loss vanishes on the hard target") {
  DenseMap gt(8, 8, 1, 0.0);
  gt.at(3, 4) = 1.0;
  const ScalarWithGrad r = center_focal_loss(gt, gt, FocalParams{}, 1);
  CHECK(r.value == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(std::abs(r.value) < 1e-9);
}

TEST_CASE("center_focal_loss single surviving term evaluates to 0.25 ln 2") {
  DenseMap gt(8, 8, 1, 0.0);
  gt.at(3, 4) = 1.0;
  DenseMap pred(8, 8, 1, 0.0);
  pred.at(3, 4) = 0.5;
  const ScalarWithGrad r = center_focal_loss(pred, gt, FocalParams{}, 1);
  CHECK(r.value == doctest::Approx(0.25 * std::log(2.0)).epsilon(1e-6));
}

TEST_CASE("center_focal_loss is non-negative on random instances") {
  Rng rng(61);
  for (int n = 0; n < 20; ++n) {
    GroundTruthObjects gt = one_object(rng.uniform(2.0, 14.0), rng.uniform(2.0, 14.0));
    const DenseMap heat = build_gt_heatmap(gt, kGeom);
    DenseMap pred(16, 16, 1);
    for (double& v : pred.values) v = rng.uniform(0.01, 0.99);
    CHECK(center_focal_loss(pred, heat, FocalParams{}, 1).value >= 0.0);
  }
}

TEST_CASE("center_focal_loss gradient matches finite differences") {
  Rng rng(67);
  DenseMap gt(8, 8, 1, 0.0);
  gt.at(2, 2) = 1.0;
  gt.at(5, 6) = 1.0;
  DenseMap pred(8, 8, 1);
  for (double& v : pred.values) v = rng.uniform(0.05, 0.95);

  const ScalarWithGrad analytic = center_focal_loss(pred, gt, FocalParams{}, 2);
  const DenseMap fd = finite_difference_grad(
      [&](const DenseMap& x) { return center_focal_loss(x, gt, FocalParams{}, 2).value; }, pred,
      1e-5);
  CHECK(max_relative_error(analytic.grad, fd) < 1e-4);
}

TEST_CASE("center_focal_loss rejects bad shapes and k = 0") {
  DenseMap a(8, 8, 1), b(7, 8, 1);
  CHECK_THROWS_AS(center_focal_loss(a, b, FocalParams{}, 1), std::invalid_argument);
  CHECK_THROWS_AS(center_focal_loss(a, a, FocalParams{}, 0), std::invalid_argument);
}

TEST_CASE("sparse_l1_loss on exact predictions is zero") {
  DenseMap pred(8, 8, 2, 0.0);
  pred.at(3, 3, 0) = 1.5;
  pred.at(3, 3, 1) = 2.5;
  const ScalarWithGrad r = sparse_l1_loss(pred, {{1.5, 2.5}}, {GridCell{3, 3}}, 1);
  CHECK(r.value == 0.0);
  for (double v : r.grad.values) CHECK(v == 0.0);
}

TEST_CASE("sparse_l1_loss sums per-channel absolute errors") {
  DenseMap pred(8, 8, 2, 0.0);
  pred.at(4, 5, 0) = 3.0;  // target 2 -> off by 1
  pred.at(4, 5, 1) = 1.0;  // target 3 -> off by 2
  const ScalarWithGrad r = sparse_l1_loss(pred, {{2.0, 3.0}}, {GridCell{4, 5}}, 1);
  CHECK(r.value == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(r.grad.at(4, 5, 0) == 1.0);
  CHECK(r.grad.at(4, 5, 1) == -1.0);
}

TEST_CASE("sparse_l1_loss matches a naive loop and finite differences on K=5") {
  Rng rng(71);
  const std::size_t k = 5;
  DenseMap pred(8, 8, 2);
  for (double& v : pred.values) v = rng.uniform(-4.0, 4.0);

  std::vector<GridCell> cells;
  std::vector<std::vector<double>> targets;
  for (std::size_t n = 0; n < k; ++n) {
    cells.push_back(GridCell{static_cast<int>(n), static_cast<int>(2 * n % 8)});
    targets.push_back({rng.uniform(-4.0, 4.0), rng.uniform(-4.0, 4.0)});
  }

  double naive = 0.0;
  for (std::size_t n = 0; n < k; ++n) {
    naive += std::abs(pred.at(cells[n].row, cells[n].col, 0) - targets[n][0]);
    naive += std::abs(pred.at(cells[n].row, cells[n].col, 1) - targets[n][1]);
  }
  naive /= static_cast<double>(k);

  const ScalarWithGrad r = sparse_l1_loss(pred, targets, cells, k);
  CHECK(r.value == doctest::Approx(naive).epsilon(1e-12));

  const DenseMap fd = finite_difference_grad(
      [&](const DenseMap& x) { return sparse_l1_loss(x, targets, cells, k).value; }, pred, 1e-7);
  for (std::size_t i = 0; i < fd.values.size(); ++i) {
    CHECK(std::abs(fd.values[i] - r.grad.values[i]) < 1e-6);
  }
}

TEST_CASE("sparse_l1_loss ignores values away from the centers") {
  Rng rng(73);
  DenseMap pred(8, 8, 2);
  for (double& v : pred.values) v = rng.uniform(-1.0, 1.0);
  const std::vector<GridCell> cells{GridCell{2, 2}};
  const std::vector<std::vector<double>> targets{{0.5, -0.5}};
  const double base = sparse_l1_loss(pred, targets, cells, 1).value;

  DenseMap perturbed = pred;
  for (int i = 0; i < 8; ++i) {
    for (int j = 0; j < 8; ++j) {
      if (i == 2 && j == 2) continue;
      perturbed.at(i, j, 0) += rng.uniform(-10.0, 10.0);
      perturbed.at(i, j, 1) += rng.uniform(-10.0, 10.0);
    }
  }
  CHECK(sparse_l1_loss(perturbed, targets, cells, 1).value == base);
}

TEST_CASE("sparse_l1_loss rejects duplicates and out-of-grid cells") {
  DenseMap pred(8, 8, 1, 0.0);
  CHECK_THROWS_AS(
      sparse_l1_loss(pred, {{0.0}, {0.0}}, {GridCell{1, 1}, GridCell{1, 1}}, 2),
      std::invalid_argument);
  CHECK_THROWS_AS(sparse_l1_loss(pred, {{0.0}}, {GridCell{9, 1}}, 1), std::invalid_argument);
  CHECK_THROWS_AS(sparse_l1_loss(pred, {{0.0}}, {GridCell{1, 1}}, 0), std::invalid_argument);
}

namespace {

struct SceneFixture {
  GroundTruthObjects gt;
  OutputMaps pred;
};

SceneFixture random_scene(Rng& rng, int n_objects) {
  SceneFixture s;
  std::vector<std::pair<int, int>> used;
  for (int k = 0; k < n_objects; ++k) {
    int row = 0, col = 0;
    bool fresh = false;
    while (!fresh) {
      row = rng.uniform_int(1, 14);
      col = rng.uniform_int(1, 14);
      fresh = true;
      for (auto& [r, c] : used) fresh = fresh && !(r == row && c == col);
    }
    used.push_back({row, col});
    s.gt.centers.push_back({col + 0.4, row + 0.4});
    s.gt.sizes.push_back({rng.uniform(1.5, 4.0), rng.uniform(1.5, 4.0)});
    s.gt.displacements.push_back({rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)});
  }
  s.pred.center = DenseMap(16, 16, 1);
  for (double& v : s.pred.center.values) v = rng.uniform(0.05, 0.95);
  s.pred.size = DenseMap(16, 16, 2);
  for (double& v : s.pred.size.values) v = rng.uniform(0.5, 5.0);
  s.pred.displacement = DenseMap(16, 16, 2);
  for (double& v : s.pred.displacement.values) v = rng.uniform(-2.0, 2.0);
  return s;
}

}  // namespace

TEST_CASE("total_loss reduces to the focal term under zero weights") {
  Rng rng(79);
  SceneFixture s = random_scene(rng, 2);
  const LossReport r = total_loss(s.pred, s.gt, LossWeights{0.0, 0.0, 0.0}, FocalParams{});
  CHECK(r.total == doctest::Approx(r.l_c).epsilon(1e-12));
}

TEST_CASE("total_loss equals the hand-assembled weighted sum of components") {
  Rng rng(83);
  SceneFixture s = random_scene(rng, 3);
  const LossWeights w;  // the published weights: 0.1, 1.0, 0.5
  CHECK(w.lambda_s == 0.1);
  CHECK(w.lambda_t == 1.0);
  CHECK(w.lambda_r == 0.5);

  const LossReport r = total_loss(s.pred, s.gt, w, FocalParams{});

  // recompute every component independently
  const DenseMap heat = build_gt_heatmap(s.gt, GridGeometry(64, 64));
  std::vector<GridCell> cells;
  std::vector<std::vector<double>> size_targets, disp_targets;
  for (std::size_t k = 0; k < s.gt.count(); ++k) {
    cells.push_back(center_cell(s.gt.centers[k], 16, 16));
    size_targets.push_back({s.gt.sizes[k][0], s.gt.sizes[k][1]});
    disp_targets.push_back({s.gt.displacements[k][0], s.gt.displacements[k][1]});
  }
  const double l_c = center_focal_loss(s.pred.center, heat, FocalParams{}, s.gt.count()).value;
  const double l_s = sparse_l1_loss(s.pred.size, size_targets, cells, s.gt.count()).value;
  const double l_t = sparse_l1_loss(s.pred.displacement, disp_targets, cells, s.gt.count()).value;

  // box corners from the size map at ground-truth centers vs ground truth
  double l_r = 0.0;
  for (std::size_t k = 0; k < s.gt.count(); ++k) {
    for (int axis = 0; axis < 2; ++axis) {
      const double sp = s.pred.size.at(cells[k].row, cells[k].col, axis);
      const double st = s.gt.sizes[k][axis];
      l_r += std::abs(-0.5 * sp + 0.5 * st) + std::abs(0.5 * sp - 0.5 * st);
    }
  }
  l_r /= static_cast<double>(s.gt.count());

  CHECK(r.l_c == doctest::Approx(l_c).epsilon(1e-12));
  CHECK(r.l_s == doctest::Approx(l_s).epsilon(1e-12));
  CHECK(r.l_t == doctest::Approx(l_t).epsilon(1e-12));
  CHECK(r.l_r == doctest::Approx(l_r).epsilon(1e-12));
  const double expect = l_c + w.lambda_s * l_s + w.lambda_t * l_t + w.lambda_r * l_r;
  CHECK(r.total == doctest::Approx(expect).epsilon(1e-12));
  CHECK(std::abs(r.total - (r.l_c + w.lambda_s * r.l_s + w.lambda_t * r.l_t + w.lambda_r * r.l_r)) <
        1e-9);
}

TEST_CASE("total_loss scales linearly in lambda_s") {
  Rng rng(89);
  SceneFixture s = random_scene(rng, 2);
  const LossReport base = total_loss(s.pred, s.gt, LossWeights{0.1, 0.0, 0.0}, FocalParams{});
  const LossReport scaled = total_loss(s.pred, s.gt, LossWeights{0.3, 0.0, 0.0}, FocalParams{});
  const double contrib_base = base.total - base.l_c;
  const double contrib_scaled = scaled.total - scaled.l_c;
  CHECK(contrib_scaled == doctest::Approx(3.0 * contrib_base).epsilon(1e-9));
}

TEST_CASE("total_loss gradients pass finite differences") {
  Rng rng(97);
  SceneFixture s = random_scene(rng, 3);
  const LossWeights w;
  const LossReport r = total_loss(s.pred, s.gt, w, FocalParams{});

  OutputMaps probe = s.pred;
  const DenseMap fd_s = finite_difference_grad(
      [&](const DenseMap& x) {
        probe.size = x;
        return total_loss(probe, s.gt, w, FocalParams{}).total;
      },
      s.pred.size, 1e-5);
  CHECK(max_relative_error(r.grad_s, fd_s) < 1e-4);

  probe = s.pred;
  const DenseMap fd_t = finite_difference_grad(
      [&](const DenseMap& x) {
        probe.displacement = x;
        return total_loss(probe, s.gt, w, FocalParams{}).total;
      },
      s.pred.displacement, 1e-5);
  CHECK(max_relative_error(r.grad_t, fd_t) < 1e-4);
}

TEST_CASE("total_loss rejects duplicate rounded centers") {
  Rng rng(101);
  SceneFixture s = random_scene(rng, 1);
  s.gt.centers.push_back({s.gt.centers[0].x + 0.1, s.gt.centers[0].y + 0.1});  // same cell
  s.gt.sizes.push_back({2.0, 2.0});
  s.gt.displacements.push_back({0.0, 0.0});
  CHECK_THROWS_AS(total_loss(s.pred, s.gt, LossWeights{}, FocalParams{}), std::invalid_argument);
}

TEST_CASE("loss gradient suite passes at the published tolerance") {
  const CheckReport report = run_loss_gradient_suite(5, 2024);
  CHECK(report.passed);
  CHECK(report.worst < 1e-4);
}

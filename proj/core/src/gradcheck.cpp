#include "cte/gradcheck.hpp"

#include <chrono>
#include <cmath>
#include <set>
#include <sstream>

#include "cte/attention.hpp"
#include "cte/random.hpp"
#include "cte/supervision.hpp"

namespace cte {

DenseMap finite_difference_grad(const std::function<double(const DenseMap&)>& f,
                                const DenseMap& x, double step) {
  DenseMap grad(x.height, x.width, x.channels, 0.0);
  DenseMap probe = x;
  for (std::size_t i = 0; i < x.values.size(); ++i) {
    const double saved = probe.values[i];
    probe.values[i] = saved + step;
    const double up = f(probe);
    probe.values[i] = saved - step;
    const double down = f(probe);
    probe.values[i] = saved;
    grad.values[i] = (up - down) / (2.0 * step);
  }
  return grad;
}

double max_relative_error(const DenseMap& a, const DenseMap& b, double floor) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    const double denom = std::max({std::abs(a.values[i]), std::abs(b.values[i]), floor});
    worst = std::max(worst, std::abs(a.values[i] - b.values[i]) / denom);
  }
  return worst;
}

namespace {

struct RandomScene {
  GroundTruthObjects gt;
  OutputMaps pred;
  std::vector<GridCell> cells;
};

// random 8x8 instance with predictions away from the clamp and L1 kinks
RandomScene make_scene(Rng& rng) {
  RandomScene scene;
  const int g = 8;
  const int n_objects = rng.uniform_int(1, 3);

  std::set<std::pair<int, int>> used;
  for (int k = 0; k < n_objects; ++k) {
    int row = 0, col = 0;
    do {
      row = rng.uniform_int(1, g - 2);
      col = rng.uniform_int(1, g - 2);
    } while (!used.insert({row, col}).second);
    scene.gt.centers.push_back(Point{col + 0.3, row + 0.3});
    scene.gt.sizes.push_back({rng.uniform(1.5, 4.0), rng.uniform(1.5, 4.0)});
    scene.gt.displacements.push_back({rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0)});
    scene.cells.push_back(GridCell{row, col});
  }

  scene.pred.center = DenseMap(g, g, 1);
  for (double& v : scene.pred.center.values) v = rng.uniform(0.05, 0.95);
  scene.pred.size = DenseMap(g, g, 2);
  for (double& v : scene.pred.size.values) v = rng.uniform(0.1, 6.0);
  scene.pred.displacement = DenseMap(g, g, 2);
  for (double& v : scene.pred.displacement.values) v = rng.uniform(-3.0, 3.0);
  return scene;
}

void record(CheckReport& report, double err, double tol, const std::string& what) {
  report.checks += 1;
  report.worst = std::max(report.worst, err);
  if (err >= tol) {
    report.passed = false;
    std::ostringstream msg;
    msg << what << ": relative error " << err;
    report.failures.push_back(msg.str());
  }
}

}  // namespace

CheckReport run_loss_gradient_suite(int instances, std::uint64_t seed, double tol) {
  const auto start = std::chrono::steady_clock::now();
  CheckReport report;
  Rng rng(seed);
  const FocalParams focal_params;
  const LossWeights weights;
  const double step = 1e-5;

  for (int n = 0; n < instances; ++n) {
    RandomScene scene = make_scene(rng);
    const std::size_t k = scene.gt.count();
    const DenseMap gt_heat = build_gt_heatmap(scene.gt, GridGeometry(32, 32));

    {
      const ScalarWithGrad analytic = center_focal_loss(scene.pred.center, gt_heat, focal_params, k);
      const DenseMap fd = finite_difference_grad(
          [&](const DenseMap& x) { return center_focal_loss(x, gt_heat, focal_params, k).value; },
          scene.pred.center, step);
      record(report, max_relative_error(analytic.grad, fd), tol, "center_focal_loss");
    }

    std::vector<std::vector<double>> size_targets, disp_targets;
    for (std::size_t i = 0; i < k; ++i) {
      size_targets.push_back({scene.gt.sizes[i][0], scene.gt.sizes[i][1]});
      disp_targets.push_back({scene.gt.displacements[i][0], scene.gt.displacements[i][1]});
    }
    {
      const ScalarWithGrad analytic = sparse_l1_loss(scene.pred.size, size_targets, scene.cells, k);
      const DenseMap fd = finite_difference_grad(
          [&](const DenseMap& x) { return sparse_l1_loss(x, size_targets, scene.cells, k).value; },
          scene.pred.size, step);
      record(report, max_relative_error(analytic.grad, fd), tol, "sparse_l1_loss[size]");
    }
    {
      const ScalarWithGrad analytic =
          sparse_l1_loss(scene.pred.displacement, disp_targets, scene.cells, k);
      const DenseMap fd = finite_difference_grad(
          [&](const DenseMap& x) { return sparse_l1_loss(x, disp_targets, scene.cells, k).value; },
          scene.pred.displacement, step);
      record(report, max_relative_error(analytic.grad, fd), tol, "sparse_l1_loss[displacement]");
    }

    // total-loss gradients fold in the box-regression route through the size map
    {
      const LossReport total = total_loss(scene.pred, scene.gt, weights, focal_params);
      OutputMaps probe = scene.pred;
      const DenseMap fd_c = finite_difference_grad(
          [&](const DenseMap& x) {
            probe.center = x;
            return total_loss(probe, scene.gt, weights, focal_params).total;
          },
          scene.pred.center, step);
      probe = scene.pred;
      const DenseMap fd_s = finite_difference_grad(
          [&](const DenseMap& x) {
            probe.size = x;
            return total_loss(probe, scene.gt, weights, focal_params).total;
          },
          scene.pred.size, step);
      probe = scene.pred;
      const DenseMap fd_t = finite_difference_grad(
          [&](const DenseMap& x) {
            probe.displacement = x;
            return total_loss(probe, scene.gt, weights, focal_params).total;
          },
          scene.pred.displacement, step);
      record(report, max_relative_error(total.grad_c, fd_c), tol, "total_loss grad_c");
      record(report, max_relative_error(total.grad_s, fd_s), tol, "total_loss grad_s");
      record(report, max_relative_error(total.grad_t, fd_t), tol, "total_loss grad_t");
    }
  }

  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

CheckReport run_attention_invariant_suite(std::uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  CheckReport report;
  Rng rng(seed);

  auto expect = [&](bool ok, double deviation, const std::string& what) {
    report.checks += 1;
    report.worst = std::max(report.worst, deviation);
    if (!ok) {
      report.passed = false;
      report.failures.push_back(what + ": deviation " + std::to_string(deviation));
    }
  };

  for (int trial = 0; trial < 20; ++trial) {
    const int h = 8;
    const int n_q = rng.uniform_int(1, 6);
    const int n_k = rng.uniform_int(1, 10);
    AttentionInputs inp{rng.matrix(n_q, h, -2.0, 2.0), rng.matrix(n_k, h, -2.0, 2.0),
                        rng.matrix(n_k, h, -2.0, 2.0)};

    // output rows are convex combinations of V rows
    const Eigen::MatrixXd out = scaled_dot_attention(inp);
    double bound_dev = 0.0;
    for (Eigen::Index c = 0; c < out.cols(); ++c) {
      const double lo = inp.v.col(c).minCoeff();
      const double hi = inp.v.col(c).maxCoeff();
      for (Eigen::Index r = 0; r < out.rows(); ++r) {
        bound_dev = std::max({bound_dev, lo - out(r, c), out(r, c) - hi});
      }
    }
    expect(bound_dev <= 1e-9, bound_dev, "attention convexity bounds");

    // r = 1 reduction is the unreduced path, bit for bit
    const Eigen::MatrixXd reduced = sra_attention(inp, SRAConfig{1});
    expect(reduced == out, (reduced - out).cwiseAbs().maxCoeff(), "sra r=1 identity");

    // softmax shift invariance
    const Eigen::VectorXd v = rng.matrix(6, 1, -3.0, 3.0);
    const Eigen::VectorXd shifted = v.array() + 17.5;
    const double shift_dev = (softmax(v) - softmax(shifted)).cwiseAbs().maxCoeff();
    expect(shift_dev <= 1e-9, shift_dev, "softmax shift invariance");
  }

  // deformable attention: weight normalization and constant-memory degeneracy
  {
    const int h = 8;
    GridGeometry geom(64, 64);
    FeaturePyramid memory = make_pyramid(geom, h);
    const double constant = 0.75;
    for (DenseMap& level : memory.levels) {
      for (double& v : level.values) v = constant;
    }
    const DeformAttnParams params = make_deform_attn_params(h, 4, rng.next_u64(), 2, 4);
    const Eigen::MatrixXd queries = rng.matrix(5, h, -1.0, 1.0);
    std::vector<Point> refs;
    for (int i = 0; i < 5; ++i) refs.push_back(Point{rng.uniform(), rng.uniform()});
    const DeformAttnResult res = deformable_cross_attention(queries, refs, memory, params);
    const double dev = (res.pre_projection.array() - constant).abs().maxCoeff();
    expect(dev <= 1e-9, dev, "deformable constant-memory degeneracy");
  }

  // TQSA permutation equivariance
  {
    const int h = 8;
    const TqsaParams params = make_tqsa_params(h, rng.next_u64(), 2);
    const Eigen::MatrixXd q = rng.matrix(5, h, -1.0, 1.0);
    Eigen::MatrixXd perm(5, h);
    const int order[5] = {3, 0, 4, 1, 2};
    for (int i = 0; i < 5; ++i) perm.row(i) = q.row(order[i]);
    const Eigen::MatrixXd a = tqsa(q, params);
    const Eigen::MatrixXd b = tqsa(perm, params);
    double dev = 0.0;
    for (int i = 0; i < 5; ++i) dev = std::max(dev, (b.row(i) - a.row(order[i])).cwiseAbs().maxCoeff());
    expect(dev <= 1e-9, dev, "tqsa permutation equivariance");
  }

  // Single decoder mode passes DQ through bitwise
  {
    const int h = 4;
    GridGeometry geom(64, 64);
    FeaturePyramid dq = make_pyramid(geom, h);
    Rng fill(rng.next_u64());
    for (DenseMap& level : dq.levels) {
      for (double& v : level.values) v = fill.uniform(-1.0, 1.0);
    }
    DecoderParams params;
    params.ddca = make_deform_attn_params(h, 4, fill.next_u64(), 2, 2);
    params.tdca = make_deform_attn_params(h, 4, fill.next_u64(), 2, 2);
    params.tqsa = make_tqsa_params(h, fill.next_u64(), 2);
    const Eigen::MatrixXd tq = fill.matrix(3, h, -1.0, 1.0);
    const std::vector<Point> refs{{0.2, 0.3}, {0.6, 0.5}, {0.8, 0.9}};
    const DecoderResult r =
        decoder_forward(dq, dq, tq, refs, dq, DecoderConfig{4, DecoderMode::kSingle}, params);
    bool identical = r.detection_features.levels.size() == dq.levels.size();
    for (std::size_t l = 0; identical && l < dq.levels.size(); ++l) {
      identical = r.detection_features.levels[l].values == dq.levels[l].values;
    }
    expect(identical, identical ? 0.0 : 1.0, "decoder Single-mode identity");
  }

  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace cte

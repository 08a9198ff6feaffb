#include "cte/synth.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "cte/random.hpp"
#include "cte/supervision.hpp"

namespace cte {

namespace {

struct ObjectState {
  double x, y;    // continuous center, pixels
  double vx, vy;  // pixels per frame
  double w, h;
  int qcx_prev = 0, qcy_prev = 0;  // previous quantized center
  Eigen::VectorXd feature;
};

void validate(const SyntheticScenario& s) {
  if (s.num_frames <= 0 || s.num_objects <= 0) {
    throw std::invalid_argument("scenario: num_frames and num_objects must be positive");
  }
  if (s.width <= 0 || s.height <= 0 || s.width % 32 != 0 || s.height % 32 != 0) {
    throw std::invalid_argument("scenario: image size must be positive and divisible by 32");
  }
  if (s.min_size < 4.0 || s.max_size < s.min_size) {
    throw std::invalid_argument("scenario: sizes must satisfy 4 <= min_size <= max_size");
  }
  if (s.feature_dim <= 0) throw std::invalid_argument("scenario: feature_dim must be positive");
  if (s.lane_motion && s.height < 4 * s.num_objects) {
    throw std::invalid_argument("scenario: lane motion needs height >= 4 * num_objects");
  }
  for (const OcclusionWindow& w : s.occlusions) {
    if (w.object < 0 || w.object >= s.num_objects || w.first_frame > w.last_frame) {
      throw std::invalid_argument("scenario: invalid occlusion window");
    }
  }
}

bool occluded(const SyntheticScenario& s, int object, int frame) {
  for (const OcclusionWindow& w : s.occlusions) {
    if (w.object == object && frame >= w.first_frame && frame <= w.last_frame) return true;
  }
  return false;
}

// reflect into [lo, hi], flipping the velocity sign when it bounces
void bounce(double& pos, double& vel, double lo, double hi) {
  if (hi <= lo) {
    pos = lo;
    return;
  }
  while (pos < lo || pos > hi) {
    if (pos < lo) {
      pos = 2.0 * lo - pos;
      vel = -vel;
    }
    if (pos > hi) {
      pos = 2.0 * hi - pos;
      vel = -vel;
    }
  }
}

}  // namespace

std::vector<OracleFrame> generate_oracle_sequence(const SyntheticScenario& s) {
  validate(s);
  Rng rng(s.seed);
  const GridGeometry geom(s.height, s.width);
  const int gh = geom.output_height();
  const int gw = geom.output_width();

  std::vector<ObjectState> objects(s.num_objects);
  for (int k = 0; k < s.num_objects; ++k) {
    ObjectState& o = objects[k];
    o.w = rng.uniform(s.min_size, std::min(s.max_size, s.width / 2.0));
    o.h = rng.uniform(s.min_size, std::min(s.max_size, s.height / 2.0));
    const double mx = o.w / 2.0 + 1.0;
    const double my = o.h / 2.0 + 1.0;
    const double speed = rng.uniform(s.min_speed, s.max_speed);
    if (s.lane_motion) {
      o.x = rng.uniform(mx, s.width - mx);
      o.y = (k + 0.5) * s.height / s.num_objects;
      o.vx = rng.uniform() < 0.5 ? speed : -speed;
      o.vy = 0.0;
    } else {
      o.x = rng.uniform(mx, s.width - mx);
      o.y = rng.uniform(my, s.height - my);
      const double angle = rng.uniform(0.0, 2.0 * M_PI);
      o.vx = speed * std::cos(angle);
      o.vy = speed * std::sin(angle);
    }
    o.feature = rng.unit_vector(s.feature_dim);
  }

  std::vector<OracleFrame> out;
  out.reserve(s.num_frames);
  for (int frame = 1; frame <= s.num_frames; ++frame) {
    OracleFrame of;
    of.frame = frame;
    of.maps.center = DenseMap(gh, gw, 1, 0.0);
    of.maps.size = DenseMap(gh, gw, 2, 0.0);
    of.maps.displacement = DenseMap(gh, gw, 2, 0.0);
    of.features = DenseMap(gh, gw, s.feature_dim, 0.0);
    of.gt.frame = frame;

    GroundTruthObjects render;
    std::vector<int> render_ids;

    for (int k = 0; k < s.num_objects; ++k) {
      ObjectState& o = objects[k];
      if (frame > 1) {
        o.x += o.vx;
        o.y += o.vy;
        if (s.jitter > 0.0) {
          o.x += rng.normal(0.0, s.jitter);
          if (!s.lane_motion) o.y += rng.normal(0.0, s.jitter);
        }
        bounce(o.x, o.vx, o.w / 2.0 + 1.0, s.width - o.w / 2.0 - 1.0);
        // lanes stay put: the fixed row is what keeps center cells disjoint
        if (!s.lane_motion) bounce(o.y, o.vy, o.h / 2.0 + 1.0, s.height - o.h / 2.0 - 1.0);
      }

      // quantize to the output lattice so peak decoding is exact
      const int cx_cell = std::clamp(static_cast<int>(std::floor(o.x / geom.down_ratio)), 0, gw - 1);
      const int cy_cell = std::clamp(static_cast<int>(std::floor(o.y / geom.down_ratio)), 0, gh - 1);
      const int qcx = cx_cell * geom.down_ratio;
      const int qcy = cy_cell * geom.down_ratio;

      of.gt.boxes.emplace_back(k + 1, Box{static_cast<double>(qcx), static_cast<double>(qcy), o.w, o.h});

      const bool dropped = s.dropout_prob > 0.0 && rng.uniform() < s.dropout_prob;
      const bool present = !occluded(s, k, frame) && !dropped;
      if (present) {
        render.centers.push_back(Point{static_cast<double>(cx_cell), static_cast<double>(cy_cell)});
        render.sizes.push_back({o.w / geom.down_ratio, o.h / geom.down_ratio});
        render_ids.push_back(k);

        of.maps.size.at(cy_cell, cx_cell, 0) = o.w;
        of.maps.size.at(cy_cell, cx_cell, 1) = o.h;
        // the tracker reads the displacement map at the object's previous
        // position, so the step toward the current frame lives in that cell
        double dx = frame > 1 ? static_cast<double>(qcx - o.qcx_prev) / geom.down_ratio : 0.0;
        double dy = frame > 1 ? static_cast<double>(qcy - o.qcy_prev) / geom.down_ratio : 0.0;
        if (s.displacement_noise > 0.0) {
          dx += rng.normal(0.0, s.displacement_noise);
          dy += rng.normal(0.0, s.displacement_noise);
        }
        const int prev_col = frame > 1 ? o.qcx_prev / geom.down_ratio : cx_cell;
        const int prev_row = frame > 1 ? o.qcy_prev / geom.down_ratio : cy_cell;
        of.maps.displacement.at(prev_row, prev_col, 0) = dx;
        of.maps.displacement.at(prev_row, prev_col, 1) = dy;
        for (int c = 0; c < s.feature_dim; ++c) of.features.at(cy_cell, cx_cell, c) = o.feature[c];
      }

      o.qcx_prev = qcx;
      o.qcy_prev = qcy;
    }

    if (!render.centers.empty()) {
      of.maps.center = build_gt_heatmap(render, geom);
    }
    if (s.heatmap_noise > 0.0) {
      for (double& v : of.maps.center.values) {
        v = std::clamp(v + rng.normal(0.0, s.heatmap_noise), 0.0, 1.0);
      }
    }

    out.push_back(std::move(of));
  }
  return out;
}

}  // namespace cte

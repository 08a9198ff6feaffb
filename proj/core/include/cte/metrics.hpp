#pragma once

#include <utility>
#include <vector>

#include "cte/box.hpp"

namespace cte {

struct FrameAnnotations {
  int frame = 1;
  std::vector<std::pair<long, Box>> boxes;  // (id, box); ids unique per frame
};

struct MOTMetrics {
  double mota = 0.0;
  double motp = 0.0;  // mean IoU over matched pairs
  double idf1 = 0.0;
  int mt_count = 0;
  int ml_count = 0;
  double mt_ratio = 0.0;
  double ml_ratio = 0.0;
  long fp = 0;
  long fn = 0;
  long ids = 0;
  long num_gt = 0;   // total ground-truth boxes
  long num_hyp = 0;  // total hypothesis boxes
  long matches = 0;  // total matched pairs
  int num_trajectories = 0;
};

/// Intersection over union; sizes must be positive.
double iou(const Box& a, const Box& b);

/// CLEAR matching (carry-over correspondences, Hungarian on 1-IoU for the
/// rest), FP/FN/IDS counts, MOTP as mean matched IoU, strict >80% / <20%
/// MT/ML, and IDF1 via global trajectory matching.
MOTMetrics evaluate(const std::vector<FrameAnnotations>& gt,
                    const std::vector<FrameAnnotations>& hyp, double iou_thresh = 0.5);

}  // namespace cte

#include "cte/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "cte/assignment.hpp"
#include "cte/metrics.hpp"

namespace cte {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double cosine_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() == 0 || b.size() == 0 || a.size() != b.size()) return -1.0;
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return -1.0;
  return a.dot(b) / (na * nb);
}

}  // namespace

std::vector<Detection> decode_detections(const OutputMaps& maps, const TrackerConfig& cfg,
                                         const GridGeometry& geom) {
  const DenseMap& heat = maps.center;
  const DenseMap pooled = max_pool_3x3(heat);

  std::vector<Detection> dets;
  for (int i = 0; i < heat.height; ++i) {
    for (int j = 0; j < heat.width; ++j) {
      const double score = heat.at(i, j);
      if (score < cfg.tau) continue;
      if (pooled.at(i, j) != score) continue;  // not the neighborhood max
      Detection d;
      d.cell = GridCell{i, j};
      d.center = Point{static_cast<double>(j) * geom.down_ratio,
                       static_cast<double>(i) * geom.down_ratio};
      d.width = maps.size.at(i, j, 0);
      d.height = maps.size.at(i, j, 1);
      d.score = score;
      if (d.width <= 0.0 || d.height <= 0.0) continue;  // keep detections well-formed
      dets.push_back(std::move(d));
    }
  }
  std::sort(dets.begin(), dets.end(), [](const Detection& a, const Detection& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.cell.row != b.cell.row) return a.cell.row < b.cell.row;
    return a.cell.col < b.cell.col;
  });
  return dets;
}

std::vector<TrackedPosition> propagate_tracks(const std::vector<Track>& active,
                                              const DenseMap& displacement,
                                              const GridGeometry& geom) {
  std::vector<TrackedPosition> out;
  out.reserve(active.size());
  for (const Track& t : active) {
    const Point g = grid_from_pixel(Point{t.box.cx, t.box.cy}, geom.down_ratio);
    const std::vector<double> d = bilinear_sample(displacement, g);
    TrackedPosition p;
    p.track_id = t.id;
    p.center = Point{t.box.cx + d[0] * geom.down_ratio, t.box.cy + d[1] * geom.down_ratio};
    p.width = t.box.w;
    p.height = t.box.h;
    const Box clipped = clip_box(p.box(), geom.input_width, geom.input_height);
    p.center = Point{clipped.cx, clipped.cy};
    p.width = clipped.w;
    p.height = clipped.h;
    out.push_back(p);
  }
  return out;
}

std::vector<BirthCandidate> gate_births_public(const std::vector<Detection>& candidates,
                                               const std::vector<Box>& public_dets) {
  struct Pair {
    double iou;
    double score;
    std::size_t cand;
    std::size_t pub;
  };
  std::vector<Pair> pairs;
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    for (std::size_t p = 0; p < public_dets.size(); ++p) {
      const double v = iou(candidates[c].box(), public_dets[p]);
      if (v > 0.0) pairs.push_back({v, candidates[c].score, c, p});
    }
  }
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    if (a.iou != b.iou) return a.iou > b.iou;
    if (a.score != b.score) return a.score > b.score;
    if (a.cand != b.cand) return a.cand < b.cand;
    return a.pub < b.pub;
  });

  std::vector<bool> cand_used(candidates.size(), false), pub_used(public_dets.size(), false);
  std::vector<BirthCandidate> out;
  for (const Pair& p : pairs) {
    if (cand_used[p.cand] || pub_used[p.pub]) continue;
    cand_used[p.cand] = true;
    pub_used[p.pub] = true;
    out.push_back({candidates[p.cand], p.cand, p.pub, p.iou});
  }
  std::sort(out.begin(), out.end(), [](const BirthCandidate& a, const BirthCandidate& b) {
    return a.candidate_index < b.candidate_index;
  });
  return out;
}

std::vector<ReidMatch> reid_recover(const std::vector<Track>& sleeping,
                                    const std::vector<Detection>& unmatched,
                                    const TrackerConfig& cfg) {
  if (sleeping.empty() || unmatched.empty()) return {};
  Eigen::MatrixXd cost(sleeping.size(), unmatched.size());
  for (std::size_t s = 0; s < sleeping.size(); ++s) {
    for (std::size_t d = 0; d < unmatched.size(); ++d) {
      const double sim = cosine_similarity(sleeping[s].feature, unmatched[d].feature);
      cost(s, d) = (sim >= cfg.reid_min_sim) ? 1.0 - sim : kInf;
    }
  }
  const Assignment asg = hungarian_match(cost);
  std::vector<ReidMatch> out;
  for (const auto& [s, d] : asg.pairs) {
    out.push_back({static_cast<std::size_t>(s), static_cast<std::size_t>(d), 1.0 - cost(s, d)});
  }
  return out;
}

Tracker::Tracker(TrackerConfig cfg, GridGeometry geom) : cfg_(std::move(cfg)), geom_(geom) {
  if (cfg_.tau <= 0.0 || cfg_.tau >= 1.0) throw std::invalid_argument("Tracker: tau must be in (0,1)");
  if (cfg_.sleep_max < 1) throw std::invalid_argument("Tracker: sleep_max must be >= 1");
}

long Tracker::new_track(const Detection& det, int frame) {
  Track t;
  t.id = next_id_++;
  t.box = det.box();
  t.state = TrackState::kActive;
  t.score = det.score;
  t.feature = det.feature;
  t.history.emplace_back(frame, t.box);
  tracks_.push_back(std::move(t));
  return tracks_.back().id;
}

std::vector<TrackRecord> Tracker::step(int frame, const OutputMaps& maps,
                                       const DenseMap* features,
                                       const std::vector<Box>* public_dets) {
  if (started_ && frame <= last_frame_) {
    throw std::invalid_argument("Tracker::step: frames must be strictly increasing");
  }
  started_ = true;
  last_frame_ = frame;

  std::vector<Detection> dets = decode_detections(maps, cfg_, geom_);
  if (features != nullptr && !features->empty()) {
    for (Detection& d : dets) {
      const std::vector<double> f =
          bilinear_sample(*features, grid_from_pixel(d.center, geom_.down_ratio));
      d.feature = Eigen::Map<const Eigen::VectorXd>(f.data(), static_cast<Eigen::Index>(f.size()));
    }
  }

  std::vector<std::size_t> active_idx, sleeping_idx;
  for (std::size_t i = 0; i < tracks_.size(); ++i) {
    (tracks_[i].state == TrackState::kActive ? active_idx : sleeping_idx).push_back(i);
  }

  std::vector<Track> active;
  active.reserve(active_idx.size());
  for (std::size_t i : active_idx) active.push_back(tracks_[i]);
  const std::vector<TrackedPosition> propagated = propagate_tracks(active, maps.displacement, geom_);

  // IoU association between propagated positions and detections
  Eigen::MatrixXd cost(propagated.size(), dets.size());
  for (std::size_t r = 0; r < propagated.size(); ++r) {
    for (std::size_t c = 0; c < dets.size(); ++c) {
      const double v = iou(propagated[r].box(), dets[c].box());
      cost(r, c) = (v >= cfg_.match_min_iou) ? 1.0 - v : kInf;
    }
  }
  const Assignment asg = hungarian_match(cost);

  std::vector<bool> det_consumed(dets.size(), false);
  for (const auto& [r, c] : asg.pairs) {
    Track& t = tracks_[active_idx[r]];
    const Detection& d = dets[c];
    t.box = d.box();
    t.score = d.score;
    if (d.feature.size() > 0) {
      if (t.feature.size() == d.feature.size() && cfg_.feature_blend < 1.0) {
        t.feature = cfg_.feature_blend * d.feature + (1.0 - cfg_.feature_blend) * t.feature;
      } else {
        t.feature = d.feature;
      }
    }
    t.history.emplace_back(frame, t.box);
    det_consumed[c] = true;
  }

  // unmatched detections try to wake sleeping tracks by feature similarity
  std::vector<Detection> leftovers;
  std::vector<std::size_t> leftover_idx;
  for (int c : asg.unmatched_cols) {
    leftovers.push_back(dets[c]);
    leftover_idx.push_back(static_cast<std::size_t>(c));
  }
  std::vector<Track> sleeping;
  for (std::size_t i : sleeping_idx) sleeping.push_back(tracks_[i]);
  std::vector<bool> recovered(sleeping_idx.size(), false);
  for (const ReidMatch& m : reid_recover(sleeping, leftovers, cfg_)) {
    Track& t = tracks_[sleeping_idx[m.sleeping_index]];
    const Detection& d = leftovers[m.detection_index];
    t.state = TrackState::kActive;
    t.sleep_age = 0;
    t.box = d.box();
    t.score = d.score;
    if (d.feature.size() > 0) t.feature = d.feature;
    t.history.emplace_back(frame, t.box);
    recovered[m.sleeping_index] = true;
    det_consumed[leftover_idx[m.detection_index]] = true;
  }

  // births, gated by the public detections when enabled
  std::vector<Detection> birth_candidates;
  for (std::size_t c = 0; c < dets.size(); ++c) {
    if (!det_consumed[c]) birth_candidates.push_back(dets[c]);
  }
  if (cfg_.public_mode) {
    static const std::vector<Box> kNoPublic;
    const std::vector<Box>& pub = public_dets != nullptr ? *public_dets : kNoPublic;
    for (const BirthCandidate& b : gate_births_public(birth_candidates, pub)) {
      new_track(b.detection, frame);
    }
  } else {
    for (const Detection& d : birth_candidates) new_track(d, frame);
  }

  // unmatched active tracks fall asleep; sleeping tracks age and expire
  for (int r : asg.unmatched_rows) {
    Track& t = tracks_[active_idx[r]];
    t.state = TrackState::kSleeping;
    t.sleep_age = 1;
  }
  std::vector<long> expired;
  for (std::size_t s = 0; s < sleeping_idx.size(); ++s) {
    if (recovered[s]) continue;
    Track& t = tracks_[sleeping_idx[s]];
    t.sleep_age += 1;
    if (t.sleep_age > cfg_.sleep_max) expired.push_back(t.id);
  }
  if (!expired.empty()) {
    std::erase_if(tracks_, [&](const Track& t) {
      return std::find(expired.begin(), expired.end(), t.id) != expired.end();
    });
  }

  std::vector<TrackRecord> records;
  for (const Track& t : tracks_) {
    if (t.state == TrackState::kActive) {
      records.push_back({frame, t.id, t.box, t.score});
    }
  }
  return records;
}

}  // namespace cte

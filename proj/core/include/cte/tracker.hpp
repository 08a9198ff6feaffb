#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "cte/box.hpp"
#include "cte/grid.hpp"
#include "cte/supervision.hpp"

namespace cte {

struct Detection {
  Point center;  // input pixels
  double width = 0.0;
  double height = 0.0;
  double score = 0.0;
  GridCell cell;
  Eigen::VectorXd feature;  // size 0 when absent

  Box box() const { return Box{center.x, center.y, width, height}; }
};

struct TrackedPosition {
  long track_id = 0;
  Point center;
  double width = 0.0;
  double height = 0.0;

  Box box() const { return Box{center.x, center.y, width, height}; }
};

enum class TrackState { kActive, kSleeping };

struct Track {
  long id = 0;
  Box box;
  TrackState state = TrackState::kActive;
  int sleep_age = 0;  // frames asleep, in [1, sleep_max] while sleeping
  double score = 1.0;
  Eigen::VectorXd feature;
  std::vector<std::pair<int, Box>> history;  // (frame, box)
};

struct TrackerConfig {
  double tau = 0.3;
  int sleep_max = 60;
  double match_min_iou = 0.3;
  double reid_min_sim = 0.3;
  bool public_mode = false;
  double feature_blend = 1.0;  // 1.0 replaces the track feature on match
};

/// Peak decoding: cells that equal their 3x3 max-pooled value and clear tau
/// become detections at pixel (col*down, row*down) with size read from the
/// size map. Sorted by descending score.
std::vector<Detection> decode_detections(const OutputMaps& maps, const TrackerConfig& cfg,
                                         const GridGeometry& geom);

/// Reads the displacement map bilinearly at each track's previous center,
/// scales to pixels and adds; boxes are clipped to the image.
std::vector<TrackedPosition> propagate_tracks(const std::vector<Track>& active,
                                              const DenseMap& displacement,
                                              const GridGeometry& geom);

struct BirthCandidate {
  Detection detection;
  std::size_t candidate_index = 0;
  std::size_t public_index = 0;
  double iou = 0.0;
};

/// Greedy one-to-one pairing of candidates to public boxes by descending
/// IoU (ties by candidate score, then index); pairs with zero IoU are
/// dropped, so at most |public_dets| births survive.
std::vector<BirthCandidate> gate_births_public(const std::vector<Detection>& candidates,
                                               const std::vector<Box>& public_dets);

struct ReidMatch {
  std::size_t sleeping_index = 0;
  std::size_t detection_index = 0;
  double similarity = 0.0;
};

/// Hungarian on 1 - cosine similarity between sleeping-track features and
/// detection features; pairs below reid_min_sim (or without features) are
/// infeasible.
std::vector<ReidMatch> reid_recover(const std::vector<Track>& sleeping,
                                    const std::vector<Detection>& unmatched,
                                    const TrackerConfig& cfg);

struct TrackRecord {
  int frame = 0;
  long id = 0;
  Box box;
  double score = 1.0;
};

/// Frame-by-frame track management: decode, propagate, associate by IoU,
/// recover sleeping identities by feature similarity, give birth to the
/// rest (gated in public mode), and age/expire sleeping tracks.
class Tracker {
 public:
  Tracker(TrackerConfig cfg, GridGeometry geom);

  std::vector<TrackRecord> step(int frame, const OutputMaps& maps,
                                const DenseMap* features = nullptr,
                                const std::vector<Box>* public_dets = nullptr);

  const std::vector<Track>& tracks() const { return tracks_; }
  const TrackerConfig& config() const { return cfg_; }

 private:
  TrackerConfig cfg_;
  GridGeometry geom_;
  std::vector<Track> tracks_;
  long next_id_ = 1;
  int last_frame_ = 0;
  bool started_ = false;

  long new_track(const Detection& det, int frame);
};

}  // namespace cte

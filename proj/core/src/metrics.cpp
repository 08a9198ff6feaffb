#include "cte/metrics.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <set>
#include <stdexcept>

#include "cte/assignment.hpp"

namespace cte {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

double iou(const Box& a, const Box& b) {
  if (a.w <= 0.0 || a.h <= 0.0 || b.w <= 0.0 || b.h <= 0.0) {
    throw std::invalid_argument("iou: non-positive box size");
  }
  const double ix = std::max(0.0, std::min(a.right(), b.right()) - std::max(a.left(), b.left()));
  const double iy = std::max(0.0, std::min(a.bottom(), b.bottom()) - std::max(a.top(), b.top()));
  const double inter = ix * iy;
  const double uni = a.w * a.h + b.w * b.h - inter;
  return inter / uni;
}

MOTMetrics evaluate(const std::vector<FrameAnnotations>& gt,
                    const std::vector<FrameAnnotations>& hyp, double iou_thresh) {
  // index both sides by frame
  std::map<int, const FrameAnnotations*> gt_by_frame, hyp_by_frame;
  long num_gt = 0, num_hyp = 0;
  for (const FrameAnnotations& f : gt) {
    gt_by_frame[f.frame] = &f;
    num_gt += static_cast<long>(f.boxes.size());
  }
  for (const FrameAnnotations& f : hyp) {
    hyp_by_frame[f.frame] = &f;
    num_hyp += static_cast<long>(f.boxes.size());
  }
  if (num_gt == 0) throw std::invalid_argument("evaluate: empty ground truth");

  std::set<int> frames;
  for (const auto& [f, _] : gt_by_frame) frames.insert(f);
  for (const auto& [f, _] : hyp_by_frame) frames.insert(f);

  MOTMetrics m;
  m.num_gt = num_gt;
  m.num_hyp = num_hyp;

  std::map<long, long> last_hyp_of_gt;  // last matched hypothesis id per gt id
  std::map<long, long> gt_frames_present, gt_frames_matched;
  std::map<std::pair<long, long>, long> id_overlap;  // (gt id, hyp id) -> co-matched frames
  double motp_sum = 0.0;

  for (int frame : frames) {
    const auto git = gt_by_frame.find(frame);
    const auto hit = hyp_by_frame.find(frame);
    const std::vector<std::pair<long, Box>> empty;
    const std::vector<std::pair<long, Box>>& g = git != gt_by_frame.end() ? git->second->boxes : empty;
    const std::vector<std::pair<long, Box>>& h = hit != hyp_by_frame.end() ? hit->second->boxes : empty;

    for (const auto& [gid, box] : g) {
      (void)box;
      gt_frames_present[gid] += 1;
    }

    std::vector<bool> g_used(g.size(), false), h_used(h.size(), false);
    std::vector<std::pair<std::size_t, std::size_t>> matched;

    // carry over still-valid correspondences first
    for (std::size_t gi = 0; gi < g.size(); ++gi) {
      const auto prev = last_hyp_of_gt.find(g[gi].first);
      if (prev == last_hyp_of_gt.end()) continue;
      for (std::size_t hi = 0; hi < h.size(); ++hi) {
        if (h_used[hi] || h[hi].first != prev->second) continue;
        if (iou(g[gi].second, h[hi].second) >= iou_thresh) {
          matched.emplace_back(gi, hi);
          g_used[gi] = true;
          h_used[hi] = true;
        }
        break;
      }
    }

    // Hungarian on what remains
    std::vector<std::size_t> g_rest, h_rest;
    for (std::size_t gi = 0; gi < g.size(); ++gi)
      if (!g_used[gi]) g_rest.push_back(gi);
    for (std::size_t hi = 0; hi < h.size(); ++hi)
      if (!h_used[hi]) h_rest.push_back(hi);
    if (!g_rest.empty() && !h_rest.empty()) {
      Eigen::MatrixXd cost(g_rest.size(), h_rest.size());
      for (std::size_t r = 0; r < g_rest.size(); ++r) {
        for (std::size_t c = 0; c < h_rest.size(); ++c) {
          const double v = iou(g[g_rest[r]].second, h[h_rest[c]].second);
          cost(r, c) = (v >= iou_thresh) ? 1.0 - v : kInf;
        }
      }
      for (const auto& [r, c] : hungarian_match(cost).pairs) {
        matched.emplace_back(g_rest[r], h_rest[c]);
      }
    }

    for (const auto& [gi, hi] : matched) {
      const long gid = g[gi].first;
      const long hid = h[hi].first;
      const auto prev = last_hyp_of_gt.find(gid);
      if (prev != last_hyp_of_gt.end() && prev->second != hid) m.ids += 1;
      last_hyp_of_gt[gid] = hid;
      motp_sum += iou(g[gi].second, h[hi].second);
      gt_frames_matched[gid] += 1;
      m.matches += 1;
    }
    m.fn += static_cast<long>(g.size() - matched.size());
    m.fp += static_cast<long>(h.size() - matched.size());

    // IDF1 co-occurrence: frames where the pair could be considered matched
    for (const auto& [gid, gbox] : g) {
      for (const auto& [hid, hbox] : h) {
        if (iou(gbox, hbox) >= iou_thresh) id_overlap[{gid, hid}] += 1;
      }
    }
  }

  m.mota = 1.0 - static_cast<double>(m.fp + m.fn + m.ids) / static_cast<double>(m.num_gt);
  m.motp = m.matches > 0 ? motp_sum / static_cast<double>(m.matches) : 0.0;

  m.num_trajectories = static_cast<int>(gt_frames_present.size());
  for (const auto& [gid, present] : gt_frames_present) {
    const long matched_frames = gt_frames_matched.count(gid) ? gt_frames_matched[gid] : 0;
    const double coverage = static_cast<double>(matched_frames) / static_cast<double>(present);
    if (coverage > 0.8) m.mt_count += 1;
    if (coverage < 0.2) m.ml_count += 1;
  }
  if (m.num_trajectories > 0) {
    m.mt_ratio = static_cast<double>(m.mt_count) / m.num_trajectories;
    m.ml_ratio = static_cast<double>(m.ml_count) / m.num_trajectories;
  }

  // IDF1: one-to-one trajectory matching maximizing co-matched frames
  std::vector<long> gt_ids, hyp_ids;
  for (const auto& [gid, _] : gt_frames_present) gt_ids.push_back(gid);
  std::set<long> hyp_id_set;
  for (const FrameAnnotations& f : hyp) {
    for (const auto& [hid, box] : f.boxes) {
      (void)box;
      hyp_id_set.insert(hid);
    }
  }
  hyp_ids.assign(hyp_id_set.begin(), hyp_id_set.end());

  long idtp = 0;
  if (!gt_ids.empty() && !hyp_ids.empty()) {
    Eigen::MatrixXd cost(gt_ids.size(), hyp_ids.size());
    for (std::size_t r = 0; r < gt_ids.size(); ++r) {
      for (std::size_t c = 0; c < hyp_ids.size(); ++c) {
        const auto it = id_overlap.find({gt_ids[r], hyp_ids[c]});
        cost(r, c) = it != id_overlap.end() ? -static_cast<double>(it->second) : 0.0;
      }
    }
    for (const auto& [r, c] : hungarian_match(cost).pairs) {
      const auto it = id_overlap.find({gt_ids[r], hyp_ids[c]});
      if (it != id_overlap.end()) idtp += it->second;
    }
  }
  m.idf1 = (m.num_gt + m.num_hyp) > 0
               ? 2.0 * static_cast<double>(idtp) / static_cast<double>(m.num_gt + m.num_hyp)
               : 0.0;

  return m;
}

}  // namespace cte

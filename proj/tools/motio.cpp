// motio: synthetic-sequence generation, tracking, evaluation and the
// numerical check suites behind one command-line entry point.

#include <cstdio>
#include <exception>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cte/attention.hpp"
#include "cte/gradcheck.hpp"
#include "cte/log.hpp"
#include "cte/maps_io.hpp"
#include "cte/metrics.hpp"
#include "cte/mot_io.hpp"
#include "cte/random.hpp"
#include "cte/synth.hpp"
#include "cte/tracker.hpp"

namespace {

using namespace cte;

std::vector<OcclusionWindow> parse_occlusions(const std::vector<std::string>& specs) {
  std::vector<OcclusionWindow> out;
  for (const std::string& spec : specs) {
    OcclusionWindow w;
    char colon1 = 0, colon2 = 0;
    std::istringstream ss(spec);
    if (!(ss >> w.object >> colon1 >> w.first_frame >> colon2 >> w.last_frame) || colon1 != ':' ||
        colon2 != ':') {
      throw CLI::ValidationError("--occlude", "expected OBJECT:FIRST:LAST, got '" + spec + "'");
    }
    out.push_back(w);
  }
  return out;
}

int run_synth(const SyntheticScenario& scenario, const std::string& maps_path,
              const std::string& gt_path) {
  const auto frames = generate_oracle_sequence(scenario);

  std::vector<MapsFrame> maps;
  std::vector<MotRecord> gt_records;
  for (const OracleFrame& f : frames) {
    maps.push_back({f.frame, f.maps, f.features});
    for (const auto& [id, box] : f.gt.boxes) {
      gt_records.push_back(MotRecord::from_box(f.frame, id, box, 1.0));
    }
  }
  write_maps_file(maps_path, maps);
  log_info("wrote " + std::to_string(maps.size()) + " frames to " + maps_path);
  if (!gt_path.empty()) {
    write_mot_file(gt_path, gt_records);
    log_info("wrote ground truth to " + gt_path);
  }
  return 0;
}

int run_track(const std::vector<MapsFrame>& frames, const std::string& out_path,
              const std::string& public_path, TrackerConfig cfg) {
  if (frames.empty()) throw std::runtime_error("no frames to track");
  const int gh = frames.front().maps.center.height;
  const int gw = frames.front().maps.center.width;
  if (gh % 8 != 0 || gw % 8 != 0) {
    throw std::runtime_error("maps grid must scale back to an image divisible by 32");
  }
  const GridGeometry geom(gh * 4, gw * 4);

  std::map<int, std::vector<Box>> public_boxes;
  if (!public_path.empty()) {
    cfg.public_mode = true;
    for (const auto& [frame, records] : parse_mot_file(public_path)) {
      for (const MotRecord& r : records) {
        if (r.bb_width > 0.0 && r.bb_height > 0.0) public_boxes[frame].push_back(r.box());
      }
    }
  }

  Tracker tracker(cfg, geom);
  std::vector<MotRecord> results;
  for (const MapsFrame& f : frames) {
    const std::vector<Box>* pub = nullptr;
    std::vector<Box> empty;
    if (cfg.public_mode) {
      const auto it = public_boxes.find(f.frame);
      pub = it != public_boxes.end() ? &it->second : &empty;
    }
    const DenseMap* features = f.features.empty() ? nullptr : &f.features;
    for (const TrackRecord& r : tracker.step(f.frame, f.maps, features, pub)) {
      results.push_back(MotRecord::from_box(r.frame, r.id, r.box, r.score));
    }
  }
  write_mot_file(out_path, results);
  log_info("wrote " + std::to_string(results.size()) + " records to " + out_path);
  return 0;
}

void print_metrics_table(const MOTMetrics& m) {
  std::printf("%-8s %-8s %-8s %-7s %-7s %-7s %-7s %-7s\n", "MOTA", "MOTP", "IDF1", "MT", "ML",
              "FP", "FN", "IDS");
  std::printf("%-8.4f %-8.4f %-8.4f %-7d %-7d %-7ld %-7ld %-7ld\n", m.mota, m.motp, m.idf1,
              m.mt_count, m.ml_count, m.fp, m.fn, m.ids);
}

void print_metrics_kv(const MOTMetrics& m) {
  std::printf("MOTA=%.6f\n", m.mota);
  std::printf("MOTP=%.6f\n", m.motp);
  std::printf("IDF1=%.6f\n", m.idf1);
  std::printf("MT=%d\n", m.mt_count);
  std::printf("ML=%d\n", m.ml_count);
  std::printf("MT_RATIO=%.6f\n", m.mt_ratio);
  std::printf("ML_RATIO=%.6f\n", m.ml_ratio);
  std::printf("FP=%ld\n", m.fp);
  std::printf("FN=%ld\n", m.fn);
  std::printf("IDS=%ld\n", m.ids);
  std::printf("NUM_GT=%ld\n", m.num_gt);
  std::printf("NUM_HYP=%ld\n", m.num_hyp);
}

int run_eval(const std::string& gt_path, const std::string& result_path, double iou_thresh,
             const std::string& format) {
  const auto gt = annotations_from_mot(parse_mot_file(gt_path));
  const auto hyp = annotations_from_mot(parse_mot_file(result_path));
  const MOTMetrics m = evaluate(gt, hyp, iou_thresh);
  if (format.empty() || format == "table") print_metrics_table(m);
  if (format.empty() || format == "kv") print_metrics_kv(m);
  return 0;
}

int run_losscheck(int instances, std::uint64_t seed, double tol) {
  const CheckReport report = run_loss_gradient_suite(instances, seed, tol);
  std::printf("gradient checks: %d, max relative error %.3e, %.2f s\n", report.checks,
              report.worst, report.seconds);
  for (const std::string& f : report.failures) std::printf("  FAIL %s\n", f.c_str());
  std::printf(report.passed ? "losscheck passed\n" : "losscheck FAILED\n");
  return report.passed ? 0 : 1;
}

int run_attncheck(std::uint64_t seed, const std::string& params_path) {
  if (!params_path.empty()) {
    const ParamBundle bundle = read_param_bundle_file(params_path);
    std::printf("loaded %zu tensors from %s\n", bundle.size(), params_path.c_str());
    if (bundle.count("tqsa.wq") != 0) {
      const TqsaParams tqsa_params = tqsa_params_from_bundle(bundle, "tqsa", 1);
      const int h = static_cast<int>(tqsa_params.wq.rows());
      Rng rng(seed);
      const Eigen::MatrixXd probe = rng.matrix(3, h, -1.0, 1.0);
      const Eigen::MatrixXd out = tqsa(probe, tqsa_params);
      std::printf("tqsa forward with supplied weights: %ldx%ld output\n",
                  static_cast<long>(out.rows()), static_cast<long>(out.cols()));
    }
  }
  const CheckReport report = run_attention_invariant_suite(seed);
  std::printf("attention invariant checks: %d, worst deviation %.3e, %.2f s\n", report.checks,
              report.worst, report.seconds);
  for (const std::string& f : report.failures) std::printf("  FAIL %s\n", f.c_str());
  std::printf(report.passed ? "attncheck passed\n" : "attncheck FAILED\n");
  return report.passed ? 0 : 1;
}

}  // namespace

void add_scenario_options(CLI::App* cmd, SyntheticScenario& scenario,
                          std::vector<std::string>& occlusion_specs) {
  cmd->add_option("--seed", scenario.seed, "scenario seed");
  cmd->add_option("--frames", scenario.num_frames, "number of frames");
  cmd->add_option("--objects", scenario.num_objects, "number of objects");
  cmd->add_option("--width", scenario.width, "image width (divisible by 32)");
  cmd->add_option("--height", scenario.height, "image height (divisible by 32)");
  cmd->add_option("--min-size", scenario.min_size, "minimum box side, pixels");
  cmd->add_option("--max-size", scenario.max_size, "maximum box side, pixels");
  cmd->add_option("--min-speed", scenario.min_speed, "minimum speed, px/frame");
  cmd->add_option("--max-speed", scenario.max_speed, "maximum speed, px/frame");
  cmd->add_option("--jitter", scenario.jitter, "velocity jitter sigma, px");
  cmd->add_flag("--lanes", scenario.lane_motion, "one object per horizontal lane");
  cmd->add_option("--heatmap-noise", scenario.heatmap_noise, "heatmap corruption sigma");
  cmd->add_option("--dropout", scenario.dropout_prob, "per-object dropout probability");
  cmd->add_option("--disp-noise", scenario.displacement_noise, "displacement noise sigma");
  cmd->add_option("--feature-dim", scenario.feature_dim, "re-id feature dimension");
  cmd->add_option("--occlude", occlusion_specs, "occlusion window OBJECT:FIRST:LAST")->take_all();
}

std::vector<MapsFrame> scenario_frames(const SyntheticScenario& scenario) {
  std::vector<MapsFrame> frames;
  for (const OracleFrame& f : generate_oracle_sequence(scenario)) {
    frames.push_back({f.frame, f.maps, f.features});
  }
  return frames;
}

int main(int argc, char** argv) {
  CLI::App app{"motio: center-heatmap multiple-object tracking engine"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic oracle sequence");
  SyntheticScenario scenario;
  std::string synth_out, synth_gt;
  std::vector<std::string> occlusion_specs;
  add_scenario_options(synth, scenario, occlusion_specs);
  synth->add_option("--out", synth_out, "output maps container")->required();
  synth->add_option("--gt", synth_gt, "output ground-truth MOT file");

  // track
  auto* track =
      app.add_subcommand("track", "run the tracker over serialized maps or a fresh scenario");
  std::string track_maps, track_out, track_public, track_gt;
  SyntheticScenario track_scenario;
  std::vector<std::string> track_occlusions;
  TrackerConfig cfg;
  track->add_option("--maps", track_maps, "input maps container (omit to track a scenario)");
  track->add_option("--out", track_out, "output MOT result file")->required();
  track->add_option("--tau", cfg.tau, "detection threshold");
  track->add_option("--sleep-max", cfg.sleep_max, "sleep horizon in frames");
  track->add_option("--match-min-iou", cfg.match_min_iou, "association IoU gate");
  track->add_option("--reid-min-sim", cfg.reid_min_sim, "re-id cosine similarity gate");
  track->add_option("--public", track_public, "public detections MOT file (enables gating)");
  add_scenario_options(track, track_scenario, track_occlusions);
  track->add_option("--gt", track_gt, "also write the scenario's ground truth here");

  // eval
  auto* eval = app.add_subcommand("eval", "compare a result file against ground truth");
  std::string eval_gt, eval_result, eval_format;
  double eval_iou = 0.5;
  eval->add_option("gt", eval_gt, "ground-truth MOT file")->required();
  eval->add_option("result", eval_result, "tracker result MOT file")->required();
  eval->add_option("--iou-thresh", eval_iou, "match IoU threshold");
  eval->add_option("--format", eval_format, "output format")
      ->check(CLI::IsMember({"table", "kv"}));

  // losscheck
  auto* losscheck = app.add_subcommand("losscheck", "finite-difference gradient suite");
  int loss_instances = 20;
  std::uint64_t loss_seed = 20240917;
  double loss_tol = 1e-4;
  losscheck->add_option("--instances", loss_instances, "random instances");
  losscheck->add_option("--seed", loss_seed, "suite seed");
  losscheck->add_option("--tol", loss_tol, "relative-error tolerance");

  // attncheck
  auto* attncheck = app.add_subcommand("attncheck", "attention invariant suite");
  std::uint64_t attn_seed = 99;
  std::string attn_params;
  attncheck->add_option("--seed", attn_seed, "suite seed");
  attncheck->add_option("--params", attn_params, "parameter bundle to load");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    scenario.occlusions = parse_occlusions(occlusion_specs);
    if (synth->parsed()) return run_synth(scenario, synth_out, synth_gt);
    if (track->parsed()) {
      std::vector<MapsFrame> frames;
      if (!track_maps.empty()) {
        frames = read_maps_file(track_maps);
      } else {
        track_scenario.occlusions = parse_occlusions(track_occlusions);
        frames = scenario_frames(track_scenario);
        if (!track_gt.empty()) {
          std::vector<MotRecord> gt_records;
          for (const OracleFrame& f : generate_oracle_sequence(track_scenario)) {
            for (const auto& [id, box] : f.gt.boxes) {
              gt_records.push_back(MotRecord::from_box(f.frame, id, box, 1.0));
            }
          }
          write_mot_file(track_gt, gt_records);
        }
      }
      return run_track(frames, track_out, track_public, cfg);
    }
    if (eval->parsed()) return run_eval(eval_gt, eval_result, eval_iou, eval_format);
    if (losscheck->parsed()) return run_losscheck(loss_instances, loss_seed, loss_tol);
    if (attncheck->parsed()) return run_attncheck(attn_seed, attn_params);
  } catch (const std::exception& e) {
    log_error(e.what());
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}

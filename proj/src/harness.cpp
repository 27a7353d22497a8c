#include "rcf/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "rcf/config_io.hpp"
#include "rcf/metrics.hpp"
#include "rcf/parallel.hpp"
#include "rcf/scene_io.hpp"
#include "rcf/train.hpp"
#include "rcf/world.hpp"

namespace rcf {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

constexpr const char* kManifestName = "manifest.json";
const char* const kTemplateCycle[3] = {"straight", "curve", "t_junction"};

std::string scene_filename(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "scene_%04d.json", index);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

// Scene list for a directory: manifest order when present, otherwise the
// sorted scene_*.json files.
std::vector<fs::path> list_scene_files(const std::string& dir) {
  const fs::path root(dir);
  if (!fs::is_directory(root)) throw std::runtime_error(dir + " is not a directory");
  const fs::path manifest = root / kManifestName;
  std::vector<fs::path> files;
  if (fs::exists(manifest)) {
    std::ifstream in(manifest);
    json j;
    try {
      in >> j;
      for (const auto& name : j.at("scenes")) files.push_back(root / name.get<std::string>());
    } catch (const json::exception& e) {
      throw std::runtime_error(manifest.string() + ": malformed manifest: " + e.what());
    }
  } else {
    for (const auto& entry : fs::directory_iterator(root)) {
      const std::string name = entry.path().filename().string();
      if (name.rfind("scene_", 0) == 0 && entry.path().extension() == ".json") {
        files.push_back(entry.path());
      }
    }
    std::sort(files.begin(), files.end());
  }
  if (files.empty()) throw std::runtime_error("no scene files in " + dir);
  return files;
}

GenerationConfig manifest_config(const std::string& dir) {
  const fs::path manifest = fs::path(dir) / kManifestName;
  std::ifstream in(manifest);
  if (!in) {
    throw std::runtime_error(manifest.string() +
                             ": missing manifest (training needs the generating config)");
  }
  json j;
  try {
    in >> j;
    return parse_config(j.at("config").dump());
  } catch (const json::exception& e) {
    throw std::runtime_error(manifest.string() + ": malformed manifest: " + e.what());
  }
}

std::vector<LoadedScene> load_scenes(const std::vector<fs::path>& files, int channels,
                                     int workers) {
  std::vector<LoadedScene> scenes(files.size());
  parallel_for(static_cast<int>(files.size()), workers,
               [&](int i) { scenes[static_cast<size_t>(i)] = load_scene(files[static_cast<size_t>(i)].string(), channels); });
  return scenes;
}

int agent_class_of(const AgentInstance& inst) {
  Eigen::Index best = 0;
  inst.class_scores.maxCoeff(&best);
  return static_cast<int>(best);
}

// Ground-truth pipeline output for one frame; exercises the entire metric
// stack with known-perfect inputs.
PipelineOutput oracle_frame(const Frame& frame, const FusionConfig& cfg) {
  PipelineOutput out;
  for (const GtAgent& gt : frame.gt_agents) {
    AgentInstance inst;
    inst.anchor = gt.anchor;
    inst.class_scores = VecX::Zero(cfg.num_agent_classes);
    inst.class_scores(gt.class_id) = 1.0;
    inst.instance_id = gt.id;
    out.detections.push_back(inst);
    TrajectorySet set;
    Trajectory traj;
    traj.points = gt.future.leftCols(2);
    traj.score = 1.0;
    set.modes.push_back(std::move(traj));
    out.agent_futures.push_back(std::move(set));
  }
  for (const GtMapElement& gt : frame.gt_map) {
    MapPolyline poly;
    poly.waypoints = gt.waypoints;
    poly.class_scores = VecX::Zero(cfg.num_map_classes);
    poly.class_scores(gt.class_id) = 1.0;
    out.map.push_back(std::move(poly));
  }
  Trajectory plan;
  plan.points = frame.gt_ego_future;
  plan.score = 1.0;
  for (auto& set : out.ego_modes) set.modes.push_back(plan);
  out.ego_plan = std::move(plan);
  return out;
}

struct SceneEval {
  std::vector<PlanningRecord> planning;
  std::vector<MotionRecord> motion;
  std::vector<DetectionRecord> detection;
  std::vector<std::string> series_rows;
};

constexpr Scalar kEvalScoreThreshold = 0.3;

SceneEval evaluate_scene(const LoadedScene& scene, int scene_index, const PlannerModel& model,
                         bool radar_enabled, bool oracle) {
  SceneEval ev;
  PlannerState state;
  for (size_t fi = 0; fi < scene.frames.size(); ++fi) {
    const Frame& frame = scene.frames[fi];
    PipelineOutput out;
    if (oracle) {
      out = oracle_frame(frame, model.cfg);
    } else {
      out = run_frame(frame, state, model, radar_enabled);
    }

    DetectionRecord dr;
    for (const AgentInstance& det : out.detections) {
      DetectionRecord::Box b;
      b.center = det.center_xy();
      b.size = det.anchor.segment<3>(anchor::kW);
      b.yaw = det.yaw();
      b.velocity = det.anchor.segment<2>(anchor::kVx);
      b.class_id = agent_class_of(det);
      b.score = det.class_scores.maxCoeff();
      dr.predictions.push_back(b);
    }
    for (const GtAgent& gt : frame.gt_agents) {
      DetectionRecord::Box b;
      b.center = gt.anchor.segment<2>(anchor::kX);
      b.size = gt.anchor.segment<3>(anchor::kW);
      b.yaw = std::atan2(gt.anchor[anchor::kSinYaw], gt.anchor[anchor::kCosYaw]);
      b.velocity = gt.anchor.segment<2>(anchor::kVx);
      b.class_id = gt.class_id;
      dr.gts.push_back(b);
    }
    ev.detection.push_back(std::move(dr));

    MotionRecord mr;
    for (size_t i = 0; i < out.detections.size(); ++i) {
      const Scalar score = out.detections[i].class_scores.maxCoeff();
      if (score < kEvalScoreThreshold) continue;
      MotionRecord::Prediction pred;
      pred.center = out.detections[i].center_xy();
      pred.score = score;
      for (const Trajectory& mode : out.agent_futures[i].modes) pred.modes.push_back(mode.points);
      mr.predictions.push_back(std::move(pred));
    }
    for (const GtAgent& gt : frame.gt_agents) {
      MotionRecord::GroundTruth g;
      g.center = gt.anchor.segment<2>(anchor::kX);
      g.future = gt.future.leftCols(2);
      mr.gts.push_back(std::move(g));
    }
    ev.motion.push_back(std::move(mr));

    PlanningRecord pr;
    pr.plan = out.ego_plan.points;
    pr.gt_future = frame.gt_ego_future;
    pr.agent_boxes.resize(static_cast<size_t>(pr.plan.rows()));
    for (Eigen::Index k = 0; k < pr.plan.rows(); ++k) {
      for (const GtAgent& gt : frame.gt_agents) {
        if (k >= gt.future.rows()) continue;
        OrientedBox2D box;
        box.center = gt.future.row(k).head<2>().transpose();
        box.yaw = gt.future(k, 2);
        box.half_extents << gt.anchor[anchor::kW] / 2.0, gt.anchor[anchor::kL] / 2.0;
        pr.agent_boxes[static_cast<size_t>(k)].push_back(box);
      }
    }
    if (fi > 0) {
      pr.has_previous = true;
      const Frame& prev = scene.frames[fi - 1];
      pr.previous_plan = oracle ? prev.gt_ego_future : state.prev_plan;
      pr.prev_to_current = compose_pose(inverse_pose(frame.ego_pose), prev.ego_pose);
    }
    if (oracle) {
      state.prev_plan = pr.plan;
      state.prev_pose = frame.ego_pose;
      state.has_prev_plan = true;
    } else {
      // run_frame already rolled the state; previous_plan was read first.
      pr.previous_plan = fi > 0 ? pr.previous_plan : PointsXY();
    }
    const VecX l2 = l2_at_horizons(pr.plan, pr.gt_future, {1.0, 2.0, 3.0});
    std::ostringstream row;
    row << scene_index << "," << fi << "," << frame.timestamp << ","
        << (radar_enabled ? frame.radar_points.size() : 0) << "," << mr.predictions.size() << ","
        << frame.gt_agents.size() << "," << l2(0) << "," << l2(1) << "," << l2(2);
    ev.series_rows.push_back(row.str());
    ev.planning.push_back(std::move(pr));
  }
  return ev;
}

json metrics_to_json(const PlanningMetrics& plan, const MotionMetrics& motion,
                     const DetectionMetrics& det, int scenes, int frames, bool radar,
                     bool oracle) {
  json j;
  j["planning"] = {{"horizons_s", plan.horizons_s},
                   {"l2_m", std::vector<Scalar>(plan.l2.begin(), plan.l2.end())},
                   {"collision_pct",
                    std::vector<Scalar>(plan.collision_pct.begin(), plan.collision_pct.end())},
                   {"tpc_m", std::vector<Scalar>(plan.tpc_m.begin(), plan.tpc_m.end())},
                   {"l2_avg_m", plan.l2_avg},
                   {"collision_avg_pct", plan.collision_avg},
                   {"tpc_avg_m", plan.tpc_avg}};
  j["motion"] = {{"min_ade_m", motion.min_ade},   {"min_fde_m", motion.min_fde},
                 {"miss_rate", motion.miss_rate}, {"epa", motion.epa},
                 {"matched", motion.matched},     {"false_positives", motion.false_positives},
                 {"gt_count", motion.gt_count}};
  json ap;
  for (const auto& [cls, value] : det.ap_per_class) ap[std::to_string(cls)] = value;
  j["detection"] = {{"mean_ap", det.mean_ap}, {"mate_m", det.mate},  {"mase", det.mase},
                    {"maoe_rad", det.maoe},   {"mave_mps", det.mave}, {"maae", det.maae},
                    {"nds", nds(det)},        {"ap_per_class", ap}};
  j["scenes"] = scenes;
  j["frames"] = frames;
  j["radar"] = radar;
  j["oracle"] = oracle;
  return j;
}

std::string format_report(const json& m) {
  std::ostringstream r;
  const auto& p = m.at("planning");
  const auto& mo = m.at("motion");
  const auto& d = m.at("detection");
  r << "evaluation over " << m.at("scenes").get<int>() << " scenes, "
    << m.at("frames").get<int>() << " frames (radar "
    << (m.at("radar").get<bool>() ? "on" : "off")
    << (m.at("oracle").get<bool>() ? ", oracle" : "") << ")\n\n";
  r << "planning\n";
  const auto l2 = p.at("l2_m");
  const auto col = p.at("collision_pct");
  const auto tp = p.at("tpc_m");
  r << "  L2 (m)          1s " << l2[0].get<Scalar>() << "  2s " << l2[1].get<Scalar>() << "  3s "
    << l2[2].get<Scalar>() << "  avg " << p.at("l2_avg_m").get<Scalar>() << "\n";
  r << "  collision (%)   1s " << col[0].get<Scalar>() << "  2s " << col[1].get<Scalar>()
    << "  3s " << col[2].get<Scalar>() << "  avg " << p.at("collision_avg_pct").get<Scalar>()
    << "\n";
  r << "  TPC (m)         1s " << tp[0].get<Scalar>() << "  2s " << tp[1].get<Scalar>() << "  3s "
    << tp[2].get<Scalar>() << "  avg " << p.at("tpc_avg_m").get<Scalar>() << "\n\n";
  r << "motion forecasting\n";
  r << "  minADE " << mo.at("min_ade_m").get<Scalar>() << " m  minFDE "
    << mo.at("min_fde_m").get<Scalar>() << " m  miss rate " << mo.at("miss_rate").get<Scalar>()
    << "  EPA " << mo.at("epa").get<Scalar>() << "\n\n";
  r << "detection\n";
  r << "  mAP " << d.at("mean_ap").get<Scalar>() << "  NDS " << d.at("nds").get<Scalar>() << "\n";
  r << "  mATE " << d.at("mate_m").get<Scalar>() << " m  mASE " << d.at("mase").get<Scalar>()
    << "  mAOE " << d.at("maoe_rad").get<Scalar>() << " rad  mAVE "
    << d.at("mave_mps").get<Scalar>() << " m/s  mAAE " << d.at("maae").get<Scalar>() << "\n";
  return r.str();
}

}  // namespace

int cmd_generate(const GenerateArgs& args) {
  GenerationConfig cfg;
  try {
    cfg = load_config(args.config_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  try {
    fs::create_directories(args.out_dir);
    std::vector<std::string> names(static_cast<size_t>(cfg.num_scenes));
    parallel_for(cfg.num_scenes, args.workers, [&](int i) {
      ScenarioConfig sc = cfg.scenario;
      sc.seed = cfg.scenario.seed + static_cast<std::uint64_t>(i);
      if (sc.map_template == "mixed") sc.map_template = kTemplateCycle[i % 3];
      const std::vector<Frame> frames = generate_scene(sc);
      names[static_cast<size_t>(i)] = scene_filename(i);
      save_scene((fs::path(args.out_dir) / names[static_cast<size_t>(i)]).string(), sc, frames);
    });

    ordered_json manifest;
    manifest["format"] = "rcf-manifest-v1";
    manifest["num_scenes"] = cfg.num_scenes;
    manifest["scenes"] = names;
    manifest["config"] = json::parse(config_to_json(cfg));
    write_text(fs::path(args.out_dir) / kManifestName, manifest.dump(2) + "\n");
    std::cout << "generated " << cfg.num_scenes << " scenes in " << args.out_dir << "\n";
    return kExitOk;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

int cmd_train(const TrainArgs& args) {
  GenerationConfig cfg;
  std::vector<fs::path> files;
  try {
    cfg = manifest_config(args.scenes_dir);
    files = list_scene_files(args.scenes_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  try {
    const std::vector<LoadedScene> loaded =
        load_scenes(files, cfg.model.embed_dim, args.workers);
    std::vector<std::vector<Frame>> scenes;
    scenes.reserve(loaded.size());
    for (const LoadedScene& s : loaded) scenes.push_back(s.frames);

    PlannerModel model = make_model(cfg.model, scenes, args.seed);
    TrainConfig tc = cfg.train;
    tc.epochs = args.epochs;
    tc.seed = args.seed;
    tc.radar_enabled = args.radar;
    tc.workers = args.workers;
    const TrainResult result = train_model(model, scenes, tc);
    for (size_t e = 0; e < result.epochs.size(); ++e) {
      const EpochStats& s = result.epochs[e];
      std::printf("epoch %3zu  loss %.4f  det %.4f  map %.4f  motion %.4f  plan %.4f\n", e + 1,
                  s.total, s.detection, s.map, s.motion, s.plan);
    }
    save_model(args.out_path, model, args.radar);
    std::cout << "saved " << model.params.num_params() << " parameters to " << args.out_path
              << "\n";
    return kExitOk;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

int cmd_eval(const EvalArgs& args) {
  LoadedModel loaded;
  std::vector<fs::path> files;
  try {
    loaded = load_model(args.params_path);
    files = list_scene_files(args.scenes_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  try {
    const std::vector<LoadedScene> scenes =
        load_scenes(files, loaded.model.cfg.embed_dim, args.workers);

    std::vector<SceneEval> evals(scenes.size());
    parallel_for(static_cast<int>(scenes.size()), args.workers, [&](int i) {
      evals[static_cast<size_t>(i)] = evaluate_scene(scenes[static_cast<size_t>(i)], i,
                                                     loaded.model, args.radar, args.oracle);
    });

    std::vector<PlanningRecord> planning;
    std::vector<MotionRecord> motion;
    std::vector<DetectionRecord> detection;
    std::ostringstream series;
    series << "scene,frame,timestamp,radar_points,predictions,gt_agents,l2_1s,l2_2s,l2_3s\n";
    int frames = 0;
    for (const SceneEval& ev : evals) {
      planning.insert(planning.end(), ev.planning.begin(), ev.planning.end());
      motion.insert(motion.end(), ev.motion.begin(), ev.motion.end());
      detection.insert(detection.end(), ev.detection.begin(), ev.detection.end());
      for (const std::string& row : ev.series_rows) series << row << "\n";
      frames += static_cast<int>(ev.planning.size());
    }

    const PlanningMetrics plan_m = planning_metrics(planning);
    const MotionMetrics motion_m = motion_metrics(motion);
    const DetectionMetrics det_m = detection_map(detection);
    const json m = metrics_to_json(plan_m, motion_m, det_m, static_cast<int>(scenes.size()),
                                   frames, args.radar, args.oracle);

    fs::create_directories(args.out_dir);
    write_text(fs::path(args.out_dir) / "metrics.json", m.dump(2) + "\n");
    write_text(fs::path(args.out_dir) / "series.csv", series.str());
    const std::string report = format_report(m);
    write_text(fs::path(args.out_dir) / "report.txt", report);
    std::cout << report;
    return kExitOk;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace rcf

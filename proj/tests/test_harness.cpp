#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "doctest.h"
#include "rcf/config_io.hpp"
#include "rcf/harness.hpp"
#include "rcf/planner.hpp"
#include "rcf/scene_io.hpp"
#include "rcf/world.hpp"

using namespace rcf;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("rcf_harness_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE_MESSAGE(in.good(), "cannot open ", path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

std::string thrown_message(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    return e.what();
  }
  return "";
}

// Two short two-agent scenes and a small model: enough structure to reach
// every harness path while keeping generate/train/eval runs fast.
std::string small_config(int num_scenes) {
  json j;
  j["num_scenes"] = num_scenes;
  j["scenario"] = {{"seed", 4001},
                   {"num_agents", 2},
                   {"scene_duration", 1.0},
                   {"map_template", "mixed"},
                   {"cameras", {{"channels", 16}}}};
  j["model"] = {{"embed_dim", 16},     {"num_heads", 2},     {"num_decoder_layers", 1},
                {"num_agent_anchors", 8}, {"num_map_anchors", 2}, {"num_modes", 2},
                {"map_waypoints", 5},  {"topk_radar", 4}};
  j["train"] = {{"epochs", 2}, {"seed", 5}, {"lr", 0.02}};
  return j.dump(2) + "\n";
}

struct Pipeline {
  fs::path root;
  fs::path scenes;
  fs::path params;
  int exit_generate = -1;
  int exit_train = -1;
};

// generate + train once; the eval cases reuse the outputs.
const Pipeline& pipeline() {
  static const Pipeline p = [] {
    Pipeline f;
    f.root = fresh_dir("pipeline");
    f.scenes = f.root / "scenes";
    f.params = f.root / "params.json";
    write_text(f.root / "config.json", small_config(2));
    GenerateArgs ga;
    ga.config_path = (f.root / "config.json").string();
    ga.out_dir = f.scenes.string();
    f.exit_generate = cmd_generate(ga);
    TrainArgs ta;
    ta.scenes_dir = f.scenes.string();
    ta.epochs = 2;
    ta.seed = 5;
    ta.out_path = f.params.string();
    f.exit_train = cmd_train(ta);
    return f;
  }();
  return p;
}

}  // namespace

TEST_CASE("parse_config: defaults, unknown fields, wrong types, bad ranges") {
  const GenerationConfig d = parse_config("{}");
  CHECK(d.num_scenes == 8);
  CHECK(d.scenario.num_agents == ScenarioConfig{}.num_agents);
  CHECK(d.model.embed_dim == FusionConfig{}.embed_dim);
  CHECK(d.train.epochs == TrainConfig{}.epochs);

  CHECK_THROWS_WITH_AS(parse_config(R"({"frobnicate": 1})"),
                       "config: top level: unknown field \"frobnicate\"", std::runtime_error);
  CHECK_THROWS_WITH_AS(parse_config(R"({"model": {"hidden": 3}})"),
                       "config: model: unknown field \"hidden\"", std::runtime_error);
  CHECK_THROWS_WITH_AS(parse_config(R"({"scenario": {"seed": "abc"}})"),
                       "config: scenario.seed: wrong type", std::runtime_error);
  CHECK_THROWS_WITH_AS(parse_config(R"([])"), "config: top level: expected an object",
                       std::runtime_error);
  CHECK_THROWS_WITH_AS(parse_config(R"({"num_scenes": 0})"),
                       "config: num_scenes must be at least 1", std::runtime_error);

  const std::string invalid = thrown_message([] { parse_config("{"); });
  CHECK(invalid.rfind("config: invalid JSON", 0) == 0);

  // Range violations across sections are collected into one message.
  const std::string multi = thrown_message(
      [] { parse_config(R"({"num_scenes": 0, "model": {"embed_dim": 10, "num_heads": 4}})"); });
  CHECK(multi.find("num_scenes must be at least 1") != std::string::npos);
  CHECK(multi.find("model.embed_dim must be divisible by model.num_heads") != std::string::npos);
  CHECK(multi.find("; ") != std::string::npos);

  const std::string scenario = thrown_message(
      [] { parse_config(R"({"scenario": {"num_agents": -1}})"); });
  CHECK(scenario.find("num_agents") != std::string::npos);
}

TEST_CASE("config: every field survives a round trip through text and disk") {
  GenerationConfig cfg;
  cfg.num_scenes = 3;
  cfg.scenario.seed = 77;
  cfg.scenario.num_agents = 5;
  cfg.scenario.scene_duration = 2.5;
  cfg.scenario.map_template = "curve";
  cfg.scenario.weather.position_noise = 0.05;
  cfg.scenario.weather.dropout = 0.1;
  cfg.scenario.radar.max_range = 42.0;
  cfg.scenario.radar.fov = 2.0;
  cfg.scenario.radar.points_per_agent = 9;
  cfg.scenario.radar.num_sweeps = 3;
  cfg.scenario.radar.sweep_period = 0.25;
  cfg.scenario.radar.boundary_points_per_meter = 1.5;
  cfg.scenario.radar.rcs_noise = 0.3;
  cfg.scenario.cameras.image_width = 200;
  cfg.scenario.cameras.image_height = 100;
  cfg.scenario.cameras.focal = 120.0;
  cfg.scenario.cameras.height = 1.4;
  cfg.scenario.cameras.grid_height = 6;
  cfg.scenario.cameras.grid_width = 10;
  cfg.scenario.cameras.channels = 24;
  cfg.scenario.agent_speed_min = 2.0;
  cfg.scenario.agent_speed_max = 9.0;
  cfg.scenario.frame_rate = 4.0;
  cfg.model.alpha = 0.5;
  cfg.model.r_max = 30.0;
  cfg.model.embed_dim = 24;
  cfg.model.num_agent_anchors = 12;
  cfg.model.num_map_anchors = 3;
  cfg.model.num_decoder_layers = 2;
  cfg.model.topk_radar = 6;
  cfg.model.num_heads = 3;
  cfg.model.num_modes = 3;
  cfg.model.map_waypoints = 6;
  cfg.model.frustum_pixel_radius = 48.0;
  cfg.train.epochs = 7;
  cfg.train.seed = 13;
  cfg.train.sgd.lr = 0.1;
  cfg.train.sgd.momentum = 0.8;
  cfg.train.sgd.clip_norm = 2.0;
  cfg.train.weights.detection = 0.9;
  cfg.train.weights.map = 0.4;
  cfg.train.weights.motion = 0.6;
  cfg.train.weights.plan = 1.1;
  cfg.train.match.class_cost = 1.5;
  cfg.train.match.l1_cost = 0.5;
  cfg.train.match.focal_gamma = 1.0;
  cfg.train.match.focal_weight = 0.3;
  cfg.train.match.regression_weight = 0.7;

  // The echo is a fixed point: parse(echo) re-echoes byte for byte.
  const std::string echo = config_to_json(cfg);
  CHECK(config_to_json(parse_config(echo)) == echo);

  const fs::path dir = fresh_dir("config_io");
  save_config(cfg, (dir / "cfg.json").string());
  const GenerationConfig loaded = load_config((dir / "cfg.json").string());
  CHECK(config_to_json(loaded) == echo);
  CHECK(loaded.scenario.seed == 77);
  CHECK(loaded.scenario.radar.max_range == 42.0);
  CHECK(loaded.model.frustum_pixel_radius == 48.0);
  CHECK(loaded.train.match.regression_weight == 0.7);

  CHECK_THROWS_WITH_AS(load_config((dir / "missing.json").string()),
                       ("config: cannot open " + (dir / "missing.json").string()).c_str(),
                       std::runtime_error);
}

TEST_CASE("scene files: exact round trip with deterministic grid re-render") {
  ScenarioConfig sc;
  sc.seed = 301;
  sc.num_agents = 2;
  sc.scene_duration = 1.0;
  sc.cameras.channels = 16;
  const std::vector<Frame> frames = generate_scene(sc);
  REQUIRE(!frames.empty());

  const fs::path dir = fresh_dir("scene_io");
  const std::string path = (dir / "s.json").string();
  save_scene(path, sc, frames);

  const LoadedScene ls = load_scene(path);
  CHECK(ls.scenario.seed == sc.seed);
  CHECK(ls.scenario.num_agents == sc.num_agents);
  CHECK(ls.scenario.map_template == sc.map_template);
  REQUIRE(ls.frames.size() == frames.size());
  for (size_t fi = 0; fi < frames.size(); ++fi) {
    const Frame& a = frames[fi];
    const Frame& b = ls.frames[fi];
    CHECK(b.timestamp == a.timestamp);
    CHECK(b.ego_pose.translation == a.ego_pose.translation);
    CHECK(b.ego_pose.yaw == a.ego_pose.yaw);
    CHECK(b.ego_velocity == a.ego_velocity);
    CHECK(b.command == a.command);
    CHECK(b.feature_seed == a.feature_seed);
    REQUIRE(b.radar_points.size() == a.radar_points.size());
    for (size_t i = 0; i < a.radar_points.size(); ++i) {
      CHECK(b.radar_points[i].position == a.radar_points[i].position);
      CHECK(b.radar_points[i].rcs == a.radar_points[i].rcs);
      CHECK(b.radar_points[i].doppler == a.radar_points[i].doppler);
      CHECK(b.radar_points[i].sweep_offset == a.radar_points[i].sweep_offset);
    }
    REQUIRE(b.gt_agents.size() == a.gt_agents.size());
    for (size_t i = 0; i < a.gt_agents.size(); ++i) {
      CHECK(b.gt_agents[i].anchor == a.gt_agents[i].anchor);
      CHECK(b.gt_agents[i].class_id == a.gt_agents[i].class_id);
      CHECK(b.gt_agents[i].id == a.gt_agents[i].id);
      CHECK(b.gt_agents[i].future == a.gt_agents[i].future);
    }
    REQUIRE(b.gt_map.size() == a.gt_map.size());
    for (size_t i = 0; i < a.gt_map.size(); ++i) {
      CHECK(b.gt_map[i].class_id == a.gt_map[i].class_id);
      CHECK(b.gt_map[i].waypoints == a.gt_map[i].waypoints);
    }
    CHECK(b.gt_ego_future == a.gt_ego_future);
    // Grids are not stored; equality certifies the seeded re-render.
    REQUIRE(b.camera_features.size() == a.camera_features.size());
    for (size_t i = 0; i < a.camera_features.size(); ++i) {
      CHECK(b.camera_features[i].values == a.camera_features[i].values);
    }
  }

  const LoadedScene narrow = load_scene(path, 8);
  REQUIRE(!narrow.frames.empty());
  for (const FeatureGrid& g : narrow.frames[0].camera_features) CHECK(g.channels() == 8);

  write_text(dir / "bad.json", "{\"format\":\"zzz\"}\n");
  const std::string wrong = thrown_message([&] { load_scene((dir / "bad.json").string()); });
  CHECK(wrong.find("not an rcf-scene-v1 file") != std::string::npos);
  CHECK_THROWS_AS(load_scene((dir / "absent.json").string()), std::runtime_error);
}

TEST_CASE("model files: round trip, radar flag, corruption detection") {
  FusionConfig cfg;
  cfg.embed_dim = 16;
  cfg.num_heads = 2;
  cfg.num_decoder_layers = 1;
  cfg.num_agent_anchors = 8;
  cfg.num_map_anchors = 2;
  cfg.num_modes = 2;
  cfg.map_waypoints = 5;
  cfg.topk_radar = 4;
  std::vector<std::vector<Frame>> scenes;
  for (std::uint64_t seed : {401, 402}) {
    ScenarioConfig sc;
    sc.seed = seed;
    sc.num_agents = 2;
    sc.scene_duration = 1.0;
    sc.cameras.channels = 16;
    scenes.push_back(generate_scene(sc));
  }
  const PlannerModel model = make_model(cfg, scenes, 9);

  const fs::path dir = fresh_dir("model_io");
  const std::string path = (dir / "m.json").string();
  save_model(path, model, false);

  const LoadedModel lm = load_model(path);
  CHECK(lm.radar_enabled == false);
  CHECK(lm.model.cfg.embed_dim == 16);
  CHECK(lm.model.cfg.num_modes == 2);
  CHECK(lm.model.params.content_hash() == model.params.content_hash());
  CHECK(lm.model.agent_anchor_init == model.agent_anchor_init);
  CHECK(lm.model.map_anchor_init == model.map_anchor_init);

  // Serialization is stable: saving the loaded model reproduces the file.
  save_model((dir / "m2.json").string(), lm.model, lm.radar_enabled);
  CHECK(read_text(dir / "m2.json") == read_text(dir / "m.json"));

  json j = json::parse(read_text(dir / "m.json"));
  auto& tensors = j.at("tensors");
  REQUIRE(!tensors.empty());
  tensors.begin().value().at("data")[0][0] = tensors.begin().value().at("data")[0][0].get<double>() + 0.5;
  write_text(dir / "corrupt.json", j.dump() + "\n");
  const std::string corrupt =
      thrown_message([&] { load_model((dir / "corrupt.json").string()); });
  CHECK(corrupt.find("content hash mismatch") != std::string::npos);

  write_text(dir / "bad.json", "{\"format\":\"zzz\"}\n");
  const std::string wrong = thrown_message([&] { load_model((dir / "bad.json").string()); });
  CHECK(wrong.find("not an rcf-params-v1 file") != std::string::npos);
}

TEST_CASE("cmd_generate: manifest, template cycle, validation, determinism") {
  const fs::path work = fresh_dir("cmd_generate");
  write_text(work / "config.json", small_config(3));

  GenerateArgs ga;
  ga.config_path = (work / "config.json").string();
  ga.out_dir = (work / "a").string();
  ga.workers = 2;
  REQUIRE(cmd_generate(ga) == kExitOk);

  const json man = json::parse(read_text(work / "a" / "manifest.json"));
  CHECK(man.at("format") == "rcf-manifest-v1");
  CHECK(man.at("num_scenes") == 3);
  REQUIRE(man.at("scenes").size() == 3);
  CHECK(man.at("scenes")[0] == "scene_0000.json");
  CHECK(man.at("config").at("num_scenes") == 3);

  // "mixed" rotates the three templates; seeds advance per scene.
  const LoadedScene s0 = load_scene((work / "a" / "scene_0000.json").string());
  const LoadedScene s1 = load_scene((work / "a" / "scene_0001.json").string());
  const LoadedScene s2 = load_scene((work / "a" / "scene_0002.json").string());
  CHECK(s0.scenario.map_template == "straight");
  CHECK(s1.scenario.map_template == "curve");
  CHECK(s2.scenario.map_template == "t_junction");
  CHECK(s0.scenario.seed == 4001);
  CHECK(s1.scenario.seed == 4002);
  CHECK(s2.scenario.seed == 4003);

  for (const LoadedScene* s : {&s0, &s1, &s2}) {
    REQUIRE(!s->frames.empty());
    for (const Frame& f : s->frames) CHECK(validate_frame(f).empty());
  }

  // Same config, different worker count: byte-identical output.
  ga.out_dir = (work / "b").string();
  ga.workers = 1;
  REQUIRE(cmd_generate(ga) == kExitOk);
  for (const char* name :
       {"manifest.json", "scene_0000.json", "scene_0001.json", "scene_0002.json"}) {
    CHECK(read_text(work / "a" / name) == read_text(work / "b" / name));
  }

  GenerateArgs bad;
  bad.config_path = (work / "missing.json").string();
  bad.out_dir = (work / "c").string();
  CHECK(cmd_generate(bad) == kExitUsage);

  write_text(work / "zero.json", R"({"num_scenes": 0})");
  bad.config_path = (work / "zero.json").string();
  CHECK(cmd_generate(bad) == kExitUsage);
}

TEST_CASE("cmd_train: fits, records the radar arm, rejects bad inputs") {
  const Pipeline& p = pipeline();
  REQUIRE(p.exit_generate == kExitOk);
  REQUIRE(p.exit_train == kExitOk);

  const LoadedModel lm = load_model(p.params.string());
  CHECK(lm.radar_enabled == true);
  CHECK(lm.model.cfg.embed_dim == 16);
  CHECK(lm.model.cfg.num_agent_anchors == 8);

  // Same seed: byte-identical parameter file.
  TrainArgs ta;
  ta.scenes_dir = p.scenes.string();
  ta.epochs = 2;
  ta.seed = 5;
  ta.out_path = (p.root / "params_again.json").string();
  REQUIRE(cmd_train(ta) == kExitOk);
  CHECK(read_text(p.root / "params_again.json") == read_text(p.params));

  ta.radar = false;
  ta.out_path = (p.root / "params_off.json").string();
  REQUIRE(cmd_train(ta) == kExitOk);
  CHECK(load_model(ta.out_path).radar_enabled == false);

  TrainArgs bad = ta;
  bad.scenes_dir = (p.root / "nowhere").string();
  CHECK(cmd_train(bad) == kExitUsage);

  // Scene files without a manifest cannot reconstruct the model config.
  const fs::path orphan = fresh_dir("orphan_scenes");
  write_text(orphan / "scene_0000.json", read_text(p.scenes / "scene_0000.json"));
  bad.scenes_dir = orphan.string();
  CHECK(cmd_train(bad) == kExitUsage);

  const fs::path empty = fresh_dir("empty_scenes");
  bad.scenes_dir = empty.string();
  CHECK(cmd_train(bad) == kExitUsage);
}

TEST_CASE("cmd_eval: writes metrics.json, series.csv, report.txt with full schema") {
  const Pipeline& p = pipeline();
  REQUIRE(p.exit_train == kExitOk);

  EvalArgs ea;
  ea.scenes_dir = p.scenes.string();
  ea.params_path = p.params.string();
  ea.out_dir = (p.root / "eval_on").string();
  ea.workers = 2;
  REQUIRE(cmd_eval(ea) == kExitOk);

  int expected_frames = 0;
  std::vector<LoadedScene> scenes;
  scenes.push_back(load_scene((p.scenes / "scene_0000.json").string()));
  scenes.push_back(load_scene((p.scenes / "scene_0001.json").string()));
  for (const LoadedScene& s : scenes) expected_frames += static_cast<int>(s.frames.size());
  int expected_gt = 0;
  for (const LoadedScene& s : scenes)
    for (const Frame& f : s.frames) expected_gt += static_cast<int>(f.gt_agents.size());

  const json m = json::parse(read_text(p.root / "eval_on" / "metrics.json"));
  CHECK(m.at("scenes") == 2);
  CHECK(m.at("frames") == expected_frames);
  CHECK(m.at("radar") == true);
  CHECK(m.at("oracle") == false);

  const json& pl = m.at("planning");
  CHECK(pl.at("horizons_s") == json::array({1.0, 2.0, 3.0}));
  REQUIRE(pl.at("l2_m").size() == 3);
  REQUIRE(pl.at("collision_pct").size() == 3);
  REQUIRE(pl.at("tpc_m").size() == 3);
  double l2_sum = 0.0;
  for (const auto& v : pl.at("l2_m")) {
    CHECK(v.get<double>() >= 0.0);
    l2_sum += v.get<double>();
  }
  CHECK(pl.at("l2_avg_m").get<double>() == doctest::Approx(l2_sum / 3.0).epsilon(1e-12));
  for (const auto& v : pl.at("collision_pct")) {
    CHECK(v.get<double>() >= 0.0);
    CHECK(v.get<double>() <= 100.0);
  }
  CHECK(pl.at("tpc_avg_m").get<double>() >= 0.0);

  const json& mo = m.at("motion");
  CHECK(mo.at("gt_count") == expected_gt);
  CHECK(mo.at("min_ade_m").get<double>() >= 0.0);
  CHECK(mo.at("min_fde_m").get<double>() >= 0.0);
  CHECK(mo.at("miss_rate").get<double>() >= 0.0);
  CHECK(mo.at("miss_rate").get<double>() <= 1.0);
  CHECK(mo.at("matched").get<int>() + 0 <= expected_gt);
  CHECK(mo.at("false_positives").get<int>() >= 0);
  CHECK(mo.at("epa").get<double>() <= 1.0);

  const json& de = m.at("detection");
  CHECK(de.at("mean_ap").get<double>() >= 0.0);
  CHECK(de.at("mean_ap").get<double>() <= 1.0);
  double err_sum = 0.0;
  for (const char* key : {"mate_m", "mase", "maoe_rad", "mave_mps", "maae"}) {
    CHECK(de.at(key).get<double>() >= 0.0);
    err_sum += std::min(1.0, de.at(key).get<double>());
  }
  CHECK(de.at("nds").get<double>() ==
        doctest::Approx((5.0 * de.at("mean_ap").get<double>() + (5.0 - err_sum)) / 10.0)
            .epsilon(1e-12));
  CHECK(de.at("ap_per_class").is_object());

  const std::string series = read_text(p.root / "eval_on" / "series.csv");
  std::istringstream lines(series);
  std::string header;
  std::getline(lines, header);
  CHECK(header == "scene,frame,timestamp,radar_points,predictions,gt_agents,l2_1s,l2_2s,l2_3s");
  int rows = 0;
  std::string row;
  while (std::getline(lines, row)) {
    if (!row.empty()) ++rows;
  }
  CHECK(rows == expected_frames);
  CHECK(series.substr(header.size() + 1, 4) == "0,0,");

  const std::string report = read_text(p.root / "eval_on" / "report.txt");
  CHECK(report.find("evaluation over 2 scenes") != std::string::npos);
  CHECK(report.find("(radar on)") != std::string::npos);
  CHECK(report.find("planning") != std::string::npos);
  CHECK(report.find("motion forecasting") != std::string::npos);
  CHECK(report.find("detection") != std::string::npos);
  CHECK(report.find("NDS") != std::string::npos);

  EvalArgs bad = ea;
  bad.params_path = (p.root / "no_params.json").string();
  CHECK(cmd_eval(bad) == kExitUsage);
  bad = ea;
  bad.scenes_dir = (p.root / "nowhere").string();
  CHECK(cmd_eval(bad) == kExitUsage);

  // Output path blocked by a regular file: a runtime failure, not usage.
  write_text(p.root / "blocked", "x");
  bad = ea;
  bad.out_dir = (p.root / "blocked").string();
  CHECK(cmd_eval(bad) == kExitRuntime);
}

TEST_CASE("cmd_eval: oracle mode reproduces ground truth exactly") {
  const Pipeline& p = pipeline();
  REQUIRE(p.exit_train == kExitOk);

  EvalArgs ea;
  ea.scenes_dir = p.scenes.string();
  ea.params_path = p.params.string();
  ea.out_dir = (p.root / "eval_oracle").string();
  ea.oracle = true;
  REQUIRE(cmd_eval(ea) == kExitOk);

  const json m = json::parse(read_text(p.root / "eval_oracle" / "metrics.json"));
  CHECK(m.at("oracle") == true);

  const json& de = m.at("detection");
  CHECK(de.at("mean_ap").get<double>() == 1.0);
  CHECK(de.at("mate_m").get<double>() == 0.0);
  CHECK(de.at("mase").get<double>() == 0.0);
  CHECK(de.at("maoe_rad").get<double>() == 0.0);
  CHECK(de.at("mave_mps").get<double>() == 0.0);
  CHECK(de.at("maae").get<double>() == 0.0);
  CHECK(de.at("nds").get<double>() == 1.0);

  const json& mo = m.at("motion");
  CHECK(mo.at("min_ade_m").get<double>() == 0.0);
  CHECK(mo.at("min_fde_m").get<double>() == 0.0);
  CHECK(mo.at("miss_rate").get<double>() == 0.0);
  CHECK(mo.at("epa").get<double>() == 1.0);
  CHECK(mo.at("false_positives") == 0);
  CHECK(mo.at("matched") == mo.at("gt_count"));

  const json& pl = m.at("planning");
  for (const auto& v : pl.at("l2_m")) CHECK(v.get<double>() == 0.0);
  for (const auto& v : pl.at("collision_pct")) CHECK(v.get<double>() == 0.0);
  for (const auto& v : pl.at("tpc_m")) CHECK(v.get<double>() <= 1e-9);

  CHECK(read_text(p.root / "eval_oracle" / "report.txt").find(", oracle") != std::string::npos);
}

TEST_CASE("cmd_eval: radar off equals zero-point scenes byte for byte") {
  const Pipeline& p = pipeline();
  REQUIRE(p.exit_train == kExitOk);

  const fs::path stripped = fresh_dir("stripped_scenes");
  const json man = json::parse(read_text(p.scenes / "manifest.json"));
  for (const auto& name : man.at("scenes")) {
    LoadedScene ls = load_scene((p.scenes / name.get<std::string>()).string());
    for (Frame& f : ls.frames) f.radar_points.clear();
    save_scene((stripped / name.get<std::string>()).string(), ls.scenario, ls.frames);
  }
  write_text(stripped / "manifest.json", read_text(p.scenes / "manifest.json"));

  EvalArgs off;
  off.scenes_dir = p.scenes.string();
  off.params_path = p.params.string();
  off.radar = false;
  off.out_dir = (p.root / "eval_off").string();
  REQUIRE(cmd_eval(off) == kExitOk);

  EvalArgs zero;
  zero.scenes_dir = stripped.string();
  zero.params_path = p.params.string();
  zero.radar = true;
  zero.out_dir = (p.root / "eval_zero").string();
  REQUIRE(cmd_eval(zero) == kExitOk);

  CHECK(read_text(p.root / "eval_off" / "series.csv") ==
        read_text(p.root / "eval_zero" / "series.csv"));

  // Identical up to the echoed radar arm.
  json m_off = json::parse(read_text(p.root / "eval_off" / "metrics.json"));
  json m_zero = json::parse(read_text(p.root / "eval_zero" / "metrics.json"));
  CHECK(m_off.at("radar") == false);
  CHECK(m_zero.at("radar") == true);
  m_off.erase("radar");
  m_zero.erase("radar");
  CHECK(m_off == m_zero);

  std::string r_off = read_text(p.root / "eval_off" / "report.txt");
  const std::string r_zero = read_text(p.root / "eval_zero" / "report.txt");
  const size_t at = r_off.find("(radar off)");
  REQUIRE(at != std::string::npos);
  r_off.replace(at, 11, "(radar on)");
  CHECK(r_off == r_zero);

  // And the radar arm matters: the radar-on run differs from radar-off.
  json m_on = json::parse(read_text(p.root / "eval_on" / "metrics.json"));
  m_on.erase("radar");
  CHECK(m_on != m_off);
}

#include "rcf/config_io.hpp"

#include <fstream>
#include <initializer_list>
#include <sstream>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

namespace rcf {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error("config: " + msg); }

const json& expect_object(const json& obj, const std::string& where) {
  if (!obj.is_object()) fail(where + ": expected an object");
  return obj;
}

void check_keys(const json& obj, const std::string& where,
                std::initializer_list<const char*> allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* a : allowed) {
      if (it.key() == a) {
        known = true;
        break;
      }
    }
    if (!known) fail(where + ": unknown field \"" + it.key() + "\"");
  }
}

template <typename T>
void read_field(const json& obj, const std::string& where, const char* name, T& out) {
  if (!obj.contains(name)) return;
  try {
    out = obj.at(name).get<T>();
  } catch (const json::exception&) {
    fail(where + "." + name + ": wrong type");
  }
}

void parse_weather(const json& j, WeatherConfig& w) {
  expect_object(j, "scenario.weather");
  check_keys(j, "scenario.weather", {"position_noise", "dropout"});
  read_field(j, "scenario.weather", "position_noise", w.position_noise);
  read_field(j, "scenario.weather", "dropout", w.dropout);
}

void parse_radar(const json& j, RadarSensorConfig& r) {
  expect_object(j, "scenario.radar");
  check_keys(j, "scenario.radar",
             {"max_range", "fov", "points_per_agent", "num_sweeps", "sweep_period",
              "boundary_points_per_meter", "rcs_noise"});
  read_field(j, "scenario.radar", "max_range", r.max_range);
  read_field(j, "scenario.radar", "fov", r.fov);
  read_field(j, "scenario.radar", "points_per_agent", r.points_per_agent);
  read_field(j, "scenario.radar", "num_sweeps", r.num_sweeps);
  read_field(j, "scenario.radar", "sweep_period", r.sweep_period);
  read_field(j, "scenario.radar", "boundary_points_per_meter", r.boundary_points_per_meter);
  read_field(j, "scenario.radar", "rcs_noise", r.rcs_noise);
}

void parse_cameras(const json& j, CameraRigConfig& c) {
  expect_object(j, "scenario.cameras");
  check_keys(j, "scenario.cameras",
             {"image_width", "image_height", "focal", "height", "grid_height", "grid_width",
              "channels"});
  read_field(j, "scenario.cameras", "image_width", c.image_width);
  read_field(j, "scenario.cameras", "image_height", c.image_height);
  read_field(j, "scenario.cameras", "focal", c.focal);
  read_field(j, "scenario.cameras", "height", c.height);
  read_field(j, "scenario.cameras", "grid_height", c.grid_height);
  read_field(j, "scenario.cameras", "grid_width", c.grid_width);
  read_field(j, "scenario.cameras", "channels", c.channels);
}

void parse_scenario(const json& j, ScenarioConfig& s) {
  expect_object(j, "scenario");
  check_keys(j, "scenario",
             {"seed", "num_agents", "scene_duration", "map_template", "weather",
              "agent_speed_min", "agent_speed_max", "frame_rate", "radar", "cameras"});
  read_field(j, "scenario", "seed", s.seed);
  read_field(j, "scenario", "num_agents", s.num_agents);
  read_field(j, "scenario", "scene_duration", s.scene_duration);
  read_field(j, "scenario", "map_template", s.map_template);
  read_field(j, "scenario", "agent_speed_min", s.agent_speed_min);
  read_field(j, "scenario", "agent_speed_max", s.agent_speed_max);
  read_field(j, "scenario", "frame_rate", s.frame_rate);
  if (j.contains("weather")) parse_weather(j.at("weather"), s.weather);
  if (j.contains("radar")) parse_radar(j.at("radar"), s.radar);
  if (j.contains("cameras")) parse_cameras(j.at("cameras"), s.cameras);
}

void parse_model(const json& j, FusionConfig& m) {
  expect_object(j, "model");
  check_keys(j, "model",
             {"alpha", "r_max", "embed_dim", "num_agent_anchors", "num_map_anchors",
              "num_decoder_layers", "topk_radar", "num_heads", "num_modes", "map_waypoints",
              "frustum_pixel_radius"});
  read_field(j, "model", "alpha", m.alpha);
  read_field(j, "model", "r_max", m.r_max);
  read_field(j, "model", "embed_dim", m.embed_dim);
  read_field(j, "model", "num_agent_anchors", m.num_agent_anchors);
  read_field(j, "model", "num_map_anchors", m.num_map_anchors);
  read_field(j, "model", "num_decoder_layers", m.num_decoder_layers);
  read_field(j, "model", "topk_radar", m.topk_radar);
  read_field(j, "model", "num_heads", m.num_heads);
  read_field(j, "model", "num_modes", m.num_modes);
  read_field(j, "model", "map_waypoints", m.map_waypoints);
  read_field(j, "model", "frustum_pixel_radius", m.frustum_pixel_radius);
}

void parse_train(const json& j, TrainConfig& t) {
  expect_object(j, "train");
  check_keys(j, "train",
             {"epochs", "seed", "lr", "momentum", "clip_norm", "weights", "matching"});
  read_field(j, "train", "epochs", t.epochs);
  read_field(j, "train", "seed", t.seed);
  read_field(j, "train", "lr", t.sgd.lr);
  read_field(j, "train", "momentum", t.sgd.momentum);
  read_field(j, "train", "clip_norm", t.sgd.clip_norm);
  if (j.contains("weights")) {
    const json& w = expect_object(j.at("weights"), "train.weights");
    check_keys(w, "train.weights", {"detection", "map", "motion", "plan"});
    read_field(w, "train.weights", "detection", t.weights.detection);
    read_field(w, "train.weights", "map", t.weights.map);
    read_field(w, "train.weights", "motion", t.weights.motion);
    read_field(w, "train.weights", "plan", t.weights.plan);
  }
  if (j.contains("matching")) {
    const json& m = expect_object(j.at("matching"), "train.matching");
    check_keys(m, "train.matching",
               {"class_cost", "l1_cost", "focal_gamma", "focal_weight", "regression_weight"});
    read_field(m, "train.matching", "class_cost", t.match.class_cost);
    read_field(m, "train.matching", "l1_cost", t.match.l1_cost);
    read_field(m, "train.matching", "focal_gamma", t.match.focal_gamma);
    read_field(m, "train.matching", "focal_weight", t.match.focal_weight);
    read_field(m, "train.matching", "regression_weight", t.match.regression_weight);
  }
}

void validate_generation(const GenerationConfig& cfg) {
  std::ostringstream errs;
  auto bad = [&errs](const std::string& msg) { errs << (errs.tellp() > 0 ? "; " : "") << msg; };

  if (cfg.num_scenes < 1) bad("num_scenes must be at least 1");

  ScenarioConfig sc = cfg.scenario;
  if (sc.map_template == "mixed") sc.map_template = "straight";
  try {
    validate_config(sc);
  } catch (const std::invalid_argument& e) {
    bad(e.what());
  }

  const FusionConfig& m = cfg.model;
  if (m.embed_dim < 1) bad("model.embed_dim must be positive");
  if (m.num_heads < 1) bad("model.num_heads must be positive");
  if (m.num_heads >= 1 && m.embed_dim % m.num_heads != 0) {
    bad("model.embed_dim must be divisible by model.num_heads");
  }
  if (m.num_agent_anchors < 1) bad("model.num_agent_anchors must be positive");
  if (m.num_map_anchors < 1) bad("model.num_map_anchors must be positive");
  if (m.num_decoder_layers < 1) bad("model.num_decoder_layers must be positive");
  if (m.topk_radar < 1) bad("model.topk_radar must be positive");
  if (m.num_modes < 1) bad("model.num_modes must be positive");
  if (m.map_waypoints < 2 || m.map_waypoints > 20) bad("model.map_waypoints must be in [2, 20]");
  if (!(m.r_max > 0.0)) bad("model.r_max must be positive");
  if (!(m.alpha >= 0.0)) bad("model.alpha must be non-negative");
  if (!(m.frustum_pixel_radius > 0.0)) bad("model.frustum_pixel_radius must be positive");

  const TrainConfig& t = cfg.train;
  if (t.epochs < 0) bad("train.epochs must be non-negative");
  if (!(t.sgd.lr > 0.0)) bad("train.lr must be positive");
  if (t.sgd.momentum < 0.0 || t.sgd.momentum >= 1.0) bad("train.momentum must be in [0, 1)");
  if (t.weights.detection < 0.0 || t.weights.map < 0.0 || t.weights.motion < 0.0 ||
      t.weights.plan < 0.0) {
    bad("train.weights entries must be non-negative");
  }
  if (!(t.match.focal_gamma >= 0.0)) bad("train.matching.focal_gamma must be non-negative");
  if (!(t.match.focal_weight > 0.0 && t.match.focal_weight < 1.0)) {
    bad("train.matching.focal_weight must be in (0, 1)");
  }

  if (errs.tellp() > 0) fail(errs.str());
}

}  // namespace

GenerationConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(std::string("invalid JSON: ") + e.what());
  }
  expect_object(j, "top level");
  check_keys(j, "top level", {"num_scenes", "scenario", "model", "train"});

  GenerationConfig cfg;
  read_field(j, "top level", "num_scenes", cfg.num_scenes);
  if (j.contains("scenario")) parse_scenario(j.at("scenario"), cfg.scenario);
  if (j.contains("model")) parse_model(j.at("model"), cfg.model);
  if (j.contains("train")) parse_train(j.at("train"), cfg.train);
  validate_generation(cfg);
  return cfg;
}

GenerationConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string config_to_json(const GenerationConfig& cfg) {
  json j;
  j["num_scenes"] = cfg.num_scenes;
  const ScenarioConfig& s = cfg.scenario;
  j["scenario"] = {
      {"seed", s.seed},
      {"num_agents", s.num_agents},
      {"scene_duration", s.scene_duration},
      {"map_template", s.map_template},
      {"agent_speed_min", s.agent_speed_min},
      {"agent_speed_max", s.agent_speed_max},
      {"frame_rate", s.frame_rate},
      {"weather", {{"position_noise", s.weather.position_noise}, {"dropout", s.weather.dropout}}},
      {"radar",
       {{"max_range", s.radar.max_range},
        {"fov", s.radar.fov},
        {"points_per_agent", s.radar.points_per_agent},
        {"num_sweeps", s.radar.num_sweeps},
        {"sweep_period", s.radar.sweep_period},
        {"boundary_points_per_meter", s.radar.boundary_points_per_meter},
        {"rcs_noise", s.radar.rcs_noise}}},
      {"cameras",
       {{"image_width", s.cameras.image_width},
        {"image_height", s.cameras.image_height},
        {"focal", s.cameras.focal},
        {"height", s.cameras.height},
        {"grid_height", s.cameras.grid_height},
        {"grid_width", s.cameras.grid_width},
        {"channels", s.cameras.channels}}}};
  const FusionConfig& m = cfg.model;
  j["model"] = {{"alpha", m.alpha},
                {"r_max", m.r_max},
                {"embed_dim", m.embed_dim},
                {"num_agent_anchors", m.num_agent_anchors},
                {"num_map_anchors", m.num_map_anchors},
                {"num_decoder_layers", m.num_decoder_layers},
                {"topk_radar", m.topk_radar},
                {"num_heads", m.num_heads},
                {"num_modes", m.num_modes},
                {"map_waypoints", m.map_waypoints},
                {"frustum_pixel_radius", m.frustum_pixel_radius}};
  const TrainConfig& t = cfg.train;
  j["train"] = {{"epochs", t.epochs},
                {"seed", t.seed},
                {"lr", t.sgd.lr},
                {"momentum", t.sgd.momentum},
                {"clip_norm", t.sgd.clip_norm},
                {"weights",
                 {{"detection", t.weights.detection},
                  {"map", t.weights.map},
                  {"motion", t.weights.motion},
                  {"plan", t.weights.plan}}},
                {"matching",
                 {{"class_cost", t.match.class_cost},
                  {"l1_cost", t.match.l1_cost},
                  {"focal_gamma", t.match.focal_gamma},
                  {"focal_weight", t.match.focal_weight},
                  {"regression_weight", t.match.regression_weight}}}};
  return j.dump(2) + "\n";
}

void save_config(const GenerationConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail("cannot write " + path);
  out << config_to_json(cfg);
}

}  // namespace rcf

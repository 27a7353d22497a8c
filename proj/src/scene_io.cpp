#include "rcf/scene_io.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "rcf/camera_sim.hpp"

namespace rcf {

namespace {

using ordered_json = nlohmann::ordered_json;

[[noreturn]] void io_fail(const std::string& msg) { throw std::runtime_error(msg); }

ordered_json matrix_to_json(const MatX& m) {
  ordered_json rows = ordered_json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    ordered_json row = ordered_json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

MatX matrix_from_json(const ordered_json& j, Eigen::Index cols, const std::string& where) {
  if (!j.is_array()) io_fail(where + ": expected an array of rows");
  MatX m(static_cast<Eigen::Index>(j.size()), cols);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const auto& row = j[static_cast<size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      io_fail(where + ": row " + std::to_string(i) + " must have " + std::to_string(cols) +
              " entries");
    }
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = row[static_cast<size_t>(c)].get<Scalar>();
  }
  return m;
}

ordered_json pose_to_json(const Pose2D& p) {
  return ordered_json::array({p.translation.x(), p.translation.y(), p.yaw});
}

Pose2D pose_from_json(const ordered_json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3) io_fail(where + ": expected [x, y, yaw]");
  Pose2D p;
  p.translation << j[0].get<Scalar>(), j[1].get<Scalar>();
  p.yaw = j[2].get<Scalar>();
  return p;
}

ordered_json scenario_to_json(const ScenarioConfig& s) {
  ordered_json j;
  j["seed"] = s.seed;
  j["num_agents"] = s.num_agents;
  j["scene_duration"] = s.scene_duration;
  j["map_template"] = s.map_template;
  j["agent_speed_min"] = s.agent_speed_min;
  j["agent_speed_max"] = s.agent_speed_max;
  j["frame_rate"] = s.frame_rate;
  j["weather"] = {{"position_noise", s.weather.position_noise}, {"dropout", s.weather.dropout}};
  j["radar"] = {{"max_range", s.radar.max_range},
                {"fov", s.radar.fov},
                {"points_per_agent", s.radar.points_per_agent},
                {"num_sweeps", s.radar.num_sweeps},
                {"sweep_period", s.radar.sweep_period},
                {"boundary_points_per_meter", s.radar.boundary_points_per_meter},
                {"rcs_noise", s.radar.rcs_noise}};
  j["cameras"] = {{"image_width", s.cameras.image_width},
                  {"image_height", s.cameras.image_height},
                  {"focal", s.cameras.focal},
                  {"height", s.cameras.height},
                  {"grid_height", s.cameras.grid_height},
                  {"grid_width", s.cameras.grid_width},
                  {"channels", s.cameras.channels}};
  return j;
}

ScenarioConfig scenario_from_json(const ordered_json& j) {
  ScenarioConfig s;
  s.seed = j.at("seed").get<std::uint64_t>();
  s.num_agents = j.at("num_agents").get<int>();
  s.scene_duration = j.at("scene_duration").get<Scalar>();
  s.map_template = j.at("map_template").get<std::string>();
  s.agent_speed_min = j.at("agent_speed_min").get<Scalar>();
  s.agent_speed_max = j.at("agent_speed_max").get<Scalar>();
  s.frame_rate = j.at("frame_rate").get<Scalar>();
  const auto& w = j.at("weather");
  s.weather.position_noise = w.at("position_noise").get<Scalar>();
  s.weather.dropout = w.at("dropout").get<Scalar>();
  const auto& r = j.at("radar");
  s.radar.max_range = r.at("max_range").get<Scalar>();
  s.radar.fov = r.at("fov").get<Scalar>();
  s.radar.points_per_agent = r.at("points_per_agent").get<Scalar>();
  s.radar.num_sweeps = r.at("num_sweeps").get<int>();
  s.radar.sweep_period = r.at("sweep_period").get<Scalar>();
  s.radar.boundary_points_per_meter = r.at("boundary_points_per_meter").get<Scalar>();
  s.radar.rcs_noise = r.at("rcs_noise").get<Scalar>();
  const auto& c = j.at("cameras");
  s.cameras.image_width = c.at("image_width").get<int>();
  s.cameras.image_height = c.at("image_height").get<int>();
  s.cameras.focal = c.at("focal").get<Scalar>();
  s.cameras.height = c.at("height").get<Scalar>();
  s.cameras.grid_height = c.at("grid_height").get<int>();
  s.cameras.grid_width = c.at("grid_width").get<int>();
  s.cameras.channels = c.at("channels").get<int>();
  return s;
}

ordered_json fusion_to_json(const FusionConfig& m) {
  ordered_json j;
  j["alpha"] = m.alpha;
  j["r_max"] = m.r_max;
  j["embed_dim"] = m.embed_dim;
  j["num_agent_anchors"] = m.num_agent_anchors;
  j["num_map_anchors"] = m.num_map_anchors;
  j["num_decoder_layers"] = m.num_decoder_layers;
  j["topk_radar"] = m.topk_radar;
  j["num_heads"] = m.num_heads;
  j["num_agent_classes"] = m.num_agent_classes;
  j["num_map_classes"] = m.num_map_classes;
  j["num_modes"] = m.num_modes;
  j["map_waypoints"] = m.map_waypoints;
  j["num_cameras"] = m.num_cameras;
  j["plan_steps"] = m.plan_steps;
  j["motion_steps"] = m.motion_steps;
  j["frustum_pixel_radius"] = m.frustum_pixel_radius;
  return j;
}

FusionConfig fusion_from_json(const ordered_json& j) {
  FusionConfig m;
  m.alpha = j.at("alpha").get<Scalar>();
  m.r_max = j.at("r_max").get<Scalar>();
  m.embed_dim = j.at("embed_dim").get<int>();
  m.num_agent_anchors = j.at("num_agent_anchors").get<int>();
  m.num_map_anchors = j.at("num_map_anchors").get<int>();
  m.num_decoder_layers = j.at("num_decoder_layers").get<int>();
  m.topk_radar = j.at("topk_radar").get<int>();
  m.num_heads = j.at("num_heads").get<int>();
  m.num_agent_classes = j.at("num_agent_classes").get<int>();
  m.num_map_classes = j.at("num_map_classes").get<int>();
  m.num_modes = j.at("num_modes").get<int>();
  m.map_waypoints = j.at("map_waypoints").get<int>();
  m.num_cameras = j.at("num_cameras").get<int>();
  m.plan_steps = j.at("plan_steps").get<int>();
  m.motion_steps = j.at("motion_steps").get<int>();
  m.frustum_pixel_radius = j.at("frustum_pixel_radius").get<Scalar>();
  return m;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) io_fail("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) io_fail("cannot write " + path);
  out << text;
}

}  // namespace

void save_scene(const std::string& path, const ScenarioConfig& scenario,
                const std::vector<Frame>& frames) {
  ordered_json j;
  j["format"] = "rcf-scene-v1";
  j["scenario"] = scenario_to_json(scenario);
  ordered_json jframes = ordered_json::array();
  for (const Frame& f : frames) {
    ordered_json jf;
    jf["timestamp"] = f.timestamp;
    jf["ego_pose"] = pose_to_json(f.ego_pose);
    jf["ego_velocity"] = ordered_json::array({f.ego_velocity.x(), f.ego_velocity.y(),
                                              f.ego_velocity.z()});
    jf["command"] = static_cast<int>(f.command);
    jf["feature_seed"] = f.feature_seed;
    ordered_json jr = ordered_json::array();
    for (const RadarPoint& p : f.radar_points) {
      jr.push_back(ordered_json::array(
          {p.position.x(), p.position.y(), p.position.z(), p.rcs, p.doppler, p.sweep_offset}));
    }
    jf["radar"] = std::move(jr);
    ordered_json ja = ordered_json::array();
    for (const GtAgent& a : f.gt_agents) {
      ordered_json je;
      je["anchor"] = matrix_to_json(a.anchor.transpose())[0];
      je["class_id"] = a.class_id;
      je["id"] = a.id;
      je["future"] = matrix_to_json(a.future);
      ja.push_back(std::move(je));
    }
    jf["gt_agents"] = std::move(ja);
    ordered_json jm = ordered_json::array();
    for (const GtMapElement& e : f.gt_map) {
      jm.push_back(ordered_json{{"class_id", e.class_id}, {"waypoints", matrix_to_json(e.waypoints)}});
    }
    jf["gt_map"] = std::move(jm);
    jf["gt_ego_future"] = matrix_to_json(f.gt_ego_future);
    jframes.push_back(std::move(jf));
  }
  j["frames"] = std::move(jframes);
  write_file(path, j.dump() + "\n");
}

LoadedScene load_scene(const std::string& path, int channels) {
  ordered_json j;
  try {
    j = ordered_json::parse(read_file(path));
  } catch (const ordered_json::exception& e) {
    io_fail(path + ": invalid JSON: " + e.what());
  }
  if (!j.is_object() || j.value("format", "") != "rcf-scene-v1") {
    io_fail(path + ": not an rcf-scene-v1 file");
  }

  LoadedScene out;
  try {
    out.scenario = scenario_from_json(j.at("scenario"));
    const int ch = channels > 0 ? channels : out.scenario.cameras.channels;
    const std::vector<CameraModel> cams = make_camera_rig(out.scenario.cameras);
    for (const auto& jf : j.at("frames")) {
      Frame f;
      f.timestamp = jf.at("timestamp").get<Scalar>();
      f.ego_pose = pose_from_json(jf.at("ego_pose"), path + ": ego_pose");
      const auto& ev = jf.at("ego_velocity");
      f.ego_velocity << ev[0].get<Scalar>(), ev[1].get<Scalar>(), ev[2].get<Scalar>();
      f.command = static_cast<DrivingCommand>(jf.at("command").get<int>());
      f.feature_seed = jf.at("feature_seed").get<std::uint64_t>();
      for (const auto& jp : jf.at("radar")) {
        RadarPoint p;
        p.position << jp[0].get<Scalar>(), jp[1].get<Scalar>(), jp[2].get<Scalar>();
        p.rcs = jp[3].get<Scalar>();
        p.doppler = jp[4].get<Scalar>();
        p.sweep_offset = jp[5].get<Scalar>();
        f.radar_points.push_back(p);
      }
      for (const auto& ja : jf.at("gt_agents")) {
        GtAgent a;
        const auto& anchor = ja.at("anchor");
        if (!anchor.is_array() || anchor.size() != anchor::kDim) {
          io_fail(path + ": gt agent anchor must have 11 entries");
        }
        for (int k = 0; k < anchor::kDim; ++k) a.anchor(k) = anchor[static_cast<size_t>(k)].get<Scalar>();
        a.class_id = ja.at("class_id").get<int>();
        a.id = ja.at("id").get<std::int64_t>();
        a.future = matrix_from_json(ja.at("future"), 3, path + ": gt agent future");
        f.gt_agents.push_back(std::move(a));
      }
      for (const auto& jm : jf.at("gt_map")) {
        GtMapElement e;
        e.class_id = jm.at("class_id").get<int>();
        e.waypoints = matrix_from_json(jm.at("waypoints"), 2, path + ": map waypoints");
        f.gt_map.push_back(std::move(e));
      }
      f.gt_ego_future = matrix_from_json(jf.at("gt_ego_future"), 2, path + ": gt_ego_future");
      f.cameras = cams;
      f.camera_features =
          render_camera_features(f.gt_agents, f.gt_map, cams, out.scenario.cameras.grid_height,
                                 out.scenario.cameras.grid_width, ch, f.feature_seed);
      out.frames.push_back(std::move(f));
    }
  } catch (const ordered_json::exception& e) {
    io_fail(path + ": malformed scene: " + e.what());
  }
  return out;
}

void save_model(const std::string& path, const PlannerModel& model, bool radar_enabled) {
  ordered_json j;
  j["format"] = "rcf-params-v1";
  j["model"] = fusion_to_json(model.cfg);
  j["radar_enabled"] = radar_enabled;
  j["agent_anchor_init"] = matrix_to_json(model.agent_anchor_init);
  j["map_anchor_init"] = matrix_to_json(model.map_anchor_init);
  ordered_json tensors;
  for (const auto& [name, value] : model.params.tensors()) {
    tensors[name] = {{"rows", value.rows()}, {"cols", value.cols()},
                     {"data", matrix_to_json(value)}};
  }
  j["tensors"] = std::move(tensors);
  std::ostringstream hash;
  hash << "0x" << std::hex << model.params.content_hash();
  j["content_hash"] = hash.str();
  write_file(path, j.dump() + "\n");
}

LoadedModel load_model(const std::string& path) {
  ordered_json j;
  try {
    j = ordered_json::parse(read_file(path));
  } catch (const ordered_json::exception& e) {
    io_fail(path + ": invalid JSON: " + e.what());
  }
  if (!j.is_object() || j.value("format", "") != "rcf-params-v1") {
    io_fail(path + ": not an rcf-params-v1 file");
  }

  LoadedModel out;
  try {
    out.model.cfg = fusion_from_json(j.at("model"));
    out.radar_enabled = j.at("radar_enabled").get<bool>();
    out.model.agent_anchor_init =
        matrix_from_json(j.at("agent_anchor_init"), anchor::kDim, path + ": agent_anchor_init");
    out.model.map_anchor_init = matrix_from_json(
        j.at("map_anchor_init"), 2 * out.model.cfg.map_waypoints, path + ": map_anchor_init");
    for (const auto& [name, jt] : j.at("tensors").items()) {
      const auto rows = jt.at("rows").get<Eigen::Index>();
      const auto cols = jt.at("cols").get<Eigen::Index>();
      MatX value = matrix_from_json(jt.at("data"), cols, path + ": tensor " + name);
      if (value.rows() != rows) io_fail(path + ": tensor " + name + " row count mismatch");
      out.model.params.create(name, rows, cols) = value;
    }
  } catch (const ordered_json::exception& e) {
    io_fail(path + ": malformed model: " + e.what());
  }

  const std::string stored = j.value("content_hash", "");
  std::ostringstream hash;
  hash << "0x" << std::hex << out.model.params.content_hash();
  if (stored != hash.str()) io_fail(path + ": content hash mismatch (corrupt parameters)");
  return out;
}

}  // namespace rcf

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rcf/camera_sim.hpp"
#include "rcf/radar_sim.hpp"
#include "rcf/types.hpp"

namespace rcf {

struct WeatherConfig {
  Scalar position_noise = 0.1;  // m, radar position sigma
  Scalar dropout = 0.05;        // radar return drop probability, in [0,1)
};

struct ScenarioConfig {
  std::uint64_t seed = 1;
  int num_agents = 8;
  Scalar scene_duration = 8.0;               // s
  std::string map_template = "straight";     // straight | t_junction | curve
  WeatherConfig weather;
  Scalar agent_speed_min = 3.0, agent_speed_max = 9.0;  // m/s
  Scalar frame_rate = 2.0;                   // Hz
  RadarSensorConfig radar;
  CameraRigConfig cameras;
};

// Throws std::invalid_argument listing every violated field.
void validate_config(const ScenarioConfig& cfg);

// Constant-turn-rate-and-velocity motion evaluated in closed form; the
// chain extends beyond its first and last segments so any time is defined.
struct MotionSegment {
  Scalar duration = 0.0;  // s
  Scalar speed = 0.0;     // m/s
  Scalar yaw_rate = 0.0;  // rad/s
};

struct MotionPath {
  Vec2 start_position = Vec2::Zero();
  Scalar start_yaw = 0.0;
  std::vector<MotionSegment> segments;

  Pose2D pose_at(Scalar t) const;
  Vec2 velocity_at(Scalar t) const;  // world frame
  Scalar speed_at(Scalar t) const;
};

struct WorldAgent {
  MotionPath path;
  int class_id = 0;
  std::int64_t id = -1;
  Vec3 dims = Vec3::Zero();  // (w, h, l)
};

struct WorldMapElement {
  PointsXY waypoints;  // world frame
  int class_id = 0;    // 0 boundary (metal), 1 divider (paint), 2 crossing (paint)
};

// World-frame scene model; frames are deterministic projections of it.
struct WorldModel {
  MotionPath ego;
  std::vector<WorldAgent> agents;
  std::vector<WorldMapElement> map;
};

// Agent class tables; ids: 0 car, 1 truck, 2 pedestrian.
Vec3 agent_class_dims(int class_id);

WorldModel build_world(const ScenarioConfig& cfg);

// Driving command at time t from the route's heading change over the
// planning horizon: left/right when it exceeds +-0.2 rad, else straight.
DrivingCommand command_from_route(const MotionPath& ego, Scalar t);

// Oriented BEV box of an agent at time t.
OrientedBox2D agent_box_at(const WorldAgent& agent, Scalar t);

// Full procedural generation: world model, per-frame ground truth in the
// ego frame, multi-sweep radar, and synthetic camera features.
std::vector<Frame> generate_scene(const ScenarioConfig& cfg);

}  // namespace rcf

#include "rcf/world.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "rcf/geometry.hpp"
#include "rcf/rng.hpp"

namespace rcf {

namespace {

constexpr Scalar kRoadHalfWidth = 7.0;
constexpr Scalar kLaneOffset = 1.75;
constexpr Scalar kBoundarySpacing = 10.0;  // m between boundary waypoints

void ctrv_step(Vec2& p, Scalar& yaw, Scalar speed, Scalar yaw_rate, Scalar dt) {
  if (std::abs(yaw_rate) < 1e-9) {
    p += speed * dt * Vec2(std::cos(yaw), std::sin(yaw));
  } else {
    const Scalar next = yaw + yaw_rate * dt;
    p.x() += speed / yaw_rate * (std::sin(next) - std::sin(yaw));
    p.y() += speed / yaw_rate * (std::cos(yaw) - std::cos(next));
    yaw = next;
  }
}

Scalar wrap_angle(Scalar a) {
  while (a > M_PI) a -= 2.0 * M_PI;
  while (a < -M_PI) a += 2.0 * M_PI;
  return a;
}

// Straight polyline from a to b with ~spacing between waypoints, <= 20 points.
PointsXY line_polyline(const Vec2& a, const Vec2& b, Scalar spacing = kBoundarySpacing) {
  const Scalar len = (b - a).norm();
  const int n = std::min(20, std::max(2, static_cast<int>(std::ceil(len / spacing)) + 1));
  PointsXY pts(n, 2);
  for (int i = 0; i < n; ++i) {
    const Vec2 p = a + (static_cast<Scalar>(i) / (n - 1)) * (b - a);
    pts.row(i) = p.transpose();
  }
  return pts;
}

// Arc around `center` from angle a0 to a1 at given radius, <= 20 points.
PointsXY arc_polyline(const Vec2& center, Scalar radius, Scalar a0, Scalar a1) {
  const int n = std::min(20, std::max(2, static_cast<int>(std::ceil(std::abs(a1 - a0) * radius /
                                                                    kBoundarySpacing)) +
                                             1));
  PointsXY pts(n, 2);
  for (int i = 0; i < n; ++i) {
    const Scalar a = a0 + (a1 - a0) * static_cast<Scalar>(i) / (n - 1);
    pts.row(i) = (center + radius * Vec2(std::cos(a), std::sin(a))).transpose();
  }
  return pts;
}

}  // namespace

void validate_config(const ScenarioConfig& cfg) {
  std::ostringstream bad;
  if (cfg.num_agents < 0) bad << "num_agents must be >= 0; ";
  if (!(cfg.scene_duration > 0.0)) bad << "scene_duration must be > 0; ";
  if (cfg.map_template != "straight" && cfg.map_template != "t_junction" &&
      cfg.map_template != "curve") {
    bad << "map_template must be straight, t_junction, or curve; ";
  }
  if (!(cfg.weather.dropout >= 0.0 && cfg.weather.dropout < 1.0)) bad << "dropout must be in [0,1); ";
  if (!(cfg.weather.position_noise >= 0.0)) bad << "position_noise must be >= 0; ";
  if (!(cfg.agent_speed_min > 0.0 && cfg.agent_speed_max >= cfg.agent_speed_min)) {
    bad << "agent speed range must satisfy 0 < min <= max; ";
  }
  if (!(cfg.frame_rate > 0.0)) bad << "frame_rate must be > 0; ";
  if (!(cfg.radar.max_range > 0.0)) bad << "radar max_range must be > 0; ";
  if (cfg.radar.num_sweeps < 1) bad << "radar num_sweeps must be >= 1; ";
  if (!(cfg.radar.sweep_period > 0.0)) bad << "radar sweep_period must be > 0; ";
  if (!(cfg.radar.fov > 0.0)) bad << "radar fov must be > 0; ";
  if (cfg.cameras.image_width < 8 || cfg.cameras.image_height < 8) {
    bad << "camera image size must be at least 8x8; ";
  }
  if (cfg.cameras.grid_width < 2 || cfg.cameras.grid_height < 2) {
    bad << "camera grid must be at least 2x2; ";
  }
  if (cfg.cameras.channels < 1) bad << "camera channels must be >= 1; ";
  const std::string msg = bad.str();
  if (!msg.empty()) throw std::invalid_argument("invalid scenario config: " + msg);
}

Pose2D MotionPath::pose_at(Scalar t) const {
  Vec2 p = start_position;
  Scalar yaw = start_yaw;
  if (segments.empty()) return {p, yaw};
  Scalar remaining = t;
  for (size_t i = 0; i < segments.size(); ++i) {
    const bool last = i + 1 == segments.size();
    const Scalar dt = (last || remaining <= segments[i].duration) ? remaining : segments[i].duration;
    ctrv_step(p, yaw, segments[i].speed, segments[i].yaw_rate, dt);
    remaining -= dt;
    if (last || remaining <= 0.0) break;
  }
  return {p, yaw};
}

Vec2 MotionPath::velocity_at(Scalar t) const {
  const Pose2D pose = pose_at(t);
  return speed_at(t) * Vec2(std::cos(pose.yaw), std::sin(pose.yaw));
}

Scalar MotionPath::speed_at(Scalar t) const {
  if (segments.empty()) return 0.0;
  Scalar acc = 0.0;
  for (size_t i = 0; i < segments.size(); ++i) {
    acc += segments[i].duration;
    if (t <= acc || i + 1 == segments.size()) return segments[i].speed;
  }
  return segments.back().speed;
}

Vec3 agent_class_dims(int class_id) {
  switch (class_id) {
    case 0: return Vec3(1.9, 1.6, 4.5);   // car (w, h, l)
    case 1: return Vec3(2.5, 3.2, 8.0);   // truck
    default: return Vec3(0.6, 1.7, 0.6);  // pedestrian
  }
}

DrivingCommand command_from_route(const MotionPath& ego, Scalar t) {
  const Scalar horizon = kPlanSteps * kTrajectoryDt;
  const Scalar dyaw = wrap_angle(ego.pose_at(t + horizon).yaw - ego.pose_at(t).yaw);
  if (dyaw > 0.2) return DrivingCommand::kTurnLeft;
  if (dyaw < -0.2) return DrivingCommand::kTurnRight;
  return DrivingCommand::kGoStraight;
}

OrientedBox2D agent_box_at(const WorldAgent& agent, Scalar t) {
  const Pose2D pose = agent.path.pose_at(t);
  OrientedBox2D box;
  box.center = pose.translation;
  box.yaw = pose.yaw;
  box.half_extents = Vec2(0.5 * agent.dims(0), 0.5 * agent.dims(2));
  return box;
}

namespace {

void add_straight_map(WorldModel& world, Scalar x0, Scalar x1, bool with_crossing) {
  world.map.push_back({line_polyline(Vec2(x0, kRoadHalfWidth), Vec2(x1, kRoadHalfWidth)),
                       kMapClassBoundary});
  world.map.push_back({line_polyline(Vec2(x0, -kRoadHalfWidth), Vec2(x1, -kRoadHalfWidth)),
                       kMapClassBoundary});
  world.map.push_back({line_polyline(Vec2(x0, 0.0), Vec2(x1, 0.0)), kMapClassDivider});
  if (with_crossing) {
    world.map.push_back({line_polyline(Vec2(40.0, -kRoadHalfWidth), Vec2(40.0, kRoadHalfWidth), 3.5),
                         kMapClassCrossing});
    world.map.push_back({line_polyline(Vec2(43.0, -kRoadHalfWidth), Vec2(43.0, kRoadHalfWidth), 3.5),
                         kMapClassCrossing});
  }
}

void add_curve_map(WorldModel& world, Scalar radius, int direction) {
  // Road curves around (0, direction * radius); ego starts at the origin
  // heading +x along the centerline.
  const Vec2 center(0.0, direction * radius);
  const Scalar a0 = direction > 0 ? -M_PI / 2.0 - 0.8 : M_PI / 2.0 - 1.6;
  const Scalar a1 = direction > 0 ? -M_PI / 2.0 + 1.6 : M_PI / 2.0 + 0.8;
  world.map.push_back({arc_polyline(center, radius - direction * kRoadHalfWidth, a0, a1),
                       kMapClassBoundary});
  world.map.push_back({arc_polyline(center, radius + direction * kRoadHalfWidth, a0, a1),
                       kMapClassBoundary});
  world.map.push_back({arc_polyline(center, radius, a0, a1), kMapClassDivider});
}

void add_t_junction_map(WorldModel& world) {
  const Scalar bx = 31.0;  // branch centerline
  const Scalar mouth0 = bx - kRoadHalfWidth, mouth1 = bx + kRoadHalfWidth;
  world.map.push_back({line_polyline(Vec2(-60.0, kRoadHalfWidth), Vec2(mouth0, kRoadHalfWidth)),
                       kMapClassBoundary});
  world.map.push_back({line_polyline(Vec2(mouth1, kRoadHalfWidth), Vec2(120.0, kRoadHalfWidth)),
                       kMapClassBoundary});
  world.map.push_back({line_polyline(Vec2(-60.0, -kRoadHalfWidth), Vec2(120.0, -kRoadHalfWidth)),
                       kMapClassBoundary});
  world.map.push_back({line_polyline(Vec2(mouth0, kRoadHalfWidth), Vec2(mouth0, 90.0)),
                       kMapClassBoundary});
  world.map.push_back({line_polyline(Vec2(mouth1, kRoadHalfWidth), Vec2(mouth1, 90.0)),
                       kMapClassBoundary});
  world.map.push_back({line_polyline(Vec2(-60.0, 0.0), Vec2(120.0, 0.0)), kMapClassDivider});
  world.map.push_back({line_polyline(Vec2(bx, kRoadHalfWidth), Vec2(bx, 90.0)), kMapClassDivider});
}

MotionPath make_agent_path(const ScenarioConfig& cfg, Rng& rng, int class_id, int direction,
                           Scalar radius_curve, int curve_dir) {
  MotionPath path;
  Scalar speed = rng.uniform(cfg.agent_speed_min, cfg.agent_speed_max);
  if (class_id == 1) speed *= 0.8;
  if (class_id == 2) speed = rng.uniform(1.0, 1.8);

  if (class_id == 2) {
    // Pedestrian: crosses the road or walks the roadside.
    if (rng.bernoulli(0.5)) {
      const Scalar x = rng.uniform(20.0, 50.0);
      path.start_position = Vec2(x, rng.bernoulli(0.5) ? -(kRoadHalfWidth + 1.5)
                                                       : (kRoadHalfWidth + 1.5));
      path.start_yaw = path.start_position.y() < 0 ? M_PI / 2.0 : -M_PI / 2.0;
    } else {
      path.start_position = Vec2(rng.uniform(-20.0, 60.0), kRoadHalfWidth + 1.5);
      path.start_yaw = rng.bernoulli(0.5) ? 0.0 : M_PI;
    }
    path.segments.push_back({1e6, speed, 0.0});
    return path;
  }

  const Scalar lane = direction > 0 ? -kLaneOffset : kLaneOffset;
  if (cfg.map_template == "curve") {
    // Follow the arc lane around (0, curve_dir * radius).
    const Vec2 center(0.0, curve_dir * radius_curve);
    const Scalar lane_radius = radius_curve - curve_dir * lane;
    const Scalar s = rng.uniform(-30.0, 60.0);  // arc length from ego start
    const Scalar base = curve_dir > 0 ? -M_PI / 2.0 : M_PI / 2.0;
    const Scalar ang = base + curve_dir * s / radius_curve;
    path.start_position = center + lane_radius * Vec2(std::cos(ang), std::sin(ang));
    const Scalar tangent = ang + curve_dir * M_PI / 2.0;
    path.start_yaw = direction > 0 ? tangent : wrap_angle(tangent + M_PI);
    path.segments.push_back({1e6, speed, direction * curve_dir * speed / lane_radius});
  } else {
    Scalar x = rng.uniform(-40.0, 70.0);
    if (std::abs(x) < 10.0) x += 20.0;  // keep the ego spawn clear
    path.start_position = Vec2(x, lane);
    path.start_yaw = direction > 0 ? 0.0 : M_PI;
    path.segments.push_back({1e6, speed, 0.0});
  }
  return path;
}

}  // namespace

WorldModel build_world(const ScenarioConfig& cfg) {
  validate_config(cfg);
  Rng rng(derive_seed(cfg.seed, 1));
  WorldModel world;

  const Scalar curve_radius = 80.0;
  const int curve_dir = rng.bernoulli(0.5) ? 1 : -1;

  if (cfg.map_template == "straight") {
    add_straight_map(world, -60.0, 120.0, true);
    world.ego.segments.push_back({1e6, 7.0, 0.0});
  } else if (cfg.map_template == "curve") {
    add_curve_map(world, curve_radius, curve_dir);
    world.ego.segments.push_back({1e6, 7.0, curve_dir * 7.0 / curve_radius});
  } else {
    add_t_junction_map(world);
    // Straight approach, quarter-circle left turn onto the branch, straight.
    world.ego.segments.push_back({3.0, 7.0, 0.0});
    world.ego.segments.push_back({(M_PI / 2.0) / 0.7, 7.0, 0.7});
    world.ego.segments.push_back({1e6, 7.0, 0.0});
  }

  // Agents must keep clear of the ego path over the scene plus the planning
  // horizon, so ground-truth plans are collision-free by construction.
  const Scalar clearance_end = cfg.scene_duration + kPlanSteps * kTrajectoryDt;
  auto clear_of_ego = [&](const MotionPath& path) {
    for (Scalar t = 0.0; t <= clearance_end; t += 0.25) {
      const Vec2 ego = world.ego.pose_at(t).translation;
      if ((path.pose_at(t).translation - ego).norm() < 4.5) return false;
    }
    return true;
  };

  for (int i = 0; i < cfg.num_agents; ++i) {
    WorldAgent agent;
    const Scalar r = rng.uniform();
    agent.class_id = r < 0.6 ? 0 : (r < 0.8 ? 1 : 2);
    agent.id = i + 1;
    agent.dims = agent_class_dims(agent.class_id);
    for (int attempt = 0; attempt < 40; ++attempt) {
      const int direction = rng.bernoulli(0.35) ? -1 : 1;
      agent.path = make_agent_path(cfg, rng, agent.class_id, direction, curve_radius, curve_dir);
      if (clear_of_ego(agent.path)) break;
    }
    world.agents.push_back(std::move(agent));
  }
  return world;
}

namespace {

Vec11 agent_anchor_in_ego(const WorldAgent& agent, Scalar t, const Pose2D& ego_inv) {
  const Pose2D pose = agent.path.pose_at(t);
  const Vec2 vel = agent.path.velocity_at(t);
  const Pose2D local = compose_pose(ego_inv, pose);
  const Vec2 vel_ego = ego_inv.rotation() * vel;
  Vec11 a;
  a[anchor::kX] = local.translation.x();
  a[anchor::kY] = local.translation.y();
  a[anchor::kZ] = 0.5 * agent.dims(1);
  a[anchor::kW] = agent.dims(0);
  a[anchor::kH] = agent.dims(1);
  a[anchor::kL] = agent.dims(2);
  a[anchor::kSinYaw] = std::sin(local.yaw);
  a[anchor::kCosYaw] = std::cos(local.yaw);
  a[anchor::kVx] = vel_ego.x();
  a[anchor::kVy] = vel_ego.y();
  a[anchor::kVz] = 0.0;
  return a;
}

Scalar polyline_min_distance(const PointsXY& pts, const Vec2& p) {
  return point_polyline_distance(p, pts).distance;
}

}  // namespace

std::vector<Frame> generate_scene(const ScenarioConfig& cfg) {
  const WorldModel world = build_world(cfg);
  const int num_frames = static_cast<int>(std::floor(cfg.scene_duration * cfg.frame_rate)) + 1;

  std::vector<PointsXY> metal;
  for (const auto& elem : world.map) {
    if (elem.class_id == kMapClassBoundary) metal.push_back(elem.waypoints);
  }

  const std::vector<CameraModel> cams = make_camera_rig(cfg.cameras);
  std::vector<Frame> frames;
  for (int f = 0; f < num_frames; ++f) {
    Frame frame;
    frame.timestamp = static_cast<Scalar>(f) / cfg.frame_rate;
    frame.ego_pose = world.ego.pose_at(frame.timestamp);
    frame.ego_velocity = Vec3(world.ego.speed_at(frame.timestamp), 0.0, 0.0);
    frame.command = command_from_route(world.ego, frame.timestamp);
    frame.cameras = cams;
    const Pose2D ego_inv = inverse_pose(frame.ego_pose);

    for (const auto& agent : world.agents) {
      const Pose2D pose = agent.path.pose_at(frame.timestamp);
      if ((pose.translation - frame.ego_pose.translation).norm() > cfg.radar.max_range) continue;
      GtAgent gt;
      gt.anchor = agent_anchor_in_ego(agent, frame.timestamp, ego_inv);
      gt.class_id = agent.class_id;
      gt.id = agent.id;
      gt.future.resize(kMotionSteps, 3);
      for (int k = 0; k < kMotionSteps; ++k) {
        const Pose2D fut =
            compose_pose(ego_inv, agent.path.pose_at(frame.timestamp + (k + 1) * kTrajectoryDt));
        gt.future(k, 0) = fut.translation.x();
        gt.future(k, 1) = fut.translation.y();
        gt.future(k, 2) = wrap_angle(fut.yaw);
      }
      frame.gt_agents.push_back(std::move(gt));
    }

    for (const auto& elem : world.map) {
      if (polyline_min_distance(elem.waypoints, frame.ego_pose.translation) > cfg.radar.max_range) {
        continue;
      }
      GtMapElement gt;
      gt.waypoints = transform_points(ego_inv, elem.waypoints);
      gt.class_id = elem.class_id;
      frame.gt_map.push_back(std::move(gt));
    }

    frame.gt_ego_future.resize(kPlanSteps, 2);
    for (int k = 0; k < kPlanSteps; ++k) {
      const Pose2D fut =
          compose_pose(ego_inv, world.ego.pose_at(frame.timestamp + (k + 1) * kTrajectoryDt));
      frame.gt_ego_future.row(k) = fut.translation.transpose();
    }

    std::vector<std::vector<RadarPoint>> sweeps;
    std::vector<Pose2D> sweep_poses;
    for (int j = cfg.radar.num_sweeps - 1; j >= 0; --j) {
      const Scalar t = frame.timestamp - j * cfg.radar.sweep_period;
      SweepScene sweep;
      sweep.ego_pose = world.ego.pose_at(t);
      const Vec2 ev = world.ego.velocity_at(t);
      sweep.ego_velocity = Vec3(ev.x(), ev.y(), 0.0);
      for (const auto& agent : world.agents) {
        const Vec2 av = agent.path.velocity_at(t);
        sweep.agents.push_back({agent_box_at(agent, t), Vec3(av.x(), av.y(), 0.0),
                                agent.class_id, agent.id});
      }
      sweep.metal_boundaries = metal;
      sweep.position_noise = cfg.weather.position_noise;
      sweep.dropout = cfg.weather.dropout;
      sweeps.push_back(simulate_sweep(
          sweep, cfg.radar,
          derive_seed(cfg.seed, 1000 + static_cast<std::uint64_t>(f), static_cast<std::uint64_t>(j))));
      sweep_poses.push_back(sweep.ego_pose);
    }
    frame.radar_points = accumulate_sweeps(sweeps, sweep_poses, cfg.radar.sweep_period);
    // Ego motion can carry older-sweep points past the sensor range; the
    // frame contract keeps every input inside it.
    std::erase_if(frame.radar_points, [&](const RadarPoint& p) {
      return p.position.head<2>().norm() > cfg.radar.max_range;
    });

    frame.feature_seed = derive_seed(cfg.seed, 2000 + static_cast<std::uint64_t>(f));
    frame.camera_features =
        render_camera_features(frame.gt_agents, frame.gt_map, cams, cfg.cameras.grid_height,
                               cfg.cameras.grid_width, cfg.cameras.channels, frame.feature_seed);
    frames.push_back(std::move(frame));
  }
  return frames;
}

}  // namespace rcf

#include "rcf/radar_sim.hpp"

#include <cmath>
#include <stdexcept>

#include "rcf/geometry.hpp"
#include "rcf/rng.hpp"

namespace rcf {

Scalar class_rcs(int class_id) {
  switch (class_id) {
    case 0: return 10.0;   // car
    case 1: return 25.0;   // truck
    case 2: return 2.0;    // pedestrian
    default: return 15.0;  // metal map structure
  }
}

Scalar doppler_radial_velocity(const Vec3& point_pos, const Vec3& point_vel, const Vec3& ego_vel,
                               const Vec3& sensor_pos) {
  const Vec3 to_point = point_pos - sensor_pos;
  const Scalar range = to_point.norm();
  if (range <= 1e-9) {
    throw std::invalid_argument("doppler_radial_velocity: point coincides with sensor");
  }
  return (point_vel - ego_vel).dot(to_point / range);
}

namespace {

// Uniform point on the BEV perimeter of an oriented box.
Vec2 perimeter_point(const OrientedBox2D& box, Scalar s) {
  const Scalar hl = box.half_extents(1), hw = box.half_extents(0);
  const Scalar perim = 4.0 * (hl + hw);
  Scalar d = s * perim;
  Vec2 local;
  if (d < 2.0 * hl) {
    local = Vec2(-hl + d, hw);                       // left side, -l to +l
  } else if (d < 2.0 * hl + 2.0 * hw) {
    local = Vec2(hl, hw - (d - 2.0 * hl));           // front, +w to -w
  } else if (d < 4.0 * hl + 2.0 * hw) {
    local = Vec2(hl - (d - 2.0 * hl - 2.0 * hw), -hw);  // right side
  } else {
    local = Vec2(-hl, -hw + (d - 4.0 * hl - 2.0 * hw));  // rear
  }
  const Scalar c = std::cos(box.yaw), sn = std::sin(box.yaw);
  return box.center + Vec2(c * local.x() - sn * local.y(), sn * local.x() + c * local.y());
}

bool within_fov(const Vec2& sensor_world, Scalar sensor_yaw, const Vec2& p, Scalar fov) {
  if (fov >= 2.0 * M_PI - 1e-9) return true;
  const Vec2 d = p - sensor_world;
  if (d.norm() <= 1e-12) return true;
  Scalar az = std::atan2(d.y(), d.x()) - sensor_yaw;
  while (az > M_PI) az -= 2.0 * M_PI;
  while (az < -M_PI) az += 2.0 * M_PI;
  return std::abs(az) <= 0.5 * fov;
}

bool occluded(const Vec2& sensor_world, const Vec2& target, const SweepScene& scene) {
  for (const auto& body : scene.agents) {
    if (segment_intersects_box(sensor_world, target, body.box)) return true;
  }
  return false;
}

struct Candidate {
  Vec2 world_pos;
  Vec3 velocity;  // world frame
  int class_id;
};

}  // namespace

std::vector<RadarPoint> simulate_sweep(const SweepScene& scene, const RadarSensorConfig& sensor,
                                       std::uint64_t seed) {
  Rng rng(seed);
  const Pose2D sensor_pose = compose_pose(scene.ego_pose, sensor.mount);
  const Vec2 sensor_world = sensor_pose.translation;
  const Vec3 sensor_world3(sensor_world.x(), sensor_world.y(), 0.0);

  std::vector<Candidate> candidates;
  for (const auto& body : scene.agents) {
    const int count = std::max(0, static_cast<int>(std::lround(sensor.points_per_agent)));
    for (int i = 0; i < count; ++i) {
      candidates.push_back({perimeter_point(body.box, rng.uniform()), body.velocity, body.class_id});
    }
  }
  for (const auto& boundary : scene.metal_boundaries) {
    const Scalar length = polyline_length(boundary);
    const int count = static_cast<int>(std::lround(length * sensor.boundary_points_per_meter));
    for (int i = 0; i < count; ++i) {
      const Scalar target = rng.uniform() * length;
      Scalar walked = 0.0;
      Vec2 p = boundary.row(boundary.rows() - 1).transpose();
      for (Eigen::Index s = 0; s + 1 < boundary.rows(); ++s) {
        const Vec2 a = boundary.row(s).transpose(), b = boundary.row(s + 1).transpose();
        const Scalar seg = (b - a).norm();
        if (walked + seg >= target) {
          p = a + (seg > 0 ? (target - walked) / seg : 0.0) * (b - a);
          break;
        }
        walked += seg;
      }
      candidates.push_back({p, Vec3::Zero(), -1});
    }
  }

  const Mat2 world_to_ego = scene.ego_pose.rotation().transpose();
  std::vector<RadarPoint> points;
  for (const auto& c : candidates) {
    const Scalar range = (c.world_pos - sensor_world).norm();
    if (range > sensor.max_range || range <= 1e-9) continue;
    if (!within_fov(sensor_world, sensor_pose.yaw, c.world_pos, sensor.fov)) continue;
    if (occluded(sensor_world, c.world_pos, scene)) continue;

    const Vec3 pos_world3(c.world_pos.x(), c.world_pos.y(), 0.0);
    RadarPoint rp;
    rp.doppler = doppler_radial_velocity(pos_world3, c.velocity, scene.ego_velocity, sensor_world3);
    rp.rcs = std::max(0.1, class_rcs(c.class_id) + sensor.rcs_noise * rng.normal());
    Vec2 noisy = c.world_pos;
    if (scene.position_noise > 0.0) {
      noisy.x() += scene.position_noise * rng.normal();
      noisy.y() += scene.position_noise * rng.normal();
    }
    const bool dropped = scene.dropout > 0.0 && rng.bernoulli(scene.dropout);
    if (dropped) continue;
    const Vec2 ego_xy = world_to_ego * (noisy - scene.ego_pose.translation);
    rp.position = Vec3(ego_xy.x(), ego_xy.y(), 0.0);
    rp.sweep_offset = 0.0;
    points.push_back(rp);
  }
  return points;
}

std::vector<RadarPoint> accumulate_sweeps(const std::vector<std::vector<RadarPoint>>& sweeps,
                                          const std::vector<Pose2D>& ego_poses,
                                          Scalar sweep_period) {
  if (sweeps.size() != ego_poses.size()) {
    throw std::invalid_argument("accumulate_sweeps: sweeps and poses must align");
  }
  if (sweeps.empty()) return {};
  const Pose2D current_inv = inverse_pose(ego_poses.back());
  std::vector<RadarPoint> out;
  for (size_t i = 0; i < sweeps.size(); ++i) {
    const Pose2D rel = compose_pose(current_inv, ego_poses[i]);
    const Scalar offset = static_cast<Scalar>(sweeps.size() - 1 - i) * sweep_period;
    for (RadarPoint rp : sweeps[i]) {
      rp.position = transform_point(rel, rp.position);
      rp.sweep_offset = offset;
      out.push_back(rp);
    }
  }
  return out;
}

}  // namespace rcf

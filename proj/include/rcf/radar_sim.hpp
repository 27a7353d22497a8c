#pragma once

#include <cstdint>
#include <vector>

#include "rcf/types.hpp"

namespace rcf {

// Radar sensor description. The sensor is rigidly mounted on the ego body;
// returns are reported in the ego frame of the emitting sweep.
struct RadarSensorConfig {
  Pose2D mount;                   // sensor in ego frame
  Scalar max_range = 50.0;        // m
  Scalar fov = 2.0 * M_PI;        // azimuth field of view, radians
  Scalar points_per_agent = 6.0;  // expected returns per visible agent
  int num_sweeps = 4;
  Scalar sweep_period = 0.1;             // s between sweeps
  Scalar boundary_points_per_meter = 0.25;  // return density on metal boundaries
  Scalar rcs_noise = 0.5;
};

// World-frame snapshot of everything the radar can see at one sweep time.
struct SweepScene {
  struct Body {
    OrientedBox2D box;          // world frame
    Vec3 velocity = Vec3::Zero();  // world frame, m/s
    int class_id = 0;
    std::int64_t id = -1;
  };
  Pose2D ego_pose;               // ego in world
  Vec3 ego_velocity = Vec3::Zero();  // world frame
  std::vector<Body> agents;
  std::vector<PointsXY> metal_boundaries;  // world frame, radar-visible map structure
  Scalar position_noise = 0.0;   // m, Gaussian sigma on x and y
  Scalar dropout = 0.0;          // per-return drop probability
};

// Radial velocity of a point target as measured from the sensor:
// (point_vel - ego_vel) . unit(point_pos - sensor_pos); positive = receding.
// Throws std::invalid_argument when the point coincides with the sensor.
Scalar doppler_radial_velocity(const Vec3& point_pos, const Vec3& point_vel, const Vec3& ego_vel,
                               const Vec3& sensor_pos);

// One radar sweep: samples returns on agent box perimeters and metal map
// boundaries within range and field of view, assigns Doppler from the true
// geometry, then applies position noise and dropout. Returns whose ray from
// the sensor crosses any agent box (including the emitter's own) are
// occluded. Output points are in the sweep's ego frame.
std::vector<RadarPoint> simulate_sweep(const SweepScene& scene, const RadarSensorConfig& sensor,
                                       std::uint64_t seed);

// Transforms historical sweeps into the frame of the last pose and stamps
// sweep_offset = (n-1-i) * sweep_period. Sweeps are ordered oldest to
// newest; lists must have equal length.
std::vector<RadarPoint> accumulate_sweeps(const std::vector<std::vector<RadarPoint>>& sweeps,
                                          const std::vector<Pose2D>& ego_poses,
                                          Scalar sweep_period = 0.1);

// Per-class radar reflectivity baseline.
Scalar class_rcs(int class_id);

}  // namespace rcf

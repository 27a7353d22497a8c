#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstdint>
#include <string>
#include <vector>

namespace rcf {

// Scalar policy: one floating type project-wide, aliases templated on it.
using Scalar = double;

template <class F> using V2 = Eigen::Matrix<F, 2, 1>;
template <class F> using V3 = Eigen::Matrix<F, 3, 1>;
template <class F> using VX = Eigen::Matrix<F, Eigen::Dynamic, 1>;
template <class F> using MX = Eigen::Matrix<F, Eigen::Dynamic, Eigen::Dynamic>;

using Vec2 = V2<Scalar>;
using Vec3 = V3<Scalar>;
using VecX = VX<Scalar>;
using MatX = MX<Scalar>;
using Mat2 = Eigen::Matrix<Scalar, 2, 2>;
using Mat3 = Eigen::Matrix<Scalar, 3, 3>;
using Vec11 = Eigen::Matrix<Scalar, 11, 1>;
// Waypoint lists and trajectories: one row per point.
using PointsXY = Eigen::Matrix<Scalar, Eigen::Dynamic, 2>;

// Anchor layout: {x, y, z, w, h, l, sin yaw, cos yaw, vx, vy, vz}.
namespace anchor {
constexpr int kX = 0, kY = 1, kZ = 2;
constexpr int kW = 3, kH = 4, kL = 5;
constexpr int kSinYaw = 6, kCosYaw = 7;
constexpr int kVx = 8, kVy = 9, kVz = 10;
constexpr int kDim = 11;
}  // namespace anchor

// One radar return in the ego frame of its frame.
struct RadarPoint {
  Vec3 position = Vec3::Zero();  // m
  Scalar rcs = 0.0;              // dimensionless reflectivity
  Scalar doppler = 0.0;          // m/s radial, positive = receding
  Scalar sweep_offset = 0.0;     // s before the current frame, >= 0
};

struct AgentInstance {
  Vec11 anchor = Vec11::Zero();
  VecX feature;       // dim C
  VecX class_scores;  // per category, in [0,1]
  std::int64_t instance_id = -1;

  Vec2 center_xy() const { return anchor.segment<2>(anchor::kX); }
  Vec3 center() const { return anchor.segment<3>(anchor::kX); }
  Scalar yaw() const { return std::atan2(anchor[anchor::kSinYaw], anchor[anchor::kCosYaw]); }
  Vec3 velocity() const { return anchor.segment<3>(anchor::kVx); }
};

struct MapPolyline {
  PointsXY waypoints;  // N_p x 2, 2 <= N_p <= 20
  VecX feature;
  VecX class_scores;

  int num_waypoints() const { return static_cast<int>(waypoints.rows()); }
};

// Yaw-only rigid transform in the BEV plane.
// Convention: x forward, y left, yaw counter-clockwise from +x.
struct Pose2D {
  Vec2 translation = Vec2::Zero();
  Scalar yaw = 0.0;

  static Pose2D identity() { return {}; }
  Mat2 rotation() const {
    const Scalar c = std::cos(yaw), s = std::sin(yaw);
    Mat2 r;
    r << c, -s, s, c;
    return r;
  }
};

// Timestamped 2D path at fixed dt = 0.5 s; points[k] is the position
// at (k+1)*dt relative to the emitting frame.
struct Trajectory {
  PointsXY points;
  Scalar score = 0.0;
};

struct TrajectorySet {
  std::vector<Trajectory> modes;
};

constexpr Scalar kTrajectoryDt = 0.5;  // s, 2 Hz annotation rate
constexpr int kPlanSteps = 12;         // 6 s planning horizon
constexpr int kMotionSteps = 24;       // 12 s motion horizon

// Model-wide configuration; defaults follow the reference operating point
// (900 detection anchors, 100 map polylines, 6 decoder layers, 50 m range).
struct FusionConfig {
  Scalar alpha = 1.0;   // distance-penalty weight in the attention kernel
  Scalar r_max = 50.0;  // m, perception range / distance normalizer
  int embed_dim = 64;
  int num_agent_anchors = 900;
  int num_map_anchors = 100;
  int num_decoder_layers = 6;
  int topk_radar = 32;
  int num_heads = 4;
  int num_agent_classes = 3;
  int num_map_classes = 3;
  int num_modes = 6;
  int map_waypoints = 20;
  int num_cameras = 2;
  int plan_steps = kPlanSteps;
  int motion_steps = kMotionSteps;
  Scalar frustum_pixel_radius = 64.0;  // px, frustum cross-attention locality
};

// Pinhole camera with a rigid ego->camera transform.
// Camera frame: +z optical axis, +x right in image, +y down in image.
struct CameraModel {
  Scalar fx = 1.0, fy = 1.0;
  Scalar cx = 0.0, cy = 0.0;
  int image_width = 0, image_height = 0;
  Mat3 rot_ego_to_cam = Mat3::Identity();
  Vec3 t_ego_to_cam = Vec3::Zero();

  Vec3 to_camera(const Vec3& p_ego) const { return rot_ego_to_cam * p_ego + t_ego_to_cam; }
};

// Camera mounted on the ego body at `mount`, optical axis along ego-frame
// heading `yaw`, optionally raised to `height`.
CameraModel make_camera(const Vec2& mount, Scalar yaw, Scalar height, Scalar focal,
                        int image_width, int image_height);

// Dense grid of embeddings, cells row-major (row * width + col), one row of
// `values` per cell.
struct FeatureGrid {
  int height = 0, width = 0;
  MatX values;  // (height*width) x C

  int cells() const { return height * width; }
  int channels() const { return static_cast<int>(values.cols()); }
  auto cell(int row, int col) { return values.row(row * width + col); }
  auto cell(int row, int col) const { return values.row(row * width + col); }
  static FeatureGrid zero(int height, int width, int channels) {
    FeatureGrid g;
    g.height = height;
    g.width = width;
    g.values = MatX::Zero(height * width, channels);
    return g;
  }
};

struct OrientedBox2D {
  Vec2 center = Vec2::Zero();
  Vec2 half_extents = Vec2::Ones();  // (w/2, l/2); w across, l along heading
  Scalar yaw = 0.0;

  // Corner order: (+l,+w), (+l,-w), (-l,-w), (-l,+w) in the box frame.
  Eigen::Matrix<Scalar, 4, 2> corners() const;
};

enum class DrivingCommand { kTurnLeft = 0, kTurnRight = 1, kGoStraight = 2 };
constexpr int kNumCommands = 3;

const char* to_string(DrivingCommand cmd);

// Ground-truth agent annotation. `future` rows are (x, y, yaw) at steps of
// kTrajectoryDt in this frame's ego frame, kMotionSteps rows.
struct GtAgent {
  Vec11 anchor = Vec11::Zero();
  int class_id = 0;
  std::int64_t id = -1;
  MatX future;  // kMotionSteps x 3
};

struct GtMapElement {
  PointsXY waypoints;
  int class_id = 0;
};

// Map element classes: metal boundaries return radar energy; dividers and
// crossings are paint, visible only to cameras.
constexpr int kMapClassBoundary = 0, kMapClassDivider = 1, kMapClassCrossing = 2;

struct Frame {
  Scalar timestamp = 0.0;
  Pose2D ego_pose;                  // ego in world
  Vec3 ego_velocity = Vec3::Zero(); // ego frame, m/s
  DrivingCommand command = DrivingCommand::kGoStraight;
  std::vector<RadarPoint> radar_points;       // multi-sweep, current ego frame
  std::vector<CameraModel> cameras;
  std::vector<FeatureGrid> camera_features;
  std::uint64_t feature_seed = 0;
  std::vector<GtAgent> gt_agents;
  std::vector<GtMapElement> gt_map;
  PointsXY gt_ego_future;  // kPlanSteps x 2, current ego frame
};

// --- Pose arithmetic (free functions, pure) ---

// Rigid composition: (a * b) applies b first, then a.
Pose2D compose_pose(const Pose2D& a, const Pose2D& b);
Pose2D inverse_pose(const Pose2D& p);

Vec2 transform_point(const Pose2D& pose, const Vec2& p);
Vec3 transform_point(const Pose2D& pose, const Vec3& p);  // z passes through
PointsXY transform_points(const Pose2D& pose, const PointsXY& pts);

// Heading-aware transform of an anchor between ego frames: position and
// velocity rotate, yaw shifts, sizes and z/vz pass through.
Vec11 transform_anchor(const Pose2D& pose, const Vec11& anchor);

// --- Frame validation ---

// Returns one message per violated invariant; empty means valid.
std::vector<std::string> validate_frame(const Frame& frame, Scalar perception_range = 50.0);

// Scene-level check on top of per-frame validation (timestamps strictly increasing).
std::vector<std::string> validate_scene(const std::vector<Frame>& frames,
                                        Scalar perception_range = 50.0);

}  // namespace rcf

#include "rcf/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rcf {

Pose2D compose_pose(const Pose2D& a, const Pose2D& b) {
  Pose2D out;
  out.translation = a.translation + a.rotation() * b.translation;
  out.yaw = a.yaw + b.yaw;
  return out;
}

Pose2D inverse_pose(const Pose2D& p) {
  Pose2D out;
  out.yaw = -p.yaw;
  out.translation = -(out.rotation() * p.translation);
  return out;
}

Vec2 transform_point(const Pose2D& pose, const Vec2& p) {
  return pose.rotation() * p + pose.translation;
}

Vec3 transform_point(const Pose2D& pose, const Vec3& p) {
  const Vec2 xy = transform_point(pose, Vec2(p.x(), p.y()));
  return {xy.x(), xy.y(), p.z()};
}

PointsXY transform_points(const Pose2D& pose, const PointsXY& pts) {
  PointsXY out(pts.rows(), 2);
  const Mat2 r = pose.rotation();
  for (Eigen::Index i = 0; i < pts.rows(); ++i) {
    out.row(i) = (r * pts.row(i).transpose() + pose.translation).transpose();
  }
  return out;
}

Vec11 transform_anchor(const Pose2D& pose, const Vec11& a) {
  Vec11 out = a;
  const Vec2 xy = transform_point(pose, Vec2(a[anchor::kX], a[anchor::kY]));
  out[anchor::kX] = xy.x();
  out[anchor::kY] = xy.y();
  const Scalar yaw = std::atan2(a[anchor::kSinYaw], a[anchor::kCosYaw]) + pose.yaw;
  out[anchor::kSinYaw] = std::sin(yaw);
  out[anchor::kCosYaw] = std::cos(yaw);
  const Vec2 v = pose.rotation() * Vec2(a[anchor::kVx], a[anchor::kVy]);
  out[anchor::kVx] = v.x();
  out[anchor::kVy] = v.y();
  return out;
}

CameraModel make_camera(const Vec2& mount, Scalar yaw, Scalar height, Scalar focal,
                        int image_width, int image_height) {
  CameraModel cam;
  cam.fx = cam.fy = focal;
  cam.cx = 0.5 * image_width;
  cam.cy = 0.5 * image_height;
  cam.image_width = image_width;
  cam.image_height = image_height;
  const Scalar c = std::cos(yaw), s = std::sin(yaw);
  const Vec3 forward(c, s, 0.0);
  const Vec3 right(s, -c, 0.0);
  const Vec3 down(0.0, 0.0, -1.0);
  cam.rot_ego_to_cam.row(0) = right.transpose();
  cam.rot_ego_to_cam.row(1) = down.transpose();
  cam.rot_ego_to_cam.row(2) = forward.transpose();
  cam.t_ego_to_cam = -(cam.rot_ego_to_cam * Vec3(mount.x(), mount.y(), height));
  return cam;
}

Eigen::Matrix<Scalar, 4, 2> OrientedBox2D::corners() const {
  const Scalar c = std::cos(yaw), s = std::sin(yaw);
  const Scalar hw = half_extents.x(), hl = half_extents.y();
  // Box frame: +x along heading (length), +y left (width).
  const Scalar lx[4] = {hl, hl, -hl, -hl};
  const Scalar wy[4] = {hw, -hw, -hw, hw};
  Eigen::Matrix<Scalar, 4, 2> out;
  for (int i = 0; i < 4; ++i) {
    out(i, 0) = center.x() + c * lx[i] - s * wy[i];
    out(i, 1) = center.y() + s * lx[i] + c * wy[i];
  }
  return out;
}

const char* to_string(DrivingCommand cmd) {
  switch (cmd) {
    case DrivingCommand::kTurnLeft: return "turn_left";
    case DrivingCommand::kTurnRight: return "turn_right";
    case DrivingCommand::kGoStraight: return "go_straight";
  }
  return "unknown";
}

Scalar segment_projection_param(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const Scalar len2 = ab.squaredNorm();
  if (len2 <= 1e-9 * 1e-9) {
    throw std::invalid_argument("segment_projection_param: zero-length segment");
  }
  const Scalar t = (p - a).dot(ab) / len2;
  return std::clamp(t, Scalar(0), Scalar(1));
}

PolylineProjection point_polyline_distance(const Vec2& p, const PointsXY& waypoints) {
  if (waypoints.rows() < 2) {
    throw std::invalid_argument("point_polyline_distance: polyline needs >= 2 waypoints");
  }
  PolylineProjection best;
  best.distance = std::numeric_limits<Scalar>::infinity();
  for (Eigen::Index i = 0; i + 1 < waypoints.rows(); ++i) {
    const Vec2 a = waypoints.row(i);
    const Vec2 b = waypoints.row(i + 1);
    const Scalar t = segment_projection_param(p, a, b);
    const Scalar d = (p - (a + t * (b - a))).norm();
    if (d < best.distance) {
      best.distance = d;
      best.segment_index = static_cast<int>(i);
      best.t = t;
    }
  }
  return best;
}

std::optional<PixelPoint> project_camera_frame(const Vec3& p_cam, const CameraModel& cam) {
  if (p_cam.z() <= kFrustumNearPlane) return std::nullopt;
  PixelPoint px;
  px.depth = p_cam.z();
  px.u = cam.cx + cam.fx * p_cam.x() / p_cam.z();
  px.v = cam.cy + cam.fy * p_cam.y() / p_cam.z();
  if (px.u < 0.0 || px.u > cam.image_width || px.v < 0.0 || px.v > cam.image_height) {
    return std::nullopt;
  }
  return px;
}

std::optional<PixelPoint> project_to_camera(const Vec3& p_ego, const CameraModel& cam) {
  return project_camera_frame(cam.to_camera(p_ego), cam);
}

Vec3 unproject_pixel(const PixelPoint& px, const CameraModel& cam) {
  return {(px.u - cam.cx) * px.depth / cam.fx, (px.v - cam.cy) * px.depth / cam.fy, px.depth};
}

BilinearStencil bilinear_stencil(int height, int width, Scalar u, Scalar v) {
  BilinearStencil st;
  const Scalar cu = std::clamp(u, Scalar(0), Scalar(width - 1));
  const Scalar cv = std::clamp(v, Scalar(0), Scalar(height - 1));
  st.clamped_u = cu != u;
  st.clamped_v = cv != v;
  const int c0 = std::min(static_cast<int>(std::floor(cu)), width - 2 >= 0 ? width - 2 : 0);
  const int r0 = std::min(static_cast<int>(std::floor(cv)), height - 2 >= 0 ? height - 2 : 0);
  const int c1 = std::min(c0 + 1, width - 1);
  const int r1 = std::min(r0 + 1, height - 1);
  const Scalar fu = cu - c0;
  const Scalar fv = cv - r0;
  st.cell[0] = r0 * width + c0;
  st.cell[1] = r0 * width + c1;
  st.cell[2] = r1 * width + c0;
  st.cell[3] = r1 * width + c1;
  st.weight[0] = (1 - fu) * (1 - fv);
  st.weight[1] = fu * (1 - fv);
  st.weight[2] = (1 - fu) * fv;
  st.weight[3] = fu * fv;
  const Scalar du = st.clamped_u ? 0.0 : 1.0;
  const Scalar dv = st.clamped_v ? 0.0 : 1.0;
  st.dwdu[0] = -(1 - fv) * du;
  st.dwdu[1] = (1 - fv) * du;
  st.dwdu[2] = -fv * du;
  st.dwdu[3] = fv * du;
  st.dwdv[0] = -(1 - fu) * dv;
  st.dwdv[1] = -fu * dv;
  st.dwdv[2] = (1 - fu) * dv;
  st.dwdv[3] = fu * dv;
  return st;
}

VecX bilinear_sample(const FeatureGrid& grid, Scalar u, Scalar v) {
  if (grid.cells() == 0 || grid.values.rows() == 0) {
    throw std::invalid_argument("bilinear_sample: empty grid");
  }
  const BilinearStencil st = bilinear_stencil(grid.height, grid.width, u, v);
  VecX out = VecX::Zero(grid.channels());
  for (int i = 0; i < 4; ++i) {
    out += st.weight[i] * grid.values.row(st.cell[i]).transpose();
  }
  return out;
}

namespace {

// Smallest projection gap over one box's two edge normals; positive = separated.
Scalar max_separation(const OrientedBox2D& ref, const OrientedBox2D& other) {
  const Scalar c = std::cos(ref.yaw), s = std::sin(ref.yaw);
  const Vec2 axes[2] = {Vec2(c, s), Vec2(-s, c)};  // heading, lateral
  const Scalar extents[2] = {ref.half_extents.y(), ref.half_extents.x()};
  const auto corners = other.corners();
  Scalar worst = -std::numeric_limits<Scalar>::infinity();
  for (int k = 0; k < 2; ++k) {
    Scalar lo = std::numeric_limits<Scalar>::infinity();
    Scalar hi = -lo;
    for (int i = 0; i < 4; ++i) {
      const Scalar proj = axes[k].dot(Vec2(corners(i, 0), corners(i, 1)) - ref.center);
      lo = std::min(lo, proj);
      hi = std::max(hi, proj);
    }
    const Scalar gap = std::max(lo - extents[k], -hi - extents[k]);
    worst = std::max(worst, gap);
  }
  return worst;
}

}  // namespace

bool boxes_overlap(const OrientedBox2D& a, const OrientedBox2D& b) {
  return max_separation(a, b) < 0.0 && max_separation(b, a) < 0.0;
}

Scalar polyline_chamfer(const PointsXY& a, const PointsXY& b) {
  if (a.rows() < 2 || b.rows() < 2) {
    throw std::invalid_argument("polyline_chamfer: polylines need >= 2 waypoints");
  }
  Scalar ab = 0.0, ba = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    ab += point_polyline_distance(a.row(i), b).distance;
  }
  for (Eigen::Index i = 0; i < b.rows(); ++i) {
    ba += point_polyline_distance(b.row(i), a).distance;
  }
  return 0.5 * (ab / static_cast<Scalar>(a.rows()) + ba / static_cast<Scalar>(b.rows()));
}

bool segment_intersects_box(const Vec2& p0, const Vec2& p1, const OrientedBox2D& box) {
  // Slab test in the box frame; interior crossing only, endpoints excluded.
  const Mat2 r = Eigen::Rotation2D<Scalar>(-box.yaw).toRotationMatrix();
  const Vec2 q0 = r * (p0 - box.center);
  const Vec2 q1 = r * (p1 - box.center);
  const Vec2 d = q1 - q0;
  // Box frame: x spans length (half_extents.y()), y spans width (half_extents.x()).
  const Scalar hx = box.half_extents.y(), hy = box.half_extents.x();
  Scalar tmin = 0.0, tmax = 1.0;
  const Scalar lo[2] = {-hx, -hy}, hi[2] = {hx, hy};
  for (int k = 0; k < 2; ++k) {
    if (std::abs(d[k]) < 1e-15) {
      // Running exactly on the boundary does not enter the interior.
      if (q0[k] <= lo[k] || q0[k] >= hi[k]) return false;
      continue;
    }
    Scalar t0 = (lo[k] - q0[k]) / d[k];
    Scalar t1 = (hi[k] - q0[k]) / d[k];
    if (t0 > t1) std::swap(t0, t1);
    tmin = std::max(tmin, t0);
    tmax = std::min(tmax, t1);
    if (tmin > tmax) return false;
  }
  constexpr Scalar kEnd = 1e-9;
  return tmax - tmin > kEnd && tmax > kEnd && tmin < 1.0 - kEnd;
}

Scalar aligned_iou_3d(const Vec3& size_a, const Vec3& size_b) {
  const Scalar inter = std::min(size_a.x(), size_b.x()) * std::min(size_a.y(), size_b.y()) *
                       std::min(size_a.z(), size_b.z());
  const Scalar vol_a = size_a.prod();
  const Scalar vol_b = size_b.prod();
  const Scalar uni = vol_a + vol_b - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

Scalar polyline_length(const PointsXY& waypoints) {
  Scalar len = 0.0;
  for (Eigen::Index i = 0; i + 1 < waypoints.rows(); ++i) {
    len += (waypoints.row(i + 1) - waypoints.row(i)).norm();
  }
  return len;
}

PointsXY resample_polyline(const PointsXY& waypoints, int n) {
  if (waypoints.rows() < 2 || n < 2) {
    throw std::invalid_argument("resample_polyline: need >= 2 waypoints and n >= 2");
  }
  const Scalar total = polyline_length(waypoints);
  PointsXY out(n, 2);
  out.row(0) = waypoints.row(0);
  out.row(n - 1) = waypoints.row(waypoints.rows() - 1);
  Eigen::Index seg = 0;
  Scalar seg_start = 0.0;
  Scalar seg_len = (waypoints.row(1) - waypoints.row(0)).norm();
  for (int i = 1; i + 1 < n; ++i) {
    const Scalar target = total * static_cast<Scalar>(i) / (n - 1);
    while (seg + 2 < waypoints.rows() && seg_start + seg_len < target) {
      seg_start += seg_len;
      ++seg;
      seg_len = (waypoints.row(seg + 1) - waypoints.row(seg)).norm();
    }
    const Scalar t = seg_len > 0.0 ? (target - seg_start) / seg_len : 0.0;
    out.row(i) = waypoints.row(seg) + std::clamp(t, Scalar(0), Scalar(1)) *
                                          (waypoints.row(seg + 1) - waypoints.row(seg));
  }
  return out;
}

}  // namespace rcf

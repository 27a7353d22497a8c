#pragma once

#include <optional>

#include "rcf/types.hpp"

namespace rcf {

// Projection parameter of p onto segment [a, b], clamped to [0, 1].
// Throws std::invalid_argument when the segment is degenerate (|b-a| <= 1e-9).
Scalar segment_projection_param(const Vec2& p, const Vec2& a, const Vec2& b);

struct PolylineProjection {
  Scalar distance = 0.0;
  int segment_index = 0;
  Scalar t = 0.0;
};

// Minimum distance from p to the polyline; ties broken by lowest segment index.
// Throws std::invalid_argument for polylines with fewer than 2 waypoints.
PolylineProjection point_polyline_distance(const Vec2& p, const PointsXY& waypoints);

struct PixelPoint {
  Scalar u = 0.0, v = 0.0;
  Scalar depth = 0.0;
};

constexpr Scalar kFrustumNearPlane = 0.1;  // m

// Pinhole projection of an ego-frame point. Empty when the point falls behind
// the near plane or outside the image bounds.
std::optional<PixelPoint> project_to_camera(const Vec3& p_ego, const CameraModel& cam);

// Projection of a camera-frame point, same frustum policy.
std::optional<PixelPoint> project_camera_frame(const Vec3& p_cam, const CameraModel& cam);

// Inverse pinhole: pixel plus depth back to the camera frame.
Vec3 unproject_pixel(const PixelPoint& px, const CameraModel& cam);

// Bilinear interpolation at continuous grid coordinates (u = column, v = row),
// cell centers at integer coordinates, coordinates clamped to the grid interior.
// Throws std::invalid_argument on an empty grid.
VecX bilinear_sample(const FeatureGrid& grid, Scalar u, Scalar v);

// Interpolation stencil used by bilinear_sample; exposed for differentiable
// gather/scatter in the fusion path.
struct BilinearStencil {
  int cell[4];      // row-major cell indices: (r0,c0) (r0,c1) (r1,c0) (r1,c1)
  Scalar weight[4];
  // Derivatives of the 4 weights w.r.t. the (possibly clamped) u and v.
  Scalar dwdu[4];
  Scalar dwdv[4];
  bool clamped_u = false, clamped_v = false;
};
BilinearStencil bilinear_stencil(int height, int width, Scalar u, Scalar v);

// True iff the oriented rectangles intersect with positive penetration on
// every separating-axis candidate; touching boxes do not overlap.
bool boxes_overlap(const OrientedBox2D& a, const OrientedBox2D& b);

// Symmetric mean of directed point-to-polyline distances.
// Throws std::invalid_argument when either input has fewer than 2 waypoints.
Scalar polyline_chamfer(const PointsXY& a, const PointsXY& b);

// True iff the open segment (p0, p1) passes through the box interior.
bool segment_intersects_box(const Vec2& p0, const Vec2& p1, const OrientedBox2D& box);

// IoU of two 3D boxes with aligned centers and yaws (size-only overlap).
Scalar aligned_iou_3d(const Vec3& size_a, const Vec3& size_b);

// Resamples a polyline to n points uniformly spaced in arc length,
// endpoints preserved. Throws on fewer than 2 input waypoints or n < 2.
PointsXY resample_polyline(const PointsXY& waypoints, int n);

// Total arc length of a polyline.
Scalar polyline_length(const PointsXY& waypoints);

}  // namespace rcf

#include "rcf/camera_sim.hpp"

#include <algorithm>
#include <cmath>

#include "rcf/geometry.hpp"
#include "rcf/rng.hpp"

namespace rcf {

std::vector<CameraModel> make_camera_rig(const CameraRigConfig& rig) {
  return {
      make_camera(Vec2(1.5, 0.0), 0.0, rig.height, rig.focal, rig.image_width, rig.image_height),
      make_camera(Vec2(-1.5, 0.0), M_PI, rig.height, rig.focal, rig.image_width,
                  rig.image_height),
  };
}

VecX class_embedding(int kind, int class_id, int channels) {
  Rng rng(derive_seed(0x9e3779b97f4a7c15ull, static_cast<std::uint64_t>(kind),
                      static_cast<std::uint64_t>(class_id)));
  VecX e(channels);
  for (int c = 0; c < channels; ++c) e(c) = rng.normal();
  return e / std::max(1e-12, e.norm());
}

namespace {

// 3D corners of an anchor box (w, h, l), z centered at anchor z.
std::array<Vec3, 8> box_corners_3d(const Vec11& a) {
  const Scalar hw = 0.5 * a[anchor::kW], hh = 0.5 * a[anchor::kH], hl = 0.5 * a[anchor::kL];
  const Scalar yaw = std::atan2(a[anchor::kSinYaw], a[anchor::kCosYaw]);
  const Scalar c = std::cos(yaw), s = std::sin(yaw);
  std::array<Vec3, 8> out;
  int i = 0;
  for (Scalar dx : {hl, -hl}) {
    for (Scalar dy : {hw, -hw}) {
      for (Scalar dz : {hh, -hh}) {
        out[i++] = Vec3(a[anchor::kX] + c * dx - s * dy, a[anchor::kY] + s * dx + c * dy,
                        a[anchor::kZ] + dz);
      }
    }
  }
  return out;
}

Scalar cross2(const Vec2& o, const Vec2& a, const Vec2& b) {
  return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

// Andrew monotone chain; returns the hull counter-clockwise.
std::vector<Vec2> convex_hull(std::vector<Vec2> pts) {
  std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [](const Vec2& a, const Vec2& b) { return a == b; }),
            pts.end());
  const size_t n = pts.size();
  if (n < 3) return pts;
  std::vector<Vec2> hull(2 * n);
  size_t k = 0;
  for (size_t i = 0; i < n; ++i) {
    while (k >= 2 && cross2(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  const size_t lower = k + 1;
  for (size_t i = n - 1; i-- > 0;) {
    while (k >= lower && cross2(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

bool inside_hull(const std::vector<Vec2>& hull, const Vec2& p) {
  if (hull.size() < 3) return false;
  for (size_t i = 0; i < hull.size(); ++i) {
    if (cross2(hull[i], hull[(i + 1) % hull.size()], p) < 0) return false;
  }
  return true;
}

Vec2 cell_center_pixel(int row, int col, int grid_h, int grid_w, const CameraModel& cam) {
  return Vec2((col + 0.5) * cam.image_width / grid_w, (row + 0.5) * cam.image_height / grid_h);
}

}  // namespace

std::vector<int> agent_covered_cells(const GtAgent& agent, const CameraModel& cam, int grid_height,
                                     int grid_width) {
  std::vector<Vec2> projected;
  for (const Vec3& corner : box_corners_3d(agent.anchor)) {
    const Vec3 p_cam = cam.to_camera(corner);
    if (p_cam.z() <= kFrustumNearPlane) continue;
    projected.emplace_back(cam.cx + cam.fx * p_cam.x() / p_cam.z(),
                           cam.cy + cam.fy * p_cam.y() / p_cam.z());
  }
  if (projected.size() < 3) return {};
  const std::vector<Vec2> hull = convex_hull(std::move(projected));
  std::vector<int> cells;
  for (int r = 0; r < grid_height; ++r) {
    for (int c = 0; c < grid_width; ++c) {
      if (inside_hull(hull, cell_center_pixel(r, c, grid_height, grid_width, cam))) {
        cells.push_back(r * grid_width + c);
      }
    }
  }
  return cells;
}

std::vector<FeatureGrid> render_camera_features(const std::vector<GtAgent>& agents,
                                                const std::vector<GtMapElement>& map,
                                                const std::vector<CameraModel>& cams,
                                                int grid_height, int grid_width, int channels,
                                                std::uint64_t seed) {
  std::vector<FeatureGrid> grids;
  for (size_t ci = 0; ci < cams.size(); ++ci) {
    const CameraModel& cam = cams[ci];
    FeatureGrid grid = FeatureGrid::zero(grid_height, grid_width, channels);
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(ci)));
    for (Eigen::Index cell = 0; cell < grid.values.rows(); ++cell) {
      for (int ch = 0; ch < channels; ++ch) grid.values(cell, ch) = 0.05 * rng.normal();
    }

    // Painted map markings (not metal boundaries, which cameras cannot see).
    for (const auto& elem : map) {
      if (elem.class_id == kMapClassBoundary) continue;
      const VecX emb = 0.5 * class_embedding(1, elem.class_id, channels);
      for (Eigen::Index s = 0; s + 1 < elem.waypoints.rows(); ++s) {
        const Vec2 a = elem.waypoints.row(s).transpose(), b = elem.waypoints.row(s + 1).transpose();
        const int steps = std::max(1, static_cast<int>((b - a).norm() / 0.5));
        for (int i = 0; i <= steps; ++i) {
          const Vec2 p = a + (static_cast<Scalar>(i) / steps) * (b - a);
          const auto px = project_to_camera(Vec3(p.x(), p.y(), 0.0), cam);
          if (!px) continue;
          const int col = std::min(grid_width - 1,
                                   static_cast<int>(px->u * grid_width / cam.image_width));
          const int row = std::min(grid_height - 1,
                                   static_cast<int>(px->v * grid_height / cam.image_height));
          grid.cell(row, col) = emb.transpose();
        }
      }
    }

    // Agent silhouettes composited far to near.
    std::vector<size_t> order(agents.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
      const Scalar da = cam.to_camera(agents[a].anchor.segment<3>(anchor::kX)).norm();
      const Scalar db = cam.to_camera(agents[b].anchor.segment<3>(anchor::kX)).norm();
      return da > db;
    });
    for (size_t oi : order) {
      const GtAgent& agent = agents[oi];
      const Scalar depth = cam.to_camera(agent.anchor.segment<3>(anchor::kX)).norm();
      const VecX emb =
          class_embedding(0, agent.class_id, channels) / (1.0 + depth / 20.0);
      for (int cell : agent_covered_cells(agent, cam, grid_height, grid_width)) {
        grid.values.row(cell) = emb.transpose();
      }
    }
    grids.push_back(std::move(grid));
  }
  return grids;
}

}  // namespace rcf

#include <cmath>
#include <sstream>

#include "rcf/types.hpp"

namespace rcf {

namespace {

bool finite(const MatX& m) { return m.allFinite(); }

void check_anchor(const Vec11& a, const std::string& who, std::vector<std::string>& out) {
  if (!a.allFinite()) {
    out.push_back(who + ": anchor has non-finite entries");
    return;
  }
  if (a[anchor::kW] <= 0.0 || a[anchor::kH] <= 0.0 || a[anchor::kL] <= 0.0) {
    out.push_back(who + ": box dimensions w/h/l must be positive");
  }
  const Scalar n = a[anchor::kSinYaw] * a[anchor::kSinYaw] + a[anchor::kCosYaw] * a[anchor::kCosYaw];
  if (std::abs(n - 1.0) > 1e-6) {
    out.push_back(who + ": sin/cos yaw encoding not normalized");
  }
}

}  // namespace

std::vector<std::string> validate_frame(const Frame& frame, Scalar perception_range) {
  std::vector<std::string> out;
  for (size_t i = 0; i < frame.radar_points.size(); ++i) {
    const RadarPoint& p = frame.radar_points[i];
    std::ostringstream who;
    who << "radar_points[" << i << "]";
    if (!p.position.allFinite() || !std::isfinite(p.rcs) || !std::isfinite(p.doppler) ||
        !std::isfinite(p.sweep_offset)) {
      out.push_back(who.str() + ": non-finite attribute");
      continue;
    }
    if (p.sweep_offset < 0.0) {
      out.push_back(who.str() + ": sweep_offset must be >= 0");
    }
    if (p.position.head<2>().norm() > perception_range + 1e-9) {
      out.push_back(who.str() + ": position outside perception range");
    }
  }
  for (size_t i = 0; i < frame.gt_agents.size(); ++i) {
    std::ostringstream who;
    who << "gt_agents[" << i << "]";
    check_anchor(frame.gt_agents[i].anchor, who.str(), out);
    if (frame.gt_agents[i].future.rows() > 0 && frame.gt_agents[i].future.cols() != 3) {
      out.push_back(who.str() + ": future rows must be (x, y, yaw)");
    }
  }
  for (size_t i = 0; i < frame.gt_map.size(); ++i) {
    std::ostringstream who;
    who << "gt_map[" << i << "]";
    const PointsXY& w = frame.gt_map[i].waypoints;
    if (w.rows() < 2 || w.rows() > 20) {
      out.push_back(who.str() + ": waypoint count must be in [2, 20]");
      continue;
    }
    if (!finite(w)) {
      out.push_back(who.str() + ": non-finite waypoints");
      continue;
    }
    for (Eigen::Index k = 0; k + 1 < w.rows(); ++k) {
      if ((w.row(k + 1) - w.row(k)).norm() <= 1e-9) {
        out.push_back(who.str() + ": consecutive waypoints coincide");
        break;
      }
    }
  }
  if (frame.cameras.size() != frame.camera_features.size()) {
    out.push_back("camera_features count does not match cameras");
  }
  for (size_t i = 0; i < frame.cameras.size(); ++i) {
    const CameraModel& c = frame.cameras[i];
    std::ostringstream who;
    who << "cameras[" << i << "]";
    if (c.fx <= 0.0 || c.fy <= 0.0) out.push_back(who.str() + ": focal lengths must be positive");
    if (c.image_width <= 0 || c.image_height <= 0) {
      out.push_back(who.str() + ": image size must be positive");
    }
  }
  for (size_t i = 0; i < frame.camera_features.size(); ++i) {
    const FeatureGrid& g = frame.camera_features[i];
    if (g.values.rows() != g.cells()) {
      std::ostringstream who;
      who << "camera_features[" << i << "]";
      out.push_back(who.str() + ": grid value rows do not match height*width");
    }
  }
  if (frame.gt_ego_future.rows() > 0 && !finite(frame.gt_ego_future)) {
    out.push_back("gt_ego_future: non-finite points");
  }
  if (!std::isfinite(frame.timestamp)) out.push_back("timestamp: non-finite");
  if (!frame.ego_velocity.allFinite()) out.push_back("ego_velocity: non-finite");
  return out;
}

std::vector<std::string> validate_scene(const std::vector<Frame>& frames,
                                        Scalar perception_range) {
  std::vector<std::string> out;
  for (size_t i = 0; i < frames.size(); ++i) {
    for (const std::string& msg : validate_frame(frames[i], perception_range)) {
      std::ostringstream who;
      who << "frame[" << i << "] ";
      out.push_back(who.str() + msg);
    }
    if (i > 0 && frames[i].timestamp <= frames[i - 1].timestamp) {
      std::ostringstream who;
      who << "frame[" << i << "]: timestamps must be strictly increasing";
      out.push_back(who.str());
    }
  }
  return out;
}

}  // namespace rcf

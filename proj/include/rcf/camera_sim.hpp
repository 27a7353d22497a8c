#pragma once

#include <cstdint>
#include <vector>

#include "rcf/types.hpp"

namespace rcf {

// Synthetic camera rig: one forward and one rear camera.
struct CameraRigConfig {
  int image_width = 320, image_height = 180;
  Scalar focal = 150.0;  // px
  Scalar height = 1.6;   // m above ground
  int grid_height = 12, grid_width = 20;
  int channels = 32;
};

std::vector<CameraModel> make_camera_rig(const CameraRigConfig& rig);

// Fixed (non-learned) embedding direction for a rendered class; unit norm,
// deterministic in (kind, class_id). kind 0 = agent, 1 = map paint.
VecX class_embedding(int kind, int class_id, int channels);

// Low-resolution feature grids standing in for an image backbone: seeded
// noise everywhere, painted map markings (divider and crossing classes)
// added, agent silhouettes composited far to near on top. Agent cells carry
// the class embedding scaled by proximity, so detection and mapping are
// learnable from cameras alone while velocity is not.
std::vector<FeatureGrid> render_camera_features(const std::vector<GtAgent>& agents,
                                                const std::vector<GtMapElement>& map,
                                                const std::vector<CameraModel>& cams,
                                                int grid_height, int grid_width, int channels,
                                                std::uint64_t seed);

// Grid cells whose center lies inside the convex hull of the projected 3D
// box corners; empty when fewer than 3 corners project in front of the
// camera. Exposed for the rasterization oracle.
std::vector<int> agent_covered_cells(const GtAgent& agent, const CameraModel& cam,
                                     int grid_height, int grid_width);

}  // namespace rcf

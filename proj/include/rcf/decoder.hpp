#pragma once

#include <utility>
#include <vector>

#include "rcf/encoder.hpp"
#include "rcf/geometry.hpp"
#include "rcf/params.hpp"
#include "rcf/tape.hpp"
#include "rcf/types.hpp"

namespace rcf {

// One valid (instance, camera, keypoint) projection used by the deformable
// perspective aggregation. Derivative entries map grid-coordinate motion
// back to the learnable keypoint offset.
struct DeformSample {
  int instance = 0;
  int kp = 0;
  int cam = 0;
  BilinearStencil stencil;
  Vec3 dgu_doffset = Vec3::Zero();
  Vec3 dgv_doffset = Vec3::Zero();
};

// Bilinearly samples each valid slot from its camera grid and blends the
// slots per instance with softmax weights over valid slots only. Slot s of
// instance i uses column s of weight_logits (S = num_cams * num_keypoints).
// Instances with no valid slot produce a zero row. Gradients flow into the
// grids, the logits, and the keypoint offsets.
Var deformable_aggregate(const std::vector<Var>& grids, Var weight_logits, Var offsets,
                         const std::vector<DeformSample>& samples, int num_instances,
                         int num_cams);

// Builds the valid projection set for box-frame keypoints around each
// anchor. `keypoints_base` is K x 3 in the box frame; offsets (values) are
// added in the box frame before projection.
std::vector<DeformSample> build_deform_samples(const MatX& anchors, const MatX& keypoints_base,
                                               const MatX& offsets,
                                               const std::vector<CameraModel>& cams,
                                               const std::vector<FeatureGrid>& grid_shapes);

// Same for map queries: keypoints at `kp_count` arc-length-resampled
// waypoints of each polyline (flattened rows of 2*W coordinates), offsets
// added in the ego frame.
std::vector<DeformSample> build_map_deform_samples(const MatX& waypoints_flat, int kp_count,
                                                   const MatX& offsets,
                                                   const std::vector<CameraModel>& cams,
                                                   const std::vector<FeatureGrid>& grid_shapes);

// Box-frame base keypoints: center plus the six face centers.
MatX box_keypoints_base();
constexpr int kBoxKeypoints = 7;
constexpr int kMapKeypoints = 4;

// Differentiable outputs of one decoder layer (deep supervision reads the
// anchors/logits of every layer).
struct LayerOutputT {
  Var agent_features;  // N_a x C
  Var agent_anchors;   // N_a x 11, yaw encoding unnormalized
  Var agent_logits;    // N_a x num_agent_classes, pre-sigmoid
  Var map_features;    // N_m x C
  Var map_waypoints;   // N_m x (2 * map_waypoints)
  Var map_logits;      // N_m x num_map_classes
};

// Registers one layer's tensors under "dec<layer>.".
void init_decoder_params(ParamStore& store, const FusionConfig& cfg, Rng& rng);

// One decoder block: radar aggregation for both query kinds, deformable
// perspective aggregation, joint self-attention, feed-forward, and the
// refinement/classification heads. Anchors and waypoints come in detached
// (values), so cross-layer gradient flow is through features only.
// radar_features may be null (camera-only path).
LayerOutputT decoder_layer_t(Tape& tape, ParamBinding& params, int layer, Var agent_features,
                             const MatX& agent_anchors, Var map_features,
                             const MatX& map_waypoints_flat, const Var* radar_features,
                             const MatX& radar_pos, const std::vector<Var>& grids,
                             const std::vector<FeatureGrid>& grid_shapes,
                             const std::vector<CameraModel>& cams, const FusionConfig& cfg);

// Plain wrapper over materialized instances (class_scores via sigmoid, yaw
// renormalized). Polyline waypoint counts are preserved.
std::pair<std::vector<AgentInstance>, std::vector<MapPolyline>> decoder_layer(
    const std::vector<AgentInstance>& agents, const std::vector<MapPolyline>& maps,
    const std::vector<RadarFeature>& radar, const std::vector<FeatureGrid>& grids,
    const std::vector<CameraModel>& cams, const ParamStore& store, int layer,
    const FusionConfig& cfg);

// Normalizes the sin/cos yaw columns of an anchor matrix in place.
void normalize_yaw(MatX& anchors);

}  // namespace rcf
